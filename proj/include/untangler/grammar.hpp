#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "untangler/graph.hpp"

namespace untangler::grammar {

enum class TokenType { Identifier, Number, String, Punct, Preprocessor };

struct Token {
    TokenType type;
    std::string text;
    int line = 1;      // 1-based line of the first character
    int end_line = 1;  // line of the last character (multi-line strings, continued directives)
};

struct Lexed {
    std::vector<Token> tokens;
    std::vector<std::pair<int, int>> comments;  // [first, last] line spans
};

// C-family lexer: identifiers, numbers, string/char literals (including raw,
// verbatim and text-block forms), preprocessor directives, punctuation.
Lexed tokenize(std::string_view source);

// One statement-level syntax node as produced by a grammar frontend.
struct ParsedStatement {
    LineRange span;
    std::vector<int> close_lines;  // lines owned beyond the span (closing braces)
    std::optional<int> block_end;  // line of the closing brace, owned or not
    StatementKind kind = StatementKind::Other;
    int parent = -1;
};

// Names a statement defines and reads.
struct DefUse {
    std::vector<std::string> defs;      // defined in the enclosing scope
    std::vector<std::string> uses;      // values read
    std::vector<std::string> scoped;    // defined for the statement's own block (params, loop vars)
    std::vector<std::string> hoisted;   // callable names visible throughout the enclosing block
    bool declares = false;              // defs introduce new bindings rather than overwrite
    bool continues_chain = false;       // `else` / `else if` following a condition
};

StatementKind classify(const std::vector<Token>& tokens, bool opens_block);

DefUse analyze_statement(std::string_view text, StatementKind kind);

// Statement tree of a brace-delimited source. Throws ParseFailure on
// unbalanced braces; `file` is only used in diagnostics.
std::vector<ParsedStatement> parse_c_family(std::string_view source, const std::string& file);

// Degraded grammar: every non-blank line is one top-level statement.
std::vector<ParsedStatement> parse_lines(std::string_view source);

// Canonical grammar id for an alias ("c", "cpp", "java", "csharp" ->
// "c-family"); throws UnsupportedGrammar for unknown ids. "auto" resolves by
// file extension.
std::string resolve_grammar(const std::string& grammar_id, const std::string& file_path);

}  // namespace untangler::grammar
