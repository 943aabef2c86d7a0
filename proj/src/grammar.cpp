#include "untangler/grammar.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "untangler/errors.hpp"

namespace untangler::grammar {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

constexpr std::array<std::string_view, 34> kPuncts = {
    ">>>=", "<<=", ">>=", ">>>", "...", "->*", "?\?=", "::", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&",   "||",  "+=",  "-=",  "*=",  "/=",  "%=",  "&=", "|=", "^=", "??", "?.", "=>", ".*", "<=>", "===", "!=="};

const std::unordered_set<std::string_view>& keywords() {
    static const std::unordered_set<std::string_view> k = {
        "if", "else", "for", "foreach", "while", "do", "switch", "case", "default", "break", "continue", "return",
        "goto", "try", "catch", "finally", "throw", "throws", "new", "delete", "this", "super", "class", "struct",
        "union", "enum", "namespace", "interface", "typedef", "using", "public", "private", "protected", "internal",
        "static", "const", "constexpr", "consteval", "constinit", "volatile", "extern", "inline", "virtual",
        "override", "final", "abstract", "sealed", "readonly", "void", "int", "char", "short", "long", "float",
        "double", "bool", "boolean", "byte", "sbyte", "signed", "unsigned", "auto", "var", "let", "sizeof", "typeof",
        "instanceof", "true", "false", "null", "nullptr", "NULL", "template", "typename", "operator", "friend",
        "explicit", "mutable", "register", "noexcept", "decltype", "static_cast", "dynamic_cast", "reinterpret_cast",
        "const_cast", "is", "as", "base", "in", "out", "ref", "params", "lock", "fixed", "unsafe", "checked",
        "unchecked", "synchronized", "transient", "native", "strictfp", "import", "package", "yield", "await",
        "async", "function", "record", "implements", "extends", "co_return", "co_await", "co_yield", "wchar_t",
        "char8_t", "char16_t", "char32_t", "size_t", "uint", "ulong", "ushort", "decimal", "object", "string",
        "alignas", "alignof", "static_assert", "thread_local", "export", "module", "of", "undefined", "get", "set",
        "value"};
    return k;
}

bool is_keyword(std::string_view s) { return keywords().count(s) != 0; }

// Keywords that start a statement and rule out a declaration reading.
bool is_statement_keyword(std::string_view s) {
    static const std::unordered_set<std::string_view> k = {
        "return", "delete", "throw", "new", "else", "case", "goto", "co_await", "await", "yield", "co_return",
        "co_yield", "break", "continue", "default", "if", "for", "while", "do", "switch", "foreach", "try",
        "catch", "finally", "lock", "using", "fixed", "unsafe", "checked", "unchecked", "synchronized", "import",
        "package"};
    return k.count(s) != 0;
}

bool is_type_block_keyword(std::string_view s) {
    return s == "class" || s == "struct" || s == "namespace" || s == "enum" || s == "interface" || s == "union" ||
           s == "record" || s == "typedef";
}

bool is_assignment_op(std::string_view s) {
    return s == "=" || s == "+=" || s == "-=" || s == "*=" || s == "/=" || s == "%=" || s == "&=" || s == "|=" ||
           s == "^=" || s == "<<=" || s == ">>=" || s == ">>>=" || s == "?\?=";
}

bool is_punct(const Token& t, std::string_view s) { return t.type == TokenType::Punct && t.text == s; }
bool is_ident(const Token& t, std::string_view s) { return t.type == TokenType::Identifier && t.text == s; }

using Tokens = std::vector<Token>;
using TokenSpan = std::pair<std::size_t, std::size_t>;  // [begin, end)

std::size_t skip_string(std::string_view s, std::size_t i, char quote, int& line) {
    // i at the opening quote
    ++i;
    while (i < s.size()) {
        char c = s[i];
        if (c == '\\' && i + 1 < s.size()) {
            if (s[i + 1] == '\n') ++line;
            i += 2;
            continue;
        }
        if (c == '\n') return i;  // unterminated: stop at end of line
        ++i;
        if (c == quote) return i;
    }
    return i;
}

}  // namespace

Lexed tokenize(std::string_view s) {
    Lexed out;
    std::size_t i = 0;
    int line = 1;
    bool line_start = true;
    auto count_newlines = [&](std::size_t from, std::size_t to) {
        for (std::size_t k = from; k < to && k < s.size(); ++k)
            if (s[k] == '\n') ++line;
    };
    auto push = [&](TokenType type, std::size_t from, std::size_t to, int first_line) {
        out.tokens.push_back(Token{type, std::string(s.substr(from, to - from)), first_line, line});
    };

    while (i < s.size()) {
        char c = s[i];
        if (c == '\n') {
            ++line;
            line_start = true;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '#' && line_start) {
            std::size_t j = i;
            int first = line;
            while (j < s.size() && s[j] != '\n') {
                if (s[j] == '\\' && j + 1 < s.size() && s[j + 1] == '\n') {
                    ++line;
                    j += 2;
                    continue;
                }
                if (s[j] == '\\' && j + 2 < s.size() && s[j + 1] == '\r' && s[j + 2] == '\n') {
                    ++line;
                    j += 3;
                    continue;
                }
                ++j;
            }
            push(TokenType::Preprocessor, i, j, first);
            i = j;
            continue;
        }
        line_start = false;

        if (c == '/' && i + 1 < s.size() && s[i + 1] == '/') {
            std::size_t j = s.find('\n', i);
            if (j == std::string_view::npos) j = s.size();
            out.comments.emplace_back(line, line);
            i = j;
            continue;
        }
        if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
            std::size_t j = s.find("*/", i + 2);
            j = j == std::string_view::npos ? s.size() : j + 2;
            int first = line;
            count_newlines(i, j);
            out.comments.emplace_back(first, line);
            i = j;
            continue;
        }
        if (c == '"' && s.substr(i, 3) == "\"\"\"") {  // text block
            std::size_t j = s.find("\"\"\"", i + 3);
            j = j == std::string_view::npos ? s.size() : j + 3;
            int first = line;
            count_newlines(i, j);
            push(TokenType::String, i, j, first);
            i = j;
            continue;
        }
        if ((c == '@' || c == '$') && i + 1 < s.size() &&
            (s[i + 1] == '"' || ((s[i + 1] == '@' || s[i + 1] == '$') && i + 2 < s.size() && s[i + 2] == '"'))) {
            bool verbatim = c == '@' || s[i + 1] == '@';
            std::size_t q = s[i + 1] == '"' ? i + 1 : i + 2;
            int first = line;
            std::size_t j;
            if (verbatim) {
                j = q + 1;
                while (j < s.size()) {
                    if (s[j] == '"') {
                        if (j + 1 < s.size() && s[j + 1] == '"') {
                            j += 2;
                            continue;
                        }
                        ++j;
                        break;
                    }
                    if (s[j] == '\n') ++line;
                    ++j;
                }
            } else {
                j = skip_string(s, q, '"', line);
            }
            push(TokenType::String, i, j, first);
            i = j;
            continue;
        }
        if (c == '"' || c == '\'') {
            int first = line;
            std::size_t j = skip_string(s, i, c, line);
            push(TokenType::String, i, j, first);
            i = j;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            std::size_t j = i + 1;
            while (j < s.size()) {
                char d = s[j];
                if (is_ident_char(d) || d == '.' || (d == '\'' && j + 1 < s.size() && std::isxdigit(static_cast<unsigned char>(s[j + 1])))) {
                    ++j;
                } else if ((d == '+' || d == '-') && (s[j - 1] == 'e' || s[j - 1] == 'E' || s[j - 1] == 'p' || s[j - 1] == 'P')) {
                    ++j;
                } else {
                    break;
                }
            }
            push(TokenType::Number, i, j, line);
            i = j;
            continue;
        }
        if (is_ident_start(c)) {
            std::size_t j = i + 1;
            while (j < s.size() && is_ident_char(s[j])) ++j;
            std::string_view word = s.substr(i, j - i);
            if (j < s.size() && s[j] == '"' && (word == "R" || word == "u8R" || word == "uR" || word == "UR" || word == "LR")) {
                std::size_t paren = s.find('(', j + 1);
                if (paren != std::string_view::npos) {
                    std::string terminator = ")" + std::string(s.substr(j + 1, paren - j - 1)) + "\"";
                    std::size_t end = s.find(terminator, paren + 1);
                    end = end == std::string_view::npos ? s.size() : end + terminator.size();
                    int first = line;
                    count_newlines(i, end);
                    push(TokenType::String, i, end, first);
                    i = end;
                    continue;
                }
            }
            if (j < s.size() && (s[j] == '"' || s[j] == '\'') && (word == "L" || word == "u" || word == "U" || word == "u8")) {
                int first = line;
                std::size_t end = skip_string(s, j, s[j], line);
                push(TokenType::String, i, end, first);
                i = end;
                continue;
            }
            push(TokenType::Identifier, i, j, line);
            i = j;
            continue;
        }
        std::size_t len = 1;
        for (auto p : kPuncts) {
            if (p.size() > len && s.substr(i, p.size()) == p) len = p.size();
        }
        push(TokenType::Punct, i, i + len, line);
        i += len;
    }
    return out;
}

namespace {

// Index of the token closing the bracket opened at `open`, or tokens.size().
std::size_t match_bracket(const Tokens& t, std::size_t open) {
    int depth = 0;
    for (std::size_t i = open; i < t.size(); ++i) {
        if (t[i].type != TokenType::Punct) continue;
        const auto& x = t[i].text;
        if (x == "(" || x == "[" || x == "{") ++depth;
        else if (x == ")" || x == "]" || x == "}") {
            if (--depth == 0) return i;
        }
    }
    return t.size();
}

// Skips leading annotations (@Foo, @Foo(...)) and attribute groups ([...]).
std::size_t skip_attributes(const Tokens& t, std::size_t b, std::size_t e) {
    while (b < e) {
        if (is_punct(t[b], "@") && b + 1 < e && t[b + 1].type == TokenType::Identifier) {
            b += 2;
            while (b + 1 < e && is_punct(t[b], ".") && t[b + 1].type == TokenType::Identifier) b += 2;
            if (b < e && is_punct(t[b], "(")) b = std::min(e, match_bracket(t, b) + 1);
            continue;
        }
        if (is_punct(t[b], "[") && b + 1 < e && (t[b + 1].type == TokenType::Identifier || is_punct(t[b + 1], "["))) {
            std::size_t close = match_bracket(t, b);
            if (close + 1 < e && t[close + 1].type == TokenType::Identifier) {
                b = close + 1;
                continue;
            }
        }
        break;
    }
    return b;
}

// Index of the first depth-0 assignment operator in [b, e), or e.
std::size_t find_assignment(const Tokens& t, std::size_t b, std::size_t e) {
    int depth = 0;
    for (std::size_t i = b; i < e; ++i) {
        if (t[i].type != TokenType::Punct) continue;
        const auto& x = t[i].text;
        if (x == "(" || x == "[" || x == "{") ++depth;
        else if (x == ")" || x == "]" || x == "}") depth = std::max(0, depth - 1);
        else if (depth == 0 && is_assignment_op(x)) return i;
    }
    return e;
}

bool has_depth0(const Tokens& t, std::size_t b, std::size_t e, std::string_view p) {
    int depth = 0;
    for (std::size_t i = b; i < e; ++i) {
        if (t[i].type != TokenType::Punct) continue;
        const auto& x = t[i].text;
        if (depth == 0 && x == p) return true;
        if (x == "(" || x == "[" || x == "{") ++depth;
        else if (x == ")" || x == "]" || x == "}") depth = std::max(0, depth - 1);
    }
    return false;
}

// Splits [b, e) at depth-0 commas; angle brackets after identifiers count as
// nesting until the first '=' of a part (template arguments in types).
std::vector<TokenSpan> split_commas(const Tokens& t, std::size_t b, std::size_t e) {
    std::vector<TokenSpan> parts;
    int depth = 0, angle = 0;
    bool seen_eq = false;
    std::size_t start = b;
    for (std::size_t i = b; i < e; ++i) {
        if (t[i].type != TokenType::Punct) continue;
        const auto& x = t[i].text;
        if (x == "(" || x == "[" || x == "{") ++depth;
        else if (x == ")" || x == "]" || x == "}") depth = std::max(0, depth - 1);
        else if (depth == 0 && !seen_eq && x == "<" && i > b && t[i - 1].type == TokenType::Identifier) ++angle;
        else if (depth == 0 && !seen_eq && angle > 0 && (x == ">" || x == ">>" || x == ">>>"))
            angle = std::max(0, angle - static_cast<int>(x.size()));
        else if (depth == 0 && x == "=") seen_eq = true;
        else if (depth == 0 && angle == 0 && x == ",") {
            parts.emplace_back(start, i);
            start = i + 1;
            seen_eq = false;
        }
    }
    if (start < e) parts.emplace_back(start, e);
    return parts;
}

// True when [b, e) reads as `Type name` (optionally `name[dims]`).
bool looks_like_declarator(const Tokens& t, std::size_t b, std::size_t e) {
    b = skip_attributes(t, b, e);
    if (e <= b + 1) return false;
    if (t[b].type != TokenType::Identifier && !is_punct(t[b], "::")) return false;
    if (is_statement_keyword(t[b].text)) return false;
    std::size_t last = e - 1;
    while (last > b && is_punct(t[last], "]")) {
        // walk back over [..]
        int depth = 0;
        std::size_t k = last + 1;
        while (k-- > b) {
            if (is_punct(t[k], "]")) ++depth;
            else if (is_punct(t[k], "[") && --depth == 0) break;
        }
        if (k == 0 && !is_punct(t[0], "[")) return false;
        if (k <= b) return false;
        last = k - 1;
    }
    if (t[last].type != TokenType::Identifier || is_keyword(t[last].text)) return false;
    if (last == b) return false;
    static const std::unordered_set<std::string_view> bad = {".", "->", "(", ")", "+", "-", "/", "%", "!", "=",
                                                             "|", "^", "~", "++", "--", "?.", "==", "!=", "&&",
                                                             "||", "<<", "<=", ">="};
    for (std::size_t i = b; i < last; ++i) {
        if (t[i].type == TokenType::Punct && bad.count(t[i].text)) return false;
        if (t[i].type == TokenType::String) return false;
    }
    return true;
}

bool is_member_position(const Tokens& t, std::size_t i, std::size_t b) {
    if (i > b && t[i - 1].type == TokenType::Punct) {
        const auto& p = t[i - 1].text;
        if (p == "." || p == "->" || p == "?." || p == "::" || p == ".*" || p == "->*") return true;
    }
    return false;
}

void collect_uses(const Tokens& t, std::size_t b, std::size_t e, std::vector<std::string>& uses) {
    for (std::size_t i = b; i < e; ++i) {
        if (t[i].type != TokenType::Identifier || is_keyword(t[i].text)) continue;
        if (is_member_position(t, i, b)) continue;
        if (i + 1 < e && is_punct(t[i + 1], "::")) continue;
        uses.push_back(t[i].text);
    }
}

// Base variable of an lvalue expression: `a`, `a.b`, `a[i]`, `*p`, `this->x`.
std::optional<std::size_t> lvalue_base(const Tokens& t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
        if (t[i].type != TokenType::Identifier) continue;
        if (t[i].text == "this" && i + 2 < e && (is_punct(t[i + 1], ".") || is_punct(t[i + 1], "->")))
            return i + 2;
        if (is_keyword(t[i].text)) continue;
        if (is_member_position(t, i, b)) continue;
        return i;
    }
    return std::nullopt;
}

std::string declarator_name(const Tokens& t, std::size_t b, std::size_t e, std::vector<std::string>& uses) {
    // Cut at direct-init parens/braces and array dims, collecting their uses.
    std::size_t cut = e;
    int depth = 0;
    for (std::size_t i = b; i < e; ++i) {
        if (t[i].type != TokenType::Punct) continue;
        const auto& x = t[i].text;
        if (depth == 0 && (x == "(" || x == "[" || x == "{") && i > b && t[i - 1].type == TokenType::Identifier &&
            !is_keyword(t[i - 1].text)) {
            cut = i;
            break;
        }
        if (x == "(" || x == "[" || x == "{") ++depth;
        else if (x == ")" || x == "]" || x == "}") depth = std::max(0, depth - 1);
    }
    if (cut < e) collect_uses(t, cut, e, uses);
    for (std::size_t i = cut; i-- > b;) {
        if (t[i].type == TokenType::Identifier && !is_keyword(t[i].text)) return t[i].text;
        if (t[i].type == TokenType::Punct && t[i].text != "*" && t[i].text != "&" && t[i].text != "&&" &&
            t[i].text != "]" && t[i].text != "[" && t[i].text != "?")
            return {};
    }
    return {};
}

void analyze_declaration(const Tokens& t, std::size_t b, std::size_t e, DefUse& du) {
    du.declares = true;
    for (std::size_t i = b; i < e; ++i) {
        if (t[i].type == TokenType::Identifier && is_type_block_keyword(t[i].text) && t[i].text != "typedef") {
            for (std::size_t k = i + 1; k < e; ++k) {
                if (t[k].type == TokenType::Identifier && !is_keyword(t[k].text)) {
                    du.hoisted.push_back(t[k].text);
                    return;
                }
            }
            return;
        }
    }
    auto parts = split_commas(t, b, e);
    for (auto [pb, pe] : parts) {
        std::size_t eq = find_assignment(t, pb, pe);
        std::string name = declarator_name(t, pb, eq, du.uses);
        if (!name.empty()) du.defs.push_back(name);
        if (eq < pe) collect_uses(t, eq + 1, pe, du.uses);
    }
}

void analyze_assignment(const Tokens& t, std::size_t b, std::size_t e, DefUse& du) {
    std::size_t op = find_assignment(t, b, e);
    if (op == e) {
        // x++ / --x / a[i]++
        auto base = lvalue_base(t, b, e);
        collect_uses(t, b, e, du.uses);
        if (base) du.defs.push_back(t[*base].text);
        return;
    }
    auto base = lvalue_base(t, b, op);
    std::size_t idents = 0;
    for (std::size_t i = b; i < op; ++i)
        if (t[i].type == TokenType::Identifier && !is_keyword(t[i].text)) ++idents;
    bool simple = base && idents == 1 && (op - b == 1 || (op - b == 3 && is_ident(t[b], "this")));
    if (base) du.defs.push_back(t[*base].text);
    if (!simple || t[op].text != "=") collect_uses(t, b, op, du.uses);
    if (base && !simple) du.uses.push_back(t[*base].text);
    collect_uses(t, op + 1, e, du.uses);
}

void analyze_signature(const Tokens& t, std::size_t b, std::size_t e, DefUse& du) {
    du.declares = true;
    std::size_t open = e;
    int depth = 0;
    for (std::size_t i = b; i < e; ++i) {
        if (is_punct(t[i], "(") && depth == 0) {
            open = i;
            break;
        }
        if (is_punct(t[i], "<")) ++depth;
        if (is_punct(t[i], ">")) depth = std::max(0, depth - 1);
    }
    if (open == e) return;
    if (open > b && t[open - 1].type == TokenType::Identifier && !is_keyword(t[open - 1].text))
        du.hoisted.push_back(t[open - 1].text);
    std::size_t close = std::min(match_bracket(t, open), e);
    for (auto [pb, pe] : split_commas(t, open + 1, close)) {
        std::size_t eq = find_assignment(t, pb, pe);
        pb = skip_attributes(t, pb, eq);
        if (eq == pb) continue;
        if (eq - pb == 1) {
            if (t[pb].type == TokenType::Identifier && !is_keyword(t[pb].text)) du.scoped.push_back(t[pb].text);
            continue;
        }
        for (std::size_t i = eq; i-- > pb;) {
            if (t[i].type == TokenType::Identifier && !is_keyword(t[i].text)) {
                du.scoped.push_back(t[i].text);
                break;
            }
            if (is_punct(t[i], ")") || is_punct(t[i], ">")) break;
        }
    }
}

void analyze_control(const Tokens& t, std::size_t b, std::size_t e, DefUse& du) {
    if (b < e && is_ident(t[b], "else")) {
        du.continues_chain = true;
        ++b;
    }
    if (b >= e) return;
    bool loop = is_ident(t[b], "for") || is_ident(t[b], "foreach");
    std::size_t open = b + 1;
    if (!loop || open >= e || !is_punct(t[open], "(")) {
        collect_uses(t, b, e, du.uses);
        return;
    }
    std::size_t close = std::min(match_bracket(t, open), e);
    std::size_t semi = close;
    int depth = 0;
    for (std::size_t i = open + 1; i < close; ++i) {
        if (t[i].type != TokenType::Punct) continue;
        const auto& x = t[i].text;
        if (x == "(" || x == "[" || x == "{") ++depth;
        else if (x == ")" || x == "]" || x == "}") depth = std::max(0, depth - 1);
        else if (depth == 0 && x == ";") {
            semi = i;
            break;
        }
    }
    if (semi < close) {
        Tokens init(t.begin() + static_cast<std::ptrdiff_t>(open + 1), t.begin() + static_cast<std::ptrdiff_t>(semi));
        StatementKind k = classify(init, false);
        DefUse sub;
        if (k == StatementKind::Declaration) analyze_declaration(init, 0, init.size(), sub);
        else if (k == StatementKind::Assignment) analyze_assignment(init, 0, init.size(), sub);
        else collect_uses(init, 0, init.size(), sub.uses);
        auto& target = sub.declares ? du.scoped : du.defs;
        target.insert(target.end(), sub.defs.begin(), sub.defs.end());
        du.uses.insert(du.uses.end(), sub.uses.begin(), sub.uses.end());
        collect_uses(t, semi + 1, close, du.uses);
    } else {
        // range-for / foreach: `T x : xs`, `var x in xs`, `const x of xs`
        std::size_t sep = close;
        for (std::size_t i = open + 1; i < close; ++i) {
            if (is_punct(t[i], ":") || is_ident(t[i], "in") || is_ident(t[i], "of")) {
                sep = i;
                break;
            }
        }
        for (std::size_t i = sep; i-- > open + 1;) {
            if (t[i].type == TokenType::Identifier && !is_keyword(t[i].text)) {
                du.scoped.push_back(t[i].text);
                break;
            }
        }
        if (sep < close) collect_uses(t, sep + 1, close, du.uses);
    }
    collect_uses(t, close + 1, e, du.uses);
}

void analyze_segment(const Tokens& t, std::size_t b, std::size_t e, StatementKind kind, DefUse& du) {
    b = skip_attributes(t, b, e);
    if (b >= e) return;
    switch (kind) {
        case StatementKind::Signature: analyze_signature(t, b, e, du); break;
        case StatementKind::Declaration: analyze_declaration(t, b, e, du); break;
        case StatementKind::Assignment: analyze_assignment(t, b, e, du); break;
        case StatementKind::Condition:
        case StatementKind::LoopHeader: analyze_control(t, b, e, du); break;
        case StatementKind::Call:
        case StatementKind::Other: collect_uses(t, b, e, du.uses); break;
    }
}

void dedupe(std::vector<std::string>& v) {
    std::vector<std::string> out;
    for (auto& s : v)
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
    v = std::move(out);
}

}  // namespace

StatementKind classify(const std::vector<Token>& tokens, bool opens_block) {
    std::size_t e = tokens.size();
    while (e > 0 && (is_punct(tokens[e - 1], ";") || is_punct(tokens[e - 1], "{"))) --e;
    std::size_t b = skip_attributes(tokens, 0, e);
    if (b >= e) return StatementKind::Other;
    const Token& first = tokens[b];
    if (first.type == TokenType::Preprocessor) return StatementKind::Other;
    if (first.type == TokenType::Identifier) {
        const auto& w = first.text;
        if (w == "if" || w == "else" || w == "switch") return StatementKind::Condition;
        if (w == "for" || w == "foreach" || w == "while" || w == "do") return StatementKind::LoopHeader;
        static const std::unordered_set<std::string_view> other = {
            "case", "default", "try", "catch", "finally", "return", "throw", "break", "continue", "goto", "yield",
            "co_return", "co_yield", "lock", "fixed", "unsafe", "checked", "unchecked", "synchronized", "import",
            "package"};
        if (other.count(w)) return StatementKind::Other;
        if (w == "using" && b + 1 < e && is_punct(tokens[b + 1], "(")) return StatementKind::Other;
        if (b + 2 == e && is_punct(tokens[b + 1], ":")) return StatementKind::Other;  // access label
    }
    // Type-introducing keyword before any '(' or '='.
    for (std::size_t i = b; i < e; ++i) {
        if (is_punct(tokens[i], "(") || is_punct(tokens[i], "=")) break;
        if (tokens[i].type == TokenType::Identifier && is_type_block_keyword(tokens[i].text))
            return StatementKind::Declaration;
    }
    if (opens_block) {
        if (e - b == 1 && is_ident(first, "static")) return StatementKind::Other;
        return has_depth0(tokens, b, e, "(") ? StatementKind::Signature : StatementKind::Declaration;
    }
    std::size_t op = find_assignment(tokens, b, e);
    if (op < e) return looks_like_declarator(tokens, b, op) ? StatementKind::Declaration : StatementKind::Assignment;
    if ((has_depth0(tokens, b, e, "++") || has_depth0(tokens, b, e, "--")) && !has_depth0(tokens, b, e, "("))
        return StatementKind::Assignment;
    auto parts = split_commas(tokens, b, e);
    if (!parts.empty() && looks_like_declarator(tokens, parts.front().first, parts.front().second))
        return StatementKind::Declaration;
    for (std::size_t i = b; i + 1 < e; ++i)
        if (tokens[i].type == TokenType::Identifier && is_punct(tokens[i + 1], "(")) return StatementKind::Call;
    return StatementKind::Other;
}

DefUse analyze_statement(std::string_view text, StatementKind kind) {
    DefUse du;
    Lexed lexed = tokenize(text);
    const Tokens& t = lexed.tokens;
    // Segments split at depth-0 ';', '{', '}'.
    std::vector<TokenSpan> segments;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i].type == TokenType::Preprocessor) {
            if (start < i) segments.emplace_back(start, i);
            start = i + 1;
            continue;
        }
        if (t[i].type != TokenType::Punct) continue;
        const auto& x = t[i].text;
        if (depth == 0 && (x == ";" || x == "{" || x == "}")) {
            if (start < i) segments.emplace_back(start, i);
            start = i + 1;
            continue;
        }
        if (x == "(" || x == "[" || x == "{") ++depth;
        else if (x == ")" || x == "]" || x == "}") depth = std::max(0, depth - 1);
    }
    if (start < t.size()) segments.emplace_back(start, t.size());

    bool first = true;
    for (auto [b, e] : segments) {
        if (first) {
            analyze_segment(t, b, e, kind, du);
            first = false;
            continue;
        }
        Tokens seg(t.begin() + static_cast<std::ptrdiff_t>(b), t.begin() + static_cast<std::ptrdiff_t>(e));
        DefUse sub;
        analyze_segment(seg, 0, seg.size(), classify(seg, false), sub);
        du.uses.insert(du.uses.end(), sub.uses.begin(), sub.uses.end());
        du.defs.insert(du.defs.end(), sub.defs.begin(), sub.defs.end());
        du.defs.insert(du.defs.end(), sub.scoped.begin(), sub.scoped.end());
    }
    dedupe(du.defs);
    dedupe(du.uses);
    dedupe(du.scoped);
    dedupe(du.hoisted);
    return du;
}

namespace {

class CFamilyParser {
public:
    CFamilyParser(const Tokens& tokens, const std::string& file) : t_(tokens), file_(file) {}

    std::vector<ParsedStatement> run() {
        parse_sequence(-1, true);
        return std::move(out_);
    }

private:
    [[noreturn]] void fail(int line, const std::string& what) const {
        throw ParseFailure(file_ + ":" + std::to_string(line) + ": " + what);
    }

    bool punct_at(std::size_t i, std::string_view p) const { return i < t_.size() && is_punct(t_[i], p); }
    bool ident_at(std::size_t i, std::string_view w) const { return i < t_.size() && is_ident(t_[i], w); }

    std::size_t match(std::size_t open) const {
        std::size_t close = match_bracket(t_, open);
        if (close >= t_.size()) fail(t_[open].line, "unbalanced '" + t_[open].text + "'");
        return close;
    }

    int& last_child(int parent) { return last_child_[parent]; }

    // Records tokens [a, b] as a statement under `parent`. Statements starting
    // on a line already covered by the parent header or the previous sibling
    // are folded into that node. Returns the node children should attach to.
    int emit(std::size_t a, std::size_t b, StatementKind kind, int parent) {
        int first = t_[a].line;
        int last = t_[a].end_line;
        for (std::size_t i = a; i <= b; ++i) last = std::max(last, t_[i].end_line);

        if (parent >= 0 && first <= out_[parent].span.last()) {
            extend(parent, last);
            return parent;
        }
        int& prev = last_child(parent);
        if (prev >= 0) {
            auto& p = out_[prev];
            if (!p.close_lines.empty() && p.close_lines.back() >= first) p.close_lines.pop_back();
            if (first <= p.span.last()) {
                extend(prev, last);
                if (kind != StatementKind::Other && p.kind == StatementKind::Other) p.kind = kind;
                return prev;
            }
        }
        ParsedStatement s;
        s.span = {first, last - first + 1};
        s.kind = kind;
        s.parent = parent;
        out_.push_back(s);
        int idx = static_cast<int>(out_.size()) - 1;
        prev = idx;
        max_line_ = std::max(max_line_, last);
        return idx;
    }

    void extend(int idx, int last) {
        auto& s = out_[idx];
        if (last > s.span.last()) s.span.count = last - s.span.first + 1;
        max_line_ = std::max(max_line_, last);
    }

    void parse_sequence(int parent, bool top) {
        while (p_ < t_.size()) {
            if (punct_at(p_, "}")) {
                if (top) fail(t_[p_].line, "unmatched '}'");
                return;
            }
            parse_statement(parent);
        }
    }

    // t_[p_] is '{' of a block owned by node `idx`.
    void open_block(int idx) {
        int open_line = t_[p_].line;
        ++p_;
        parse_sequence(idx, false);
        if (p_ >= t_.size()) fail(open_line, "block opened here is never closed");
        int close_line = t_[p_].line;
        out_[idx].block_end = close_line;
        if (close_line > max_line_) {
            out_[idx].close_lines.push_back(close_line);
            max_line_ = close_line;
        }
        ++p_;
        if (punct_at(p_, ";") && t_[p_].line == close_line) ++p_;
    }

    void parse_control(std::size_t a, std::size_t header_end, int parent) {
        Tokens header(t_.begin() + static_cast<std::ptrdiff_t>(a), t_.begin() + static_cast<std::ptrdiff_t>(header_end + 1));
        StatementKind kind = classify(header, true);
        std::size_t q = header_end + 1;
        if (punct_at(q, "{")) {
            int idx = emit(a, q, kind, parent);
            p_ = q;
            open_block(idx);
            return;
        }
        if (ident_at(a, "while") && punct_at(q, ";")) {
            emit(a, q, kind, parent);
            p_ = q + 1;
            return;
        }
        if (q >= t_.size() || punct_at(q, "}")) {
            emit(a, header_end, kind, parent);
            p_ = q;
            return;
        }
        int idx = emit(a, header_end, kind, parent);
        p_ = q;
        parse_statement(idx);
    }

    void parse_statement(int parent) {
        const Token& tok = t_[p_];
        if (tok.type == TokenType::Preprocessor) {
            emit(p_, p_, StatementKind::Other, parent);
            ++p_;
            return;
        }
        if (is_punct(tok, ";")) {
            ++p_;
            return;
        }
        if (is_punct(tok, "{")) {
            int idx = emit(p_, p_, StatementKind::Other, parent);
            open_block(idx);
            return;
        }
        if (tok.type == TokenType::Identifier) {
            const auto& w = tok.text;
            static const std::unordered_set<std::string_view> paren_headers = {
                "if", "while", "for", "foreach", "switch", "lock", "using", "fixed", "synchronized", "catch"};
            if (paren_headers.count(w) && punct_at(p_ + 1, "(")) {
                parse_control(p_, match(p_ + 1), parent);
                return;
            }
            if (w == "else") {
                if (ident_at(p_ + 1, "if") && punct_at(p_ + 2, "(")) {
                    parse_control(p_, match(p_ + 2), parent);
                } else {
                    parse_control(p_, p_, parent);
                }
                return;
            }
            if ((w == "do" || w == "try" || w == "finally" || w == "unsafe" || w == "checked" || w == "unchecked") &&
                (w == "do" || punct_at(p_ + 1, "{"))) {
                parse_control(p_, p_, parent);
                return;
            }
            bool label = (w == "case" || w == "default") ||
                         ((w == "public" || w == "private" || w == "protected") && punct_at(p_ + 1, ":"));
            if (label) {
                for (std::size_t i = p_ + 1; i < t_.size(); ++i) {
                    if (is_punct(t_[i], ":")) {
                        emit(p_, i, StatementKind::Other, parent);
                        p_ = i + 1;
                        return;
                    }
                    if (is_punct(t_[i], ";") || is_punct(t_[i], "{") || is_punct(t_[i], "}") ||
                        is_punct(t_[i], "->"))
                        break;
                }
            }
        }
        parse_generic(parent);
    }

    bool is_initializer(std::size_t a, std::size_t brace) const {
        if (brace == a) return false;
        std::size_t b = skip_attributes(t_, a, brace);
        if (b >= brace) return false;
        static const std::unordered_set<std::string_view> block_words = {
            "class", "struct", "namespace", "enum", "interface", "union", "record", "extern", "static",
            "else", "do", "try", "finally", "get", "set", "init", "add", "remove"};
        for (std::size_t i = b; i < brace; ++i) {
            if (is_punct(t_[i], "(") || is_punct(t_[i], "=")) break;
            if (t_[i].type == TokenType::Identifier && block_words.count(t_[i].text) && t_[i].text != "static")
                return false;
        }
        if (t_[b].type == TokenType::Identifier &&
            (t_[b].text == "return" || t_[b].text == "throw" || t_[b].text == "yield" || t_[b].text == "co_return"))
            return true;
        if (find_assignment(t_, b, brace) < brace || has_depth0(t_, b, brace, "=>")) return true;
        const Token& last = t_[brace - 1];
        if (last.type == TokenType::Punct) {
            static const std::unordered_set<std::string_view> lead = {",", "(", "[", "?", ":", "=", "return",
                                                                      "+", "-", "*", "/", "&&", "||", "<<"};
            if (lead.count(last.text)) return true;
        }
        if (is_ident(last, "new")) return true;
        // `T x{5};` on one line, no parameter list anywhere in the header.
        std::size_t close = match_bracket(t_, brace);
        if (close < t_.size() && t_[close].line == t_[brace].line && !has_depth0(t_, b, brace, "(") &&
            !ident_at(b, "static") && last.type == TokenType::Identifier)
            return true;
        return false;
    }

    void parse_generic(int parent) {
        std::size_t a = p_;
        int depth = 0;
        for (std::size_t i = p_; i < t_.size(); ++i) {
            const Token& tok = t_[i];
            if (tok.type != TokenType::Punct) continue;
            const auto& x = tok.text;
            if (depth > 0) {
                if (x == "(" || x == "[" || x == "{") ++depth;
                else if (x == ")" || x == "]" || x == "}") --depth;
                continue;
            }
            if (x == "(" || x == "[") {
                ++depth;
            } else if (x == ")" || x == "]") {
                // stray closer at depth 0: keep scanning
            } else if (x == ";") {
                Tokens stmt(t_.begin() + static_cast<std::ptrdiff_t>(a), t_.begin() + static_cast<std::ptrdiff_t>(i + 1));
                emit(a, i, classify(stmt, false), parent);
                p_ = i + 1;
                return;
            } else if (x == "}") {
                Tokens stmt(t_.begin() + static_cast<std::ptrdiff_t>(a), t_.begin() + static_cast<std::ptrdiff_t>(i));
                emit(a, i - 1, classify(stmt, false), parent);
                p_ = i;
                return;
            } else if (x == "{") {
                if (is_initializer(a, i)) {
                    i = match(i);
                    continue;
                }
                Tokens header(t_.begin() + static_cast<std::ptrdiff_t>(a), t_.begin() + static_cast<std::ptrdiff_t>(i));
                int idx = emit(a, i, classify(header, true), parent);
                p_ = i;
                open_block(idx);
                return;
            }
        }
        if (depth > 0) fail(t_[a].line, "unbalanced brackets in statement");
        Tokens stmt(t_.begin() + static_cast<std::ptrdiff_t>(a), t_.end());
        emit(a, t_.size() - 1, classify(stmt, false), parent);
        p_ = t_.size();
    }

    const Tokens& t_;
    const std::string& file_;
    std::size_t p_ = 0;
    int max_line_ = 0;
    std::vector<ParsedStatement> out_;
    struct LastChild {
        std::unordered_map<int, int> map;
        int& operator[](int k) {
            auto [it, inserted] = map.try_emplace(k, -1);
            return it->second;
        }
    } last_child_;
};

}  // namespace

std::vector<ParsedStatement> parse_c_family(std::string_view source, const std::string& file) {
    Lexed lexed = tokenize(source);
    CFamilyParser parser(lexed.tokens, file);
    return parser.run();
}

std::vector<ParsedStatement> parse_lines(std::string_view source) {
    std::vector<ParsedStatement> out;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= source.size()) {
        auto nl = source.find('\n', pos);
        std::string_view line = source.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        bool blank = std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
        if (!blank) {
            ParsedStatement s;
            s.span = {line_no, 1};
            Lexed lexed = tokenize(line);
            s.kind = classify(lexed.tokens, false);
            out.push_back(s);
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

std::string resolve_grammar(const std::string& grammar_id, const std::string& file_path) {
    if (grammar_id == "lines") return "lines";
    if (grammar_id == "c-family" || grammar_id == "c" || grammar_id == "cpp" || grammar_id == "c++" ||
        grammar_id == "java" || grammar_id == "csharp" || grammar_id == "cs")
        return "c-family";
    if (grammar_id == "auto") {
        auto dot = file_path.rfind('.');
        std::string ext = dot == std::string::npos ? "" : file_path.substr(dot + 1);
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        static const std::unordered_set<std::string> c_family = {"c",  "h",   "cc", "cpp", "cxx", "c++", "hpp", "hh",
                                                                 "hxx", "ipp", "inl", "java", "cs", "js", "ts", "kt"};
        return c_family.count(ext) ? "c-family" : "lines";
    }
    throw UnsupportedGrammar("unknown grammar '" + grammar_id + "'");
}

}  // namespace untangler::grammar
