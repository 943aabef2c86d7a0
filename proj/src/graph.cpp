#include "untangler/graph.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

#include "untangler/errors.hpp"
#include "untangler/grammar.hpp"

namespace untangler {

std::string_view to_string(Version v) { return v == Version::Old ? "OLD" : "NEW"; }

std::string_view to_string(StatementKind k) {
    switch (k) {
        case StatementKind::Declaration: return "declaration";
        case StatementKind::Assignment: return "assignment";
        case StatementKind::Call: return "call";
        case StatementKind::Condition: return "condition";
        case StatementKind::LoopHeader: return "loop-header";
        case StatementKind::Signature: return "signature";
        case StatementKind::Other: return "other";
    }
    return "other";
}

std::string_view to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::AstParent: return "AST_PARENT";
        case EdgeKind::DataDep: return "DATA_DEP";
        case EdgeKind::ControlDep: return "CONTROL_DEP";
    }
    return "AST_PARENT";
}

Version version_from_string(std::string_view s) {
    if (s == "OLD" || s == "old") return Version::Old;
    if (s == "NEW" || s == "new") return Version::New;
    throw std::invalid_argument("unknown version '" + std::string(s) + "'");
}

StatementKind kind_from_string(std::string_view s) {
    for (auto k : {StatementKind::Declaration, StatementKind::Assignment, StatementKind::Call, StatementKind::Condition,
                   StatementKind::LoopHeader, StatementKind::Signature, StatementKind::Other})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown statement kind '" + std::string(s) + "'");
}

std::string StatementKey::str() const {
    return file + "@" + (version == Version::Old ? "old" : "new") + ":" + std::to_string(start) + "-" +
           std::to_string(end);
}

StatementKey StatementKey::parse(std::string_view id) {
    auto at = id.rfind('@');
    auto colon = id.rfind(':');
    auto dash = id.rfind('-');
    if (at == std::string_view::npos || colon == std::string_view::npos || dash == std::string_view::npos ||
        !(at < colon && colon < dash))
        throw std::invalid_argument("malformed statement key '" + std::string(id) + "'");
    StatementKey k;
    k.file = std::string(id.substr(0, at));
    k.version = version_from_string(id.substr(at + 1, colon - at - 1));
    k.start = std::stoi(std::string(id.substr(colon + 1, dash - colon - 1)));
    k.end = std::stoi(std::string(id.substr(dash + 1)));
    return k;
}

std::vector<int> StatementNode::owned_lines() const {
    std::vector<int> lines;
    for (int l = span.first; l <= span.last(); ++l) lines.push_back(l);
    for (int l : close_lines)
        if (!span.contains(l)) lines.push_back(l);
    return lines;
}

bool StatementNode::owns(int line) const {
    return span.contains(line) || std::find(close_lines.begin(), close_lines.end(), line) != close_lines.end();
}

const NodeId& ChangeGraph::add_node(StatementNode node) {
    if (node.id.empty()) node.id = node.key().str();
    if (index_.count(node.id)) throw std::invalid_argument("duplicate node id " + node.id);
    index_.emplace(node.id, nodes_.size());
    nodes_.push_back(std::move(node));
    return nodes_.back().id;
}

void ChangeGraph::add_edge(const NodeId& src, const NodeId& dst, EdgeKind kind) {
    if (!contains(src) || !contains(dst)) throw std::invalid_argument("edge endpoint missing: " + src + " -> " + dst);
    edges_.insert(Edge{src, dst, kind});
    if (kind == EdgeKind::AstParent) parent_[dst] = src;
}

void ChangeGraph::add_counterpart(const NodeId& old_node, const NodeId& new_node) {
    counterparts_.emplace(old_node, new_node);
}

void ChangeGraph::add_seed(const NodeId& id) {
    if (!contains(id)) throw std::invalid_argument("seed not in graph: " + id);
    seeds_.insert(id);
}

const StatementNode& ChangeGraph::node(const NodeId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("no node " + id);
    return nodes_[it->second];
}

StatementNode& ChangeGraph::node_mut(const NodeId& id) {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("no node " + id);
    return nodes_[it->second];
}

std::optional<NodeId> ChangeGraph::parent_of(const NodeId& id) const {
    auto it = parent_.find(id);
    if (it == parent_.end()) return std::nullopt;
    return it->second;
}

std::vector<NodeId> ChangeGraph::children_of(const NodeId& id) const {
    std::vector<NodeId> out;
    for (const auto& e : edges_)
        if (e.kind == EdgeKind::AstParent && e.src == id) out.push_back(e.dst);
    return out;
}

std::optional<NodeId> ChangeGraph::owner_of(const std::string& file, Version v, int line) const {
    const StatementNode* best = nullptr;
    for (const auto& n : nodes_) {
        if (n.file_path != file || n.version != v || !n.owns(line)) continue;
        // Prefer the innermost (latest-starting) node if ownership ever overlaps.
        if (!best || n.span.first > best->span.first) best = &n;
    }
    if (!best) return std::nullopt;
    return best->id;
}

MergedPosition ChangeGraph::merged_position(const std::string& file, Version v, int line) const {
    if (v == Version::New) return {line, 1, line};
    auto it = files_.find(file);
    if (it == files_.end()) return {line, 1, line};
    // Removed lines sit just before the added lines of their region; unchanged
    // old lines map to their new-side line number.
    int offset = 0;
    for (const auto& r : it->second.regions) {
        if (r.old_range.count > 0 && r.old_range.contains(line)) return {r.new_range.first, 0, line};
        if (r.old_range.first + r.old_range.count <= line) offset += r.new_range.count - r.old_range.count;
    }
    return {line + offset, 1, line};
}

void ChangeGraph::merge(ChangeGraph other) {
    for (auto& n : other.nodes_) add_node(std::move(n));
    for (const auto& e : other.edges_) add_edge(e.src, e.dst, e.kind);
    for (const auto& s : other.seeds_) seeds_.insert(s);
    for (const auto& c : other.counterparts_) counterparts_.insert(c);
    for (auto& [path, fv] : other.files_) files_[path] = std::move(fv);
}

std::size_t ChangeGraph::statement_count() const {
    std::size_t n = 0;
    for (const auto& node : nodes_)
        if (node.version == Version::New || node.changed) ++n;
    return n;
}

std::string ChangeGraph::serialize() const {
    using ojson = nlohmann::ordered_json;
    std::vector<const StatementNode*> sorted;
    for (const auto& n : nodes_) sorted.push_back(&n);
    std::sort(sorted.begin(), sorted.end(),
              [](const StatementNode* a, const StatementNode* b) { return a->key() < b->key(); });
    std::ostringstream out;
    for (const auto* n : sorted) {
        ojson j;
        j["record"] = "node";
        j["id"] = n->id;
        j["version"] = std::string(to_string(n->version));
        j["span"] = {n->span.first, n->span.last()};
        j["kind"] = std::string(to_string(n->kind));
        j["changed"] = n->changed;
        out << j.dump() << '\n';
    }
    for (const auto& e : edges_) {
        ojson j;
        j["record"] = "edge";
        j["src"] = e.src;
        j["dst"] = e.dst;
        j["kind"] = std::string(to_string(e.kind));
        out << j.dump() << '\n';
    }
    for (const auto& s : seeds_) {
        ojson j;
        j["record"] = "seed";
        j["id"] = s;
        out << j.dump() << '\n';
    }
    for (const auto& [o, n] : counterparts_) {
        ojson j;
        j["record"] = "counterpart";
        j["old"] = o;
        j["new"] = n;
        out << j.dump() << '\n';
    }
    return out.str();
}

namespace {

bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::vector<grammar::ParsedStatement> parse_with(const std::string& grammar, std::string_view source,
                                                 const std::string& file) {
    if (grammar == "lines") return grammar::parse_lines(source);
    return grammar::parse_c_family(source, file);
}

// Adds statement nodes for one version. Non-blank lines no statement owns
// (comments, stray punctuation) become filler nodes of kind `other`, one per
// run of consecutive lines inside the same block.
void add_version(ChangeGraph& g, const std::string& file, Version v, const std::vector<std::string>& lines,
                 std::vector<grammar::ParsedStatement> stmts) {
    const int n_lines = static_cast<int>(lines.size());
    std::vector<int> owner(n_lines + 2, -1);
    for (int i = 0; i < static_cast<int>(stmts.size()); ++i) {
        auto& s = stmts[i];
        s.span.count = std::max(1, std::min(s.span.count, n_lines - s.span.first + 1));
        for (int l = s.span.first; l <= s.span.last(); ++l)
            if (owner[l] < 0) owner[l] = i;
        std::vector<int> kept;
        for (int l : s.close_lines) {
            if (l <= n_lines && owner[l] < 0) {
                owner[l] = i;
                kept.push_back(l);
            }
        }
        s.close_lines = kept;
    }

    // Innermost block whose extent holds a line.
    auto enclosing = [&](int line) {
        int best = -1;
        for (int i = 0; i < static_cast<int>(stmts.size()); ++i) {
            const auto& s = stmts[i];
            if (!s.block_end) continue;
            if (s.span.last() < line && *s.block_end > line && (best < 0 || s.span.first >= stmts[best].span.first))
                best = i;
        }
        return best;
    };
    for (int l = 1; l <= n_lines; ++l) {
        if (owner[l] >= 0 || blank(lines[l - 1])) continue;
        int parent = enclosing(l);
        int end = l;
        while (end + 1 <= n_lines && owner[end + 1] < 0 && !blank(lines[end]) && enclosing(end + 1) == parent) ++end;
        grammar::ParsedStatement f;
        f.span = {l, end - l + 1};
        f.kind = StatementKind::Other;
        f.parent = parent;
        stmts.push_back(f);
        for (int k = l; k <= end; ++k) owner[k] = static_cast<int>(stmts.size()) - 1;
        l = end;
    }

    std::vector<NodeId> ids(stmts.size());
    for (std::size_t i = 0; i < stmts.size(); ++i) {
        const auto& s = stmts[i];
        StatementNode node;
        node.file_path = file;
        node.version = v;
        node.span = s.span;
        node.close_lines = s.close_lines;
        node.kind = s.kind;
        std::string text;
        for (int l = s.span.first; l <= s.span.last(); ++l) {
            if (l > s.span.first) text += '\n';
            text += lines[l - 1];
        }
        node.text = std::move(text);
        ids[i] = g.add_node(std::move(node));
    }
    for (std::size_t i = 0; i < stmts.size(); ++i)
        if (stmts[i].parent >= 0) g.add_edge(ids[stmts[i].parent], ids[i], EdgeKind::AstParent);
}

}  // namespace

ChangeGraph build_statement_graph(const std::string& file_path, std::string_view old_source,
                                  std::string_view new_source, const std::string& grammar_id) {
    std::string grammar = grammar::resolve_grammar(grammar_id, file_path);
    ChangeGraph g;
    FileVersions fv;
    fv.old_lines = split_lines(old_source);
    fv.new_lines = split_lines(new_source);

    std::vector<grammar::ParsedStatement> old_stmts, new_stmts;
    try {
        old_stmts = parse_with(grammar, old_source, file_path + " (old)");
        new_stmts = parse_with(grammar, new_source, file_path + " (new)");
    } catch (const ParseFailure&) {
        if (grammar_id != "auto") throw;
        grammar = "lines";
        old_stmts = grammar::parse_lines(old_source);
        new_stmts = grammar::parse_lines(new_source);
    }
    fv.grammar = grammar;
    add_version(g, file_path, Version::Old, fv.old_lines, std::move(old_stmts));
    add_version(g, file_path, Version::New, fv.new_lines, std::move(new_stmts));
    g.files()[file_path] = std::move(fv);
    return g;
}

namespace {

std::vector<std::string> identifier_bag(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& t : grammar::tokenize(text).tokens)
        if (t.type == grammar::TokenType::Identifier) out.push_back(t.text);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::vector<std::string> inter;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
    return static_cast<double>(inter.size()) / static_cast<double>(a.size() + b.size() - inter.size());
}

}  // namespace

ChangeGraph identify_seed_nodes(ChangeGraph graph, const std::vector<DiffRegion>& regions) {
    for (const auto& [path, file_regions] : regions_by_file(regions)) {
        auto it = graph.files().find(path);
        if (it == graph.files().end()) throw RegionOutOfRange("diff touches " + path + " which is not in the graph");
        auto& fv = it->second;
        const int old_n = static_cast<int>(fv.old_lines.size());
        const int new_n = static_cast<int>(fv.new_lines.size());
        for (const auto& r : file_regions) {
            if (r.old_range.last() > old_n || r.new_range.last() > new_n || r.old_range.first < 1 ||
                r.new_range.first < 1)
                throw RegionOutOfRange(path + ": region -" + std::to_string(r.old_range.first) + "," +
                                       std::to_string(r.old_range.count) + " +" + std::to_string(r.new_range.first) +
                                       "," + std::to_string(r.new_range.count) + " exceeds file length (old " +
                                       std::to_string(old_n) + ", new " + std::to_string(new_n) + ")");
        }
        fv.regions = file_regions;

        for (const auto& r : file_regions) {
            std::vector<NodeId> olds, news;
            auto mark = [&](Version v, const LineRange& range, std::vector<NodeId>& into) {
                for (int l = range.first; l <= range.last(); ++l) {
                    auto owner = graph.owner_of(path, v, l);
                    if (!owner) continue;  // blank line
                    graph.node_mut(*owner).changed = true;
                    graph.add_seed(*owner);
                    if (std::find(into.begin(), into.end(), *owner) == into.end()) into.push_back(*owner);
                }
            };
            mark(Version::Old, r.old_range, olds);
            mark(Version::New, r.new_range, news);
            if (olds.empty() || news.empty()) continue;
            if (olds.size() == news.size()) {
                for (std::size_t k = 0; k < olds.size(); ++k) graph.add_counterpart(olds[k], news[k]);
                continue;
            }
            // Unequal counts: pair each statement of the shorter side with
            // its most similar statement on the longer side.
            bool old_short = olds.size() < news.size();
            const auto& shorter = old_short ? olds : news;
            const auto& longer = old_short ? news : olds;
            for (const auto& s : shorter) {
                auto bag = identifier_bag(graph.node(s).text);
                double best = 0.0;
                const NodeId* match = nullptr;
                for (const auto& l : longer) {
                    double sim = jaccard(bag, identifier_bag(graph.node(l).text));
                    if (sim > best) {
                        best = sim;
                        match = &l;
                    }
                }
                if (match) old_short ? graph.add_counterpart(s, *match) : graph.add_counterpart(*match, s);
            }
        }
    }
    return graph;
}

ChangeGraph compute_dependencies(ChangeGraph graph) {
    // Group nodes by (file, version); roots are nodes without an AST parent.
    std::map<std::pair<std::string, Version>, std::vector<NodeId>> roots;
    std::map<NodeId, std::vector<NodeId>> children;
    for (const auto& n : graph.nodes()) {
        if (auto p = graph.parent_of(n.id)) children[*p].push_back(n.id);
        else roots[{n.file_path, n.version}].push_back(n.id);
    }
    auto by_line = [&](const NodeId& a, const NodeId& b) { return graph.node(a).span.first < graph.node(b).span.first; };
    for (auto& [k, v] : roots) std::sort(v.begin(), v.end(), by_line);
    for (auto& [k, v] : children) std::sort(v.begin(), v.end(), by_line);

    std::map<NodeId, grammar::DefUse> du;
    for (const auto& n : graph.nodes()) du[n.id] = grammar::analyze_statement(n.text, n.kind);

    using Scope = std::map<std::string, NodeId>;
    std::vector<Scope> scopes;
    std::vector<NodeId> guards;

    auto lookup = [&](const std::string& name) -> Scope::iterator* {
        static thread_local Scope::iterator it;
        for (auto s = scopes.rbegin(); s != scopes.rend(); ++s) {
            it = s->find(name);
            if (it != s->end()) return &it;
        }
        return nullptr;
    };

    std::function<void(const std::vector<NodeId>&)> visit_block = [&](const std::vector<NodeId>& block) {
        for (const auto& id : block)
            for (const auto& h : du[id].hoisted) scopes.back()[h] = id;
        NodeId prev_sibling;
        for (const auto& id : block) {
            const auto& info = du[id];
            const auto& node = graph.node(id);
            for (const auto& g : guards) graph.add_edge(g, id, EdgeKind::ControlDep);
            if (info.continues_chain && !prev_sibling.empty() &&
                graph.node(prev_sibling).kind == StatementKind::Condition)
                graph.add_edge(prev_sibling, id, EdgeKind::ControlDep);
            for (const auto& u : info.uses) {
                if (auto* it = lookup(u); it && (*it)->second != id)
                    graph.add_edge((*it)->second, id, EdgeKind::DataDep);
            }
            for (const auto& d : info.defs) {
                if (info.declares) {
                    scopes.back()[d] = id;
                } else if (auto* it = lookup(d)) {
                    (*it)->second = id;
                } else {
                    scopes.back()[d] = id;
                }
            }
            auto kids = children.find(id);
            if (kids != children.end()) {
                scopes.emplace_back();
                for (const auto& s : info.scoped) scopes.back()[s] = id;
                bool guard = node.kind == StatementKind::Condition || node.kind == StatementKind::LoopHeader;
                if (guard) guards.push_back(id);
                visit_block(kids->second);
                if (guard) guards.pop_back();
                scopes.pop_back();
            }
            prev_sibling = id;
        }
    };

    for (const auto& [key, block] : roots) {
        scopes.assign(1, Scope{});
        guards.clear();
        visit_block(block);
    }
    return graph;
}

ChangeGraph build_change_graph(const CommitSources& commit, const std::string& grammar_id) {
    auto regions = parse_unified_diff(commit.diff_text);
    std::map<std::string, std::pair<std::string, std::string>> files = commit.files;
    for (const auto& r : regions) files.try_emplace(r.file_path);
    ChangeGraph g;
    for (const auto& [path, sources] : files)
        g.merge(build_statement_graph(path, sources.first, sources.second, grammar_id));
    g = identify_seed_nodes(std::move(g), regions);
    return compute_dependencies(std::move(g));
}

}  // namespace untangler
