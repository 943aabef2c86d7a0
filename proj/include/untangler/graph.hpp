#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "untangler/diff.hpp"

namespace untangler {

enum class Version { Old, New };

enum class StatementKind { Declaration, Assignment, Call, Condition, LoopHeader, Signature, Other };

enum class EdgeKind { AstParent, DataDep, ControlDep };

std::string_view to_string(Version v);
std::string_view to_string(StatementKind k);
std::string_view to_string(EdgeKind k);
Version version_from_string(std::string_view s);
StatementKind kind_from_string(std::string_view s);

// Canonical identity of a statement: (file, version, span). Doubles as the
// key ground truth and predictions are recorded under.
struct StatementKey {
    std::string file;
    Version version = Version::New;
    int start = 0;
    int end = 0;

    std::string str() const;
    static StatementKey parse(std::string_view id);
    auto operator<=>(const StatementKey&) const = default;
};

using NodeId = std::string;

struct StatementNode {
    NodeId id;
    std::string file_path;
    Version version = Version::New;
    LineRange span;               // lines of the statement itself (header only for blocks)
    std::vector<int> close_lines;   // closing-brace lines owned by this block statement
    StatementKind kind = StatementKind::Other;
    std::string text;
    bool changed = false;

    StatementKey key() const { return {file_path, version, span.first, span.last()}; }
    bool owns(int line) const;
    std::vector<int> owned_lines() const;
};

struct Edge {
    NodeId src;
    NodeId dst;
    EdgeKind kind;

    auto operator<=>(const Edge&) const = default;
};

// Sources and diff regions of one file, kept with the graph so later stages
// can render MCS diffs and map between old and new line numbers.
struct FileVersions {
    std::vector<std::string> old_lines;
    std::vector<std::string> new_lines;
    std::vector<DiffRegion> regions;
    std::string grammar;
};

// Position of a line in a merged old/new view of a file: removed lines sort
// right before the added lines of the same region.
struct MergedPosition {
    int line = 0;
    int phase = 0;  // 0 = removed line, 1 = context or added line
    int own_line = 0;
    auto operator<=>(const MergedPosition&) const = default;
};

class ChangeGraph {
public:
    // Returns the stored node id. Nodes are kept sorted by key on demand.
    const NodeId& add_node(StatementNode node);
    void add_edge(const NodeId& src, const NodeId& dst, EdgeKind kind);
    void add_counterpart(const NodeId& old_node, const NodeId& new_node);
    void add_seed(const NodeId& id);

    bool contains(const NodeId& id) const { return index_.count(id) != 0; }
    const StatementNode& node(const NodeId& id) const;
    StatementNode& node_mut(const NodeId& id);

    const std::vector<StatementNode>& nodes() const { return nodes_; }
    const std::set<Edge>& edges() const { return edges_; }
    const std::set<NodeId>& seeds() const { return seeds_; }
    const std::set<std::pair<NodeId, NodeId>>& counterparts() const { return counterparts_; }

    std::map<std::string, FileVersions>& files() { return files_; }
    const std::map<std::string, FileVersions>& files() const { return files_; }

    std::optional<NodeId> parent_of(const NodeId& id) const;
    std::vector<NodeId> children_of(const NodeId& id) const;

    // Node in (file, version) owning `line`, if any.
    std::optional<NodeId> owner_of(const std::string& file, Version v, int line) const;

    MergedPosition merged_position(const std::string& file, Version v, int line) const;

    // Absorbs another graph (different files). Ids must not collide.
    void merge(ChangeGraph other);

    // One JSON object per line: nodes (sorted by key), then edges, then seeds
    // and counterparts. Field order is fixed.
    std::string serialize() const;

    std::size_t statement_count() const;

private:
    std::vector<StatementNode> nodes_;
    std::unordered_map<NodeId, std::size_t> index_;
    std::set<Edge> edges_;
    std::set<NodeId> seeds_;
    std::set<std::pair<NodeId, NodeId>> counterparts_;
    std::map<std::string, FileVersions> files_;
    std::unordered_map<NodeId, NodeId> parent_;
};

// Builds the statement nodes (both versions) of one file with AST_PARENT
// edges. grammar_id is "c-family" (aliases c, cpp, java, csharp), "lines", or
// "auto" which picks by extension and degrades to "lines" on parse errors.
ChangeGraph build_statement_graph(const std::string& file_path,
                                  std::string_view old_source,
                                  std::string_view new_source,
                                  const std::string& grammar_id);

// Marks changed nodes, records seeds and pairs old/new counterparts of
// modified statements.
ChangeGraph identify_seed_nodes(ChangeGraph graph, const std::vector<DiffRegion>& regions);

// Adds DATA_DEP (def -> use) and CONTROL_DEP (guard -> nested statement)
// edges inside each (file, version).
ChangeGraph compute_dependencies(ChangeGraph graph);

// Convenience: all three steps over every file of a commit.
struct CommitSources {
    std::string diff_text;
    // path -> (old content, new content); missing side = empty
    std::map<std::string, std::pair<std::string, std::string>> files;
};
ChangeGraph build_change_graph(const CommitSources& commit, const std::string& grammar_id);

}  // namespace untangler
