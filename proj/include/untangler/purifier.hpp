#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "untangler/graph.hpp"

namespace untangler {

struct MinimalChangeSubgraph {
    std::string mcs_id;
    std::vector<NodeId> core_nodes;     // sorted
    std::vector<NodeId> context_nodes;  // sorted
    std::string rendered_diff;
};

nlohmann::ordered_json to_json(const MinimalChangeSubgraph& mcs);

// Connected components of the seeds under undirected DATA_DEP and CONTROL_DEP
// edges, with old/new counterparts of a modified statement kept together.
// Ordered by (file, merged position) of each component's first node.
std::vector<std::set<NodeId>> core_change_sets(const ChangeGraph& graph);

// Unchanged nodes at most bound_k backward DATA_DEP/CONTROL_DEP hops from the
// core (walking unchanged nodes only), plus unchanged enclosing signatures.
std::set<NodeId> backward_slice(const ChangeGraph& graph, const std::set<NodeId>& core, int bound_k);

MinimalChangeSubgraph finalize_mcs(const ChangeGraph& graph, const std::set<NodeId>& core,
                                   const std::set<NodeId>& context);

// "mcs-" followed by 12 hex digits of FNV-1a over the sorted core ids.
std::string mcs_id_for(const std::set<NodeId>& core);

// Core sets, slicing and finalization for a whole commit, in the order of
// core_change_sets.
std::vector<MinimalChangeSubgraph> build_mcss(const ChangeGraph& graph, int bound_k = 1);

}  // namespace untangler
