#include "untangler/pipeline.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "untangler/intent.hpp"

namespace untangler {

std::vector<std::size_t> mcs_order(std::size_t count, const std::string& order, std::uint64_t seed) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    if (order == "natural") return idx;
    if (order == "reverse") {
        std::reverse(idx.begin(), idx.end());
        return idx;
    }
    if (order == "shuffle") {
        // Fisher-Yates with plain modulo draws so the permutation does not
        // depend on the standard library's distribution implementation.
        std::mt19937_64 rng(seed);
        for (std::size_t i = count; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
        return idx;
    }
    throw std::invalid_argument("unknown MCS order '" + order + "' (natural, reverse, shuffle)");
}

PipelineResult run_pipeline(const CommitSources& commit, ChatBackend& backend, const PipelineOptions& options,
                            RefinementTrace* trace_progress) {
    PipelineResult r;
    r.graph = build_change_graph(commit, options.grammar);
    r.mcss = build_mcss(r.graph, options.bound_k);

    for (std::size_t i : mcs_order(r.mcss.size(), options.order, options.seed)) {
        const auto& mcs = r.mcss[i];
        r.profiles.push_back({mcs.mcs_id, profile_mcs(mcs, backend, options.profile_retries, options.agents.scope)});
    }
    r.initial = greedy_grouping(r.profiles, backend, options.agents);

    ProfileMap by_id;
    for (const auto& p : r.profiles) by_id[p.mcs_id] = p.profile;
    std::tie(r.final_state, r.trace) =
        refinement_loop(r.initial, by_id, backend, options.max_rounds, options.agents, trace_progress);
    return r;
}

Prediction prediction_of(const PipelineResult& result) {
    Prediction p;
    for (const auto& mcs : result.mcss) {
        const std::string& group = result.final_state.assignment().at(mcs.mcs_id);
        for (const auto& id : mcs.core_nodes) p.assignment[result.graph.node(id).key().str()] = group;
    }
    return p;
}

nlohmann::ordered_json concerns_json(const PipelineResult& result) {
    std::map<std::string, const MinimalChangeSubgraph*> mcs_by_id;
    for (const auto& m : result.mcss) mcs_by_id[m.mcs_id] = &m;
    std::map<std::string, const IntentProfile*> profile_by_id;
    for (const auto& p : result.profiles) profile_by_id[p.mcs_id] = &p.profile;

    auto out = nlohmann::ordered_json::array();
    for (const auto& g : result.final_state.groups()) {
        auto members = nlohmann::ordered_json::array();
        for (const auto& id : g.members) {
            auto m = to_json(*mcs_by_id.at(id));
            m["profile"] = to_json(*profile_by_id.at(id));
            members.push_back(std::move(m));
        }
        out.push_back({{"group_id", g.group_id},
                       {"category", std::string(to_string(g.rep_intent.category))},
                       {"summary", g.rep_intent.summary},
                       {"members", members}});
    }
    return out;
}

}  // namespace untangler
