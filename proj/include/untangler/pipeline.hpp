#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "untangler/backend.hpp"
#include "untangler/graph.hpp"
#include "untangler/grouping.hpp"
#include "untangler/metrics.hpp"
#include "untangler/purifier.hpp"
#include "untangler/review.hpp"

namespace untangler {

inline constexpr const char* kToolVersion = "0.1.0";

// Order in which MCSs are fed to greedy grouping. "natural" keeps the
// purifier order, "reverse" flips it, "shuffle" permutes it with the seed.
std::vector<std::size_t> mcs_order(std::size_t count, const std::string& order, std::uint64_t seed);

struct PipelineOptions {
    int bound_k = 1;
    int max_rounds = 3;
    int profile_retries = 2;
    std::string grammar = "auto";
    std::string order = "natural";
    std::uint64_t seed = 0;
    AgentOptions agents;  // agents.scope also scopes profile subjects
};

struct PipelineResult {
    ChangeGraph graph;
    std::vector<MinimalChangeSubgraph> mcss;  // purifier order
    std::vector<ProfiledMcs> profiles;        // grouping order
    GroupingState initial;
    GroupingState final_state;
    RefinementTrace trace;
};

// changegraph -> purifier -> intent -> grouping -> review. When
// `trace_progress` is given it holds the rounds completed so far even if a
// later stage throws.
PipelineResult run_pipeline(const CommitSources& commit, ChatBackend& backend, const PipelineOptions& options,
                            RefinementTrace* trace_progress = nullptr);

// Every changed statement mapped to the final group holding its MCS.
Prediction prediction_of(const PipelineResult& result);

// Final groups with their intents, member MCSs and statements.
nlohmann::ordered_json concerns_json(const PipelineResult& result);

}  // namespace untangler
