#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "untangler/grouping.hpp"

namespace untangler {

enum class Verdict { Accept, Reject };

struct ReviewDecision {
    Verdict verdict = Verdict::Accept;
    std::string core_intent;            // REJECT only
    std::vector<std::string> outliers;  // REJECT only, a proper subset of the members
};

nlohmann::ordered_json to_json(const ReviewDecision& d);

// One step of re-grouping after a REJECT.
struct RegroupAction {
    std::string action;  // "moved", "new_group", "resynthesized", "reset"
    std::string mcs_id;  // empty for resynthesized/reset
    std::string from_group;
    std::string to_group;
};

nlohmann::ordered_json to_json(const RegroupAction& a);

struct RoundRecord {
    int round_index = 0;
    std::vector<std::pair<std::string, ReviewDecision>> decisions;  // group id -> decision
    std::vector<RegroupAction> actions;
    nlohmann::ordered_json partition_after;
};

struct RefinementTrace {
    std::vector<RoundRecord> rounds;
    bool converged = false;
};

nlohmann::ordered_json to_json(const RefinementTrace& t);

// Parses {"verdict": ..., "core_intent": ..., "outliers": [...]} against the
// group's members. Throws ReviewParseFailure.
ReviewDecision parse_review(std::string_view raw, const Group& group);

std::string render_review_prompt(const Group& group, const ProfileMap& profiles);

// Singletons are accepted without a backend call.
ReviewDecision review_group(const Group& group, const ProfileMap& profiles, ChatBackend& backend,
                            const AgentOptions& options = {});

// Removes the outliers of a rejected group and places each one; returns the
// actions taken. `touched` collects every group created or modified.
std::vector<RegroupAction> excise_and_regroup(GroupingState& state, const std::string& rejected,
                                              const ReviewDecision& decision, const ProfileMap& profiles,
                                              ChatBackend& backend, std::set<std::string>& touched,
                                              const AgentOptions& options = {});

// Review, excise and re-place until every group is accepted or max_rounds
// rounds have run. If `progress` is given it holds the trace of every
// completed round, so callers still have it when an agent call throws.
std::pair<GroupingState, RefinementTrace> refinement_loop(GroupingState initial, const ProfileMap& profiles,
                                                          ChatBackend& backend, int max_rounds = 3,
                                                          const AgentOptions& options = {},
                                                          RefinementTrace* progress = nullptr);

}  // namespace untangler
