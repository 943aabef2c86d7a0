#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "untangler/backend.hpp"
#include "untangler/intent.hpp"

namespace untangler {

struct Group {
    std::string group_id;
    std::vector<std::string> members;  // mcs ids in join order
    IntentProfile rep_intent;
};

// Groups in creation order; ids are "G1", "G2", ... and never reused.
class GroupingState {
public:
    const std::vector<Group>& groups() const { return groups_; }
    const std::map<std::string, std::string>& assignment() const { return assignment_; }

    const Group& group(const std::string& group_id) const;
    Group& group_mut(const std::string& group_id);
    bool has_group(const std::string& group_id) const;

    // Opens a singleton group for an unassigned MCS.
    const std::string& open_group(const std::string& mcs_id, const IntentProfile& rep);
    void add_member(const std::string& group_id, const std::string& mcs_id);
    void remove_member(const std::string& group_id, const std::string& mcs_id);

    // Every id appears in exactly one group and nothing else does.
    bool is_partition_of(const std::vector<std::string>& mcs_ids) const;

private:
    std::vector<Group> groups_;
    std::map<std::string, std::string> assignment_;
    int next_index_ = 1;
};

nlohmann::ordered_json to_json(const Group& g);
nlohmann::ordered_json to_json(const GroupingState& s);

using ProfileMap = std::map<std::string, IntentProfile>;

struct ProfiledMcs {
    std::string mcs_id;
    IntentProfile profile;
};

struct AgentOptions {
    int judge_retries = 1;
    int synth_retries = 1;
    int review_retries = 1;
    std::string scope;  // prefix for replay subject ids
};

// Groups whose representative intent shares the profile's category, in state order.
std::vector<const Group*> category_filter(const GroupingState& state, const IntentProfile& profile);

// nullopt means NEW. Empty candidates return NEW without calling the backend.
std::optional<std::string> comparative_judgment(const std::string& mcs_id, const IntentProfile& profile,
                                                const std::vector<const Group*>& candidates,
                                                ChatBackend& backend, const AgentOptions& options = {});

// Parses a judge answer: {"choice": "G2"} / {"choice": "NEW"}, or the bare id,
// NEW, or the 1-based candidate number. Throws JudgmentParseFailure.
std::optional<std::string> parse_judgment(std::string_view raw, const std::vector<const Group*>& candidates);

// New representative intent for a group of two or more; the category always
// stays the group's.
IntentProfile synthesize_intent(const Group& group, const ProfileMap& profiles, ChatBackend& backend,
                                const AgentOptions& options = {});

GroupingState greedy_grouping(const std::vector<ProfiledMcs>& profiles, ChatBackend& backend,
                              const AgentOptions& options = {});

// Prompt texts; exposed for tests and test backends that parse them.
std::string render_judgment_prompt(const std::string& mcs_id, const IntentProfile& profile,
                                   const std::vector<const Group*>& candidates);
std::string render_synthesis_prompt(const Group& group, const ProfileMap& profiles);

}  // namespace untangler
