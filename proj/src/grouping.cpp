#include "untangler/grouping.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "untangler/errors.hpp"

namespace untangler {

const Group& GroupingState::group(const std::string& group_id) const {
    for (const auto& g : groups_)
        if (g.group_id == group_id) return g;
    throw std::out_of_range("no group " + group_id);
}

Group& GroupingState::group_mut(const std::string& group_id) {
    for (auto& g : groups_)
        if (g.group_id == group_id) return g;
    throw std::out_of_range("no group " + group_id);
}

bool GroupingState::has_group(const std::string& group_id) const {
    return std::any_of(groups_.begin(), groups_.end(), [&](const Group& g) { return g.group_id == group_id; });
}

const std::string& GroupingState::open_group(const std::string& mcs_id, const IntentProfile& rep) {
    if (assignment_.count(mcs_id)) throw std::logic_error(mcs_id + " is already grouped");
    groups_.push_back({"G" + std::to_string(next_index_++), {mcs_id}, rep});
    assignment_[mcs_id] = groups_.back().group_id;
    return groups_.back().group_id;
}

void GroupingState::add_member(const std::string& group_id, const std::string& mcs_id) {
    if (assignment_.count(mcs_id)) throw std::logic_error(mcs_id + " is already grouped");
    group_mut(group_id).members.push_back(mcs_id);
    assignment_[mcs_id] = group_id;
}

void GroupingState::remove_member(const std::string& group_id, const std::string& mcs_id) {
    auto& members = group_mut(group_id).members;
    auto it = std::find(members.begin(), members.end(), mcs_id);
    if (it == members.end()) throw std::logic_error(mcs_id + " is not in " + group_id);
    if (members.size() == 1) throw std::logic_error("removing " + mcs_id + " would empty " + group_id);
    members.erase(it);
    assignment_.erase(mcs_id);
}

bool GroupingState::is_partition_of(const std::vector<std::string>& mcs_ids) const {
    std::multiset<std::string> seen;
    for (const auto& g : groups_) {
        if (g.members.empty()) return false;
        for (const auto& m : g.members) {
            seen.insert(m);
            auto it = assignment_.find(m);
            if (it == assignment_.end() || it->second != g.group_id) return false;
        }
    }
    std::multiset<std::string> expected(mcs_ids.begin(), mcs_ids.end());
    return seen == expected && assignment_.size() == mcs_ids.size();
}

nlohmann::ordered_json to_json(const Group& g) {
    nlohmann::ordered_json j;
    j["group_id"] = g.group_id;
    j["members"] = g.members;
    j["rep_intent"] = to_json(g.rep_intent);
    return j;
}

nlohmann::ordered_json to_json(const GroupingState& s) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& g : s.groups()) arr.push_back(to_json(g));
    return arr;
}

std::vector<const Group*> category_filter(const GroupingState& state, const IntentProfile& profile) {
    std::vector<const Group*> out;
    for (const auto& g : state.groups())
        if (g.rep_intent.category == profile.category) out.push_back(&g);
    return out;
}

namespace {

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
    return out;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n\"'`.*");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n\"'`.*");
    return std::string(s.substr(b, e - b + 1));
}

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

std::string render_judgment_prompt(const std::string& mcs_id, const IntentProfile& profile,
                                   const std::vector<const Group*>& candidates) {
    std::ostringstream p;
    p << "You are an expert software engineer grouping the changes of one commit by developer intent.\n\n"
      << "Change to place (" << mcs_id << "):\n"
      << "Category: " << to_string(profile.category) << "\n"
      << "Intent: " << profile.summary << "\n\n"
      << "Candidate groups:\n";
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& g = *candidates[i];
        p << (i + 1) << ". " << g.group_id << "\n"
          << "   Representative intent: " << g.rep_intent.summary << "\n"
          << "   Members: " << join(g.members) << "\n";
    }
    p << "\nDoes the change serve the same concrete purpose as one of the candidate groups? "
      << "Answer with a JSON object {\"choice\": \"<group id>\"} naming the best-matching group, "
      << "or {\"choice\": \"NEW\"} if none of them fits.";
    return p.str();
}

std::optional<std::string> parse_judgment(std::string_view raw, const std::vector<const Group*>& candidates) {
    std::string answer;
    if (auto doc = extract_first_json(raw)) {
        const nlohmann::json* choice = nullptr;
        for (const char* key : {"choice", "group", "group_id", "answer"})
            if (doc->contains(key)) {
                choice = &(*doc)[key];
                break;
            }
        if (!choice) throw JudgmentParseFailure("JSON answer has no \"choice\"");
        answer = choice->is_string() ? choice->get<std::string>() : choice->dump();
    } else {
        answer = std::string(raw);
    }
    answer = trim(answer);
    if (upper(answer) == "NEW") return std::nullopt;
    for (const auto* g : candidates)
        if (upper(g->group_id) == upper(answer)) return g->group_id;
    if (!answer.empty() && std::all_of(answer.begin(), answer.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        auto index = std::stoul(answer);
        if (index >= 1 && index <= candidates.size()) return candidates[index - 1]->group_id;
    }
    throw JudgmentParseFailure("'" + answer + "' is neither NEW nor one of the candidates");
}

std::optional<std::string> comparative_judgment(const std::string& mcs_id, const IntentProfile& profile,
                                                const std::vector<const Group*>& candidates,
                                                ChatBackend& backend, const AgentOptions& options) {
    if (candidates.empty()) return std::nullopt;
    ChatRequest request;
    request.purpose = Purpose::Judge;
    request.subject_id = scoped_subject(options.scope, mcs_id);
    request.messages = {{"user", render_judgment_prompt(mcs_id, profile, candidates)}};
    std::string last_error;
    for (int attempt = 0; attempt <= options.judge_retries; ++attempt) {
        auto text = backend.complete(request).text;
        try {
            return parse_judgment(text, candidates);
        } catch (const JudgmentParseFailure& e) {
            last_error = e.what();
        }
    }
    throw JudgmentParseFailure(mcs_id + ": " + last_error);
}

std::string render_synthesis_prompt(const Group& group, const ProfileMap& profiles) {
    std::ostringstream p;
    p << "You are an expert software engineer. The following changes of one commit were grouped because they "
      << "share a development purpose.\n\n"
      << "Group " << group.group_id << "\n"
      << "Category: " << to_string(group.rep_intent.category) << "\n"
      << "Members: " << join(group.members) << "\n\n";
    for (const auto& m : group.members) {
        auto it = profiles.find(m);
        p << "- " << m << ": " << (it == profiles.end() ? std::string("(no profile)") : it->second.summary) << "\n";
    }
    p << "\nWrite one intent that covers all of these changes, as a concise summary in the imperative mood. "
      << "Return a JSON object {\"summary\": \"...\", \"what\": \"...\", \"how\": \"...\", \"why\": \"...\"}.";
    return p.str();
}

IntentProfile synthesize_intent(const Group& group, const ProfileMap& profiles, ChatBackend& backend,
                                const AgentOptions& options) {
    ChatRequest request;
    request.purpose = Purpose::Synthesize;
    request.subject_id = scoped_subject(options.scope, group.group_id);
    request.messages = {{"user", render_synthesis_prompt(group, profiles)}};
    std::string last, last_error;
    for (int attempt = 0; attempt <= options.synth_retries; ++attempt) {
        last = backend.complete(request).text;
        auto doc = extract_first_json(last);
        if (!doc) {
            last_error = "no JSON object in response";
            continue;
        }
        auto text = [&](const char* key) {
            if (!doc->contains(key) || (*doc)[key].is_null()) return std::string();
            const auto& v = (*doc)[key];
            return v.is_string() ? v.get<std::string>() : v.dump();
        };
        IntentProfile p;
        p.category = group.rep_intent.category;
        p.summary = text("summary");
        if (p.summary.find_first_not_of(" \t\r\n") == std::string::npos) {
            last_error = "missing summary";
            continue;
        }
        p.what = text("what");
        p.how = text("how");
        p.why = text("why");
        return p;
    }
    throw ProfileFailure(group.group_id + ": no valid synthesized intent (" + last_error + ")", last);
}

GroupingState greedy_grouping(const std::vector<ProfiledMcs>& profiles, ChatBackend& backend,
                              const AgentOptions& options) {
    GroupingState state;
    if (profiles.empty()) return state;
    ProfileMap by_id;
    for (const auto& p : profiles) by_id[p.mcs_id] = p.profile;

    state.open_group(profiles[0].mcs_id, profiles[0].profile);
    for (std::size_t i = 1; i < profiles.size(); ++i) {
        const auto& m = profiles[i];
        auto candidates = category_filter(state, m.profile);
        auto best = comparative_judgment(m.mcs_id, m.profile, candidates, backend, options);
        if (!best) {
            state.open_group(m.mcs_id, m.profile);
            continue;
        }
        state.add_member(*best, m.mcs_id);
        auto& g = state.group_mut(*best);
        g.rep_intent = synthesize_intent(g, by_id, backend, options);
    }
    return state;
}

}  // namespace untangler
