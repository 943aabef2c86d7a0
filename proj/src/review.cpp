#include "untangler/review.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "untangler/errors.hpp"

namespace untangler {

nlohmann::ordered_json to_json(const ReviewDecision& d) {
    nlohmann::ordered_json j;
    j["verdict"] = d.verdict == Verdict::Accept ? "ACCEPT" : "REJECT";
    if (d.verdict == Verdict::Reject) {
        j["core_intent"] = d.core_intent;
        j["outliers"] = d.outliers;
    }
    return j;
}

nlohmann::ordered_json to_json(const RegroupAction& a) {
    nlohmann::ordered_json j;
    j["action"] = a.action;
    if (!a.mcs_id.empty()) j["mcs_id"] = a.mcs_id;
    if (!a.from_group.empty()) j["from"] = a.from_group;
    if (!a.to_group.empty()) j["to"] = a.to_group;
    return j;
}

nlohmann::ordered_json to_json(const RefinementTrace& t) {
    nlohmann::ordered_json j;
    auto rounds = nlohmann::ordered_json::array();
    for (const auto& r : t.rounds) {
        nlohmann::ordered_json jr;
        jr["round"] = r.round_index;
        auto decisions = nlohmann::ordered_json::array();
        for (const auto& [gid, d] : r.decisions) {
            auto jd = to_json(d);
            jd["group_id"] = gid;
            decisions.push_back(jd);
        }
        jr["decisions"] = decisions;
        auto actions = nlohmann::ordered_json::array();
        for (const auto& a : r.actions) actions.push_back(to_json(a));
        jr["actions"] = actions;
        jr["partition_after"] = r.partition_after;
        rounds.push_back(jr);
    }
    j["rounds"] = rounds;
    j["converged"] = t.converged;
    return j;
}

std::string render_review_prompt(const Group& group, const ProfileMap& profiles) {
    std::ostringstream p;
    p << "You are an expert code reviewer checking whether a proposed group of changes forms one atomic "
      << "commit.\n\n"
      << "Group " << group.group_id << "\n"
      << "Representative intent: " << group.rep_intent.summary << "\n"
      << "Members: ";
    for (std::size_t i = 0; i < group.members.size(); ++i) p << (i ? ", " : "") << group.members[i];
    p << "\n\n";
    for (const auto& m : group.members) {
        auto it = profiles.find(m);
        p << "- " << m;
        if (it != profiles.end())
            p << " [" << to_string(it->second.category) << "]: " << it->second.summary;
        p << "\n";
    }
    p << "\nReview in two steps.\n"
      << "1. Identify the largest subset of these changes that one concrete development purpose explains, "
      << "and state that purpose as the core intent.\n"
      << "2. List every change whose purpose is inconsistent with the core intent as an outlier.\n\n"
      << "Return a JSON object {\"verdict\": \"ACCEPT\" or \"REJECT\", \"core_intent\": \"...\", "
      << "\"outliers\": [\"<change id>\", ...]}. Use ACCEPT with an empty outlier list when all changes share "
      << "the core intent.";
    return p.str();
}

ReviewDecision parse_review(std::string_view raw, const Group& group) {
    auto doc = extract_first_json(raw);
    if (!doc) throw ReviewParseFailure("no JSON object in response");
    if (!doc->contains("verdict") || !(*doc)["verdict"].is_string()) throw ReviewParseFailure("missing verdict");
    std::string verdict = (*doc)["verdict"].get<std::string>();
    for (auto& c : verdict) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    verdict.erase(std::remove_if(verdict.begin(), verdict.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
                  verdict.end());

    std::vector<std::string> outliers;
    if (doc->contains("outliers") && !(*doc)["outliers"].is_null()) {
        const auto& arr = (*doc)["outliers"];
        if (!arr.is_array()) throw ReviewParseFailure("outliers is not a list");
        for (const auto& o : arr) {
            if (!o.is_string()) throw ReviewParseFailure("outlier entry is not a string");
            auto id = o.get<std::string>();
            if (std::find(group.members.begin(), group.members.end(), id) == group.members.end())
                throw ReviewParseFailure("outlier " + id + " is not a member of " + group.group_id);
            if (std::find(outliers.begin(), outliers.end(), id) == outliers.end()) outliers.push_back(id);
        }
    }

    ReviewDecision d;
    if (verdict == "ACCEPT") {
        if (!outliers.empty()) throw ReviewParseFailure("ACCEPT with outliers");
        return d;
    }
    if (verdict != "REJECT") throw ReviewParseFailure("unknown verdict '" + verdict + "'");
    if (outliers.empty()) throw ReviewParseFailure("REJECT without outliers");
    if (outliers.size() >= group.members.size())
        throw ReviewParseFailure("REJECT names every member of " + group.group_id + " as an outlier");
    d.verdict = Verdict::Reject;
    d.outliers = std::move(outliers);
    if (doc->contains("core_intent") && (*doc)["core_intent"].is_string())
        d.core_intent = (*doc)["core_intent"].get<std::string>();
    return d;
}

ReviewDecision review_group(const Group& group, const ProfileMap& profiles, ChatBackend& backend,
                            const AgentOptions& options) {
    if (group.members.size() <= 1) return {};
    ChatRequest request;
    request.purpose = Purpose::Review;
    request.subject_id = scoped_subject(options.scope, group.group_id);
    request.messages = {{"user", render_review_prompt(group, profiles)}};
    std::string last_error;
    for (int attempt = 0; attempt <= options.review_retries; ++attempt) {
        auto text = backend.complete(request).text;
        try {
            return parse_review(text, group);
        } catch (const ReviewParseFailure& e) {
            last_error = e.what();
        }
    }
    throw ReviewParseFailure(group.group_id + ": " + last_error);
}

std::vector<RegroupAction> excise_and_regroup(GroupingState& state, const std::string& rejected,
                                              const ReviewDecision& decision, const ProfileMap& profiles,
                                              ChatBackend& backend, std::set<std::string>& touched,
                                              const AgentOptions& options) {
    if (decision.verdict != Verdict::Reject) throw std::logic_error("excision needs a REJECT decision");
    std::vector<RegroupAction> actions;
    for (const auto& outlier : decision.outliers) state.remove_member(rejected, outlier);
    touched.insert(rejected);

    for (const auto& outlier : decision.outliers) {
        const auto& profile = profiles.at(outlier);
        auto candidates = category_filter(state, profile);
        candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                        [&](const Group* g) { return g->group_id == rejected; }),
                         candidates.end());
        auto target = comparative_judgment(outlier, profile, candidates, backend, options);
        if (!target) {
            auto id = state.open_group(outlier, profile);
            touched.insert(id);
            actions.push_back({"new_group", outlier, rejected, id});
            continue;
        }
        state.add_member(*target, outlier);
        auto& g = state.group_mut(*target);
        g.rep_intent = synthesize_intent(g, profiles, backend, options);
        touched.insert(*target);
        actions.push_back({"moved", outlier, rejected, *target});
    }

    auto& shrunk = state.group_mut(rejected);
    if (shrunk.members.size() == 1) {
        shrunk.rep_intent = profiles.at(shrunk.members.front());
        actions.push_back({"reset", "", "", rejected});
    } else {
        shrunk.rep_intent = synthesize_intent(shrunk, profiles, backend, options);
        actions.push_back({"resynthesized", "", "", rejected});
    }
    return actions;
}

std::pair<GroupingState, RefinementTrace> refinement_loop(GroupingState initial, const ProfileMap& profiles,
                                                          ChatBackend& backend, int max_rounds,
                                                          const AgentOptions& options, RefinementTrace* progress) {
    if (max_rounds < 1) throw std::invalid_argument("max_rounds must be at least 1");
    GroupingState state = std::move(initial);
    RefinementTrace trace;
    std::set<std::string> pending;
    for (const auto& g : state.groups()) pending.insert(g.group_id);

    for (int round = 1; round <= max_rounds; ++round) {
        RoundRecord record;
        record.round_index = round;
        std::vector<std::string> order;
        for (const auto& g : state.groups())
            if (pending.count(g.group_id)) order.push_back(g.group_id);
        for (const auto& gid : order)
            record.decisions.emplace_back(gid, review_group(state.group(gid), profiles, backend, options));

        std::set<std::string> touched;
        bool all_accept = true;
        for (const auto& [gid, decision] : record.decisions) {
            if (decision.verdict == Verdict::Accept) continue;
            all_accept = false;
            auto actions = excise_and_regroup(state, gid, decision, profiles, backend, touched, options);
            record.actions.insert(record.actions.end(), actions.begin(), actions.end());
        }
        record.partition_after = to_json(state);
        trace.rounds.push_back(std::move(record));
        trace.converged = all_accept;
        if (progress) *progress = trace;
        if (all_accept) break;
        pending = std::move(touched);
    }
    return {std::move(state), std::move(trace)};
}

}  // namespace untangler
