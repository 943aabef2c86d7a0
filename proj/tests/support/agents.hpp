#pragma once

#include <algorithm>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "untangler/backend.hpp"

namespace testing_support {

using untangler::ChatBackend;
using untangler::ChatRequest;
using untangler::ChatResponse;
using untangler::Purpose;

inline std::string unscoped(const std::string& subject) {
    auto slash = subject.rfind('/');
    return slash == std::string::npos ? subject : subject.substr(slash + 1);
}

inline std::vector<std::string> split_ids(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream s(list);
    std::string item;
    while (std::getline(s, item, ',')) {
        auto b = item.find_first_not_of(' ');
        auto e = item.find_last_not_of(' ');
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

// Candidate groups listed in a prompt: "N. G<k>" followed by a "Members:" line.
struct PromptGroup {
    std::string group_id;
    std::vector<std::string> members;
};

inline std::vector<PromptGroup> prompt_groups(const std::string& prompt) {
    std::vector<PromptGroup> out;
    std::stringstream s(prompt);
    std::string line;
    while (std::getline(s, line)) {
        auto dot = line.find(". G");
        if (dot != std::string::npos && dot > 0 && std::all_of(line.begin(), line.begin() + dot, ::isdigit))
            out.push_back({line.substr(dot + 2), {}});
        auto m = line.find("Members: ");
        if (m != std::string::npos && !out.empty() && out.back().members.empty())
            out.back().members = split_ids(line.substr(m + 9));
    }
    return out;
}

inline std::vector<std::string> prompt_members(const std::string& prompt) {
    auto m = prompt.find("Members: ");
    if (m == std::string::npos) return {};
    auto end = prompt.find('\n', m);
    return split_ids(prompt.substr(m + 9, end - m - 9));
}

inline std::string prompt_change(const std::string& prompt) {
    auto open = prompt.find("Change to place (");
    if (open == std::string::npos) return {};
    open += 17;
    return prompt.substr(open, prompt.find(')', open) - open);
}

// Answers every agent call from ground-truth concern labels: profiles share
// one category, the judge joins a change to the group holding its concern,
// and the reviewer flags members outside the group's majority concern.
class OracleBackend : public ChatBackend {
public:
    explicit OracleBackend(std::map<std::string, int> concern_of, std::string category = "Bug Fix")
        : concern_of_(std::move(concern_of)), category_(std::move(category)) {}

    ChatResponse complete(const ChatRequest& r) override {
        {
            std::lock_guard lock(mu_);
            ++calls_[r.purpose];
        }
        const std::string& prompt = r.messages.back().content;
        switch (r.purpose) {
            case Purpose::Profile: {
                int c = concern_of_.at(unscoped(r.subject_id));
                return {"{\"what\":\"edit\",\"how\":\"edit\",\"why\":\"concern " + std::to_string(c) +
                            "\",\"category\":\"" + category_ + "\",\"summary\":\"Address concern " +
                            std::to_string(c) + "\"}",
                        {100, 20}};
            }
            case Purpose::Judge: {
                int c = concern_of_.at(prompt_change(prompt));
                for (const auto& g : prompt_groups(prompt))
                    if (!g.members.empty() && concern_of_.at(g.members.front()) == c)
                        return {"{\"choice\":\"" + g.group_id + "\"}", {50, 5}};
                return {"{\"choice\":\"NEW\"}", {50, 5}};
            }
            case Purpose::Synthesize: {
                auto members = prompt_members(prompt);
                return {"{\"summary\":\"Address concern " + std::to_string(concern_of_.at(members.front())) + "\"}",
                        {40, 10}};
            }
            case Purpose::Review: {
                auto members = prompt_members(prompt);
                std::map<int, int> counts;
                for (const auto& m : members) ++counts[concern_of_.at(m)];
                int majority = concern_of_.at(members.front());
                for (const auto& [c, n] : counts)
                    if (n > counts[majority]) majority = c;
                std::string outliers;
                for (const auto& m : members)
                    if (concern_of_.at(m) != majority) outliers += (outliers.empty() ? "\"" : ",\"") + m + "\"";
                if (outliers.empty()) return {"{\"verdict\":\"ACCEPT\",\"outliers\":[]}", {60, 5}};
                return {"{\"verdict\":\"REJECT\",\"core_intent\":\"concern " + std::to_string(majority) +
                            "\",\"outliers\":[" + outliers + "]}",
                        {60, 15}};
            }
        }
        return {};
    }

    int calls(Purpose p) {
        std::lock_guard lock(mu_);
        return calls_[p];
    }

private:
    std::map<std::string, int> concern_of_;
    std::string category_;
    std::mutex mu_;
    std::map<Purpose, int> calls_;
};

// Rejects every reviewed group, naming its last member, and always places an
// outlier into the first candidate so groups never dissolve into singletons.
class AlwaysRejectBackend : public ChatBackend {
public:
    ChatResponse complete(const ChatRequest& r) override {
        const std::string& prompt = r.messages.back().content;
        switch (r.purpose) {
            case Purpose::Profile:
                return {"{\"what\":\"w\",\"how\":\"h\",\"why\":\"y\",\"category\":\"Bug Fix\",\"summary\":\"Fix it\"}", {}};
            case Purpose::Judge: return {"1", {}};
            case Purpose::Synthesize: return {"{\"summary\":\"Fix several things\"}", {}};
            case Purpose::Review: {
                auto members = prompt_members(prompt);
                return {"{\"verdict\":\"REJECT\",\"core_intent\":\"x\",\"outliers\":[\"" + members.back() + "\"]}", {}};
            }
        }
        return {};
    }
};

}  // namespace testing_support
