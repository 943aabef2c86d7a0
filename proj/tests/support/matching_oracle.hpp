#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "untangler/metrics.hpp"

namespace testing_support {

// Exhaustive search over every injective partial map group -> label.
struct BruteForceMatch {
    long long best = 0;
    std::map<std::string, std::string> lexmin_mapping;  // zero-overlap pairs dropped
};

inline BruteForceMatch brute_force_match(const untangler::Prediction& pred, const untangler::GroundTruth& truth) {
    std::vector<std::string> groups, labels;
    for (const auto& [k, l] : truth.labels) {
        if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
        auto it = pred.assignment.find(k);
        if (it != pred.assignment.end() && std::find(groups.begin(), groups.end(), it->second) == groups.end())
            groups.push_back(it->second);
    }
    std::sort(groups.begin(), groups.end(), untangler::natural_less);
    std::sort(labels.begin(), labels.end(), untangler::natural_less);
    std::vector<std::vector<long long>> table(groups.size(), std::vector<long long>(labels.size(), 0));
    for (const auto& [k, l] : truth.labels) {
        auto it = pred.assignment.find(k);
        if (it == pred.assignment.end()) continue;
        auto g = std::find(groups.begin(), groups.end(), it->second) - groups.begin();
        auto c = std::find(labels.begin(), labels.end(), l) - labels.begin();
        ++table[g][c];
    }

    // choice[g] in 0..L, where L means "unmatched" and sorts last.
    const int L = static_cast<int>(labels.size());
    std::vector<int> choice(groups.size(), 0), best_choice;
    long long best = -1;
    std::vector<bool> used(labels.size(), false);
    auto rec = [&](auto&& self, std::size_t g, long long acc) -> void {
        if (g == groups.size()) {
            // Enumeration is in lexicographic order, so the first optimum found wins.
            if (acc > best) best = acc, best_choice = choice;
            return;
        }
        for (int c = 0; c <= L; ++c) {
            if (c < L && used[c]) continue;
            choice[g] = c;
            if (c < L) used[c] = true;
            self(self, g + 1, acc + (c < L ? table[g][c] : 0));
            if (c < L) used[c] = false;
        }
    };
    rec(rec, 0, 0);

    BruteForceMatch out;
    out.best = std::max(best, 0LL);
    for (std::size_t g = 0; g < groups.size(); ++g)
        if (best_choice[g] < L && table[g][best_choice[g]] > 0) out.lexmin_mapping[groups[g]] = labels[best_choice[g]];
    return out;
}

struct RandomInstance {
    untangler::Prediction pred;
    untangler::GroundTruth truth;
};

inline RandomInstance random_instance(std::mt19937& rng, int max_groups = 6, int max_concerns = 6,
                                      int max_statements = 30) {
    std::uniform_int_distribution<int> ng(1, max_groups), nc(1, max_concerns), ns(1, max_statements);
    int groups = ng(rng), concerns = nc(rng), statements = ns(rng);
    RandomInstance inst;
    std::set<std::string> distinct;
    for (int s = 0; s < statements; ++s) {
        std::string key = "f.c@new:" + std::to_string(s + 1) + "-" + std::to_string(s + 1);
        std::string label = "C" + std::to_string(std::uniform_int_distribution<int>(1, concerns)(rng));
        inst.truth.labels[key] = label;
        distinct.insert(label);
        inst.pred.assignment[key] = "G" + std::to_string(std::uniform_int_distribution<int>(1, groups)(rng));
    }
    inst.truth.concern_count = distinct.size();
    inst.truth.total_statements = static_cast<std::size_t>(statements) + std::uniform_int_distribution<int>(0, 20)(rng);
    return inst;
}

}  // namespace testing_support
