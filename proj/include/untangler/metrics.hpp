#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace untangler {

// Keys are StatementKey strings of changed statements.
struct GroundTruth {
    std::map<std::string, std::string> labels;  // statement -> concern label
    std::size_t total_statements = 0;            // every statement in the commit's graph
    std::size_t concern_count = 0;
};

struct Prediction {
    std::map<std::string, std::string> assignment;  // statement -> predicted group id
};

struct LabelMatching {
    std::map<std::string, std::string> mapping;  // group id -> concern label, injective
    std::size_t correct = 0;                     // changed statements whose group maps to their label
};

// Maximum-weight matching on the group x concern contingency table. Among
// optimal matchings the one that is lexicographically smallest over groups
// (in natural id order, each preferring labels in natural order, then no
// label) wins. Pairs with zero overlap are left out of the mapping. Truth
// keys missing from the prediction are simply never correct.
LabelMatching optimal_label_matching(const Prediction& pred, const GroundTruth& truth);

double acc_changed(const Prediction& pred, const GroundTruth& truth);
double acc_absolute(const Prediction& pred, const GroundTruth& truth);

struct MetricsReport {
    double acc_c = 0.0;
    double acc_a = 0.0;
    std::size_t changed = 0;
    std::size_t correct = 0;
    std::size_t total_statements = 0;
    std::size_t concern_count = 0;
};

// Throws EmptyGroundTruth when the truth has no changed statements.
MetricsReport score(const Prediction& pred, const GroundTruth& truth);

struct Aggregate {
    double oa = 0.0;
    std::optional<double> avg;  // absent when no commit has 2 or 3 concerns
};

// oa weights every changed statement equally; avg is the mean of the
// 2-concern and 3-concern bucket means, empty buckets dropped.
double overall_accuracy(const std::vector<MetricsReport>& reports);
double average_accuracy(const std::vector<MetricsReport>& reports);  // throws NoEligibleCommits
Aggregate aggregate(const std::vector<MetricsReport>& reports);       // avg left empty instead of throwing

// "G2" < "G10"; compares embedded digit runs numerically.
bool natural_less(const std::string& a, const std::string& b);

nlohmann::ordered_json to_json(const MetricsReport& r);
nlohmann::ordered_json to_json(const Aggregate& a);

}  // namespace untangler
