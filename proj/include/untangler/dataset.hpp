#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "untangler/graph.hpp"
#include "untangler/metrics.hpp"

namespace untangler {

struct AtomicCommit {
    std::string commit_id;
    std::int64_t timestamp = 0;  // committer time, seconds since epoch
    std::string diff_text;
    // path -> (old content, new content); an absent side is empty
    std::map<std::string, std::pair<std::string, std::string>> files;

    CommitSources sources() const { return {diff_text, files}; }
};

// Non-merge commits of `commit_range` (any git revision range; empty means
// HEAD) in ascending timestamp order. Root commits diff against the empty
// tree. Throws NotARepository or MissingObject.
std::vector<AtomicCommit> ingest_repo(const std::string& repo_path, const std::string& commit_range);

struct CompositeCommit {
    std::string composite_id;
    std::vector<std::string> constituents;  // commit ids, application order
    std::string merged_diff;
    // path -> (content before the first constituent, after the last)
    std::map<std::string, std::pair<std::string, std::string>> files;
    GroundTruth ground_truth;  // labels are constituent indices "0", "1", ...
    std::string grammar;

    CommitSources sources() const { return {merged_diff, files}; }
};

// Folds constituents applied in order into one commit. Each constituent must
// start from the file contents the previous ones left behind
// (NonSequentialConstituents). Constituents whose edits intersect or touch,
// or land in one statement, raise OverlappingChanges; one that contributes no
// changed statement raises EmptyConstituent. Ground truth is keyed by the
// statements of the composite's change graph under `grammar_id`.
CompositeCommit synthesize_composite(const std::vector<AtomicCommit>& constituents,
                                     const std::string& grammar_id = "auto");

struct SplitResult {
    std::vector<AtomicCommit> train, validation, test;
};

// Sorted by (timestamp, commit id); cut points are floor(n * cumulative
// fraction). Fractions must sum to 1.
SplitResult chronological_split(std::vector<AtomicCommit> commits, double train = 0.8, double validation = 0.1,
                                double test = 0.1);

struct SamplingReport {
    std::vector<CompositeCommit> composites;
    int attempts = 0;
    int skipped = 0;  // windows rejected by synthesize_composite
};

// Draws windows of k consecutive commits (k uniform in [k_min, k_max]) with a
// seeded generator until `count` distinct composites are built or attempts
// run out.
SamplingReport sample_composites(const std::vector<AtomicCommit>& commits, int count, int k_min, int k_max,
                                 std::uint64_t seed, const std::string& grammar_id = "auto");

nlohmann::ordered_json to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

}  // namespace untangler
