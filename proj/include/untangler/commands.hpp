#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "untangler/backend.hpp"
#include "untangler/dataset.hpp"
#include "untangler/metrics.hpp"
#include "untangler/pipeline.hpp"

namespace untangler {

enum class BackendKind { Live, Scripted, Record };
std::string_view to_string(BackendKind k);
BackendKind backend_kind_from_string(std::string_view s);  // throws ConfigError

struct RunConfig {
    BackendKind backend = BackendKind::Scripted;
    std::string replay_path;
    int bound_k = 1;
    int max_rounds = 3;
    std::string grammar = "auto";
    std::string order = "natural";
    std::string out_dir = "untangler-out";
    int jobs = 1;
    std::uint64_t seed = 0;
    LiveConfig live;  // endpoint, model, key; read from the environment by the CLI

    // Throws ConfigError when the combination cannot run.
    void validate() const;
    PipelineOptions pipeline_options(const std::string& scope = "") const;
    // Settings that shape results. Backend kind, endpoint and model live in
    // the usage ledger instead, so recorded and replayed runs agree.
    nlohmann::ordered_json to_json() const;
};

// The backend a config asks for, metered into one usage ledger.
class BackendSession {
public:
    explicit BackendSession(const RunConfig& config);
    ~BackendSession();

    ChatBackend& backend() { return *metered_; }
    UsageLedger& ledger() { return ledger_; }
    // SHA-256 of the replay file as it stands now; null without one.
    nlohmann::ordered_json replay_json() const;
    nlohmann::ordered_json usage_json() const;

private:
    RunConfig config_;
    std::unique_ptr<ChatBackend> live_;
    std::unique_ptr<ChatBackend> top_;
    UsageLedger ledger_;
    std::unique_ptr<MeteredBackend> metered_;
};

std::string sha256_file_hex(const std::string& path);

struct UntangleInput {
    std::string repo;
    std::string commit;
    std::string diff_path;
    std::string old_dir;
    std::string new_dir;

    CommitSources load() const;
    nlohmann::ordered_json to_json() const;
};

// Result document of one untangled commit (deterministic for a given
// config, input and replay file).
nlohmann::ordered_json result_document(const RunConfig& config, const nlohmann::ordered_json& input,
                                       const nlohmann::ordered_json& replay, const PipelineResult& result);

// Writes result.json and usage.json to config.out_dir. On failure prints a
// diagnostic, writes error.json with the rounds that completed, returns 1.
int cmd_untangle(const RunConfig& config, const UntangleInput& input, std::ostream& err);

// Change graph (JSONL) and MCSs of the input, without any backend calls.
int cmd_graph(const RunConfig& config, const UntangleInput& input, std::ostream& out, std::ostream& err);

struct ManifestEntry {
    std::string composite_id;
    std::vector<std::string> constituents;
    std::string merged_diff;  // paths relative to the manifest's directory
    std::string old_dir;
    std::string new_dir;
    std::string grammar;
    GroundTruth ground_truth;

    CommitSources load(const std::string& base_dir) const;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);

// Writes each composite under out_dir/composites/<id>/ and returns the
// manifest document.
nlohmann::ordered_json write_composites(const std::string& out_dir, const SamplingReport& sampled,
                                        const nlohmann::ordered_json& header);

int cmd_synthesize(const RunConfig& config, const std::string& repo, const std::string& range, int count, int k_min,
                   int k_max, std::ostream& err);

struct EvaluationRow {
    std::string composite_id;
    std::size_t node_count = 0;
    MetricsReport report;
};

struct EvaluationFailure {
    std::string composite_id;
    std::string error;
};

struct EvaluationOutcome {
    std::vector<EvaluationRow> rows;  // manifest order
    std::vector<EvaluationFailure> failures;
};

// "0-1000", "1001-2000", "2001-7000", ">7000" by graph node count.
std::string size_bucket(std::size_t node_count);

// Per-commit rows, overall OA/Avg, the size-bucket table and the failures.
nlohmann::ordered_json evaluation_report(const EvaluationOutcome& outcome);

using BackendFor = std::function<ChatBackend&(const ManifestEntry&)>;

// Untangles and scores every composite on up to `jobs` threads. Replay
// subjects are scoped by composite id. Failures are collected, not thrown.
EvaluationOutcome evaluate_composites(const std::vector<ManifestEntry>& entries, const std::string& base_dir,
                                      const RunConfig& config, const BackendFor& backend_for);

int cmd_evaluate(const RunConfig& config, const std::string& manifest_path, std::ostream& err);

}  // namespace untangler
