#include "untangler/commands.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "untangler/diff.hpp"
#include "untangler/errors.hpp"

namespace fs = std::filesystem;

namespace untangler {

namespace {

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string read_if_exists(const fs::path& p) { return fs::is_regular_file(p) ? read_text(p) : std::string(); }

void write_text(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

void write_json(const fs::path& p, const nlohmann::ordered_json& j) { write_text(p, j.dump(2) + "\n"); }

// Sources of every file the diff touches, read from two directory trees.
CommitSources load_from_dirs(std::string diff_text, const fs::path& old_dir, const fs::path& new_dir) {
    CommitSources s;
    for (const auto& [path, regions] : regions_by_file(parse_unified_diff(diff_text)))
        s.files[path] = {read_if_exists(old_dir / path), read_if_exists(new_dir / path)};
    s.diff_text = std::move(diff_text);
    return s;
}

std::string diagnostic(const std::exception& e) {
    if (dynamic_cast<const Error*>(&e)) return e.what();
    return std::string("[cli] ") + e.what();
}

}  // namespace

std::string_view to_string(BackendKind k) {
    switch (k) {
        case BackendKind::Live: return "live";
        case BackendKind::Scripted: return "scripted";
        case BackendKind::Record: return "record";
    }
    return "scripted";
}

BackendKind backend_kind_from_string(std::string_view s) {
    if (s == "live") return BackendKind::Live;
    if (s == "scripted") return BackendKind::Scripted;
    if (s == "record") return BackendKind::Record;
    throw ConfigError("unknown backend '" + std::string(s) + "' (live, scripted, record)");
}

void RunConfig::validate() const {
    if (max_rounds < 1) throw ConfigError("max_rounds must be at least 1");
    if (bound_k < 0) throw ConfigError("bound_k must be non-negative");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    if (backend != BackendKind::Live && replay_path.empty())
        throw ConfigError(std::string(to_string(backend)) + " backend needs a replay path");
    if (backend != BackendKind::Scripted) {
        if (live.base_url.empty()) throw ConfigError("live endpoint needs a base URL (UNTANGLER_BASE_URL)");
        if (live.model.empty()) throw ConfigError("live endpoint needs a model name (UNTANGLER_MODEL)");
    }
    mcs_order(0, order, seed);  // rejects unknown orders
}

PipelineOptions RunConfig::pipeline_options(const std::string& scope) const {
    PipelineOptions o;
    o.bound_k = bound_k;
    o.max_rounds = max_rounds;
    o.grammar = grammar;
    o.order = order;
    o.seed = seed;
    o.agents.scope = scope;
    return o;
}

nlohmann::ordered_json RunConfig::to_json() const {
    Decoding d;
    return {{"bound_k", bound_k},
            {"max_rounds", max_rounds},
            {"grammar", grammar},
            {"order", order},
            {"seed", seed},
            {"jobs", jobs},
            {"decoding", {{"temperature", d.temperature}, {"top_p", d.top_p}, {"n", d.n}}}};
}

BackendSession::BackendSession(const RunConfig& config) : config_(config) {
    switch (config.backend) {
        case BackendKind::Scripted:
            top_ = std::make_unique<ScriptedBackend>(ScriptedBackend::from_file(config.replay_path));
            break;
        case BackendKind::Live:
            live_ = std::make_unique<LiveBackend>(config.live);
            break;
        case BackendKind::Record:
            live_ = std::make_unique<LiveBackend>(config.live);
            top_ = std::make_unique<RecordingBackend>(*live_, config.replay_path);
            break;
    }
    metered_ = std::make_unique<MeteredBackend>(top_ ? *top_ : *live_, ledger_);
}

BackendSession::~BackendSession() = default;

std::string sha256_file_hex(const std::string& path) {
    std::string data = read_text(path);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed for " + path);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

nlohmann::ordered_json BackendSession::replay_json() const {
    if (config_.backend == BackendKind::Live) return nullptr;
    return {{"path", config_.replay_path}, {"sha256", sha256_file_hex(config_.replay_path)}};
}

nlohmann::ordered_json BackendSession::usage_json() const {
    nlohmann::ordered_json j{{"tool_version", kToolVersion}, {"backend", std::string(to_string(config_.backend))}};
    if (config_.backend != BackendKind::Scripted) {
        j["base_url"] = config_.live.base_url;
        j["model"] = config_.live.model;
    }
    j["usage"] = ledger_.to_json();
    return j;
}

CommitSources UntangleInput::load() const {
    const bool from_repo = !repo.empty() || !commit.empty();
    const bool from_diff = !diff_path.empty() || !old_dir.empty() || !new_dir.empty();
    if (from_repo == from_diff) throw ConfigError("give either --repo and --commit, or --diff with --old-dir and --new-dir");
    if (from_repo) {
        if (repo.empty() || commit.empty()) throw ConfigError("--repo and --commit go together");
        auto commits = ingest_repo(repo, commit + "^!");
        if (commits.size() != 1) throw MissingObject(commit + " is not a single non-merge commit");
        return commits.front().sources();
    }
    if (diff_path.empty() || old_dir.empty() || new_dir.empty())
        throw ConfigError("--diff needs both --old-dir and --new-dir");
    return load_from_dirs(read_text(diff_path), old_dir, new_dir);
}

nlohmann::ordered_json UntangleInput::to_json() const {
    if (!repo.empty()) return {{"repo", repo}, {"commit", commit}};
    return {{"diff", diff_path}, {"old_dir", old_dir}, {"new_dir", new_dir}};
}

nlohmann::ordered_json result_document(const RunConfig& config, const nlohmann::ordered_json& input,
                                       const nlohmann::ordered_json& replay, const PipelineResult& result) {
    return {{"tool_version", kToolVersion},
            {"config", config.to_json()},
            {"replay", replay},
            {"input", input},
            {"statements", result.graph.statement_count()},
            {"nodes", result.graph.nodes().size()},
            {"mcs_count", result.mcss.size()},
            {"concern_count", result.final_state.groups().size()},
            {"concerns", concerns_json(result)},
            {"initial_groups", to_json(result.initial)},
            {"refinement", to_json(result.trace)}};
}

int cmd_untangle(const RunConfig& config, const UntangleInput& input, std::ostream& err) {
    std::unique_ptr<BackendSession> session;
    RefinementTrace progress;
    const fs::path out(config.out_dir);
    try {
        config.validate();
        CommitSources sources = input.load();
        session = std::make_unique<BackendSession>(config);
        PipelineResult result = run_pipeline(sources, session->backend(), config.pipeline_options(), &progress);
        write_json(out / "result.json", result_document(config, input.to_json(), session->replay_json(), result));
        write_json(out / "usage.json", session->usage_json());
        return 0;
    } catch (const std::exception& e) {
        err << diagnostic(e) << "\n";
        try {
            write_json(out / "error.json", {{"error", diagnostic(e)}, {"completed_rounds", to_json(progress)}});
            if (session) write_json(out / "usage.json", session->usage_json());
        } catch (const std::exception& e2) {
            err << diagnostic(e2) << "\n";
        }
        return 1;
    }
}

int cmd_graph(const RunConfig& config, const UntangleInput& input, std::ostream& out, std::ostream& err) {
    try {
        if (config.bound_k < 0) throw ConfigError("bound_k must be non-negative");
        ChangeGraph g = build_change_graph(input.load(), config.grammar);
        out << g.serialize();
        for (const auto& mcs : build_mcss(g, config.bound_k)) {
            nlohmann::ordered_json j{{"record", "mcs"}};
            const auto body = to_json(mcs);
            for (const auto& [k, v] : body.items()) j[k] = v;
            out << j.dump() << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        err << diagnostic(e) << "\n";
        return 1;
    }
}

CommitSources ManifestEntry::load(const std::string& base_dir) const {
    fs::path base(base_dir);
    return load_from_dirs(read_text(base / merged_diff), base / old_dir, base / new_dir);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    auto doc = nlohmann::json::parse(read_text(path));
    std::vector<ManifestEntry> out;
    for (const auto& c : doc.at("composites")) {
        ManifestEntry e;
        e.composite_id = c.at("composite_id").get<std::string>();
        e.constituents = c.at("constituents").get<std::vector<std::string>>();
        e.merged_diff = c.at("merged_diff").get<std::string>();
        e.old_dir = c.at("old_dir").get<std::string>();
        e.new_dir = c.at("new_dir").get<std::string>();
        e.grammar = c.value("grammar", std::string("auto"));
        e.ground_truth = ground_truth_from_json(c.at("ground_truth"));
        out.push_back(std::move(e));
    }
    return out;
}

nlohmann::ordered_json write_composites(const std::string& out_dir, const SamplingReport& sampled,
                                        const nlohmann::ordered_json& header) {
    nlohmann::ordered_json manifest = header;
    manifest["attempts"] = sampled.attempts;
    manifest["skipped"] = sampled.skipped;
    auto list = nlohmann::ordered_json::array();
    for (const auto& c : sampled.composites) {
        const std::string rel = "composites/" + c.composite_id;
        const fs::path dir = fs::path(out_dir) / rel;
        write_text(dir / "merged.diff", c.merged_diff);
        for (const auto& [path, contents] : c.files) {
            if (!contents.first.empty()) write_text(dir / "old" / path, contents.first);
            if (!contents.second.empty()) write_text(dir / "new" / path, contents.second);
        }
        fs::create_directories(dir / "old");
        fs::create_directories(dir / "new");
        list.push_back({{"composite_id", c.composite_id},
                        {"constituents", c.constituents},
                        {"merged_diff", rel + "/merged.diff"},
                        {"old_dir", rel + "/old"},
                        {"new_dir", rel + "/new"},
                        {"grammar", c.grammar},
                        {"ground_truth", to_json(c.ground_truth)}});
    }
    manifest["composites"] = list;
    return manifest;
}

int cmd_synthesize(const RunConfig& config, const std::string& repo, const std::string& range, int count, int k_min,
                   int k_max, std::ostream& err) {
    try {
        if (count < 0) throw ConfigError("count must be non-negative");
        if (k_min < 2 || k_max < k_min) throw ConfigError("k range must satisfy 2 <= min <= max");
        auto commits = ingest_repo(repo, range);
        auto split = chronological_split(commits);
        auto ids = [](const std::vector<AtomicCommit>& cs) {
            std::vector<std::string> out;
            for (const auto& c : cs) out.push_back(c.commit_id);
            return out;
        };
        nlohmann::ordered_json header{{"tool_version", kToolVersion},
                                      {"repo", repo},
                                      {"range", range},
                                      {"seed", config.seed},
                                      {"count", count},
                                      {"k_min", k_min},
                                      {"k_max", k_max},
                                      {"grammar", config.grammar},
                                      {"split",
                                       {{"train", ids(split.train)},
                                        {"validation", ids(split.validation)},
                                        {"test", ids(split.test)}}}};
        auto sampled = sample_composites(commits, count, k_min, k_max, config.seed, config.grammar);
        auto manifest = write_composites(config.out_dir, sampled, header);
        write_json(fs::path(config.out_dir) / "manifest.json", manifest);
        if (static_cast<int>(sampled.composites.size()) < count)
            err << "[dataset] built " << sampled.composites.size() << " of " << count << " composites ("
                << sampled.skipped << " windows rejected)\n";
        return 0;
    } catch (const std::exception& e) {
        err << diagnostic(e) << "\n";
        return 1;
    }
}

std::string size_bucket(std::size_t node_count) {
    if (node_count <= 1000) return "0-1000";
    if (node_count <= 2000) return "1001-2000";
    if (node_count <= 7000) return "2001-7000";
    return ">7000";
}

nlohmann::ordered_json evaluation_report(const EvaluationOutcome& outcome) {
    auto summarize = [](const std::vector<MetricsReport>& reports) {
        nlohmann::ordered_json j{{"commits", reports.size()}, {"oa", nullptr}, {"avg", nullptr}};
        std::size_t changed = 0;
        for (const auto& r : reports) changed += r.changed;
        j["changed"] = changed;
        if (changed > 0) {
            auto a = aggregate(reports);
            j["oa"] = a.oa;
            if (a.avg) j["avg"] = *a.avg;
        }
        return j;
    };

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    std::vector<MetricsReport> all;
    std::map<std::string, std::vector<MetricsReport>> by_bucket;
    for (const auto& row : outcome.rows) {
        nlohmann::ordered_json j{{"composite_id", row.composite_id},
                                 {"nodes", row.node_count},
                                 {"bucket", size_bucket(row.node_count)}};
        const auto metrics = to_json(row.report);
        for (const auto& [k, v] : metrics.items()) j[k] = v;
        rows.push_back(std::move(j));
        all.push_back(row.report);
        by_bucket[size_bucket(row.node_count)].push_back(row.report);
    }
    auto buckets = nlohmann::ordered_json::array();
    for (const char* name : {"0-1000", "1001-2000", "2001-7000", ">7000"}) {
        const auto summary = summarize(by_bucket[name]);
        nlohmann::ordered_json b{{"bucket", name}};
        for (const auto& [k, v] : summary.items()) b[k] = v;
        buckets.push_back(std::move(b));
    }
    auto failures = nlohmann::ordered_json::array();
    for (const auto& f : outcome.failures) failures.push_back({{"composite_id", f.composite_id}, {"error", f.error}});

    return {{"rows", rows},
            {"aggregate", summarize(all)},
            {"buckets", buckets},
            {"failed", outcome.failures.size()},
            {"failures", failures}};
}

EvaluationOutcome evaluate_composites(const std::vector<ManifestEntry>& entries, const std::string& base_dir,
                                      const RunConfig& config, const BackendFor& backend_for) {
    struct Slot {
        std::optional<EvaluationRow> row;
        std::optional<EvaluationFailure> failure;
    };
    std::vector<Slot> slots(entries.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < entries.size(); i = next++) {
            const auto& e = entries[i];
            try {
                PipelineOptions options = config.pipeline_options(e.composite_id);
                options.grammar = e.grammar;  // ground truth was keyed under this grammar
                auto result = run_pipeline(e.load(base_dir), backend_for(e), options);
                slots[i].row = EvaluationRow{e.composite_id, result.graph.nodes().size(),
                                             score(prediction_of(result), e.ground_truth)};
            } catch (const std::exception& ex) {
                slots[i].failure = EvaluationFailure{e.composite_id, diagnostic(ex)};
            }
        }
    };
    const int threads = std::max(1, std::min<int>(config.jobs, static_cast<int>(entries.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    EvaluationOutcome out;
    for (auto& s : slots) {
        if (s.row) out.rows.push_back(std::move(*s.row));
        if (s.failure) out.failures.push_back(std::move(*s.failure));
    }
    return out;
}

int cmd_evaluate(const RunConfig& config, const std::string& manifest_path, std::ostream& err) {
    try {
        config.validate();
        auto entries = read_manifest(manifest_path);
        BackendSession session(config);
        auto base = fs::path(manifest_path).parent_path().string();
        if (base.empty()) base = ".";
        auto outcome = evaluate_composites(entries, base, config,
                                           [&](const ManifestEntry&) -> ChatBackend& { return session.backend(); });
        for (const auto& f : outcome.failures) err << f.composite_id << ": " << f.error << "\n";
        nlohmann::ordered_json doc{{"tool_version", kToolVersion},
                                   {"config", config.to_json()},
                                   {"replay", session.replay_json()},
                                   {"manifest", manifest_path}};
        const auto report = evaluation_report(outcome);
        for (const auto& [k, v] : report.items()) doc[k] = v;
        const fs::path out(config.out_dir);
        write_json(out / "evaluation.json", doc);
        write_json(out / "usage.json", session.usage_json());
        return 0;
    } catch (const std::exception& e) {
        err << diagnostic(e) << "\n";
        return 1;
    }
}

}  // namespace untangler
