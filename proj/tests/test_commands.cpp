#include "doctest.h"

#include <filesystem>
#include <sstream>

#include "support/agents.hpp"
#include "support/useradd_model.hpp"
#include "support/files.hpp"
#include "support/git_repo.hpp"
#include "support/mock_server.hpp"
#include "support/perfect_oracle.hpp"
#include "untangler/commands.hpp"
#include "untangler/errors.hpp"

using namespace untangler;
using testing_support::read_file;
using testing_support::TempDir;

namespace fs = std::filesystem;

namespace {

std::string fixture_path(const std::string& rel) { return std::string(UNTANGLER_FIXTURES) + "/" + rel; }

UntangleInput useradd_input() {
    return {"", "", fixture_path("useradd/commit.diff"), fixture_path("useradd/old"), fixture_path("useradd/new")};
}

RunConfig scripted(const std::string& replay, const std::string& out) {
    RunConfig c;
    c.backend = BackendKind::Scripted;
    c.replay_path = replay;
    c.out_dir = out;
    return c;
}

nlohmann::json load_json(const fs::path& p) { return nlohmann::json::parse(read_file(p.string())); }

}  // namespace

TEST_CASE("mcs order permutations") {
    CHECK(mcs_order(4, "natural", 0) == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(mcs_order(4, "reverse", 0) == std::vector<std::size_t>{3, 2, 1, 0});
    auto s = mcs_order(20, "shuffle", 9);
    CHECK(s == mcs_order(20, "shuffle", 9));
    CHECK(s != mcs_order(20, "natural", 9));
    auto sorted = s;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == mcs_order(20, "natural", 0));
    CHECK_THROWS_AS(mcs_order(3, "random", 0), std::invalid_argument);
}

TEST_CASE("config validation") {
    RunConfig c;
    CHECK_THROWS_AS(c.validate(), ConfigError);  // scripted without replay
    c.replay_path = "r.jsonl";
    CHECK_NOTHROW(c.validate());
    c.max_rounds = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.max_rounds = 3;
    c.backend = BackendKind::Live;
    CHECK_THROWS_AS(c.validate(), ConfigError);  // no endpoint
    c.live.base_url = "http://localhost:1/v1";
    c.live.model = "m";
    CHECK_NOTHROW(c.validate());
    CHECK(backend_kind_from_string("record") == BackendKind::Record);
    CHECK_THROWS_AS(backend_kind_from_string("cloud"), ConfigError);
}

TEST_CASE("useradd untangles into two concerns with a reject round") {
    TempDir out;
    std::ostringstream err;
    REQUIRE(cmd_untangle(scripted(fixture_path("useradd/replay.jsonl"), out.str()), useradd_input(), err) == 0);
    auto doc = load_json(out.path() / "result.json");
    CHECK(doc["concern_count"] == 2);
    CHECK(doc["concerns"][0]["summary"] == "Correct type compatibility for variable");
    CHECK(doc["concerns"][1]["summary"] == "Correct typo in function call");
    const auto& rounds = doc["refinement"]["rounds"];
    REQUIRE(rounds.size() == 2);
    CHECK(rounds[0]["decisions"][0]["verdict"] == "REJECT");
    CHECK(doc["refinement"]["converged"] == true);
    CHECK(doc["initial_groups"].size() == 1);
    CHECK(doc["replay"]["sha256"].get<std::string>().size() == 64);
    CHECK(doc["config"]["decoding"]["temperature"] == 0.0);
    auto usage = load_json(out.path() / "usage.json");
    CHECK(usage["usage"]["overall"]["requests"] == 5);
}

TEST_CASE("scripted runs are byte-identical") {
    TempDir a, b;
    std::ostringstream err;
    REQUIRE(cmd_untangle(scripted(fixture_path("useradd/replay.jsonl"), a.str()), useradd_input(), err) == 0);
    REQUIRE(cmd_untangle(scripted(fixture_path("useradd/replay.jsonl"), b.str()), useradd_input(), err) == 0);
    CHECK(read_file((a.path() / "result.json").string()) == read_file((b.path() / "result.json").string()));
}

TEST_CASE("empty diff yields no concerns") {
    TempDir dir;
    std::ofstream(dir.path() / "empty.diff").close();
    std::ofstream(dir.path() / "replay.jsonl").close();
    fs::create_directories(dir.path() / "old");
    fs::create_directories(dir.path() / "new");
    UntangleInput in{"", "", (dir.path() / "empty.diff").string(), (dir.path() / "old").string(),
                     (dir.path() / "new").string()};
    std::ostringstream err;
    auto out = (dir.path() / "out").string();
    REQUIRE(cmd_untangle(scripted((dir.path() / "replay.jsonl").string(), out), in, err) == 0);
    auto doc = load_json(fs::path(out) / "result.json");
    CHECK(doc["concern_count"] == 0);
    CHECK(doc["concerns"].empty());
}

TEST_CASE("pipeline errors exit nonzero with a module-tagged diagnostic") {
    TempDir dir;
    auto replay = dir.path() / "short.jsonl";
    // Profiles only: the judge call has no script entry.
    std::string lines;
    {
        std::ifstream in(fixture_path("useradd/replay.jsonl"));
        std::string l;
        while (std::getline(in, l))
            if (l.find("\"profile\"") != std::string::npos) lines += l + "\n";
    }
    std::ofstream(replay) << lines;
    std::ostringstream err;
    auto out = (dir.path() / "out").string();
    CHECK(cmd_untangle(scripted(replay.string(), out), useradd_input(), err) == 1);
    CHECK(err.str().rfind("[backend] MissingScriptEntry", 0) == 0);
    auto error = load_json(fs::path(out) / "error.json");
    CHECK(error["error"].get<std::string>().find("judge") != std::string::npos);
    CHECK(error["completed_rounds"]["rounds"].empty());

    std::ostringstream err2;
    CHECK(cmd_untangle(scripted((dir.path() / "missing.jsonl").string(), out), useradd_input(), err2) == 1);
    CHECK(err2.str().find("[cli] ConfigError") != std::string::npos);
}

TEST_CASE("repository input untangles a single commit") {
    TempDir dir;
    testing_support::GitRepo repo(dir.path() / "repo");
    repo.write("src/useradd.c", read_file(fixture_path("useradd/old/src/useradd.c")));
    repo.commit("base", 1700000000);
    repo.write("src/useradd.c", read_file(fixture_path("useradd/new/src/useradd.c")));
    auto head = repo.commit("fix", 1700000060);
    UntangleInput in{repo.root().string(), head, "", "", ""};
    std::ostringstream err;
    auto out = (dir.path() / "out").string();
    REQUIRE(cmd_untangle(scripted(fixture_path("useradd/replay.jsonl"), out), in, err) == 0);
    CHECK(load_json(fs::path(out) / "result.json")["concern_count"] == 2);
}

TEST_CASE("graph command prints nodes, edges and MCSs") {
    std::ostringstream out, err;
    RunConfig c;
    REQUIRE(cmd_graph(c, useradd_input(), out, err) == 0);
    std::istringstream lines(out.str());
    std::string line;
    std::map<std::string, int> records;
    while (std::getline(lines, line)) ++records[nlohmann::json::parse(line)["record"].get<std::string>()];
    CHECK(records["mcs"] == 2);
    CHECK(records["node"] > 0);
    CHECK(records["seed"] == 4);
}

TEST_CASE("record against a mock endpoint, then replay byte-identically") {
    testing_support::MockChatServer server(testing_support::useradd_model);
    TempDir dir;
    RunConfig rec;
    rec.backend = BackendKind::Record;
    rec.replay_path = (dir.path() / "run.jsonl").string();
    rec.out_dir = (dir.path() / "recorded").string();
    rec.live.base_url = server.base_url();
    rec.live.model = "mock-model";
    rec.live.api_key = "secret";
    std::ostringstream err;
    REQUIRE(cmd_untangle(rec, useradd_input(), err) == 0);
    CHECK(server.bodies().size() == 5);

    RunConfig replay = scripted(rec.replay_path, (dir.path() / "replayed").string());
    REQUIRE(cmd_untangle(replay, useradd_input(), err) == 0);
    CHECK(server.bodies().size() == 5);
    auto recorded = read_file(rec.out_dir + "/result.json");
    CHECK(recorded == read_file(replay.out_dir + "/result.json"));
    CHECK(nlohmann::json::parse(recorded)["concern_count"] == 2);
    CHECK(load_json(fs::path(rec.out_dir) / "usage.json")["model"] == "mock-model");
}

TEST_CASE("size buckets") {
    CHECK(size_bucket(0) == "0-1000");
    CHECK(size_bucket(1000) == "0-1000");
    CHECK(size_bucket(1001) == "1001-2000");
    CHECK(size_bucket(2000) == "1001-2000");
    CHECK(size_bucket(2001) == "2001-7000");
    CHECK(size_bucket(7000) == "2001-7000");
    CHECK(size_bucket(7001) == ">7000");
}

TEST_CASE("evaluation report from hand-built predictions") {
    // Commit A: 10 changed, 8 correct, 2 concerns. Commit B: 2 changed, 0 correct, 3 concerns.
    auto build = [](int changed, int correct, std::vector<std::string> labels) {
        GroundTruth t;
        Prediction p;
        for (int i = 0; i < changed; ++i) {
            std::string key = "f.c@new:" + std::to_string(i + 1) + "-" + std::to_string(i + 1);
            t.labels[key] = labels[static_cast<std::size_t>(i) % labels.size()];
        }
        t.total_statements = static_cast<std::size_t>(changed) + 5;
        t.concern_count = labels.size();
        int i = 0;
        for (const auto& [key, label] : t.labels) p.assignment[key] = i++ < correct ? "G" + label : "Gx" + label;
        return std::pair{p, t};
    };
    auto [pa, ta] = build(10, 8, {"0", "1"});
    // A: 8 statements grouped by label, 2 in stray groups; stray groups cannot
    // steal labels already matched, so the matching yields exactly 8.
    GroundTruth tb;
    tb.labels = {{"g.c@new:1-1", "0"}, {"g.c@new:2-2", "1"}};
    tb.total_statements = 7;
    tb.concern_count = 3;
    Prediction pb;  // nothing predicted for B

    auto ra = score(pa, ta);
    REQUIRE(ra.correct == 8);
    auto rb = score(pb, tb);
    REQUIRE(rb.correct == 0);
    EvaluationOutcome outcome{{{"A", 50, ra}, {"B", 1500, rb}}, {{"C", "[intent] ProfileFailure: x"}}};
    auto rep = evaluation_report(outcome);
    CHECK(rep["aggregate"]["oa"].get<double>() == doctest::Approx(8.0 / 12.0));
    CHECK(rep["aggregate"]["avg"].get<double>() == doctest::Approx(0.4));
    CHECK(rep["failed"] == 1);
    CHECK(rep["buckets"][0]["commits"] == 1);
    CHECK(rep["buckets"][1]["commits"] == 1);
    CHECK(rep["buckets"][2]["oa"].is_null());
    CHECK(rep["rows"][1]["bucket"] == "1001-2000");
}

TEST_CASE("synthesize then evaluate with the ground-truth oracle") {
    TempDir dir;
    testing_support::GitRepo repo(dir.path() / "repo");
    testing_support::FunctionRepo fr;
    fr.build(repo, 12);

    RunConfig synth;
    synth.seed = 11;
    synth.out_dir = (dir.path() / "corpus").string();
    std::ostringstream err;
    REQUIRE(cmd_synthesize(synth, repo.root().string(), "", 5, 2, 3, err) == 0);
    auto manifest_path = synth.out_dir + "/manifest.json";
    auto first = read_file(manifest_path);
    auto manifest = nlohmann::json::parse(first);
    REQUIRE(manifest["composites"].size() == 5);
    CHECK(manifest["seed"] == 11);
    for (const auto& c : manifest["composites"]) {
        auto k = c["constituents"].size();
        CHECK((k == 2 || k == 3));
    }
    CHECK(manifest["split"]["train"].size() + manifest["split"]["validation"].size() +
              manifest["split"]["test"].size() ==
          13);

    synth.out_dir = (dir.path() / "corpus2").string();
    REQUIRE(cmd_synthesize(synth, repo.root().string(), "", 5, 2, 3, err) == 0);
    CHECK(read_file(synth.out_dir + "/manifest.json") == first);

    auto entries = read_manifest(manifest_path);
    std::map<std::string, std::unique_ptr<testing_support::OracleBackend>> backends;
    for (const auto& e : entries)
        backends[e.composite_id] = std::make_unique<testing_support::OracleBackend>(
            testing_support::concerns_of_mcss(e.load(dir.str() + "/corpus"), e.grammar, 1, e.ground_truth));
    RunConfig eval;
    eval.jobs = 3;
    auto outcome = evaluate_composites(entries, dir.str() + "/corpus", eval,
                                       [&](const ManifestEntry& e) -> ChatBackend& { return *backends.at(e.composite_id); });
    CHECK(outcome.failures.empty());
    REQUIRE(outcome.rows.size() == 5);
    for (const auto& row : outcome.rows) CHECK(row.report.acc_c == 1.0);
    auto rep = evaluation_report(outcome);
    CHECK(rep["aggregate"]["oa"] == 1.0);
    CHECK(rep["aggregate"]["avg"] == 1.0);
}

TEST_CASE("synthesize with count zero writes an empty manifest") {
    TempDir dir;
    testing_support::GitRepo repo(dir.path() / "repo");
    testing_support::FunctionRepo fr;
    fr.build(repo, 3);
    RunConfig synth;
    synth.out_dir = (dir.path() / "corpus").string();
    std::ostringstream err;
    REQUIRE(cmd_synthesize(synth, repo.root().string(), "", 0, 2, 3, err) == 0);
    CHECK(load_json(fs::path(synth.out_dir) / "manifest.json")["composites"].empty());
}

TEST_CASE("evaluate records failures and keeps going") {
    TempDir dir;
    testing_support::GitRepo repo(dir.path() / "repo");
    testing_support::FunctionRepo fr;
    fr.build(repo, 6);
    RunConfig synth;
    synth.seed = 5;
    synth.out_dir = (dir.path() / "corpus").string();
    std::ostringstream err;
    REQUIRE(cmd_synthesize(synth, repo.root().string(), "", 2, 2, 2, err) == 0);
    auto entries = read_manifest(synth.out_dir + "/manifest.json");
    REQUIRE(entries.size() == 2);

    // Script only the first composite, scoped by its id, via the oracle's own answers.
    testing_support::OracleBackend oracle(
        testing_support::concerns_of_mcss(entries[0].load(synth.out_dir), entries[0].grammar, 1, entries[0].ground_truth));
    auto replay = dir.path() / "replay.jsonl";
    {
        RecordingBackend recorder(oracle, replay.string());
        RunConfig c;
        evaluate_composites({entries[0]}, synth.out_dir, c, [&](const ManifestEntry&) -> ChatBackend& { return recorder; });
    }
    RunConfig eval = scripted(replay.string(), (dir.path() / "eval").string());
    std::ostringstream err2;
    REQUIRE(cmd_evaluate(eval, synth.out_dir + "/manifest.json", err2) == 0);
    auto doc = load_json(dir.path() / "eval" / "evaluation.json");
    CHECK(doc["failed"] == 1);
    CHECK(doc["rows"].size() == 1);
    CHECK(doc["rows"][0]["acc_c"] == 1.0);
    CHECK(doc["failures"][0]["error"].get<std::string>().rfind("[backend]", 0) == 0);
    CHECK(doc["failures"][0]["composite_id"] == entries[1].composite_id);
}
