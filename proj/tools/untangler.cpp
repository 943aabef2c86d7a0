#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "untangler/commands.hpp"
#include "untangler/errors.hpp"

namespace {

struct SharedFlags {
    std::string backend = "scripted";
    untangler::RunConfig config;
};

void add_run_flags(CLI::App& cmd, SharedFlags& f, bool with_backend) {
    if (with_backend) {
        cmd.add_option("--backend", f.backend, "Model backend")
            ->check(CLI::IsMember({"live", "scripted", "record"}))
            ->capture_default_str();
        cmd.add_option("--replay", f.config.replay_path, "Replay file to read (scripted) or write (record)");
        cmd.add_option("--max-rounds", f.config.max_rounds, "Review rounds before giving up")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        cmd.add_option("--order", f.config.order, "MCS order for grouping")
            ->check(CLI::IsMember({"natural", "reverse", "shuffle"}))
            ->capture_default_str();
        cmd.add_option("--jobs", f.config.jobs, "Composites evaluated concurrently")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
    }
    cmd.add_option("--bound-k", f.config.bound_k, "Backward slicing hops for context")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd.add_option("--grammar", f.config.grammar, "Grammar id: auto, c-family (c, cpp, java, csharp), lines")
        ->capture_default_str();
    cmd.add_option("--out", f.config.out_dir, "Output directory")->capture_default_str();
    cmd.add_option("--seed", f.config.seed, "Seed for sampling and shuffled order")->capture_default_str();
}

void add_input_flags(CLI::App& cmd, untangler::UntangleInput& in) {
    auto* repo = cmd.add_option("--repo", in.repo, "Git repository");
    auto* commit = cmd.add_option("--commit", in.commit, "Commit to untangle");
    auto* diff = cmd.add_option("--diff", in.diff_path, "Unified diff file");
    auto* old_dir = cmd.add_option("--old-dir", in.old_dir, "Tree before the change");
    auto* new_dir = cmd.add_option("--new-dir", in.new_dir, "Tree after the change");
    repo->needs(commit);
    commit->needs(repo);
    diff->needs(old_dir)->needs(new_dir)->excludes(repo);
    old_dir->needs(diff);
    new_dir->needs(diff);
}

void finish_config(SharedFlags& f) {
    f.config.backend = untangler::backend_kind_from_string(f.backend);
    if (f.config.backend != untangler::BackendKind::Scripted) {
        auto live = untangler::LiveConfig::from_env();
        live.max_concurrency = std::max(live.max_concurrency, f.config.jobs);
        f.config.live = live;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Split a tangled commit into atomic concerns"};
    app.set_config("--config", "", "TOML/INI file with flag values");
    app.require_subcommand(1);

    SharedFlags untangle_flags, evaluate_flags, synth_flags, graph_flags;
    untangler::UntangleInput untangle_input, graph_input;
    std::string manifest, repo, range;
    int count = 0, k_min = 2, k_max = 3;

    auto* untangle = app.add_subcommand("untangle", "Untangle one commit");
    add_run_flags(*untangle, untangle_flags, true);
    add_input_flags(*untangle, untangle_input);

    auto* evaluate = app.add_subcommand("evaluate", "Untangle and score a composite corpus");
    add_run_flags(*evaluate, evaluate_flags, true);
    evaluate->add_option("--manifest", manifest, "Manifest written by synthesize")->required();

    auto* synthesize = app.add_subcommand("synthesize", "Build labelled composite commits from history");
    add_run_flags(*synthesize, synth_flags, false);
    synthesize->add_option("--repo", repo, "Git repository")->required();
    synthesize->add_option("--range", range, "Revision range (default HEAD)");
    synthesize->add_option("--count", count, "Composites to build")->required()->check(CLI::NonNegativeNumber);
    synthesize->add_option("--k-min", k_min, "Fewest constituents")->check(CLI::Range(2, 64))->capture_default_str();
    synthesize->add_option("--k-max", k_max, "Most constituents")->check(CLI::Range(2, 64))->capture_default_str();

    auto* graph = app.add_subcommand("graph", "Print the change graph and MCSs as JSON lines");
    add_run_flags(*graph, graph_flags, false);
    add_input_flags(*graph, graph_input);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*untangle) {
            finish_config(untangle_flags);
            return untangler::cmd_untangle(untangle_flags.config, untangle_input, std::cerr);
        }
        if (*evaluate) {
            finish_config(evaluate_flags);
            return untangler::cmd_evaluate(evaluate_flags.config, manifest, std::cerr);
        }
        if (*synthesize)
            return untangler::cmd_synthesize(synth_flags.config, repo, range, count, k_min, k_max, std::cerr);
        if (*graph) return untangler::cmd_graph(graph_flags.config, graph_input, std::cout, std::cerr);
    } catch (const untangler::Error& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return 0;
}
