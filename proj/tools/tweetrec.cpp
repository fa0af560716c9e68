#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tweetrec/io.hpp"
#include "tweetrec/pipeline.hpp"
#include "tweetrec/synthetic.hpp"

namespace fs = std::filesystem;
using namespace tweetrec;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string stages = "all";
    bool force = false;
    bool quiet = false;
};

PipelineConfig load_config(const GlobalOptions& g) {
    if (g.config_path.empty()) throw ConfigError("--config is required");
    std::string text;
    try {
        text = read_file(g.config_path);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    PipelineConfig cfg = parse_pipeline_config(text, fs::path(g.config_path).parent_path());
    apply_env_overrides(cfg);
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

int report(const PipelineResult& r) {
    for (const auto& s : r.stages)
        for (const auto& a : s.artifacts) std::cerr << (s.skipped ? "kept    " : "wrote   ") << a.string() << "\n";
    if (!r.summary.empty()) std::cout << r.summary;
    if (!r.ok()) std::cerr << "error: " << r.message << "\n";
    return r.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tweet recommendation for news articles with creator-context dual encoders"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--config", g.config_path, "Pipeline configuration (JSON)");
    app.add_option("--seed", g.seed, "Override the configured seed");
    app.add_option("--stages", g.stages, "Comma-separated stages for 'run', or 'all'");
    app.add_flag("--force", g.force, "Recompute stages whose artifacts already exist");
    app.add_flag("-q,--quiet", g.quiet, "Suppress progress messages");

    std::vector<std::pair<CLI::App*, Stage>> stage_commands;
    for (Stage s : kAllStages) {
        const std::string name(stage_name(s));
        stage_commands.emplace_back(app.add_subcommand(name, "Run the " + name + " stage"), s);
    }
    auto* run_cmd = app.add_subcommand("run", "Run the stages selected by --stages");
    auto* tune_cmd = app.add_subcommand("tune-alpha", "Grid-search the Late Fusion weight on dev MRR");
    auto* ablate_cmd = app.add_subcommand("ablate", "Leave-one-out creator attribute ablation");

    auto* compare_cmd = app.add_subcommand("compare", "Paired comparison of two run files");
    std::string run_a, run_b, qrels_path, metric_name_arg = "MRR";
    compare_cmd->add_option("run_a", run_a, "First run file")->required();
    compare_cmd->add_option("run_b", run_b, "Second run file")->required();
    compare_cmd->add_option("--qrels", qrels_path, "Qrels file (article_id<TAB>tweet_id)")->required();
    compare_cmd->add_option("--metric", metric_name_arg, "P@1, P@5, R@100, R@1000 or MRR");

    auto* cost_cmd = app.add_subcommand("bench-cost", "Print attention-cost estimates per model kind");
    std::optional<std::uint64_t> cost_n, cost_m;
    cost_cmd->add_option("--n", cost_n, "Tweet length in tokens");
    cost_cmd->add_option("--m", cost_m, "Creator context length in tokens");

    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic corpus fixture and a matching config");
    SyntheticConfig sc;
    std::string synth_out;
    bool no_plant = false;
    bool no_html = false;
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--articles", sc.num_articles, "Number of articles");
    synth_cmd->add_option("--tweets", sc.num_tweets, "Number of tweets");
    synth_cmd->add_option("--creators", sc.num_creators, "Number of creators");
    synth_cmd->add_option("--topics", sc.num_topics, "Number of topics");
    synth_cmd->add_option("--synth-seed", sc.seed, "Generator seed");
    synth_cmd->add_flag("--no-plant-bio", no_plant, "Give every embedded tweet a random creator");
    synth_cmd->add_flag("--no-html", no_html, "Omit raw_html from articles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalidConfig;
    }

    PipelineOptions options;
    options.force = g.force;
    options.log = g.quiet ? nullptr : &std::cerr;

    try {
        for (const auto& [cmd, stage] : stage_commands) {
            if (!cmd->parsed()) continue;
            const Stage stages[] = {stage};
            return report(execute_pipeline(load_config(g), stages, options));
        }
        if (run_cmd->parsed()) {
            const auto stages = parse_stage_list(g.stages);
            return report(execute_pipeline(load_config(g), stages, options));
        }
        if (tune_cmd->parsed()) return report(run_alpha_tuning(load_config(g), options));
        if (ablate_cmd->parsed()) return report(run_attribute_ablation(load_config(g), options));
        if (compare_cmd->parsed()) {
            const Metric metric = parse_metric(metric_name_arg);
            try {
                std::cout << format_comparison(compare_run_files(run_a, run_b, qrels_path, metric));
            } catch (const std::exception& e) {
                std::cerr << "error: compare: " << e.what() << "\n";
                return kExitFailure;
            }
            return kExitOk;
        }
        if (cost_cmd->parsed()) {
            std::uint64_t n = 128, m = 128;
            if (!g.config_path.empty()) {
                const PipelineConfig cfg = load_config(g);
                n = cfg.cost_n;
                m = cfg.cost_m;
            }
            std::cout << format_cost_table(cost_n.value_or(n), cost_m.value_or(m));
            return kExitOk;
        }
        if (synth_cmd->parsed()) {
            sc.plant_bio = !no_plant;
            SyntheticCorpus corpus = generate_synthetic_corpus(sc);
            if (no_html)
                for (auto& a : corpus.articles) a.raw_html.clear();
            const fs::path dir(synth_out);
            write_synthetic_fixture(corpus, dir);
            PipelineConfig cfg;
            cfg.paths = {"articles.jsonl", "tweets.jsonl", "creators.jsonl", "vocab.txt", "dictionary.tsv", "out"};
            write_file_atomic(dir / "config.json", pipeline_config_to_json(cfg));
            std::cerr << "wrote fixture and config.json to " << dir.string() << "\n";
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: invalid config: " << e.what() << "\n";
        return kExitInvalidConfig;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}
