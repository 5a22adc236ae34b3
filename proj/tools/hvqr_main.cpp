// hvqr: build image-specific knowledge graphs, generate constrained QA
// datasets over them, execute query layouts, and score predictions.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hvqr/cli.hpp"
#include "hvqr/error.hpp"

namespace {

using hvqr::cli::RunConfig;

void add_config_option(CLI::App* cmd, std::string& config_path) {
    // handled by the pre-scan in main; declared so CLI11 accepts it anywhere
    cmd->add_option("--config", config_path, "JSON config file; flags override it");
}

void add_common_options(CLI::App* cmd, RunConfig& config, std::string& ratios_text) {
    cmd->add_option("--seed", config.seed, "run seed; all randomness derives from it");
    cmd->add_option("--ratios", ratios_text, "train,val,test split ratios (default 0.6,0.2,0.2)");
    cmd->add_option("--answer-cap", config.answer_cap,
                    "KB-related (qtype, answer) admission cap (default 100)");
    cmd->add_option("--pair-cap", config.pair_cap,
                    "cross-product cap per executed node (default 10000)");
    cmd->add_flag("--grounded,!--no-grounded", config.grounded,
                  "ground first-order KB answers in the image (default on)");
}

} // namespace

int main(int argc, char** argv) {
    RunConfig config;

    // --config is applied before flag parsing so flags win
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        try {
            if (arg == "--config" && i + 1 < argc) {
                hvqr::cli::apply_config_file(config, argv[i + 1]);
            } else if (arg.rfind("--config=", 0) == 0) {
                hvqr::cli::apply_config_file(config, arg.substr(9));
            }
        } catch (const hvqr::Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return hvqr::cli::exit_code_for(e);
        }
    }

    CLI::App app{"HVQR symbolic toolkit: knowledge graphs, query layouts, QA generation, scoring"};
    app.require_subcommand(1);
    std::string config_path, ratios_text;
    add_config_option(&app, config_path);

    auto* build = app.add_subcommand("build-graph", "ingest KB + scene graphs into a bundle");
    add_config_option(build, config_path);
    build->add_option("--kb", config.kb, "tab-separated knowledge base file")->required();
    build->add_option("--scenes", config.scenes, "scene-graph JSONL file")->required();
    build->add_option("--out", config.out, "bundle output path")->required();

    auto* generate = app.add_subcommand("generate", "generate a QA dataset from a bundle");
    add_config_option(generate, config_path);
    generate->add_option("--bundle", config.bundle, "graph bundle from build-graph");
    generate->add_option("--templates", config.templates, "template file");
    generate->add_option("--out", config.out, "dataset output path (JSON lines)");
    generate->add_option("--order1-chains", config.order1_chains,
                         "max order-1 chains per image (0 = all)");
    generate->add_option("--order2-chains", config.order2_chains,
                         "max order-2 chains per image (0 = all)");
    add_common_options(generate, config, ratios_text);

    auto* execute = app.add_subcommand("execute", "execute a layout or re-answer a dataset");
    add_config_option(execute, config_path);
    execute->add_option("--bundle", config.bundle, "graph bundle");
    execute->add_option("--layout", config.layout, "single layout string to execute");
    execute->add_option("--image", config.image, "image id for --layout");
    execute->add_option("--grounding", config.grounding, "plain|grounded for --layout");
    execute->add_option("--dataset", config.dataset, "dataset to re-answer");
    execute->add_option("--mode", config.mode, "dataset mode: full (stored layouts) | query (re-parse)");
    execute->add_option("--templates", config.templates, "template file (query mode)");
    execute->add_option("--out", config.out, "write per-record predictions here");
    execute->add_option("--pair-cap", config.pair_cap, "cross-product cap per executed node");
    execute->add_flag("--grounded,!--no-grounded", config.grounded,
                      "derive grounded mode for first-order KB records (default on)");

    auto* evaluate = app.add_subcommand("evaluate", "score predictions against a dataset");
    add_config_option(evaluate, config_path);
    evaluate->add_option("--dataset", config.dataset, "gold dataset");
    evaluate->add_option("--predictions", config.predictions, "predictions file");
    evaluate->add_option("--baseline", config.baseline, "compute a baseline instead: qtype-mode");
    evaluate->add_option("--out", config.out, "write the JSON report here");
    evaluate->add_flag("--grounded,!--no-grounded", config.grounded, "grounding toggle");

    auto* stats = app.add_subcommand("stats", "dataset statistics");
    add_config_option(stats, config_path);
    stats->add_option("--dataset", config.dataset, "dataset file");
    stats->add_option("--out", config.out, "write the JSON stats here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!ratios_text.empty()) config.ratios = hvqr::cli::parse_ratios(ratios_text);
        if (build->parsed()) return hvqr::cli::run_build_graph(config, std::cout, std::cerr);
        if (generate->parsed()) return hvqr::cli::run_generate(config, std::cout, std::cerr);
        if (execute->parsed()) return hvqr::cli::run_execute(config, std::cout, std::cerr);
        if (evaluate->parsed()) return hvqr::cli::run_evaluate(config, std::cout, std::cerr);
        if (stats->parsed()) return hvqr::cli::run_stats(config, std::cout, std::cerr);
    } catch (const hvqr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hvqr::cli::exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hvqr::cli::exit_other;
    }
    return hvqr::cli::exit_other;
}
