#pragma once

// Library side of the CLI: each subcommand is a function of (config, streams) so
// tests can drive the exact code path the binary runs. Exit codes: 0 success,
// 2 ingest error, 3 parse error, 4 generation produced zero records, 5
// evaluation mismatch, 1 anything else.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hvqr/bundle.hpp"
#include "hvqr/dataset.hpp"
#include "hvqr/error.hpp"
#include "hvqr/eval.hpp"
#include "hvqr/exec.hpp"
#include "hvqr/graph.hpp"
#include "hvqr/qgen.hpp"
#include "hvqr/templates.hpp"

namespace hvqr::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_other = 1;
inline constexpr int exit_ingest = 2;
inline constexpr int exit_parse = 3;
inline constexpr int exit_empty_generation = 4;
inline constexpr int exit_eval_mismatch = 5;

inline int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Ingest: return exit_ingest;
        case ErrorKind::Lex:
        case ErrorKind::Parse: return exit_parse;
        case ErrorKind::Eval: return exit_eval_mismatch;
        default: return exit_other;
    }
}

struct RunConfig {
    std::string kb;
    std::string scenes;
    std::string bundle;
    std::string templates;
    std::string dataset;
    std::string predictions;
    std::string out;
    std::string layout;
    std::string image;
    std::string mode = "full";        // execute: full | query
    std::string grounding = "plain";  // execute --layout: plain | grounded
    std::string baseline;             // evaluate: qtype-mode
    std::uint64_t seed = 42;
    SplitRatios ratios{};
    std::size_t answer_cap = 100;
    std::size_t pair_cap = 10'000;
    bool grounded = true;
    std::size_t order1_chains = 0;
    std::size_t order2_chains = 0;

    GenConfig gen_config() const {
        GenConfig g;
        g.seed = seed;
        g.ratios = ratios;
        g.answer_cap = answer_cap;
        g.pair_cap = pair_cap;
        g.grounded = grounded;
        g.order1_chains_per_image = order1_chains;
        g.order2_chains_per_image = order2_chains;
        return g;
    }
};

// Optional JSON config file; flags override whatever it sets.
inline void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::Io, "cannot open config file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::Ingest, path.string() + ": " + e.what());
    }
    config.kb = doc.value("kb", config.kb);
    config.scenes = doc.value("scenes", config.scenes);
    config.bundle = doc.value("bundle", config.bundle);
    config.templates = doc.value("templates", config.templates);
    config.out = doc.value("out", config.out);
    config.seed = doc.value("seed", config.seed);
    config.answer_cap = doc.value("answer_cap", config.answer_cap);
    config.pair_cap = doc.value("pair_cap", config.pair_cap);
    config.grounded = doc.value("grounded", config.grounded);
    config.order1_chains = doc.value("order1_chains", config.order1_chains);
    config.order2_chains = doc.value("order2_chains", config.order2_chains);
    if (doc.contains("ratios")) {
        const auto& r = doc["ratios"];
        if (!r.is_array() || r.size() != 3) {
            raise(ErrorKind::Ingest, "config ratios must be [train, val, test]");
        }
        config.ratios = SplitRatios{r[0].get<double>(), r[1].get<double>(), r[2].get<double>()};
    }
}

inline SplitRatios parse_ratios(const std::string& text) {
    std::vector<double> parts;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        const std::string piece =
            comma == std::string::npos ? text.substr(start) : text.substr(start, comma - start);
        try {
            parts.push_back(std::stod(piece));
        } catch (const std::exception&) {
            raise(ErrorKind::Contract, "bad ratio component '" + piece + "'");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (parts.size() != 3) raise(ErrorKind::Contract, "--ratios wants train,val,test");
    return SplitRatios{parts[0], parts[1], parts[2]};
}

// ---------------------------------------------------------------------------
// build-graph

inline int run_build_graph(const RunConfig& config, std::ostream& out, std::ostream& err) {
    if (config.kb.empty() || config.scenes.empty() || config.out.empty()) {
        err << "build-graph requires --kb, --scenes and --out\n";
        return exit_other;
    }
    GraphBundle bundle;
    bundle.kb = load_knowledge_base(config.kb);
    bundle.scenes = load_scene_graphs(config.scenes, bundle.report);
    save_bundle(bundle, config.out);

    std::size_t triplets = 0;
    for (const SceneGraph& s : bundle.scenes) triplets += s.triplets.size();
    out << "bundle written to " << config.out << "\n"
        << "  kb facts: " << bundle.kb->size() << "\n"
        << "  images: " << bundle.scenes.size() << ", image triplets: " << triplets << "\n"
        << "  dropped: " << bundle.report.total_dropped() << " (objects without synset "
        << bundle.report.objects_dropped_no_synset << ", relations without synset "
        << bundle.report.relationships_dropped_no_synset << ", dangling relations "
        << bundle.report.relationships_dropped_dangling << ")\n";
    for (const std::string& line : bundle.report.dropped) out << "  dropped: " << line << "\n";
    return exit_ok;
}

// ---------------------------------------------------------------------------
// generate

inline int run_generate(const RunConfig& config, std::ostream& out, std::ostream& err) {
    if (config.bundle.empty() || config.templates.empty() || config.out.empty()) {
        err << "generate requires --bundle, --templates and --out\n";
        return exit_other;
    }
    GraphBundle bundle = load_bundle(config.bundle);
    TemplateSet templates = TemplateSet::load(config.templates);
    GeneratedDataset generated =
        generate_dataset(bundle.scenes, bundle.kb, templates, config.gen_config());

    const GenReport& r = generated.report;
    out << "images " << r.images << ", chains " << r.chains << ", candidates " << r.candidates
        << "\n"
        << "rejected: no-answer " << r.rejected_no_answer << ", multiple-answers "
        << r.rejected_multiple_answers << ", answer-mismatch " << r.rejected_answer_mismatch
        << ", exec-error " << r.rejected_exec_error << ", ambiguous-support "
        << r.rejected_ambiguous_support << ", uninvertible-text " << r.rejected_uninvertible_text
        << "\n"
        << "capped: answer-cap " << r.dropped_answer_cap << ", triplet-reuse "
        << r.dropped_triplet_reuse << "\n"
        << "admitted: " << r.admitted << "\n";

    if (generated.records.empty()) {
        err << "no records generated\n";
        return exit_empty_generation;
    }
    write_dataset(generated.records, config.out);
    out << "dataset written to " << config.out << "\n";
    out << render_stats(dataset_stats(generated.records));
    return exit_ok;
}

// ---------------------------------------------------------------------------
// execute

namespace detail {

class GraphCache {
public:
    GraphCache(const GraphBundle& bundle) : bundle_(bundle) {
        for (const SceneGraph& s : bundle.scenes) by_id_.emplace(s.image_id, &s);
    }

    const ImageKnowledgeGraph& graph_for(const std::string& image_id) {
        auto cached = graphs_.find(image_id);
        if (cached != graphs_.end()) return cached->second;
        auto scene = by_id_.find(image_id);
        if (scene == by_id_.end()) {
            raise(ErrorKind::Exec, "bundle has no image '" + image_id + "'");
        }
        return graphs_.emplace(image_id, merge(*scene->second, bundle_.kb)).first->second;
    }

private:
    const GraphBundle& bundle_;
    std::map<std::string, const SceneGraph*> by_id_;
    std::map<std::string, ImageKnowledgeGraph> graphs_;
};

} // namespace detail

struct DatasetExecStats {
    std::size_t records = 0;
    std::size_t agreed = 0;
    std::size_t parse_failures = 0;
    std::size_t exec_failures = 0;

    double agreement() const { return records == 0 ? 1.0 : double(agreed) / double(records); }
};

// Re-answer a dataset. FULL takes the stored layout; QUERY re-parses the
// question text through the templates first. Per-record failures are reported
// and the run continues.
inline DatasetExecStats execute_dataset(const GraphBundle& bundle,
                                        const std::vector<QARecord>& records,
                                        const TemplateSet* templates, bool query_mode,
                                        const ExecOptions& options,
                                        std::vector<Prediction>* predictions_out,
                                        std::ostream& err) {
    detail::GraphCache cache(bundle);
    DatasetExecStats stats;
    for (std::size_t id = 0; id < records.size(); ++id) {
        const QARecord& record = records[id];
        ++stats.records;
        try {
            QueryLayout layout = record.layout;
            if (query_mode) {
                layout = parse_question(record.question, *templates);
            }
            AnswerReport report =
                answer(layout, cache.graph_for(record.image_id), record.grounding, options);
            const bool agreed = report.outcome == AnswerReport::Outcome::Single &&
                                report.entry->name == record.answer;
            if (agreed) {
                ++stats.agreed;
            } else {
                err << "record " << id << ": answer mismatch (got "
                    << (report.outcome == AnswerReport::Outcome::Single
                            ? report.entry->name
                            : std::string(report.outcome == AnswerReport::Outcome::None ? "<none>"
                                                                                        : "<multiple>"))
                    << ", want " << record.answer << ")\n";
            }
            if (predictions_out) {
                Prediction p;
                p.record_id = id;
                p.answer = report.outcome == AnswerReport::Outcome::Single ? report.entry->name
                                                                           : "none";
                auto expanded = triplets_from_trace(report.exec.trace);
                p.predicted_triplets.emplace(expanded.begin(), expanded.end());
                predictions_out->push_back(std::move(p));
            }
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Parse || e.kind() == ErrorKind::Lex) {
                ++stats.parse_failures;
            } else {
                ++stats.exec_failures;
            }
            err << "record " << id << ": " << e.what() << "\n";
        }
    }
    return stats;
}

inline int run_execute(const RunConfig& config, std::ostream& out, std::ostream& err) {
    if (config.bundle.empty()) {
        err << "execute requires --bundle\n";
        return exit_other;
    }
    GraphBundle bundle = load_bundle(config.bundle);
    ExecOptions options{.pair_cap = config.pair_cap};

    if (!config.layout.empty()) {
        std::string image_id = config.image;
        if (image_id.empty()) {
            if (bundle.scenes.size() != 1) {
                err << "--image is required when the bundle holds several images\n";
                return exit_other;
            }
            image_id = bundle.scenes.front().image_id;
        }
        detail::GraphCache cache(bundle);
        QueryLayout layout = parse_layout(config.layout);
        ExecResult result = config.grounding == "grounded"
                                ? execute_grounded(layout, cache.graph_for(image_id), options)
                                : execute(layout, cache.graph_for(image_id), options);
        out << to_json(result).dump(1) << "\n";
        return exit_ok;
    }

    if (config.dataset.empty()) {
        err << "execute requires --layout or --dataset\n";
        return exit_other;
    }
    const bool query_mode = config.mode == "query";
    if (config.mode != "full" && config.mode != "query") {
        err << "--mode must be full or query\n";
        return exit_other;
    }
    std::optional<TemplateSet> templates;
    if (query_mode) {
        if (config.templates.empty()) {
            err << "query mode requires --templates\n";
            return exit_other;
        }
        templates = TemplateSet::load(config.templates);
    }
    std::vector<QARecord> records = load_dataset(config.dataset, config.grounded);
    std::vector<Prediction> predictions;
    DatasetExecStats stats =
        execute_dataset(bundle, records, templates ? &*templates : nullptr, query_mode, options,
                        config.out.empty() ? nullptr : &predictions, err);
    if (!config.out.empty()) {
        write_predictions(predictions, config.out);
        out << "predictions written to " << config.out << "\n";
    }
    char line[160];
    std::snprintf(line, sizeof(line), "agreement: %zu/%zu (%.2f%%), parse failures %zu, exec failures %zu\n",
                  stats.agreed, stats.records, stats.agreement() * 100.0, stats.parse_failures,
                  stats.exec_failures);
    out << line;
    return exit_ok;
}

// ---------------------------------------------------------------------------
// evaluate

inline int run_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err) {
    if (config.dataset.empty()) {
        err << "evaluate requires --dataset\n";
        return exit_other;
    }
    std::vector<QARecord> gold = load_dataset(config.dataset, config.grounded);

    std::vector<Prediction> predictions;
    std::vector<QARecord> scored_gold;
    if (!config.baseline.empty()) {
        if (config.baseline != "qtype-mode") {
            err << "unknown baseline '" << config.baseline << "'\n";
            return exit_other;
        }
        std::vector<QARecord> train, test;
        for (const QARecord& r : gold) {
            if (r.split == Split::Train) train.push_back(r);
            if (r.split == Split::Test) test.push_back(r);
        }
        predictions = qtype_mode_baseline(train, test);
        scored_gold = std::move(test);
        out << "qtype-mode baseline: train " << train.size() << " records, test "
            << scored_gold.size() << " records\n";
    } else {
        if (config.predictions.empty()) {
            err << "evaluate requires --predictions (or --baseline qtype-mode)\n";
            return exit_other;
        }
        predictions = load_predictions(config.predictions);
        scored_gold = std::move(gold);
        for (const Prediction& p : predictions) {
            if (p.record_id >= scored_gold.size()) {
                err << "prediction id " << p.record_id << " has no gold record\n";
                return exit_eval_mismatch;
            }
        }
    }

    EvalReport report = evaluate_predictions(predictions, scored_gold);
    out << render_eval_report(report);
    if (!config.out.empty()) {
        std::ofstream file(config.out, std::ios::binary);
        if (!file) raise(ErrorKind::Io, "cannot write report file: " + config.out);
        file << to_json(report).dump(1) << "\n";
        out << "report written to " << config.out << "\n";
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// stats

inline int run_stats(const RunConfig& config, std::ostream& out, std::ostream& err) {
    if (config.dataset.empty()) {
        err << "stats requires --dataset\n";
        return exit_other;
    }
    StatsReport stats = dataset_stats(load_dataset(config.dataset, config.grounded));
    out << render_stats(stats);
    if (!config.out.empty()) {
        std::ofstream file(config.out, std::ios::binary);
        if (!file) raise(ErrorKind::Io, "cannot write stats file: " + config.out);
        file << to_json(stats).dump(1) << "\n";
        out << "stats written to " << config.out << "\n";
    }
    return exit_ok;
}

} // namespace hvqr::cli
