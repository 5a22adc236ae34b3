// Acceptance suite: end-to-end checks over a synthetic corpus, one printed
// pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hvqr/bundle.hpp"
#include "hvqr/cli.hpp"
#include "hvqr/dataset.hpp"
#include "hvqr/eval.hpp"
#include "hvqr/exec.hpp"
#include "hvqr/qgen.hpp"
#include "hvqr/query.hpp"
#include "hvqr/templates.hpp"
#include "support/builders.hpp"
#include "support/corpus.hpp"
#include "support/layout_gen.hpp"
#include "support/oracles.hpp"

using namespace hvqr;
using namespace hvqr::testing;

namespace {

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool condition, const std::string& message) {
    if (!condition) throw CheckFailure(message);
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Env {
    TemplateSet templates = TemplateSet::load(std::string(HVQR_DATA_DIR) + "/templates.json");
    Corpus corpus;
    GraphBundle bundle;                 // in-memory view over the corpus
    GeneratedDataset generated;
    double generate_seconds = 0.0;
};

// ---------------------------------------------------------------------------

std::string criterion_full_oracle(Env& env) {
    expect(env.corpus.scenes.size() >= 200, "corpus must hold >= 200 images");
    expect(env.corpus.image_triplets >= 2000, "corpus must hold >= 2000 image triplets");
    expect(env.corpus.kb->size() >= 5000, "corpus must hold >= 5000 KB facts");
    expect(env.generated.records.size() >= 5000,
           fmt("generated only %zu records, need >= 5000", env.generated.records.size()));

    const auto start = Clock::now();
    std::ostringstream errors;
    cli::DatasetExecStats stats =
        cli::execute_dataset(env.bundle, env.generated.records, nullptr, false, ExecOptions{},
                             nullptr, errors);
    const double reexec_seconds = seconds_since(start);

    expect(stats.records == env.generated.records.size(), "every record must be re-executed");
    expect(stats.agreed == stats.records,
           fmt("%zu of %zu records disagree with their stored answer",
               stats.records - stats.agreed, stats.records));
    expect(stats.parse_failures == 0 && stats.exec_failures == 0,
           "re-execution must not fail on any record");
    const double total = env.generate_seconds + reexec_seconds;
    expect(total < 30.0, fmt("pipeline took %.1fs, budget is 30s", total));
    return fmt("%zu records, 100%% stored-answer agreement, generate %.1fs + re-execute %.1fs",
               stats.records, env.generate_seconds, reexec_seconds);
}

std::string criterion_query_inversion(Env& env) {
    std::ostringstream errors;
    cli::DatasetExecStats stats =
        cli::execute_dataset(env.bundle, env.generated.records, &env.templates, true,
                             ExecOptions{}, nullptr, errors);
    expect(stats.parse_failures == 0,
           fmt("%zu questions failed to parse back", stats.parse_failures));
    expect(stats.agreed == stats.records,
           fmt("%zu of %zu re-parsed questions answered wrongly", stats.records - stats.agreed,
               stats.records));

    // re-parsed layouts are not merely execution-equivalent: they are identical
    std::size_t mismatched_layouts = 0;
    for (const QARecord& record : env.generated.records) {
        if (!(parse_question(record.question, env.templates) == record.layout)) {
            ++mismatched_layouts;
        }
    }
    expect(mismatched_layouts == 0, fmt("%zu layouts differ after inversion", mismatched_layouts));
    return fmt("%zu questions re-parsed, 100%% agreement, 0 layout mismatches", stats.records);
}

std::string criterion_constraint_audit(Env& env) {
    std::map<std::pair<int, std::string>, std::size_t> kb_answer_counts;
    std::set<NameTriple> capped_facts;
    std::size_t duplicate_facts = 0;
    for (const QARecord& record : env.generated.records) {
        if (record.kb_related) kb_answer_counts[{record.qtype, record.answer}]++;
        if (auto fact = ConstraintLedger::kb_fact_of(record)) {
            if (!capped_facts.insert(*fact).second) ++duplicate_facts;
        }
    }
    std::size_t worst = 0;
    for (const auto& [key, count] : kb_answer_counts) worst = std::max(worst, count);
    expect(worst <= 100, fmt("a KB-related (qtype, answer) pair appears %zu times", worst));
    expect(duplicate_facts == 0,
           fmt("%zu knowledge facts reused within qtypes {2,3,5}", duplicate_facts));

    const GenReport& report = env.generated.report;
    expect(report.dropped_answer_cap >= 50,
           fmt("answer cap triggered only %zu times, need >= 50", report.dropped_answer_cap));
    expect(report.dropped_triplet_reuse >= 50,
           fmt("triplet cap triggered only %zu times, need >= 50", report.dropped_triplet_reuse));
    return fmt("audit clean; caps triggered %zu (answer) / %zu (triplet reuse) times",
               report.dropped_answer_cap, report.dropped_triplet_reuse);
}

std::string criterion_parser_roundtrip(Env&) {
    Rng rng(0xACCE9709);
    for (int i = 0; i < 10'000; ++i) {
        QueryLayout layout = random_layout(rng, 4);
        expect(parse_shift_reduce(tokenize(serialize(layout))) == layout,
               "round-trip mismatch at sample " + std::to_string(i));
    }
    for (int i = 0; i < 10'000; ++i) {
        QueryLayout layout = random_apply_layout(rng, 3);
        TokenStream broken = mutate_tokens(tokenize(serialize(layout)), rng);
        bool threw = false;
        try {
            (void)parse_shift_reduce(broken);
        } catch (const Error&) {
            threw = true;
        }
        expect(threw, "mutated stream parsed without error at sample " + std::to_string(i));
    }
    return "10000 round-trips exact, 10000 mutations all rejected";
}

std::string criterion_brute_force_equivalence(Env&) {
    Rng rng(0xB407CE);
    const std::vector<std::string> entities = {"a", "b", "c", "d", "e", "f"};
    const std::vector<std::string> relations = {"r1", "r2", "r3"};
    std::size_t graphs = 0, layouts = 0;

    while (graphs < 500) {
        std::vector<std::array<std::string, 3>> image_facts, kb_facts;
        const std::size_t n_image = 1 + draw_below(rng, 60);
        const std::size_t n_kb = 1 + draw_below(rng, 139);
        for (std::size_t i = 0; i < n_image; ++i) {
            image_facts.push_back({entities[draw_below(rng, entities.size())],
                                   relations[draw_below(rng, relations.size())],
                                   entities[draw_below(rng, entities.size())]});
        }
        for (std::size_t i = 0; i < n_kb; ++i) {
            kb_facts.push_back({entities[draw_below(rng, entities.size())],
                                relations[draw_below(rng, relations.size())],
                                entities[draw_below(rng, entities.size())]});
        }
        ImageKnowledgeGraph graph = make_graph("img", image_facts, kb_facts);
        expect(graph.image_triplets().size() + graph.kb().size() <= 200,
               "graph exceeds the 200-triplet bound");
        ++graphs;

        auto leaf = [&](EntryKind kind) {
            if (kind == EntryKind::Relationship) {
                return QueryLayout::leaf(make_relationship(relations[draw_below(rng, relations.size())]));
            }
            return QueryLayout::leaf(make_entity(entities[draw_below(rng, entities.size())]));
        };
        for (int probe = 0; probe < 4; ++probe) {
            const QuerySymbol outer = random_symbol(rng);
            QueryLayout layout = [&] {
                if (draw_below(rng, 2) == 0) {
                    return QueryLayout::apply(outer, leaf(left_kind(outer)), leaf(right_kind(outer)));
                }
                const QuerySymbol inner = random_symbol(rng);
                QueryLayout nested =
                    QueryLayout::apply(inner, leaf(left_kind(inner)), leaf(right_kind(inner)));
                if (output_kind(inner) == left_kind(outer)) {
                    return QueryLayout::apply(outer, std::move(nested), leaf(right_kind(outer)));
                }
                return QueryLayout::apply(outer, leaf(left_kind(outer)), std::move(nested));
            }();
            ExecOptions options{.pair_cap = 1u << 24};
            expect(execute(layout, graph, options).answers.names() == brute_execute(layout, graph),
                   "executor disagrees with the exhaustive evaluator");
            ++layouts;
        }
    }
    return fmt("%zu graphs x %zu layouts agree with the exhaustive evaluator", graphs, layouts);
}

std::string criterion_explanation_fidelity(Env& env) {
    // the worked metric example: left [apple, orange], right [on], out [plate]
    TraceStep step;
    step.symbol = QuerySymbol{Slot::Object, Scope::ImageOnly};
    step.left_inputs = EntrySet({make_entity("apple"), make_entity("orange")});
    step.right_inputs = EntrySet({make_relationship("on")});
    step.outputs = EntrySet({make_entity("plate")});
    std::set<NameTriple> predicted = triplets_from_trace(Trace{{step}});
    const std::set<NameTriple> wanted{{"apple", "on", "plate"}, {"orange", "on", "plate"}};
    expect(predicted == wanted, "metric expansion differs from the worked example");

    QARecord gold;
    gold.image_id = "img";
    gold.question = "q";
    gold.answer = "plate";
    gold.qtype = 1;
    gold.supporting_facts = {make_triplet("apple", "on", "plate", Source::image("img"))};
    Prediction p{0, "plate", std::vector<NameTriple>(predicted.begin(), predicted.end())};
    EvalReport half = evaluate_predictions({p}, {gold});
    expect(std::abs(half.explanation_overall - 0.5) < 1e-12,
           fmt("worked example scores %.4f, want 0.5", half.explanation_overall));

    // oracle predictions over the generated corpus score 1.0 on both metrics
    std::vector<Prediction> oracle;
    std::ostringstream errors;
    cli::DatasetExecStats stats = cli::execute_dataset(
        env.bundle, env.generated.records, nullptr, false, ExecOptions{}, &oracle, errors);
    expect(stats.agreed == stats.records, "oracle predictions must agree everywhere");
    EvalReport report = evaluate_predictions(oracle, env.generated.records);
    expect(report.accuracy() == 1.0, fmt("oracle accuracy %.4f != 1.0", report.accuracy()));
    expect(report.has_explanations, "oracle predictions must carry triplets");
    expect(report.explanation_overall == 1.0,
           fmt("oracle explanation score %.6f != 1.0", report.explanation_overall));
    expect(report.explanation_kb_related == 1.0 && report.explanation_kb_not_related == 1.0,
           "oracle explanation score must be 1.0 in both KB classes");
    return fmt("worked example scores 0.5; oracle scores 1.0 on %zu records", stats.records);
}

std::string criterion_baseline_sanity(Env&) {
    auto record = [](int qtype, const std::string& answer, bool kb) {
        QARecord r;
        r.image_id = "img";
        r.question = "q";
        r.answer = answer;
        r.qtype = qtype;
        r.order = qtype <= 2 ? 1 : 2;
        r.kb_related = kb;
        return r;
    };

    // engineered 40% modal share in every qtype
    std::vector<QARecord> train, test;
    for (int qtype = 0; qtype <= 6; ++qtype) {
        for (int copy = 0; copy < 40; ++copy) {
            train.push_back(record(qtype, "modal" + std::to_string(qtype), false));
            test.push_back(record(qtype, "modal" + std::to_string(qtype), false));
        }
        for (int alt = 0; alt < 6; ++alt) {
            for (int copy = 0; copy < 10; ++copy) {
                train.push_back(record(qtype, fmt("alt%d_%d", qtype, alt), false));
                test.push_back(record(qtype, fmt("alt%d_%d", qtype, alt), false));
            }
        }
    }
    double accuracy = score_answers(qtype_mode_baseline(train, test), test).accuracy();
    expect(std::abs(accuracy * 100.0 - 40.0) <= 2.0,
           fmt("modal fixture accuracy %.2f%%, want 40 +- 2", accuracy * 100.0));
    const double modal_accuracy = accuracy;

    // capped-uniform KB-related fixture: 25 answers x 20 records per qtype
    train.clear();
    test.clear();
    for (int qtype = 0; qtype <= 6; ++qtype) {
        for (int a = 0; a < 25; ++a) {
            for (int copy = 0; copy < 20; ++copy) {
                train.push_back(record(qtype, fmt("kbans%d_%02d", qtype, a), true));
                test.push_back(record(qtype, fmt("kbans%d_%02d", qtype, a), true));
            }
        }
    }
    EvalReport uniform = score_answers(qtype_mode_baseline(train, test), test);
    expect(uniform.accuracy() * 100.0 < 5.0,
           fmt("capped-uniform accuracy %.2f%%, want < 5", uniform.accuracy() * 100.0));
    for (const auto& [key, cell] : uniform.cells) {
        expect(cell.accuracy() * 100.0 < 5.0, "every KB-related cell must stay under 5%");
    }
    return fmt("modal fixture %.1f%%, capped-uniform fixture %.1f%%", modal_accuracy * 100.0,
               uniform.accuracy() * 100.0);
}

std::string criterion_determinism(Env&) {
    CorpusSpec small;
    small.images = 30;
    small.entity_pool = 80;
    small.hubs = 20;
    small.bulk_kb_facts = 300;
    small.cold_kb_facts = 100;
    Corpus corpus = synthesize_corpus(small);

    TempDir dir;
    GraphBundle bundle{corpus.kb, corpus.scenes, {}};
    const auto bundle_path = dir.file("bundle.json");
    save_bundle(bundle, bundle_path);

    auto generate_to = [&](const std::string& name, std::uint64_t seed) {
        cli::RunConfig config;
        config.bundle = bundle_path.string();
        config.templates = std::string(HVQR_DATA_DIR) + "/templates.json";
        config.out = dir.file(name).string();
        config.seed = seed;
        std::ostringstream out, err;
        const int code = cli::run_generate(config, out, err);
        expect(code == 0, fmt("generate exited %d: %s", code, err.str().c_str()));
        std::ifstream in(dir.file(name), std::ios::binary);
        std::stringstream bytes;
        bytes << in.rdbuf();
        return bytes.str();
    };

    const std::string first = generate_to("a.jsonl", 41);
    const std::string second = generate_to("b.jsonl", 41);
    const std::string third = generate_to("c.jsonl", 43);
    expect(!first.empty(), "generated dataset must not be empty");
    expect(first == second, "same seed must produce byte-identical datasets");
    expect(first != third, "different seeds must produce different datasets");
    return fmt("seed 41 twice: %zu bytes identical; seed 43 differs", first.size());
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<std::string(Env&)> run;
    };

    Env env;
    int failures = 0;

    // shared setup: corpus + one full generation pass
    try {
        env.corpus = synthesize_corpus(CorpusSpec{});
        env.bundle = GraphBundle{env.corpus.kb, env.corpus.scenes, {}};
        GenConfig config;
        config.seed = 977;
        const auto start = Clock::now();
        env.generated = generate_dataset(env.corpus.scenes, env.corpus.kb, env.templates, config);
        env.generate_seconds = seconds_since(start);
    } catch (const std::exception& e) {
        std::cout << "[FAIL] setup: " << e.what() << "\n";
        return 1;
    }

    const std::vector<Criterion> criteria = {
        {"1. FULL oracle reproduction", criterion_full_oracle},
        {"2. QUERY inversion losslessness", criterion_query_inversion},
        {"3. constraint audit", criterion_constraint_audit},
        {"4. parser round-trip property", criterion_parser_roundtrip},
        {"5. executor brute-force equivalence", criterion_brute_force_equivalence},
        {"6. explanation metric fidelity", criterion_explanation_fidelity},
        {"7. baseline sanity", criterion_baseline_sanity},
        {"8. generation determinism", criterion_determinism},
    };

    for (const Criterion& criterion : criteria) {
        try {
            const std::string detail = criterion.run(env);
            std::cout << "[PASS] " << criterion.name << " — " << detail << "\n";
        } catch (const std::exception& e) {
            std::cout << "[FAIL] " << criterion.name << " — " << e.what() << "\n";
            ++failures;
        }
    }

    std::cout << (failures == 0 ? "all criteria passed" : fmt("%d criterion(s) failed", failures))
              << "\n";
    return failures;
}
