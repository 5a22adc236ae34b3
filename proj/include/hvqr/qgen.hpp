#pragma once

// Constrained QA generation.
//
// Pipeline per image: enumerate linked triplet chains, instantiate every
// profile-matching template, validate through the executor (exactly one
// answer, equal to the chain's), then apply two generation-time filters that
// the oracle metrics force: the trace expansion must equal the chain facts
// (so oracle explanations score 1.0) and the question text must invert back
// to its own layout (so QUERY-mode re-parsing is lossless). A final
// sequential pass enforces the two bias caps: a KB-related (qtype, answer)
// may be admitted at most answer_cap times, and a knowledge fact may back at
// most one qtype-2/3/5 question. Everything is deterministic in the run seed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hvqr/dataset.hpp"
#include "hvqr/entry.hpp"
#include "hvqr/error.hpp"
#include "hvqr/eval.hpp"
#include "hvqr/exec.hpp"
#include "hvqr/graph.hpp"
#include "hvqr/kb.hpp"
#include "hvqr/query.hpp"
#include "hvqr/rng.hpp"
#include "hvqr/scene.hpp"
#include "hvqr/templates.hpp"
#include "hvqr/triplet.hpp"

namespace hvqr {

// One or two continuously linked facts: hop 1's object is hop 2's subject.
struct Chain {
    std::vector<Triplet> hops;

    bool kb_related() const {
        for (const Triplet& t : hops) {
            if (t.source.is_kb()) return true;
        }
        return false;
    }

    bool operator==(const Chain&) const = default;
};

// All valid chains of the given order, in seed-shuffled order. Order-1 chains
// are single facts: every image fact, plus KB facts anchored to the image
// through their subject. Order-2 chains pair an image fact with a continuation
// from either side; at most one hop is KB-sourced and it is never hop 1.
inline std::vector<Chain> sample_chains(const ImageKnowledgeGraph& graph, int order,
                                        std::uint64_t rng_seed) {
    if (order != 1 && order != 2) raise(ErrorKind::Contract, "chain order must be 1 or 2");
    std::vector<Chain> chains;

    if (order == 1) {
        for (const Triplet& t : graph.image_triplets()) chains.push_back(Chain{{t}});
        for (const Entry& e : graph.visible_entities()) {
            for (std::uint32_t i : graph.kb().index().with_subject(e.name)) {
                chains.push_back(Chain{{graph.kb().triplets()[i]}});
            }
        }
    } else {
        for (const Triplet& first : graph.image_triplets()) {
            // KB continuations, then image continuations, both in canonical order
            for (std::uint32_t i : graph.kb().index().with_subject(first.object.name)) {
                chains.push_back(Chain{{first, graph.kb().triplets()[i]}});
            }
            for (const Triplet& second : graph.image_triplets()) {
                if (second.subject.name != first.object.name || second == first) continue;
                chains.push_back(Chain{{first, second}});
            }
        }
    }

    Rng rng(rng_seed);
    seeded_shuffle(chains, rng);
    return chains;
}

struct Candidate {
    std::string image_id;
    std::string question;
    Entry answer;
    QueryLayout layout = QueryLayout::leaf(Entry{"none", EntryKind::Entity});
    Chain chain;
    const Template* tpl = nullptr;
    GroundingMode grounding = GroundingMode::Plain;
};

namespace detail {

inline Binding binding_for_chain(const Chain& chain, int order) {
    Binding binding;
    const Triplet& first = chain.hops.at(0);
    if (order == 1) {
        binding[Placeholder::A] = first.subject;
        binding[Placeholder::R] = first.relation;
        binding[Placeholder::B] = first.object;
        return binding;
    }
    const Triplet& second = chain.hops.at(1);
    binding[Placeholder::A] = first.subject;
    binding[Placeholder::R1] = first.relation;
    binding[Placeholder::B] = first.object;
    binding[Placeholder::R2] = second.relation;
    binding[Placeholder::C] = second.object;
    return binding;
}

} // namespace detail

// Does the chain's per-hop sourcing match the template's query scopes?
inline bool profile_matches(const Template& tpl, const Chain& chain) {
    if (static_cast<std::size_t>(tpl.order) != chain.hops.size()) return false;
    for (int hop = 0; hop < tpl.order; ++hop) {
        const bool hop_is_kb = chain.hops[hop].source.is_kb();
        if ((tpl.hop_scope[hop] == Scope::KBOnly) != hop_is_kb) return false;
    }
    return true;
}

// Substitute the chain into a template: question text, chain-derived answer,
// executable layout. Arity and slot kinds are enforced.
inline Candidate instantiate(const Chain& chain, const Template& tpl, const TemplateSet& set) {
    if (static_cast<std::size_t>(tpl.order) != chain.hops.size()) {
        raise(ErrorKind::Contract, "chain arity " + std::to_string(chain.hops.size()) +
                                       " does not match template order " + std::to_string(tpl.order));
    }
    Binding binding = detail::binding_for_chain(chain, tpl.order);
    Candidate candidate;
    candidate.question = render_question(tpl, binding, set);
    candidate.answer = binding.at(tpl.answer_slot);
    candidate.layout = instantiate_layout(tpl.skeleton, binding);
    candidate.chain = chain;
    candidate.tpl = &tpl;
    return candidate;
}

enum class RejectReason {
    NoAnswer,
    MultipleAnswers,
    AnswerMismatch,
    ExecError,
    AmbiguousSupport,
    UninvertibleText,
};

struct Validation {
    bool accepted = false;
    RejectReason reason = RejectReason::NoAnswer;
    AnswerReport report;
};

// Executor-backed validity filter: exactly one answer, equal to the chain's.
inline Validation validate(const Candidate& candidate, const ImageKnowledgeGraph& graph,
                           const ExecOptions& options = {}) {
    Validation v;
    try {
        v.report = answer(candidate.layout, graph, candidate.grounding, options);
    } catch (const Error&) {
        v.reason = RejectReason::ExecError;
        return v;
    }
    switch (v.report.outcome) {
        case AnswerReport::Outcome::None:
            v.reason = RejectReason::NoAnswer;
            return v;
        case AnswerReport::Outcome::Multiple:
            v.reason = RejectReason::MultipleAnswers;
            return v;
        case AnswerReport::Outcome::Single:
            break;
    }
    if (!(*v.report.entry == candidate.answer)) {
        v.reason = RejectReason::AnswerMismatch;
        return v;
    }
    v.accepted = true;
    return v;
}

// ---------------------------------------------------------------------------
// Bias constraints

struct ConstraintLedger {
    std::size_t answer_cap = 100;
    std::map<std::pair<int, std::string>, std::size_t> answer_counts;   // KB-related only
    std::set<NameTriple> used_kb_triplets;                              // qtypes {2,3,5}

    static bool triplet_capped_qtype(int qtype) {
        return qtype == 2 || qtype == 3 || qtype == 5;
    }

    // The KB fact a capped record would consume, if any.
    static std::optional<NameTriple> kb_fact_of(const QARecord& record) {
        if (!triplet_capped_qtype(record.qtype)) return std::nullopt;
        for (const Triplet& t : record.supporting_facts) {
            if (t.source.is_kb()) return name_triple(t);
        }
        return std::nullopt;
    }

    enum class Decision { Admit, DropAnswerCap, DropTripletReuse };

    Decision admit(const QARecord& record) {
        const std::pair<int, std::string> key{record.qtype, record.answer};
        if (record.kb_related && answer_counts[key] >= answer_cap) return Decision::DropAnswerCap;
        auto fact = kb_fact_of(record);
        if (fact && used_kb_triplets.count(*fact) > 0) return Decision::DropTripletReuse;
        if (record.kb_related) ++answer_counts[key];
        if (fact) used_kb_triplets.insert(*fact);
        return Decision::Admit;
    }
};

struct GenReport {
    std::size_t images = 0;
    std::size_t chains = 0;
    std::size_t candidates = 0;
    std::size_t rejected_no_answer = 0;
    std::size_t rejected_multiple_answers = 0;
    std::size_t rejected_answer_mismatch = 0;
    std::size_t rejected_exec_error = 0;
    std::size_t rejected_ambiguous_support = 0;
    std::size_t rejected_uninvertible_text = 0;
    std::size_t dropped_answer_cap = 0;
    std::size_t dropped_triplet_reuse = 0;
    std::size_t admitted = 0;
};

// Sequential cap pass; ledger state advances only on admission.
inline std::vector<QARecord> apply_constraints(const std::vector<QARecord>& candidates,
                                               ConstraintLedger& ledger, GenReport& report) {
    std::vector<QARecord> admitted;
    admitted.reserve(candidates.size());
    for (const QARecord& record : candidates) {
        switch (ledger.admit(record)) {
            case ConstraintLedger::Decision::Admit:
                admitted.push_back(record);
                ++report.admitted;
                break;
            case ConstraintLedger::Decision::DropAnswerCap:
                ++report.dropped_answer_cap;
                break;
            case ConstraintLedger::Decision::DropTripletReuse:
                ++report.dropped_triplet_reuse;
                break;
        }
    }
    return admitted;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitRatios {
    double train = 0.6;
    double val = 0.2;
    double test = 0.2;
};

// Per-image assignment: image ids are sorted, seed-shuffled, and cut at
// cumulative-rounded boundaries, so proportions are exact to within one image
// and all questions of an image share a split.
inline void assign_splits(std::vector<QARecord>& records, const SplitRatios& ratios,
                          std::uint64_t rng_seed) {
    if (records.empty()) raise(ErrorKind::Contract, "cannot assign splits to an empty record set");
    const double sum = ratios.train + ratios.val + ratios.test;
    if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 || std::abs(sum - 1.0) > 1e-9) {
        raise(ErrorKind::Contract, "split ratios must be non-negative and sum to 1");
    }

    std::set<std::string> unique_ids;
    for (const QARecord& r : records) unique_ids.insert(r.image_id);
    std::vector<std::string> ids(unique_ids.begin(), unique_ids.end());
    Rng rng(derive_seed(rng_seed, "split-assignment"));
    seeded_shuffle(ids, rng);

    const std::size_t n = ids.size();
    const auto boundary = [&](double cumulative) {
        return static_cast<std::size_t>(cumulative * double(n) + 0.5);
    };
    const std::size_t train_end = boundary(ratios.train);
    const std::size_t val_end = boundary(ratios.train + ratios.val);

    std::map<std::string, Split> split_of;
    for (std::size_t i = 0; i < n; ++i) {
        split_of[ids[i]] = i < train_end ? Split::Train : i < val_end ? Split::Val : Split::Test;
    }
    for (QARecord& r : records) r.split = split_of[r.image_id];
}

// ---------------------------------------------------------------------------
// Dataset statistics

struct StatsReport {
    std::size_t total = 0;
    std::size_t unique_questions = 0;
    // (order, qtype) -> per-split counts [train, val, test]
    std::map<std::pair<int, int>, std::array<std::size_t, 3>> grid;
    std::size_t kb_related = 0;
    std::size_t kb_not_related = 0;
    std::size_t answer_vocab_kb = 0;
    std::size_t answer_vocab_not_kb = 0;
    std::map<std::size_t, std::size_t> question_length_histogram;   // whitespace tokens
    double mean_question_length = 0.0;
    std::vector<std::pair<std::string, std::size_t>> top_answers_kb;
    std::vector<std::pair<std::string, std::size_t>> top_answers_not_kb;
};

inline StatsReport dataset_stats(const std::vector<QARecord>& records, std::size_t top_k = 15) {
    StatsReport stats;
    std::set<std::string> unique_questions;
    std::set<std::string> vocab_kb, vocab_not;
    std::map<std::string, std::size_t> counts_kb, counts_not;
    std::size_t length_sum = 0;

    for (const QARecord& r : records) {
        ++stats.total;
        unique_questions.insert(r.question);
        stats.grid[{r.order, r.qtype}][static_cast<int>(r.split)]++;
        if (r.kb_related) {
            ++stats.kb_related;
            vocab_kb.insert(r.answer);
            counts_kb[r.answer]++;
        } else {
            ++stats.kb_not_related;
            vocab_not.insert(r.answer);
            counts_not[r.answer]++;
        }
        const std::size_t words = detail::split_words(r.question).size();
        stats.question_length_histogram[words]++;
        length_sum += words;
    }

    stats.unique_questions = unique_questions.size();
    stats.answer_vocab_kb = vocab_kb.size();
    stats.answer_vocab_not_kb = vocab_not.size();
    stats.mean_question_length = records.empty() ? 0.0 : double(length_sum) / double(records.size());

    auto top = [&](const std::map<std::string, std::size_t>& counts) {
        std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
        std::stable_sort(items.begin(), items.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        if (items.size() > top_k) items.resize(top_k);
        return items;
    };
    stats.top_answers_kb = top(counts_kb);
    stats.top_answers_not_kb = top(counts_not);
    return stats;
}

inline nlohmann::ordered_json to_json(const StatsReport& stats) {
    nlohmann::ordered_json grid = nlohmann::ordered_json::array();
    for (const auto& [key, row] : stats.grid) {
        grid.push_back({{"order", key.first},
                        {"qtype", key.second},
                        {"train", row[0]},
                        {"val", row[1]},
                        {"test", row[2]},
                        {"total", row[0] + row[1] + row[2]}});
    }
    nlohmann::ordered_json histogram = nlohmann::ordered_json::object();
    for (const auto& [len, count] : stats.question_length_histogram) {
        histogram[std::to_string(len)] = count;
    }
    auto tops = [](const std::vector<std::pair<std::string, std::size_t>>& items) {
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        for (const auto& [answer, count] : items) out.push_back({answer, count});
        return out;
    };
    return nlohmann::ordered_json{
        {"total", stats.total},
        {"unique_questions", stats.unique_questions},
        {"by_order_qtype_split", std::move(grid)},
        {"kb_related", stats.kb_related},
        {"kb_not_related", stats.kb_not_related},
        {"answer_vocab", {{"kb_related", stats.answer_vocab_kb}, {"kb_not_related", stats.answer_vocab_not_kb}}},
        {"question_length", {{"mean", stats.mean_question_length}, {"histogram", std::move(histogram)}}},
        {"top_answers", {{"kb_related", tops(stats.top_answers_kb)}, {"kb_not_related", tops(stats.top_answers_not_kb)}}},
    };
}

inline std::string render_stats(const StatsReport& stats) {
    std::string out;
    out += "order qtype   train     val    test   total\n";
    for (const auto& [key, row] : stats.grid) {
        char line[96];
        std::snprintf(line, sizeof(line), "%5d %5d %7zu %7zu %7zu %7zu\n", key.first, key.second,
                      row[0], row[1], row[2], row[0] + row[1] + row[2]);
        out += line;
    }
    char tail[256];
    std::snprintf(tail, sizeof(tail),
                  "total %zu (unique questions %zu), KB-related %zu, KB-not-related %zu\n"
                  "answer vocab: KB %zu, not-KB %zu; mean question length %.1f words\n",
                  stats.total, stats.unique_questions, stats.kb_related, stats.kb_not_related,
                  stats.answer_vocab_kb, stats.answer_vocab_not_kb, stats.mean_question_length);
    out += tail;
    return out;
}

// ---------------------------------------------------------------------------
// End-to-end generation

struct GenConfig {
    std::uint64_t seed = 42;
    SplitRatios ratios{};
    std::size_t answer_cap = 100;
    std::size_t pair_cap = 10'000;
    bool grounded = true;
    std::size_t order1_chains_per_image = 0;   // 0 = use all
    std::size_t order2_chains_per_image = 0;
};

struct GeneratedDataset {
    std::vector<QARecord> records;
    GenReport report;
};

inline GeneratedDataset generate_dataset(const std::vector<SceneGraph>& scenes,
                                         const std::shared_ptr<const KnowledgeBase>& kb,
                                         const TemplateSet& templates, const GenConfig& config) {
    GeneratedDataset out;
    ExecOptions exec_options{.pair_cap = config.pair_cap};

    std::vector<const SceneGraph*> ordered;
    ordered.reserve(scenes.size());
    std::set<std::string> seen_ids;
    for (const SceneGraph& scene : scenes) {
        if (!seen_ids.insert(scene.image_id).second) {
            raise(ErrorKind::Ingest, "duplicate image id '" + scene.image_id + "'");
        }
        ordered.push_back(&scene);
    }
    std::sort(ordered.begin(), ordered.end(),
              [](const SceneGraph* a, const SceneGraph* b) { return a->image_id < b->image_id; });

    std::vector<QARecord> candidates;
    for (const SceneGraph* scene : ordered) {
        ++out.report.images;
        ImageKnowledgeGraph graph = merge(*scene, kb);
        for (int order : {1, 2}) {
            std::vector<Chain> chains = sample_chains(
                graph, order,
                derive_seed(config.seed, scene->image_id + "#order" + std::to_string(order)));
            const std::size_t cap =
                order == 1 ? config.order1_chains_per_image : config.order2_chains_per_image;
            if (cap > 0 && chains.size() > cap) chains.resize(cap);
            out.report.chains += chains.size();

            for (const Chain& chain : chains) {
                for (const Template& tpl : templates.templates()) {
                    if (!profile_matches(tpl, chain)) continue;
                    ++out.report.candidates;

                    Candidate candidate = instantiate(chain, tpl, templates);
                    candidate.image_id = scene->image_id;
                    candidate.grounding =
                        tpl.grounding == GroundingMode::Grounded && config.grounded
                            ? GroundingMode::Grounded
                            : GroundingMode::Plain;

                    Validation v = validate(candidate, graph, exec_options);
                    if (!v.accepted) {
                        switch (v.reason) {
                            case RejectReason::NoAnswer: ++out.report.rejected_no_answer; break;
                            case RejectReason::MultipleAnswers: ++out.report.rejected_multiple_answers; break;
                            case RejectReason::AnswerMismatch: ++out.report.rejected_answer_mismatch; break;
                            default: ++out.report.rejected_exec_error; break;
                        }
                        continue;
                    }

                    // oracle-explanation filter: the trace must expand to the
                    // chain's facts exactly (singleton intermediates)
                    std::set<NameTriple> expansion = triplets_from_trace(v.report.exec.trace);
                    std::set<NameTriple> chain_names;
                    std::set<Triplet> chain_facts(chain.hops.begin(), chain.hops.end());
                    for (const Triplet& t : chain.hops) chain_names.insert(name_triple(t));
                    std::set<Triplet> trace_facts;
                    for (const TraceStep& step : v.report.exec.trace.steps) {
                        trace_facts.insert(step.supporting.begin(), step.supporting.end());
                    }
                    if (expansion != chain_names || trace_facts != chain_facts) {
                        ++out.report.rejected_ambiguous_support;
                        continue;
                    }

                    // inversion filter: QUERY-mode re-parsing must be lossless
                    try {
                        if (!(parse_question(candidate.question, templates) == candidate.layout)) {
                            ++out.report.rejected_uninvertible_text;
                            continue;
                        }
                    } catch (const Error&) {
                        ++out.report.rejected_uninvertible_text;
                        continue;
                    }

                    QARecord record;
                    record.image_id = scene->image_id;
                    record.question = candidate.question;
                    record.answer = candidate.answer.name;
                    record.qtype = tpl.qtype;
                    record.order = tpl.order;
                    record.kb_related = chain.kb_related();
                    record.layout = candidate.layout;
                    record.supporting_facts.assign(chain_facts.begin(), chain_facts.end());
                    record.grounding = candidate.grounding;
                    candidates.push_back(std::move(record));
                }
            }
        }
    }

    ConstraintLedger ledger;
    ledger.answer_cap = config.answer_cap;
    out.records = apply_constraints(candidates, ledger, out.report);
    if (!out.records.empty()) assign_splits(out.records, config.ratios, config.seed);
    return out;
}

} // namespace hvqr
