#pragma once

// Scoring: answer accuracy broken down by (KB class x order x qtype), the
// explainable triplet metric, and the Q-type-mode baseline.
//
// The explanation metric follows the formula #correct / #predicted per
// question, averaged unweighted over questions (the paper styles it "recall"
// although the ratio is precision-shaped; the formula is the contract).
// Predicted triplets come from trace steps by cross-product expansion: every
// (left, right, output) combination forms one name triple per the step's slot
// semantics. Gold record ids are positional (index into the gold vector).

#include <algorithm>
#include <cstddef>
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
#include "hvqr/exec.hpp"
#include "hvqr/triplet.hpp"

namespace hvqr {

struct CellKey {
    bool kb_related = false;
    int order = 1;
    int qtype = 0;

    auto operator<=>(const CellKey&) const = default;
};

struct CellStats {
    std::size_t count = 0;
    std::size_t correct = 0;

    double accuracy() const { return count == 0 ? 0.0 : double(correct) / double(count); }
};

struct EvalReport {
    std::map<CellKey, CellStats> cells;
    std::size_t total = 0;
    std::size_t correct = 0;

    bool has_explanations = false;
    double explanation_overall = 0.0;
    double explanation_kb_related = 0.0;
    double explanation_kb_not_related = 0.0;
    std::size_t explanation_kb_count = 0;
    std::size_t explanation_not_kb_count = 0;

    double accuracy() const { return total == 0 ? 0.0 : double(correct) / double(total); }
};

// Cross-product expansion of each trace step into name triples; when an input
// or output set holds several entries, each one forms a triple separately.
inline std::set<NameTriple> triplets_from_trace(const Trace& trace) {
    std::set<NameTriple> out;
    for (const TraceStep& step : trace.steps) {
        for (const Entry& left : step.left_inputs.items()) {
            for (const Entry& right : step.right_inputs.items()) {
                for (const Entry& produced : step.outputs.items()) {
                    switch (step.symbol.queried) {
                        case Slot::Relation:
                            out.insert(NameTriple{left.name, produced.name, right.name});
                            break;
                        case Slot::Object:
                            out.insert(NameTriple{left.name, right.name, produced.name});
                            break;
                        case Slot::Subject:
                            out.insert(NameTriple{produced.name, left.name, right.name});
                            break;
                    }
                }
            }
        }
    }
    return out;
}

namespace detail {

inline std::map<std::size_t, const Prediction*> index_predictions(
    const std::vector<Prediction>& predictions) {
    std::map<std::size_t, const Prediction*> by_id;
    for (const Prediction& p : predictions) {
        if (!by_id.emplace(p.record_id, &p).second) {
            raise(ErrorKind::Eval, "duplicate prediction id " + std::to_string(p.record_id));
        }
    }
    return by_id;
}

} // namespace detail

// Exact-string accuracy after normalization; missing predictions count wrong.
inline EvalReport score_answers(const std::vector<Prediction>& predictions,
                                const std::vector<QARecord>& gold) {
    auto by_id = detail::index_predictions(predictions);
    EvalReport report;
    for (std::size_t id = 0; id < gold.size(); ++id) {
        const QARecord& record = gold[id];
        CellStats& cell = report.cells[CellKey{record.kb_related, record.order, record.qtype}];
        ++cell.count;
        ++report.total;
        auto it = by_id.find(id);
        if (it != by_id.end() && normalize_name(it->second->answer) == record.answer) {
            ++cell.correct;
            ++report.correct;
        }
    }
    return report;
}

// Per-question |predicted ∩ gold| / |predicted| (sets, deduplicated), zero
// when nothing is predicted; unweighted mean overall and per KB class.
inline void score_explanations(const std::vector<Prediction>& predictions,
                               const std::vector<QARecord>& gold, EvalReport& report) {
    auto by_id = detail::index_predictions(predictions);
    double sum = 0.0, sum_kb = 0.0, sum_not = 0.0;
    for (std::size_t id = 0; id < gold.size(); ++id) {
        const QARecord& record = gold[id];
        double score = 0.0;
        auto it = by_id.find(id);
        if (it != by_id.end() && it->second->predicted_triplets &&
            !it->second->predicted_triplets->empty()) {
            std::set<NameTriple> predicted(it->second->predicted_triplets->begin(),
                                           it->second->predicted_triplets->end());
            std::set<NameTriple> expected;
            for (const Triplet& t : record.supporting_facts) expected.insert(name_triple(t));
            std::size_t hit = 0;
            for (const NameTriple& t : predicted) hit += expected.count(t);
            score = double(hit) / double(predicted.size());
        }
        sum += score;
        if (record.kb_related) {
            sum_kb += score;
            ++report.explanation_kb_count;
        } else {
            sum_not += score;
            ++report.explanation_not_kb_count;
        }
    }
    report.has_explanations = true;
    report.explanation_overall = gold.empty() ? 0.0 : sum / double(gold.size());
    report.explanation_kb_related =
        report.explanation_kb_count == 0 ? 0.0 : sum_kb / double(report.explanation_kb_count);
    report.explanation_kb_not_related =
        report.explanation_not_kb_count == 0 ? 0.0 : sum_not / double(report.explanation_not_kb_count);
}

inline EvalReport evaluate_predictions(const std::vector<Prediction>& predictions,
                                       const std::vector<QARecord>& gold) {
    EvalReport report = score_answers(predictions, gold);
    bool any_triplets = false;
    for (const Prediction& p : predictions) any_triplets = any_triplets || p.predicted_triplets.has_value();
    if (any_triplets) score_explanations(predictions, gold, report);
    return report;
}

// Most frequent train answer per qtype (ties broken lexicographically),
// predicted for every test question of that qtype; "unknown" when the qtype
// never occurs in train. Record ids index into `test`.
inline std::vector<Prediction> qtype_mode_baseline(const std::vector<QARecord>& train,
                                                   const std::vector<QARecord>& test) {
    std::map<int, std::map<std::string, std::size_t>> counts;
    for (const QARecord& record : train) counts[record.qtype][record.answer]++;

    std::map<int, std::string> modal;
    for (const auto& [qtype, answers] : counts) {
        std::size_t best = 0;
        std::string best_answer;
        for (const auto& [answer, n] : answers) {   // std::map: lexicographic tie-break
            if (n > best) {
                best = n;
                best_answer = answer;
            }
        }
        modal[qtype] = best_answer;
    }

    std::vector<Prediction> predictions;
    predictions.reserve(test.size());
    for (std::size_t id = 0; id < test.size(); ++id) {
        auto it = modal.find(test[id].qtype);
        predictions.push_back(
            Prediction{id, it != modal.end() ? it->second : std::string("unknown"), std::nullopt});
    }
    return predictions;
}

// ---------------------------------------------------------------------------
// Report rendering

inline nlohmann::ordered_json to_json(const EvalReport& report) {
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& [key, stats] : report.cells) {
        cells.push_back({{"kb_related", key.kb_related},
                         {"order", key.order},
                         {"qtype", key.qtype},
                         {"count", stats.count},
                         {"correct", stats.correct},
                         {"accuracy", stats.accuracy()}});
    }
    nlohmann::ordered_json j{
        {"total", report.total},
        {"correct", report.correct},
        {"accuracy", report.accuracy()},
        {"cells", std::move(cells)},
    };
    if (report.has_explanations) {
        j["explanation"] = {{"overall", report.explanation_overall},
                            {"kb_not_related", report.explanation_kb_not_related},
                            {"kb_related", report.explanation_kb_related}};
    }
    return j;
}

inline std::string render_eval_report(const EvalReport& report) {
    auto pct = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%6.2f", v * 100.0);
        return std::string(buf);
    };
    auto cell = [&](bool kb, int order, int qtype) -> std::string {
        auto it = report.cells.find(CellKey{kb, order, qtype});
        if (it == report.cells.end() || it->second.count == 0) return "     -";
        return pct(it->second.accuracy());
    };

    std::string out;
    out += "answer accuracy (%)          first-order           second-order\n";
    out += "                       q0     q1     q2  |    q3     q4     q5     q6\n";
    out += "  KB-not-related   " + cell(false, 1, 0) + " " + cell(false, 1, 1) + " " + cell(false, 1, 2) +
           "  | " + cell(false, 2, 3) + " " + cell(false, 2, 4) + " " + cell(false, 2, 5) + " " +
           cell(false, 2, 6) + "\n";
    out += "  KB-related       " + cell(true, 1, 0) + " " + cell(true, 1, 1) + " " + cell(true, 1, 2) +
           "  | " + cell(true, 2, 3) + " " + cell(true, 2, 4) + " " + cell(true, 2, 5) + " " +
           cell(true, 2, 6) + "\n";
    out += "  overall          " + pct(report.accuracy()) + "  (" + std::to_string(report.correct) + "/" +
           std::to_string(report.total) + ")\n";
    if (report.has_explanations) {
        out += "explanation score (%)\n";
        out += "  KB-not-related " + pct(report.explanation_kb_not_related) + "   KB-related " +
               pct(report.explanation_kb_related) + "   overall " + pct(report.explanation_overall) +
               "\n";
    }
    return out;
}

} // namespace hvqr
