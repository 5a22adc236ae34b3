#pragma once

// Deterministic layout execution. Evaluation is post-order: each Apply node
// crosses its two input entry sets, fills the symbol's unknown slot via a
// scoped index lookup, and unions the results. Full sets propagate (empty
// included); only answer() collapses to single/none/multiple. Every Apply
// leaves a trace step with its inputs, outputs and supporting triplets.

#include <algorithm>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "hvqr/entry.hpp"
#include "hvqr/error.hpp"
#include "hvqr/graph.hpp"
#include "hvqr/query.hpp"
#include "hvqr/triplet.hpp"

namespace hvqr {

// Ordered, deduplicated entry collection with deterministic (by-name) iteration.
class EntrySet {
public:
    EntrySet() = default;
    explicit EntrySet(std::vector<Entry> entries) {
        std::sort(entries.begin(), entries.end(), by_name);
        entries.erase(std::unique(entries.begin(), entries.end()), entries.end());
        entries_ = std::move(entries);
    }

    static EntrySet single(Entry e) { return EntrySet(std::vector<Entry>{std::move(e)}); }

    const std::vector<Entry>& items() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    bool contains(const Entry& e) const {
        auto it = std::lower_bound(entries_.begin(), entries_.end(), e, by_name);
        for (; it != entries_.end() && it->name == e.name; ++it) {
            if (*it == e) return true;
        }
        return false;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const Entry& e : entries_) out.push_back(e.name);
        return out;
    }

    bool operator==(const EntrySet&) const = default;

private:
    static bool by_name(const Entry& a, const Entry& b) {
        return a.name != b.name ? a.name < b.name : a.kind < b.kind;
    }

    std::vector<Entry> entries_;
};

struct TraceStep {
    std::string path;   // 'l'/'r' moves from the root; "" for the root itself
    QuerySymbol symbol;
    EntrySet left_inputs;
    EntrySet right_inputs;
    EntrySet outputs;
    std::vector<Triplet> supporting;   // sorted, deduplicated

    bool operator==(const TraceStep&) const = default;
};

struct Trace {
    std::vector<TraceStep> steps;   // post-order, one per Apply node

    bool operator==(const Trace&) const = default;
};

struct ExecResult {
    EntrySet answers;
    Trace trace;

    bool operator==(const ExecResult&) const = default;
};

struct ExecOptions {
    // Hard bound on |left| x |right| per node, against degenerate KB relations.
    std::size_t pair_cap = 10'000;
};

enum class GroundingMode { Plain, Grounded };

namespace detail {

inline EntrySet eval_node(const QueryLayout& node, const ImageKnowledgeGraph& graph,
                          const ExecOptions& options, const std::string& path, Trace& trace) {
    if (node.is_leaf()) {
        const Entry& entry = node.entry();
        if (!graph.contains_entry(entry)) {
            raise(ErrorKind::Exec, "unknown entry '" + entry.name + "' (" +
                                       to_string(entry.kind) + ") in image " + graph.image_id());
        }
        return EntrySet::single(entry);
    }

    EntrySet left = eval_node(node.left(), graph, options, path + "l", trace);
    EntrySet right = eval_node(node.right(), graph, options, path + "r", trace);

    const QuerySymbol symbol = node.symbol();
    if (left.size() * right.size() > options.pair_cap) {
        raise(ErrorKind::Exec, "cross-product cap exceeded at node '" + path + "': " +
                                   std::to_string(left.size() * right.size()) + " pairs > " +
                                   std::to_string(options.pair_cap));
    }

    std::vector<Entry> outputs;
    std::set<Triplet> supporting;
    for (const Entry& l : left.items()) {
        for (const Entry& r : right.items()) {
            TripletPattern pattern;
            switch (symbol.queried) {
                case Slot::Relation:
                    pattern.subject = l.name;
                    pattern.object = r.name;
                    break;
                case Slot::Object:
                    pattern.subject = l.name;
                    pattern.relation = r.name;
                    break;
                case Slot::Subject:
                    pattern.relation = l.name;
                    pattern.object = r.name;
                    break;
            }
            LookupResult found = graph.lookup_with_support(pattern, symbol.scope);
            outputs.insert(outputs.end(), found.entries.begin(), found.entries.end());
            supporting.insert(found.supporting.begin(), found.supporting.end());
        }
    }

    TraceStep step;
    step.path = path;
    step.symbol = symbol;
    step.left_inputs = std::move(left);
    step.right_inputs = std::move(right);
    step.outputs = EntrySet(std::move(outputs));
    step.supporting.assign(supporting.begin(), supporting.end());
    EntrySet result = step.outputs;
    trace.steps.push_back(std::move(step));
    return result;
}

// Drop root outputs not visible in the image, pruning supporting triplets
// whose queried-slot value no longer survives.
inline void ground_root_step(TraceStep& step, const ImageKnowledgeGraph& graph) {
    std::vector<Entry> kept;
    for (const Entry& e : step.outputs.items()) {
        if (graph.visible_entities().count(e) > 0) kept.push_back(e);
    }
    step.outputs = EntrySet(std::move(kept));
    std::vector<Triplet> pruned;
    for (const Triplet& t : step.supporting) {
        const Entry& produced = step.symbol.queried == Slot::Subject   ? t.subject
                                : step.symbol.queried == Slot::Relation ? t.relation
                                                                        : t.object;
        if (step.outputs.contains(produced)) pruned.push_back(t);
    }
    step.supporting = std::move(pruned);
}

} // namespace detail

inline ExecResult execute(const QueryLayout& layout, const ImageKnowledgeGraph& graph,
                          const ExecOptions& options = {}) {
    ExecResult result;
    result.answers = detail::eval_node(layout, graph, options, "", result.trace);
    return result;
}

// As execute, but a knowledge-scoped ROOT query keeps only answers visible in
// the image. Used where the generator requests visual grounding (first-order
// KB-related questions); a no-op for image-scoped roots and for leaves.
inline ExecResult execute_grounded(const QueryLayout& layout, const ImageKnowledgeGraph& graph,
                                   const ExecOptions& options = {}) {
    ExecResult result = execute(layout, graph, options);
    if (!layout.is_leaf() && layout.symbol().scope == Scope::KBOnly) {
        detail::ground_root_step(result.trace.steps.back(), graph);
        result.answers = result.trace.steps.back().outputs;
    }
    return result;
}

struct AnswerReport {
    enum class Outcome { Single, None, Multiple };

    Outcome outcome = Outcome::None;
    std::optional<Entry> entry;   // set when outcome == Single
    std::size_t count = 0;
    ExecResult exec;
};

// Collapse an execution to the generator's validity view: a unique entry, or
// a structured none/multiple report. Never raises on empty answers.
inline AnswerReport answer(const QueryLayout& layout, const ImageKnowledgeGraph& graph,
                           GroundingMode mode, const ExecOptions& options = {}) {
    AnswerReport report;
    report.exec = mode == GroundingMode::Grounded ? execute_grounded(layout, graph, options)
                                                  : execute(layout, graph, options);
    report.count = report.exec.answers.size();
    if (report.count == 1) {
        report.outcome = AnswerReport::Outcome::Single;
        report.entry = report.exec.answers.items().front();
    } else {
        report.outcome = report.count == 0 ? AnswerReport::Outcome::None
                                           : AnswerReport::Outcome::Multiple;
    }
    return report;
}

} // namespace hvqr
