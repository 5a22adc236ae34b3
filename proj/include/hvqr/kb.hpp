#pragma once

// Commonsense knowledge base: a deduplicated triplet set with pairwise-key
// indexes (subject+relation, relation+object, subject+object). Immutable after
// construction; shared by reference across all per-image graphs.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "hvqr/entry.hpp"
#include "hvqr/error.hpp"
#include "hvqr/triplet.hpp"

namespace hvqr {

namespace detail {

// Pairwise index over a canonically sorted triplet vector. Keys are the two
// bound names joined with '\t' (never present in normalized names).
class PairIndex {
public:
    void build(const std::vector<Triplet>& triplets) {
        by_subject_relation_.clear();
        by_relation_object_.clear();
        by_subject_object_.clear();
        by_subject_.clear();
        for (std::uint32_t i = 0; i < triplets.size(); ++i) {
            const Triplet& t = triplets[i];
            by_subject_relation_[key(t.subject.name, t.relation.name)].push_back(i);
            by_relation_object_[key(t.relation.name, t.object.name)].push_back(i);
            by_subject_object_[key(t.subject.name, t.object.name)].push_back(i);
            by_subject_[t.subject.name].push_back(i);
        }
    }

    // Indices of triplets matching a single-unknown pattern, in canonical order.
    const std::vector<std::uint32_t>& matches(const TripletPattern& pattern) const {
        switch (pattern.unknown_slot()) {
            case Slot::Relation:
                return find(by_subject_object_, key(*pattern.subject, *pattern.object));
            case Slot::Object:
                return find(by_subject_relation_, key(*pattern.subject, *pattern.relation));
            case Slot::Subject:
                return find(by_relation_object_, key(*pattern.relation, *pattern.object));
        }
        return empty_;
    }

    const std::vector<std::uint32_t>& with_subject(const std::string& name) const {
        return find(by_subject_, name);
    }

private:
    static std::string key(const std::string& a, const std::string& b) { return a + '\t' + b; }

    static const std::vector<std::uint32_t>& find(
        const std::unordered_map<std::string, std::vector<std::uint32_t>>& index,
        const std::string& k) {
        auto it = index.find(k);
        return it == index.end() ? empty_ : it->second;
    }

    std::unordered_map<std::string, std::vector<std::uint32_t>> by_subject_relation_;
    std::unordered_map<std::string, std::vector<std::uint32_t>> by_relation_object_;
    std::unordered_map<std::string, std::vector<std::uint32_t>> by_subject_object_;
    std::unordered_map<std::string, std::vector<std::uint32_t>> by_subject_;
    static inline const std::vector<std::uint32_t> empty_{};
};

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

} // namespace detail

class KnowledgeBase {
public:
    explicit KnowledgeBase(std::vector<Triplet> triplets) : triplets_(std::move(triplets)) {
        for (const Triplet& t : triplets_) {
            if (t.source.kind != Source::Kind::KB) {
                raise(ErrorKind::Contract, "knowledge base triplet with non-KB source");
            }
        }
        std::sort(triplets_.begin(), triplets_.end());
        triplets_.erase(std::unique(triplets_.begin(), triplets_.end()), triplets_.end());
        if (triplets_.empty()) raise(ErrorKind::Ingest, "knowledge base holds zero facts");
        index_.build(triplets_);
        for (const Triplet& t : triplets_) {
            entries_.insert(t.subject);
            entries_.insert(t.relation);
            entries_.insert(t.object);
        }
    }

    const std::vector<Triplet>& triplets() const { return triplets_; }
    const EntryTable& entries() const { return entries_; }
    bool has_entry(const Entry& e) const { return entries_.count(e) > 0; }
    std::size_t size() const { return triplets_.size(); }

    const detail::PairIndex& index() const { return index_; }

private:
    std::vector<Triplet> triplets_;
    detail::PairIndex index_;
    EntryTable entries_;
};

// One fact per line, tab-separated: subject, relation, object[, provenance].
// '#' lines and blank lines are skipped; anything else malformed is an error
// with its line number. A KB with zero facts is rejected.
inline std::shared_ptr<const KnowledgeBase> load_knowledge_base(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::Io, "cannot open knowledge base file: " + path.string());

    std::vector<Triplet> triplets;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = detail::split_tabs(line);
        if (fields.size() < 3) {
            raise(ErrorKind::Ingest, path.string() + ":" + std::to_string(line_no) +
                                         ": expected >=3 tab-separated fields, got " +
                                         std::to_string(fields.size()));
        }
        Provenance prov = fields.size() >= 4 && !fields[3].empty()
                              ? provenance_from(normalize_name(fields[3]))
                              : Provenance::Other;
        if (normalize_name(fields[0]).empty() || normalize_name(fields[1]).empty() ||
            normalize_name(fields[2]).empty()) {
            raise(ErrorKind::Ingest, path.string() + ":" + std::to_string(line_no) +
                                         ": empty subject/relation/object");
        }
        triplets.push_back(make_triplet(fields[0], fields[1], fields[2], Source::kb(prov)));
    }
    if (triplets.empty()) {
        raise(ErrorKind::Ingest, "knowledge base file has no facts: " + path.string());
    }
    return std::make_shared<const KnowledgeBase>(std::move(triplets));
}

} // namespace hvqr
