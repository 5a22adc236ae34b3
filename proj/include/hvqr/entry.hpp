#pragma once

#include <cctype>
#include <compare>
#include <set>
#include <string>
#include <string_view>

#include "hvqr/error.hpp"

namespace hvqr {

enum class EntryKind { Entity, Relationship };

inline const char* to_string(EntryKind kind) {
    return kind == EntryKind::Entity ? "entity" : "relationship";
}

// Canonical form shared by all data sources: lowercase, with runs of
// whitespace/underscores collapsed to a single '_' and stripped at the ends.
// Idempotent, so names can be re-normalized freely at ingest boundaries.
inline std::string normalize_name(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_sep = false;
    for (unsigned char c : raw) {
        if (std::isspace(c) || c == '_') {
            if (!out.empty()) pending_sep = true;
            continue;
        }
        if (pending_sep) {
            out.push_back('_');
            pending_sep = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

// An entity or relationship name; the atomic vocabulary item of graphs and
// layouts. The same name may exist once per kind.
struct Entry {
    std::string name;
    EntryKind kind = EntryKind::Entity;

    auto operator<=>(const Entry&) const = default;
};

inline Entry make_entity(std::string_view raw) {
    Entry e{normalize_name(raw), EntryKind::Entity};
    if (e.name.empty()) raise(ErrorKind::Contract, "entity name is empty after normalization");
    return e;
}

inline Entry make_relationship(std::string_view raw) {
    Entry e{normalize_name(raw), EntryKind::Relationship};
    if (e.name.empty()) raise(ErrorKind::Contract, "relationship name is empty after normalization");
    return e;
}

using EntryTable = std::set<Entry>;

// Question-surface rendering of a normalized name ("keep_out_rain" -> "keep out rain").
inline std::string readable_name(std::string_view name) {
    std::string out(name);
    for (char& c : out) {
        if (c == '_') c = ' ';
    }
    return out;
}

} // namespace hvqr
