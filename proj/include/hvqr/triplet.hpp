#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

#include "hvqr/entry.hpp"
#include "hvqr/error.hpp"

namespace hvqr {

enum class Provenance { Webchild, Conceptnet, Dbpedia, Other };

inline const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::Webchild: return "webchild";
        case Provenance::Conceptnet: return "conceptnet";
        case Provenance::Dbpedia: return "dbpedia";
        case Provenance::Other: return "other";
    }
    return "other";
}

inline Provenance provenance_from(std::string_view s) {
    if (s == "webchild") return Provenance::Webchild;
    if (s == "conceptnet") return Provenance::Conceptnet;
    if (s == "dbpedia") return Provenance::Dbpedia;
    return Provenance::Other;
}

// Where a fact came from: a particular image's scene graph, or the shared KB.
struct Source {
    enum class Kind { Image, KB };

    Kind kind = Kind::Image;
    std::string image_id;                        // set when kind == Image
    Provenance provenance = Provenance::Other;   // set when kind == KB

    static Source image(std::string id) { return Source{Kind::Image, std::move(id), Provenance::Other}; }
    static Source kb(Provenance p) { return Source{Kind::KB, {}, p}; }

    bool is_kb() const { return kind == Kind::KB; }

    auto operator<=>(const Source&) const = default;
};

inline std::string to_string(const Source& s) {
    if (s.kind == Source::Kind::Image) return "image:" + s.image_id;
    return std::string("kb:") + to_string(s.provenance);
}

inline Source source_from(std::string_view s) {
    if (s.rfind("image:", 0) == 0) return Source::image(std::string(s.substr(6)));
    if (s.rfind("kb:", 0) == 0) return Source::kb(provenance_from(s.substr(3)));
    raise(ErrorKind::Ingest, "unrecognized triplet source: '" + std::string(s) + "'");
}

// A (subject, relation, object) fact plus its source tag. Subject/object are
// entity entries, the relation a relationship entry; identity includes the
// source, so the same fact observed in an image and in the KB stays distinct.
struct Triplet {
    Entry subject;
    Entry relation;
    Entry object;
    Source source;

    auto operator<=>(const Triplet&) const = default;
};

inline Triplet make_triplet(std::string_view subject, std::string_view relation,
                            std::string_view object, Source source) {
    return Triplet{make_entity(subject), make_relationship(relation), make_entity(object),
                   std::move(source)};
}

// Source-agnostic fact key, used by the evaluation metric and the qtype-2/3/5
// uniqueness constraint.
struct NameTriple {
    std::string subject;
    std::string relation;
    std::string object;

    auto operator<=>(const NameTriple&) const = default;
};

inline NameTriple name_triple(const Triplet& t) {
    return NameTriple{t.subject.name, t.relation.name, t.object.name};
}

enum class Scope { ImageOnly, KBOnly };
enum class Slot { Subject, Relation, Object };

// A triplet with exactly one unbound slot; the unit of index lookups.
struct TripletPattern {
    std::optional<std::string> subject;
    std::optional<std::string> relation;
    std::optional<std::string> object;

    Slot unknown_slot() const {
        int unknown = int(!subject) + int(!relation) + int(!object);
        if (unknown != 1) {
            raise(ErrorKind::Contract,
                  "triplet pattern must have exactly one unknown slot, got " +
                      std::to_string(unknown));
        }
        if (!subject) return Slot::Subject;
        if (!relation) return Slot::Relation;
        return Slot::Object;
    }
};

} // namespace hvqr
