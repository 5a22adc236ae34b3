#pragma once

// Question templates and their exact inversion.
//
// A template is one Table-style row variant: a word pattern with placeholders
// (<A> <R> <B> for first-order, <A> <R1> <R2> <C> for second-order), the
// placeholder that carries the answer, and a layout skeleton whose leaves are
// the pattern placeholders. Surface text is data: the set-level surface_forms
// map renders entry names into question words ("holds" -> "holding") and must
// be injective so parse_question can map captured spans back to entries.
//
// Inversion enumerates every alignment of a question against every pattern.
// A captured span is admissible only if none of its words appear in any
// template's fixed text (the reserved set, derived at load); this keeps
// multi-word entry names from swallowing neighboring template words.

#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hvqr/entry.hpp"
#include "hvqr/error.hpp"
#include "hvqr/exec.hpp"
#include "hvqr/query.hpp"

namespace hvqr {

enum class Placeholder { A, B, C, R, R1, R2 };

inline const char* to_string(Placeholder p) {
    switch (p) {
        case Placeholder::A: return "A";
        case Placeholder::B: return "B";
        case Placeholder::C: return "C";
        case Placeholder::R: return "R";
        case Placeholder::R1: return "R1";
        case Placeholder::R2: return "R2";
    }
    return "?";
}

inline std::optional<Placeholder> placeholder_from(std::string_view s) {
    if (s == "A" || s == "a") return Placeholder::A;
    if (s == "B" || s == "b") return Placeholder::B;
    if (s == "C" || s == "c") return Placeholder::C;
    if (s == "R" || s == "r") return Placeholder::R;
    if (s == "R1" || s == "r1") return Placeholder::R1;
    if (s == "R2" || s == "r2") return Placeholder::R2;
    return std::nullopt;
}

// "<A>" / "<r1>" -> placeholder; anything else is not a marker.
inline std::optional<Placeholder> placeholder_from_marker(std::string_view s) {
    if (s.size() < 3 || s.front() != '<' || s.back() != '>') return std::nullopt;
    return placeholder_from(s.substr(1, s.size() - 2));
}

inline std::string marker_for(Placeholder p) {
    std::string inner = to_string(p);
    for (char& c : inner) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return "<" + inner + ">";
}

inline EntryKind placeholder_kind(Placeholder p) {
    switch (p) {
        case Placeholder::A:
        case Placeholder::B:
        case Placeholder::C: return EntryKind::Entity;
        default: return EntryKind::Relationship;
    }
}

// Slot occupied by a placeholder within hop 0 (A R B / A R1 B) or hop 1 (B R2 C).
inline std::optional<Slot> placeholder_slot(Placeholder p, int order, int hop) {
    if (order == 1) {
        switch (p) {
            case Placeholder::A: return Slot::Subject;
            case Placeholder::R: return Slot::Relation;
            case Placeholder::B: return Slot::Object;
            default: return std::nullopt;
        }
    }
    if (hop == 0) {
        switch (p) {
            case Placeholder::A: return Slot::Subject;
            case Placeholder::R1: return Slot::Relation;
            case Placeholder::B: return Slot::Object;
            default: return std::nullopt;
        }
    }
    switch (p) {
        case Placeholder::B: return Slot::Subject;
        case Placeholder::R2: return Slot::Relation;
        case Placeholder::C: return Slot::Object;
        default: return std::nullopt;
    }
}

// Hop a placeholder belongs to; B is the shared middle and maps to neither.
inline std::optional<int> placeholder_hop(Placeholder p, int order) {
    if (order == 1) return 0;
    switch (p) {
        case Placeholder::A:
        case Placeholder::R1: return 0;
        case Placeholder::R2:
        case Placeholder::C: return 1;
        default: return std::nullopt;
    }
}

struct PatternToken {
    bool is_slot = false;
    std::string word;       // when fixed text
    Placeholder slot = Placeholder::A;

    bool operator==(const PatternToken&) const = default;
};

struct Template {
    std::string id;
    int qtype = 0;
    int order = 1;
    std::vector<PatternToken> pattern;
    Placeholder answer_slot = Placeholder::B;
    QueryLayout skeleton = QueryLayout::leaf(Entry{"<a>", EntryKind::Entity});
    GroundingMode grounding = GroundingMode::Plain;
    std::string pattern_text;

    // derived at load
    std::array<Scope, 2> hop_scope{Scope::ImageOnly, Scope::ImageOnly};
    bool kb_related = false;
    std::vector<Placeholder> pattern_slots;   // in pattern order
};

using Binding = std::map<Placeholder, Entry>;

namespace detail {

inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!current.empty()) words.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) words.push_back(std::move(current));
    return words;
}

[[noreturn]] inline void template_fail(const std::string& id, const std::string& what) {
    raise(ErrorKind::Ingest, "template '" + id + "': " + what);
}

} // namespace detail

class TemplateSet {
public:
    static TemplateSet from_json(const nlohmann::json& doc) {
        TemplateSet set;
        if (doc.contains("surface_forms")) {
            for (const auto& [name, surface] : doc["surface_forms"].items()) {
                set.add_surface_form(name, surface.get<std::string>());
            }
        }
        for (const auto& word : doc.value("reserved_words", nlohmann::json::array())) {
            set.reserved_.insert(word.get<std::string>());
        }
        if (!doc.contains("templates") || !doc["templates"].is_array() || doc["templates"].empty()) {
            raise(ErrorKind::Ingest, "template file has no templates");
        }
        for (const auto& t : doc["templates"]) {
            set.add_template(t);
        }
        set.finalize();
        return set;
    }

    static TemplateSet load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) raise(ErrorKind::Io, "cannot open template file: " + path.string());
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            raise(ErrorKind::Ingest, path.string() + ": " + e.what());
        }
        return from_json(doc);
    }

    const std::vector<Template>& templates() const { return templates_; }

    const Template& by_id(const std::string& id) const {
        for (const Template& t : templates_) {
            if (t.id == id) return t;
        }
        raise(ErrorKind::Contract, "no template with id '" + id + "'");
    }

    // Question-surface rendering of an entry name.
    std::string surface_for(const std::string& name) const {
        auto it = surface_forms_.find(name);
        return it != surface_forms_.end() ? it->second : readable_name(name);
    }

    bool is_reserved(const std::string& word) const { return reserved_.count(word) > 0; }

    // Surface span -> entry name, strict inverse of surface_for.
    std::optional<std::string> invert_span(const std::string& span) const {
        auto it = inverse_surface_.find(span);
        std::string name = it != inverse_surface_.end() ? it->second : normalize_name(span);
        if (name.empty()) return std::nullopt;
        if (surface_for(name) != span) return std::nullopt;
        return name;
    }

private:
    void add_surface_form(const std::string& raw_name, const std::string& surface) {
        const std::string name = normalize_name(raw_name);
        if (name.empty() || surface.empty()) {
            raise(ErrorKind::Ingest, "surface form with empty name or surface");
        }
        if (!inverse_surface_.emplace(surface, name).second) {
            raise(ErrorKind::Ingest, "surface form '" + surface + "' maps to two entry names");
        }
        surface_forms_[name] = surface;
    }

    void add_template(const nlohmann::json& t);
    void finalize();

    std::vector<Template> templates_;
    std::map<std::string, std::string> surface_forms_;
    std::map<std::string, std::string> inverse_surface_;
    std::set<std::string> reserved_;
};

namespace detail {

// Required Table-2 slots per qtype and the sanctioned answer placeholder.
inline std::set<Placeholder> qtype_slots(int qtype) {
    if (qtype <= 2) return {Placeholder::A, Placeholder::R, Placeholder::B};
    return {Placeholder::A, Placeholder::R1, Placeholder::R2, Placeholder::C};
}

inline Placeholder qtype_answer(int qtype) {
    switch (qtype) {
        case 0: return Placeholder::R;
        case 1: return Placeholder::B;
        case 2: return Placeholder::A;
        case 3: return Placeholder::R2;
        case 4: return Placeholder::R1;
        case 5: return Placeholder::C;
        default: return Placeholder::A;   // qtype 6
    }
}

inline QueryLayout parse_skeleton(const std::string& text, const std::string& id) {
    auto leaf_fn = [&](const std::string& raw, std::optional<EntryKind> kind) {
        auto p = placeholder_from_marker(raw);
        if (!p) template_fail(id, "skeleton leaf '" + raw + "' is not a placeholder");
        return QueryLayout::leaf(Entry{marker_for(*p), kind.value_or(EntryKind::Entity)});
    };
    try {
        return parse_tokens(tokenize(text), leaf_fn);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Ingest) throw;
        template_fail(id, std::string("bad skeleton: ") + e.what());
    }
}

inline Placeholder leaf_placeholder(const QueryLayout& leaf) {
    return *placeholder_from_marker(leaf.entry().name);
}

struct SkeletonShape {
    std::array<Scope, 2> hop_scope{Scope::ImageOnly, Scope::ImageOnly};
    Placeholder root_answer = Placeholder::A;
};

// Structural validation of a skeleton against its template's order: hops are
// consistent, positions carry the right slots, the inner node produces the
// middle entity, and the root queries the answer placeholder.
inline SkeletonShape validate_skeleton(const QueryLayout& skeleton, int order,
                                       const std::string& id) {
    SkeletonShape shape;
    if (skeleton.apply_count() != static_cast<std::size_t>(order)) {
        template_fail(id, "skeleton has " + std::to_string(skeleton.apply_count()) +
                              " queries, expected " + std::to_string(order));
    }

    auto hop_of_apply = [&](const QueryLayout& node) -> int {
        std::optional<int> hop;
        for (const QueryLayout& child : {node.left(), node.right()}) {
            if (!child.is_leaf()) continue;
            auto h = placeholder_hop(leaf_placeholder(child), order);
            if (!h) {
                template_fail(id, "placeholder <" +
                                      std::string(to_string(leaf_placeholder(child))) +
                                      "> cannot appear as a skeleton leaf");
            }
            if (hop && *hop != *h) template_fail(id, "skeleton node mixes hops");
            hop = *h;
        }
        if (!hop) template_fail(id, "skeleton node has no placeholder leaf");
        return *hop;
    };

    auto check_node = [&](const QueryLayout& node, int hop) {
        const QuerySymbol symbol = node.symbol();
        shape.hop_scope[hop] = symbol.scope;
        const Slot left_slot = symbol.queried == Slot::Subject ? Slot::Relation : Slot::Subject;
        const Slot right_slot = symbol.queried == Slot::Object ? Slot::Relation : Slot::Object;
        const Slot middle_slot = hop == 0 ? Slot::Object : Slot::Subject;  // B's slot in this hop

        for (bool left : {true, false}) {
            const QueryLayout child = left ? node.left() : node.right();
            const Slot slot = left ? left_slot : right_slot;
            if (child.is_leaf()) {
                const Placeholder p = leaf_placeholder(child);
                auto expected = placeholder_slot(p, order, hop);
                if (!expected || *expected != slot) {
                    template_fail(id, "placeholder <" + std::string(to_string(p)) +
                                          "> sits in the wrong skeleton position");
                }
            } else {
                if (slot != middle_slot) {
                    template_fail(id, "nested query does not occupy the middle-entity slot");
                }
            }
        }

        // which placeholder this node produces
        for (Placeholder p : {Placeholder::A, Placeholder::B, Placeholder::C, Placeholder::R,
                              Placeholder::R1, Placeholder::R2}) {
            auto slot = placeholder_slot(p, order, hop);
            if (slot && *slot == symbol.queried) return p;
        }
        template_fail(id, "skeleton node queries an unmapped slot");
    };

    if (order == 1) {
        shape.root_answer = check_node(skeleton, 0);
        return shape;
    }

    const QueryLayout inner = skeleton.left().is_leaf() ? skeleton.right() : skeleton.left();
    if (inner.is_leaf()) template_fail(id, "second-order skeleton needs a nested query");
    const int root_hop = hop_of_apply(skeleton);
    const int inner_hop = hop_of_apply(inner);
    if (root_hop == inner_hop) template_fail(id, "root and nested query map to the same hop");

    const Placeholder inner_out = check_node(inner, inner_hop);
    if (inner_out != Placeholder::B) {
        template_fail(id, "nested query must produce the middle entity, produces <" +
                              std::string(to_string(inner_out)) + ">");
    }
    shape.root_answer = check_node(skeleton, root_hop);
    return shape;
}

} // namespace detail

inline void TemplateSet::add_template(const nlohmann::json& t) {
    Template out;
    out.id = t.value("id", "");
    if (out.id.empty()) raise(ErrorKind::Ingest, "template without id");
    for (const Template& existing : templates_) {
        if (existing.id == out.id) detail::template_fail(out.id, "duplicate template id");
    }
    out.qtype = t.value("qtype", -1);
    out.order = t.value("order", 0);
    if (out.qtype < 0 || out.qtype > 6) detail::template_fail(out.id, "qtype must be 0..6");
    const int expected_order = out.qtype <= 2 ? 1 : 2;
    if (out.order != expected_order) {
        detail::template_fail(out.id, "qtype " + std::to_string(out.qtype) + " requires order " +
                                          std::to_string(expected_order));
    }

    auto answer = placeholder_from(t.value("answer_slot", ""));
    if (!answer || *answer != detail::qtype_answer(out.qtype)) {
        detail::template_fail(out.id, "answer_slot must be <" +
                                          std::string(to_string(detail::qtype_answer(out.qtype))) +
                                          "> for qtype " + std::to_string(out.qtype));
    }
    out.answer_slot = *answer;

    out.pattern_text = t.value("pattern", "");
    std::set<Placeholder> seen_slots;
    for (const std::string& word : detail::split_words(out.pattern_text)) {
        if (auto p = placeholder_from_marker(word)) {
            if (!seen_slots.insert(*p).second) {
                detail::template_fail(out.id, "placeholder appears twice in pattern");
            }
            out.pattern.push_back(PatternToken{true, "", *p});
            out.pattern_slots.push_back(*p);
        } else {
            out.pattern.push_back(PatternToken{false, word, Placeholder::A});
        }
    }
    if (out.pattern.empty()) detail::template_fail(out.id, "empty pattern");

    std::set<Placeholder> required = detail::qtype_slots(out.qtype);
    required.erase(out.answer_slot);
    if (out.order == 2) required.erase(Placeholder::B);   // middle entity never surfaces
    if (seen_slots != required) {
        detail::template_fail(out.id, "pattern placeholders must exactly cover the qtype's slots");
    }

    out.skeleton = detail::parse_skeleton(t.value("layout_skeleton", ""), out.id);
    detail::SkeletonShape shape = detail::validate_skeleton(out.skeleton, out.order, out.id);
    if (shape.root_answer != out.answer_slot) {
        detail::template_fail(out.id, "skeleton root queries <" +
                                          std::string(to_string(shape.root_answer)) +
                                          ">, answer_slot is <" +
                                          std::string(to_string(out.answer_slot)) + ">");
    }
    // skeleton leaves must be exactly the pattern placeholders
    std::set<Placeholder> skeleton_slots;
    auto collect = [&](auto&& self, const QueryLayout& node) -> void {
        if (node.is_leaf()) {
            skeleton_slots.insert(detail::leaf_placeholder(node));
            return;
        }
        self(self, node.left());
        self(self, node.right());
    };
    collect(collect, out.skeleton);
    if (skeleton_slots != seen_slots) {
        detail::template_fail(out.id, "skeleton leaves differ from pattern placeholders");
    }

    out.hop_scope = shape.hop_scope;
    out.kb_related = false;
    for (int hop = 0; hop < out.order; ++hop) {
        out.kb_related = out.kb_related || out.hop_scope[hop] == Scope::KBOnly;
    }

    const std::string mode = t.value("grounding_mode", "plain");
    if (mode != "plain" && mode != "grounded") {
        detail::template_fail(out.id, "grounding_mode must be plain or grounded");
    }
    out.grounding = mode == "grounded" ? GroundingMode::Grounded : GroundingMode::Plain;
    const bool kb_root = !out.skeleton.is_leaf() && out.skeleton.symbol().scope == Scope::KBOnly;
    const bool must_ground = out.order == 1 && kb_root;
    if (must_ground != (out.grounding == GroundingMode::Grounded)) {
        detail::template_fail(out.id,
                              "grounded mode is required exactly for first-order KB templates");
    }

    templates_.push_back(std::move(out));
}

inline void TemplateSet::finalize() {
    for (const Template& t : templates_) {
        for (const PatternToken& token : t.pattern) {
            if (!token.is_slot) reserved_.insert(token.word);
        }
    }
    // a surface form containing reserved words could never be captured back
    for (const auto& [surface, name] : inverse_surface_) {
        for (const std::string& word : detail::split_words(surface)) {
            if (reserved_.count(word) > 0) {
                raise(ErrorKind::Ingest, "surface form '" + surface +
                                             "' collides with template word '" + word + "'");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Rendering and inversion

// Question text for a full binding of the template's pattern slots.
inline std::string render_question(const Template& tpl, const Binding& binding,
                                   const TemplateSet& set) {
    std::string out;
    for (const PatternToken& token : tpl.pattern) {
        if (!out.empty()) out.push_back(' ');
        if (token.is_slot) {
            auto it = binding.find(token.slot);
            if (it == binding.end()) {
                raise(ErrorKind::Contract, "binding misses placeholder <" +
                                               std::string(to_string(token.slot)) + ">");
            }
            out += set.surface_for(it->second.name);
        } else {
            out += token.word;
        }
    }
    return out;
}

// Skeleton with placeholder leaves replaced by bound entries. Kinds are
// checked against each placeholder's canonical kind.
inline QueryLayout instantiate_layout(const QueryLayout& node, const Binding& binding) {
    if (node.is_leaf()) {
        const Placeholder p = detail::leaf_placeholder(node);
        auto it = binding.find(p);
        if (it == binding.end()) {
            raise(ErrorKind::Contract,
                  "binding misses placeholder <" + std::string(to_string(p)) + ">");
        }
        if (it->second.kind != placeholder_kind(p)) {
            raise(ErrorKind::Contract, "slot-kind mismatch: " + std::string(to_string(it->second.kind)) +
                                           " '" + it->second.name + "' bound to <" +
                                           std::string(to_string(p)) + ">");
        }
        return QueryLayout::leaf(it->second);
    }
    return QueryLayout::apply(node.symbol(), instantiate_layout(node.left(), binding),
                              instantiate_layout(node.right(), binding));
}

namespace detail {

inline void match_pattern(const Template& tpl, const TemplateSet& set,
                          const std::vector<std::string>& words, std::size_t pi, std::size_t wi,
                          Binding& binding, std::vector<Binding>& out) {
    if (pi == tpl.pattern.size()) {
        if (wi == words.size()) out.push_back(binding);
        return;
    }
    const PatternToken& token = tpl.pattern[pi];
    if (!token.is_slot) {
        if (wi < words.size() && words[wi] == token.word) {
            match_pattern(tpl, set, words, pi + 1, wi + 1, binding, out);
        }
        return;
    }
    const std::size_t min_rest = tpl.pattern.size() - pi - 1;   // every token eats >=1 word
    if (words.size() < wi + 1 + min_rest) return;
    const std::size_t max_len = words.size() - wi - min_rest;
    std::string span;
    for (std::size_t len = 1; len <= max_len; ++len) {
        const std::string& word = words[wi + len - 1];
        if (set.is_reserved(word)) break;   // spans never cross fixed template words
        if (len > 1) span.push_back(' ');
        span += word;
        auto name = set.invert_span(span);
        if (!name) continue;
        binding[token.slot] = Entry{*name, placeholder_kind(token.slot)};
        match_pattern(tpl, set, words, pi + 1, wi + len, binding, out);
        binding.erase(token.slot);
    }
}

} // namespace detail

struct ParsedQuestion {
    QueryLayout layout;
    const Template* tpl;
    Binding binding;
};

// All (template, binding) pairs whose instantiation reproduces the text.
inline std::vector<ParsedQuestion> match_question(const std::string& text,
                                                  const TemplateSet& set) {
    const std::vector<std::string> words = detail::split_words(text);
    std::vector<ParsedQuestion> matches;
    if (words.empty()) return matches;
    for (const Template& tpl : set.templates()) {
        std::vector<Binding> bindings;
        Binding scratch;
        detail::match_pattern(tpl, set, words, 0, 0, scratch, bindings);
        for (Binding& b : bindings) {
            matches.push_back(ParsedQuestion{instantiate_layout(tpl.skeleton, b), &tpl, std::move(b)});
        }
    }
    return matches;
}

// The unique layout whose instantiation matches the text exactly. No match
// and multi-layout matches are errors, never guesses.
inline QueryLayout parse_question(const std::string& text, const TemplateSet& set) {
    std::vector<ParsedQuestion> matches = match_question(text, set);
    if (matches.empty()) {
        raise(ErrorKind::Parse, "unparseable question: '" + text + "'");
    }
    for (std::size_t i = 1; i < matches.size(); ++i) {
        if (!(matches[i].layout == matches[0].layout)) {
            raise(ErrorKind::Parse, "ambiguous question: '" + text + "' matches layouts " +
                                        serialize(matches[0].layout) + " and " +
                                        serialize(matches[i].layout));
        }
    }
    return matches[0].layout;
}

} // namespace hvqr
