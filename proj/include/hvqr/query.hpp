#pragma once

// The layout language. A layout is a tree of elementary queries over entry
// leaves; its text form is an s-expression whose head is always a query
// symbol: "(Q_ar_K (Q_rb_I on desk) usedfor)". Tokens are whitespace-separated
// except for the self-delimiting parentheses. Parsing is a shift-reduce pass:
// shift until ')', then reduce the top (symbol, child, child) into one node.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hvqr/entry.hpp"
#include "hvqr/error.hpp"
#include "hvqr/triplet.hpp"

namespace hvqr {

// An elementary query: which slot of (subject, relation, object) is asked,
// and whether it runs against the image or the knowledge base.
struct QuerySymbol {
    Slot queried = Slot::Relation;
    Scope scope = Scope::ImageOnly;

    auto operator<=>(const QuerySymbol&) const = default;
};

inline std::string to_string(const QuerySymbol& symbol) {
    std::string s = "Q_";
    switch (symbol.queried) {
        case Slot::Relation: s += "ab"; break;  // subject+object given
        case Slot::Object: s += "ar"; break;    // subject+relation given
        case Slot::Subject: s += "rb"; break;   // relation+object given
    }
    s += symbol.scope == Scope::ImageOnly ? "_I" : "_K";
    return s;
}

inline std::optional<QuerySymbol> query_symbol_from(std::string_view text) {
    if (text == "Q_ab_I") return QuerySymbol{Slot::Relation, Scope::ImageOnly};
    if (text == "Q_ar_I") return QuerySymbol{Slot::Object, Scope::ImageOnly};
    if (text == "Q_rb_I") return QuerySymbol{Slot::Subject, Scope::ImageOnly};
    if (text == "Q_ab_K") return QuerySymbol{Slot::Relation, Scope::KBOnly};
    if (text == "Q_ar_K") return QuerySymbol{Slot::Object, Scope::KBOnly};
    if (text == "Q_rb_K") return QuerySymbol{Slot::Subject, Scope::KBOnly};
    return std::nullopt;
}

// Kinds of the two bound children, by position, and of the produced entries.
inline EntryKind left_kind(const QuerySymbol& s) {
    return s.queried == Slot::Subject ? EntryKind::Relationship : EntryKind::Entity;
}
inline EntryKind right_kind(const QuerySymbol& s) {
    return s.queried == Slot::Object ? EntryKind::Relationship : EntryKind::Entity;
}
inline EntryKind output_kind(const QuerySymbol& s) {
    return s.queried == Slot::Relation ? EntryKind::Relationship : EntryKind::Entity;
}

// Immutable layout tree with structural equality. Every Apply has exactly two
// children; generated questions use at most two Apply levels, but the type
// itself permits deeper trees.
class QueryLayout {
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;
    struct Apply {
        QuerySymbol symbol;
        NodePtr left;
        NodePtr right;
    };
    struct Node {
        std::variant<Entry, Apply> value;
    };

public:
    static QueryLayout leaf(Entry entry) {
        return QueryLayout(std::make_shared<const Node>(Node{std::move(entry)}));
    }

    static QueryLayout apply(QuerySymbol symbol, QueryLayout left, QueryLayout right) {
        return QueryLayout(std::make_shared<const Node>(
            Node{Apply{symbol, std::move(left.node_), std::move(right.node_)}}));
    }

    bool is_leaf() const { return std::holds_alternative<Entry>(node_->value); }

    const Entry& entry() const { return std::get<Entry>(node_->value); }
    QuerySymbol symbol() const { return std::get<Apply>(node_->value).symbol; }
    QueryLayout left() const { return QueryLayout(std::get<Apply>(node_->value).left); }
    QueryLayout right() const { return QueryLayout(std::get<Apply>(node_->value).right); }

    std::size_t apply_count() const {
        if (is_leaf()) return 0;
        return 1 + left().apply_count() + right().apply_count();
    }

    std::size_t depth() const {
        if (is_leaf()) return 0;
        return 1 + std::max(left().depth(), right().depth());
    }

    friend bool operator==(const QueryLayout& a, const QueryLayout& b) {
        if (a.node_ == b.node_) return true;
        if (a.is_leaf() != b.is_leaf()) return false;
        if (a.is_leaf()) return a.entry() == b.entry();
        return a.symbol() == b.symbol() && a.left() == b.left() && a.right() == b.right();
    }

private:
    explicit QueryLayout(NodePtr node) : node_(std::move(node)) {}

    NodePtr node_;
};

// ---------------------------------------------------------------------------
// Tokens

struct Token {
    enum class Kind { Open, Close, Symbol, Name };

    Kind kind;
    QuerySymbol symbol;   // when kind == Symbol
    std::string name;     // when kind == Name (raw lexeme, not yet normalized)

    static Token open() { return {Kind::Open, {}, {}}; }
    static Token close() { return {Kind::Close, {}, {}}; }
    static Token sym(QuerySymbol s) { return {Kind::Symbol, s, {}}; }
    static Token named(std::string n) { return {Kind::Name, {}, std::move(n)}; }

    bool operator==(const Token&) const = default;
};

using TokenStream = std::vector<Token>;

// Whitespace-separated lexemes; '(' and ')' self-delimit. The "Q_" prefix is
// reserved for query symbols, so a Q_-prefixed lexeme that is not one of the
// six symbols is a lex error.
inline TokenStream tokenize(std::string_view text) {
    TokenStream tokens;
    std::size_t i = 0;
    auto flush = [&](std::size_t start, std::size_t end) {
        if (start >= end) return;
        std::string lexeme(text.substr(start, end - start));
        if (auto symbol = query_symbol_from(lexeme)) {
            tokens.push_back(Token::sym(*symbol));
        } else if (lexeme.rfind("Q_", 0) == 0) {
            raise(ErrorKind::Lex, "unknown query symbol '" + lexeme + "'");
        } else {
            tokens.push_back(Token::named(std::move(lexeme)));
        }
    };
    std::size_t word_start = 0;
    for (i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '(' || c == ')' || std::isspace(static_cast<unsigned char>(c))) {
            flush(word_start, i);
            if (c == '(') tokens.push_back(Token::open());
            if (c == ')') tokens.push_back(Token::close());
            word_start = i + 1;
        }
    }
    flush(word_start, text.size());
    if (tokens.empty()) raise(ErrorKind::Lex, "empty layout text");
    return tokens;
}

// ---------------------------------------------------------------------------
// Shift-reduce parser

namespace detail {

[[noreturn]] inline void parse_fail(std::size_t token_index, const std::string& what) {
    raise(ErrorKind::Parse, "layout parse error at token " + std::to_string(token_index) + ": " + what);
}

// Leaf kinds are positional: a leaf takes the kind its parent's slot dictates.
// Freshly shifted leaves default to Entity and are relabeled on reduce.
template <typename LeafFn>
QueryLayout relabel_leaf(QueryLayout node, EntryKind kind, LeafFn&& make_leaf) {
    if (!node.is_leaf() || node.entry().kind == kind) return node;
    return make_leaf(node.entry().name, kind);
}

// The leaf factory lets the template loader reuse the same parse over
// placeholder leaves; the default builds normalized entries.
template <typename LeafFn>
QueryLayout parse_tokens(const TokenStream& tokens, LeafFn&& make_leaf) {
    struct Item {
        enum class Kind { Open, Symbol, Node } kind;
        QuerySymbol symbol;
        std::optional<QueryLayout> node;
        std::size_t token_index;
    };
    std::vector<Item> stack;

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const Token& token = tokens[i];
        switch (token.kind) {
            case Token::Kind::Open:
                stack.push_back({Item::Kind::Open, {}, std::nullopt, i});
                break;
            case Token::Kind::Symbol:
                if (stack.empty() || stack.back().kind != Item::Kind::Open) {
                    parse_fail(i, "query symbol '" + to_string(token.symbol) +
                                      "' must immediately follow '('");
                }
                stack.push_back({Item::Kind::Symbol, token.symbol, std::nullopt, i});
                break;
            case Token::Kind::Name:
                stack.push_back(
                    {Item::Kind::Node, {}, make_leaf(token.name, std::nullopt), i});
                break;
            case Token::Kind::Close: {
                // Reduce: expect Open, Symbol, child, child on top of the stack.
                std::vector<QueryLayout> children;
                while (!stack.empty() && stack.back().kind == Item::Kind::Node) {
                    children.push_back(std::move(*stack.back().node));
                    stack.pop_back();
                }
                if (stack.empty() || stack.back().kind != Item::Kind::Symbol) {
                    parse_fail(i, "')' without a query application to close");
                }
                QuerySymbol symbol = stack.back().symbol;
                stack.pop_back();
                if (stack.empty() || stack.back().kind != Item::Kind::Open) {
                    parse_fail(i, "unbalanced ')'");
                }
                stack.pop_back();
                if (children.size() != 2) {
                    parse_fail(i, to_string(symbol) + " expects exactly 2 arguments, got " +
                                      std::to_string(children.size()));
                }
                // children were popped right-to-left
                QueryLayout right = std::move(children[0]);
                QueryLayout left = std::move(children[1]);
                left = relabel_leaf(std::move(left), left_kind(symbol), make_leaf);
                right = relabel_leaf(std::move(right), right_kind(symbol), make_leaf);
                stack.push_back(
                    {Item::Kind::Node, {}, QueryLayout::apply(symbol, std::move(left), std::move(right)), i});
                break;
            }
        }
    }

    if (stack.size() != 1 || stack.back().kind != Item::Kind::Node) {
        for (const Item& item : stack) {
            if (item.kind == Item::Kind::Open) {
                parse_fail(item.token_index, "unclosed '('");
            }
        }
        parse_fail(tokens.size() - 1,
                   "expected a single layout, found " + std::to_string(stack.size()) + " items");
    }
    return std::move(*stack.back().node);
}

} // namespace detail

inline QueryLayout parse_shift_reduce(const TokenStream& tokens) {
    return detail::parse_tokens(tokens, [](const std::string& raw, std::optional<EntryKind> kind) {
        std::string name = normalize_name(raw);
        if (name.empty()) raise(ErrorKind::Parse, "entry name '" + raw + "' is empty after normalization");
        return QueryLayout::leaf(Entry{std::move(name), kind.value_or(EntryKind::Entity)});
    });
}

inline QueryLayout parse_layout(std::string_view text) {
    return parse_shift_reduce(tokenize(text));
}

// Canonical single-space-separated parenthesized form; parse(serialize(x)) == x.
inline std::string serialize(const QueryLayout& layout) {
    if (layout.is_leaf()) return layout.entry().name;
    return "(" + to_string(layout.symbol()) + " " + serialize(layout.left()) + " " +
           serialize(layout.right()) + ")";
}

} // namespace hvqr
