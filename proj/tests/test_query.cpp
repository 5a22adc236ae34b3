#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "hvqr/query.hpp"
#include "support/layout_gen.hpp"

using namespace hvqr;
using namespace hvqr::testing;

TEST_CASE("tokenize splits layout text into tokens", "[query]") {
    SECTION("paper example") {
        TokenStream tokens = tokenize("(Q_rb_I on desk)");
        REQUIRE(tokens.size() == 5);
        CHECK(tokens[0] == Token::open());
        CHECK(tokens[1] == Token::sym(QuerySymbol{Slot::Subject, Scope::ImageOnly}));
        CHECK(tokens[2] == Token::named("on"));
        CHECK(tokens[3] == Token::named("desk"));
        CHECK(tokens[4] == Token::close());
    }

    SECTION("single leaf") {
        TokenStream tokens = tokenize("desk");
        REQUIRE(tokens.size() == 1);
        CHECK(tokens[0] == Token::named("desk"));
    }

    SECTION("parens self-delimit without spaces") {
        CHECK(tokenize("(Q_ab_I boy frisbee)").size() == 5);
        CHECK(tokenize("(Q_ab_I boy(Q_ab_K a b))").size() == 9);
    }

    SECTION("unknown Q_-prefixed lexeme is a lex error") {
        CHECK_THROWS_AS(tokenize("(Q_xx_I a b)"), Error);
        CHECK_THROWS_AS(tokenize("Q_ab_X"), Error);
        CHECK_THROWS_AS(tokenize("Q_"), Error);
    }

    SECTION("empty text is a lex error") {
        CHECK_THROWS_AS(tokenize("   "), Error);
    }
}

TEST_CASE("shift-reduce parsing", "[query]") {
    SECTION("nested paper example") {
        QueryLayout layout = parse_layout("(Q_ar_K (Q_rb_I on desk) UsedFor)");
        REQUIRE_FALSE(layout.is_leaf());
        CHECK(layout.symbol() == QuerySymbol{Slot::Object, Scope::KBOnly});
        const QueryLayout& inner = layout.left();
        REQUIRE_FALSE(inner.is_leaf());
        CHECK(inner.symbol() == QuerySymbol{Slot::Subject, Scope::ImageOnly});
        CHECK(inner.left().entry() == (Entry{"on", EntryKind::Relationship}));
        CHECK(inner.right().entry() == (Entry{"desk", EntryKind::Entity}));
        CHECK(layout.right().entry() == (Entry{"usedfor", EntryKind::Relationship}));
        CHECK(layout.apply_count() == 2);
    }

    SECTION("single apply with two leaves") {
        QueryLayout layout = parse_layout("(Q_ab_I boy frisbee)");
        CHECK(layout.apply_count() == 1);
        CHECK(layout.left().entry() == (Entry{"boy", EntryKind::Entity}));
        CHECK(layout.right().entry() == (Entry{"frisbee", EntryKind::Entity}));
    }

    SECTION("bare leaf parses to an entity leaf") {
        QueryLayout layout = parse_layout("desk");
        REQUIRE(layout.is_leaf());
        CHECK(layout.entry() == (Entry{"desk", EntryKind::Entity}));
    }

    SECTION("arity violations are named by token index") {
        CHECK_THROWS_WITH(parse_layout("(Q_ar_I a b c)"),
                          Catch::Matchers::ContainsSubstring("token 5") &&
                              Catch::Matchers::ContainsSubstring("exactly 2"));
        CHECK_THROWS_AS(parse_layout("(Q_ar_I a)"), Error);
    }

    SECTION("unbalanced and malformed streams are rejected") {
        CHECK_THROWS_AS(parse_layout("(Q_ab_I a b"), Error);
        CHECK_THROWS_AS(parse_layout("Q_ab_I a b)"), Error);
        CHECK_THROWS_AS(parse_layout("(Q_ab_I a b))"), Error);
        CHECK_THROWS_AS(parse_layout("(boy a b)"), Error);       // head must be a symbol
        CHECK_THROWS_AS(parse_layout("a b"), Error);             // two roots
        CHECK_THROWS_AS(parse_layout("(Q_ab_I Q_ar_I a b)"), Error);
        CHECK_THROWS_AS(parse_layout("()"), Error);
    }
}

TEST_CASE("serialization is canonical and round-trips", "[query]") {
    SECTION("leaf identity") {
        CHECK(serialize(QueryLayout::leaf(make_entity("desk"))) == "desk");
    }

    SECTION("paper example renders in normalized form") {
        QueryLayout layout = parse_layout("(Q_ar_K (Q_rb_I on desk) UsedFor)");
        const std::string text = serialize(layout);
        CHECK(text == "(Q_ar_K (Q_rb_I on desk) usedfor)");
        // same string as the paper's rendering modulo entry-name case
        std::string paper = "(Q_ar_K (Q_rb_I on desk) UsedFor)";
        std::string lowered = paper;
        for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        std::string text_lowered = text;
        for (char& c : text_lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        CHECK(text_lowered == lowered);
        CHECK(parse_layout(text) == layout);
    }

    SECTION("500 random trees round-trip") {
        Rng rng(99);
        for (int i = 0; i < 500; ++i) {
            QueryLayout layout = random_layout(rng, 4);
            CHECK(parse_shift_reduce(tokenize(serialize(layout))) == layout);
        }
    }

    SECTION("100 random serialized layouts re-tokenize identically") {
        Rng rng(123);
        for (int i = 0; i < 100; ++i) {
            QueryLayout layout = random_layout(rng, 3);
            const std::string text = serialize(layout);
            CHECK(tokenize(text) == tokenize(text));
            CHECK(serialize(parse_shift_reduce(tokenize(text))) == text);
        }
    }
}

TEST_CASE("mutated token streams always error, never give wrong trees", "[query][property]") {
    Rng rng(4242);
    for (int i = 0; i < 1000; ++i) {
        QueryLayout layout = random_apply_layout(rng, 3);
        TokenStream tokens = tokenize(serialize(layout));
        TokenStream broken = mutate_tokens(tokens, rng);
        CHECK_THROWS_AS(parse_shift_reduce(broken), Error);
    }
}
