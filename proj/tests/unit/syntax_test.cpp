#include <doctest.h>

#include "picr/syntax.hpp"

using namespace picr;

TEST_CASE("parse and pretty round trip") {
    const char* cases[] = {
        "nil",
        "c!<a,b>.nil",
        "c?(x,y).x!<y>.nil",
        "alloc x.(x!<c>.nil | x?(y).nil)",
        "rec w.srv1?(x).x!<v>.w",
        "if a = b then c!<>.nil else free c.nil",
    };
    for (auto* c : cases) {
        auto p = parse(c);
        auto q = parse(pretty(p));
        CHECK(serialize(p) == serialize(q));
    }
}

TEST_CASE("binding sites decide variables") {
    auto p = parse("c?(x).x!<c>.nil");
    CHECK(free_names(p) == std::set<Name>{"c"});
    auto q = parse("alloc y.(y!<42>.nil | y?(z).nil)");
    CHECK(free_names(q) == std::set<Name>{"42"});
    CHECK(is_closed(q));
    auto r = parse("rec w.c!<d>.w");
    CHECK(free_names(r) == std::set<Name>{"c", "d"});
}

TEST_CASE("comments and numeric names") {
    auto p = parse("# leading comment\nc!<1>.nil # trailing\n| c?(x).nil");
    CHECK(free_names(p) == std::set<Name>{"1", "c"});
}

TEST_CASE("parse errors carry positions") {
    try {
        parse("c!<a>.\n  ?");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.col() == 3);
    }
    CHECK_THROWS_AS(parse("c?(x)."), ParseError);
    CHECK_THROWS_AS(parse("c!<a>.nil |"), ParseError);
    CHECK_THROWS_AS(parse("nil.c"), ParseError);
    CHECK_THROWS_AS(parse("alloc nil.nil"), ParseError);
    CHECK_THROWS_AS(parse("c!<a>.w"), ParseError);  // unbound process variable
}

TEST_CASE("substitution replaces free variables only") {
    auto body = parse("c?(x).rec w.x!<x>.w", {false});
    auto in = std::get<Input>(body->node);
    auto inst = substitute(in.cont, Subst{{{"x", "d"}}, {}});
    CHECK(pretty(inst) == pretty(parse("rec w.d!<d>.w")));
    auto shadow = parse("c?(x).c?(x).x!<>.nil");
    auto inner = std::get<Input>(shadow->node).cont;
    CHECK(serialize(substitute(inner, Subst{{{"x", "d"}}, {}})) == serialize(inner));
    Subst bad;
    bad.procs["x"] = parse("nil");
    CHECK_THROWS_AS(substitute(in.cont, bad), std::invalid_argument);
}

TEST_CASE("renaming touches constants, not bound variables") {
    auto p = parse("c?(c2).c!<c2>.nil");
    auto q = rename_names(p, {{"c", "d"}});
    CHECK(free_names(q) == std::set<Name>{"d"});
}

TEST_CASE("structural congruence: commutativity, associativity, nil") {
    CHECK(struct_equiv(parse("a!<>.nil | b!<>.nil"), parse("b!<>.nil | a!<>.nil")));
    CHECK(struct_equiv(parse("(a!<>.nil | b!<>.nil) | c!<>.nil"), parse("a!<>.nil | (b!<>.nil | c!<>.nil)")));
    CHECK(struct_equiv(parse("a!<>.nil | nil"), parse("a!<>.nil")));
    CHECK(struct_equiv(parse("c?(x).x!<>.nil"), parse("c?(y).y!<>.nil")));
    CHECK_FALSE(struct_equiv(parse("a!<>.nil"), parse("b!<>.nil")));
    CHECK_FALSE(struct_equiv(parse("a!<>.nil | a!<>.nil"), parse("a!<>.nil")));
}

TEST_CASE("flatten and build parallel compositions") {
    auto p = parse("(a!<>.nil | nil) | (b!<>.nil | c!<>.nil)");
    auto comps = flatten_par(p);
    REQUIRE(comps.size() == 3);
    CHECK(pretty(comps[0]) == "a!<>.nil");
    CHECK(pretty(comps[2]) == "c!<>.nil");
    CHECK(std::holds_alternative<Nil>(build_par({})->node));
    CHECK(struct_equiv(build_par(comps), p));
}
