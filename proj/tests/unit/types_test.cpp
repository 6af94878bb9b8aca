#include <doctest.h>

#include "picr/types.hpp"

using namespace picr;

namespace {
Type T(const char* s) { return parse_type(s); }
}

TEST_CASE("type parsing and printing") {
    auto t = T("chan(chan():w, chan():a):u(2)");
    CHECK(attr_of(t) == Attribute::u(2));
    CHECK(payload_of(t).size() == 2);
    CHECK(type_equal(T(to_string(t).c_str()), t));
    CHECK_THROWS_AS(T("chan(:w"), TypeError);
    CHECK_THROWS_AS(T("mu X.X"), TypeError);     // not contractive
    CHECK_THROWS_AS(T("chan(Y):w"), TypeError);  // unbound variable
}

TEST_CASE("recursive types are compared coinductively") {
    auto a = T("mu X.chan(X):w");
    auto b = T("mu Y.chan(chan(Y):w):w");
    auto c = T("chan(mu X.chan(X):w):w");
    CHECK(type_equal(a, b));
    CHECK(type_equal(a, c));
    CHECK(type_key(a) == type_key(b));
    CHECK_FALSE(type_equal(a, T("mu X.chan(X):a")));
    CHECK_FALSE(type_equal(T("chan():u(0)"), T("chan():u(1)")));
}

TEST_CASE("attribute decrement") {
    CHECK(attr_decrement(Attribute::a()).kind == Decrement::Absent);
    auto w = attr_decrement(Attribute::w());
    CHECK(w.kind == Decrement::Defined);
    CHECK(w.attr == Attribute::w());
    CHECK(attr_decrement(Attribute::u(0)).kind == Decrement::Undefined);
    auto u3 = attr_decrement(Attribute::u(3));
    CHECK(u3.kind == Decrement::Defined);
    CHECK(u3.attr == Attribute::u(2));
}

TEST_CASE("attribute subtyping") {
    CHECK(attr_sub(Attribute::w(), Attribute::a()));
    CHECK(attr_sub(Attribute::u(1), Attribute::u(3)));
    CHECK(attr_sub(Attribute::u(0), Attribute::a()));
    CHECK_FALSE(attr_sub(Attribute::u(3), Attribute::u(1)));
    CHECK_FALSE(attr_sub(Attribute::a(), Attribute::w()));
    CHECK_FALSE(attr_sub(Attribute::w(), Attribute::u(0)));
    CHECK(subtype(T("chan():u(0)"), T("chan():a")));
    CHECK_FALSE(subtype(T("chan(chan():w):w"), T("chan():a")));
}

TEST_CASE("splitting") {
    CHECK(can_split(T("chan():u(0)"), T("chan():a"), T("chan():u(1)")));
    CHECK(can_split(T("chan():u(0)"), T("chan():u(1)"), T("chan():a")));
    CHECK(can_split(T("chan():w"), T("chan():w"), T("chan():w")));
    CHECK_FALSE(can_split(T("chan():a"), T("chan():a"), T("chan():a")));
    CHECK_FALSE(can_split(T("chan():u(0)"), T("chan():a"), T("chan():u(0)")));
}

TEST_CASE("environments and consistency") {
    auto e = parse_env("# c\nc : chan():u(1)\nc : chan():a\nd : chan(chan():w):w\n");
    CHECK(e.size() == 3);
    CHECK(e.domain() == std::vector<std::string>{"c", "d"});
    CHECK(consistent(e));
    CHECK_FALSE(consistent(parse_env("c : chan():u(0)\nc : chan():u(1)\n")));
    CHECK_FALSE(consistent(parse_env("c : chan():u(0)\nc : chan():a\n")));
    CHECK(consistent(parse_env("c : chan():u(2)\nc : chan():a\nc : chan():a\n")));
    CHECK_FALSE(consistent(parse_env("c : chan():u(1)\nc : chan():w\n")));
    CHECK_FALSE(consistent(parse_env("c : chan():w\nc : chan(chan():w):w\n")));
    CHECK(consistent(parse_env("c : chan():w\nc : chan():a\n")));
    auto d = consistency_diagnostic(parse_env("c : chan():u(0)\nc : chan():a\n"));
    REQUIRE(d);
    CHECK(d->find("'c'") != std::string::npos);
}

TEST_CASE("environment keys ignore order") {
    auto a = parse_env("x : chan():w\ny : chan():a\n");
    auto b = parse_env("y : chan():a\nx : chan():w\n");
    CHECK(env_equal(a, b));
    CHECK(env_key(a) == env_key(b));
    CHECK_FALSE(env_equal(a, parse_env("x : chan():w\n")));
}

TEST_CASE("split, join and revise on environments") {
    auto e = parse_env("c : chan():u(0)\n");
    auto s = env_split(e, "c", T("chan():u(0)"), T("chan():a"), T("chan():u(1)"));
    CHECK(env_equal(s, parse_env("c : chan():a\nc : chan():u(1)\n")));
    auto j = env_join(s, "c", T("chan():a"), T("chan():u(1)"), T("chan():u(0)"));
    CHECK(env_equal(j, e));
    auto r = env_revise(e, "c", {T("chan():w")});
    CHECK(env_equal(r, parse_env("c : chan(chan():w):u(0)\n")));
    CHECK_THROWS_AS(env_revise(s, "c", {}), EnvError);
}
