#include <doctest.h>

#include "gen.hpp"

using namespace picr;

TEST_CASE("canonical structural form is idempotent") {
    gen::Rng r(101);
    for (int i = 0; i < gen::kCases; ++i) {
        auto p = gen::process(r);
        auto c = canonicalize_struct(p);
        auto cc = canonicalize_struct(c.term);
        INFO(pretty(p));
        CHECK(cc.key == c.key);
        CHECK(pretty(cc.term) == pretty(c.term));
        CHECK(struct_equiv(p, c.term));
    }
}

TEST_CASE("pretty printing round-trips through the parser") {
    gen::Rng r(102);
    for (int i = 0; i < gen::kCases; ++i) {
        auto p = gen::process(r);
        INFO(pretty(p));
        auto q = parse(pretty(p));
        CHECK(serialize(q) == serialize(p));
    }
}

TEST_CASE("structural congruence absorbs reordering and alpha-conversion") {
    gen::Rng r(103);
    for (int i = 0; i < gen::kCases; ++i) {
        auto p = gen::process(r);
        auto q = gen::shuffle_par(gen::alpha_rename(p, r), r);
        INFO(pretty(p));
        INFO(pretty(q));
        CHECK(struct_equiv(p, q));
        CHECK(free_names(p) == free_names(q));
    }
}

TEST_CASE("substitution only introduces the substituted name") {
    gen::Rng r(104);
    for (int i = 0; i < gen::kCases; ++i) {
        auto p = gen::process(r);
        auto comps = flatten_par(p);
        // open the first input binder found at top level, if any
        for (auto& c : comps) {
            auto in = std::get_if<Input>(&c->node);
            if (!in || in->params.empty()) continue;
            Subst s;
            for (auto& x : in->params) s.chans[x] = "fresh";
            auto q = substitute(in->cont, s);
            auto allowed = free_names(in->cont);
            allowed.insert("fresh");
            for (auto& n : free_names(q)) CHECK(allowed.count(n));
            CHECK(free_vars(q).size() <= free_vars(in->cont).size());
            break;
        }
    }
}

TEST_CASE("parallel flattening preserves components") {
    gen::Rng r(105);
    for (int i = 0; i < gen::kCases; ++i) {
        auto p = gen::process(r);
        auto comps = flatten_par(p);
        for (auto& c : comps) {
            CHECK_FALSE(std::holds_alternative<Par>(c->node));
            CHECK_FALSE(std::holds_alternative<Nil>(c->node));
        }
        CHECK(struct_equiv(build_par(comps), p));
    }
}
