#include <doctest.h>

#include "picr/bisim.hpp"
#include "picr/workspace.hpp"

using namespace picr;

namespace {
TypedSystem ts(const char* env, std::vector<Name> alloc, const char* p) {
    return {make_system(alloc, parse(p)), parse_env(env)};
}

const Workspace& corpus() {
    static Workspace ws = load_workspace(std::string(PICR_CORPUS) + "/workspace.toml");
    return ws;
}
TypedSystem sys(const char* name) { return load_system(corpus(), name); }
TypeEnv obs(const char* f) { return load_env(std::string(PICR_CORPUS) + "/envs/" + f); }

Verdict leq(const TypedSystem& l, const TypedSystem& r, int credit, BisimOptions o = {}) {
    return check_leq(TypeEnv{}, l, r, credit, o);
}
}  // namespace

TEST_CASE("identical systems are related at zero credit") {
    auto a = ts("", {}, "nil");
    auto v = leq(a, a, 0);
    CHECK(v.result == Verdict::Holds);
    CHECK(v.min_credit == 0);
    CHECK_FALSE(v.witness.empty());
}

TEST_CASE("a costlier left side needs credit") {
    auto costly = ts("", {}, "alloc x.nil");
    auto cheap = ts("", {}, "nil");
    CHECK(leq(costly, cheap, 0).result == Verdict::Refuted);
    CHECK(leq(costly, cheap, 1).result == Verdict::Holds);
    CHECK(leq(cheap, costly, 0).result == Verdict::Holds);
}

TEST_CASE("release refunds only under the signed model") {
    auto l = ts("", {}, "alloc x.free x.nil");
    auto r = ts("", {}, "nil");
    // The allocation is paid before the refund arrives.
    CHECK(leq(l, r, 0).result == Verdict::Refuted);
    CHECK(leq(l, r, 1).result == Verdict::Holds);
    BisimOptions abs;
    abs.cost_model = CostModel::Absolute;
    CHECK(leq(l, r, 1, abs).result == Verdict::Refuted);
    CHECK(leq(l, r, 2, abs).result == Verdict::Holds);
    CHECK(leq(l, l, 0, abs).result == Verdict::Holds);
}

TEST_CASE("visible behaviour must be matched") {
    auto env = "c : chan():w\n";
    TypeEnv o = parse_env(env);
    auto speaks = ts(env, {"c"}, "c!<>.nil");
    auto quiet = ts(env, {"c"}, "nil");
    BisimOptions opts;
    auto v = check_leq(o, speaks, quiet, 3, opts);
    REQUIRE(v.result == Verdict::Refuted);
    REQUIRE_FALSE(v.counterexample.empty());
    const auto& last = v.counterexample.back();
    CHECK_FALSE(last.answered);
    CHECK(last.answers_available == 0);
    CHECK(to_string(last.label) == "c!()");
    CHECK(replay_counterexample(o, speaks, quiet, 3, opts, v.counterexample));
    CHECK(check_leq(o, speaks, speaks, 0, opts).result == Verdict::Holds);
}

TEST_CASE("credit caps saturate and bounds limit accumulation") {
    auto cheap = ts("", {}, "nil");
    auto spender = ts("", {}, "rec w.alloc x.w");
    CHECK(leq(cheap, spender, 0).result == Verdict::Holds);
    BisimOptions b;
    b.bounded = 0;
    CHECK(leq(cheap, ts("", {}, "alloc x.nil"), 0, b).result == Verdict::Refuted);
    b.bounded = 1;
    CHECK(leq(cheap, ts("", {}, "alloc x.nil"), 0, b).result == Verdict::Holds);
}

TEST_CASE("invalid inputs are rejected") {
    auto a = ts("", {}, "nil");
    BisimOptions o;
    o.credit_cap = 2;
    CHECK_THROWS_AS(leq(a, a, 3, o), BisimError);
    o.credit_cap = 8;
    o.bounded = 1;
    CHECK_THROWS_AS(leq(a, a, 2, o), BisimError);
    auto bad = ts("c : chan():u(0)\n", {}, "free c.nil");  // c not allocated
    CHECK_THROWS_AS(leq(bad, bad, 0), BisimError);
}

TEST_CASE("budget exhaustion is inconclusive") {
    BisimOptions o;
    o.state_budget = 10;
    auto v = check_leq(obs("clients.env"), sys("C1"), sys("C0"), 0, o);
    CHECK(v.result == Verdict::Inconclusive);
    CHECK(v.bound_hit == "state_budget");
    CHECK_FALSE(v.min_credit.has_value());
}

TEST_CASE("client preorders") {
    auto o = obs("clients.env");
    BisimOptions opts;
    auto v = check_leq(o, sys("C1"), sys("C0"), 0, opts);
    CHECK(v.result == Verdict::Holds);
    auto tmpl = game_templates(o, sys("C1"), sys("C0"));
    std::string why;
    CHECK(verify_witness(v.witness, opts, tmpl, &why));
    auto r = check_leq(o, sys("C0"), sys("C1"), 0, opts);
    CHECK(r.result == Verdict::Refuted);
    CHECK(replay_counterexample(o, sys("C0"), sys("C1"), 0, opts, r.counterexample));
}

TEST_CASE("tampered witnesses are rejected") {
    auto o = obs("clients.env");
    BisimOptions opts;
    auto v = check_leq(o, sys("C3"), sys("C2"), 1, opts);
    REQUIRE(v.result == Verdict::Holds);
    auto tmpl = game_templates(o, sys("C3"), sys("C2"));
    CHECK(verify_witness(v.witness, opts, tmpl));
    auto lowered = v.witness;
    for (auto& e : lowered) e.credit = 0;
    CHECK_FALSE(verify_witness(lowered, opts, tmpl));
}

TEST_CASE("equivalence and refinement") {
    auto o = obs("clients.env");
    auto e = check_eq(o, sys("C1"), sys("C1"));
    CHECK(e.holds());
    CHECK(e.forward.min_credit == 0);
    auto r = check_refined(o, sys("C4"), sys("C2"));
    CHECK(r.result == Verdict::Holds);
    REQUIRE(r.alloc_forward.has_value());
    CHECK(r.alloc_forward->result == Verdict::Holds);
}

TEST_CASE("name-free shapes") {
    CHECK(name_free_shape(parse("c!<d>.nil")) == name_free_shape(parse("e!<f>.nil")));
    CHECK(name_free_shape(parse("c!<d>.nil")) != name_free_shape(parse("c?(x).nil")));
}
