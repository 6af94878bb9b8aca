#include <doctest.h>

#include <algorithm>

#include "picr/reduction.hpp"

using namespace picr;

namespace {
System sys(std::vector<Name> alloc, const char* p) { return make_system(alloc, parse(p)); }

std::vector<Rule> rules_of(const std::vector<CostedStep>& steps) {
    std::vector<Rule> r;
    for (auto& s : steps) r.push_back(s.rule);
    return r;
}
}  // namespace

TEST_CASE("rule costs") {
    CHECK(rule_cost(Rule::All) == 1);
    CHECK(rule_cost(Rule::Free) == -1);
    CHECK(rule_cost(Rule::Com) == 0);
    CHECK(rule_cost(Rule::Rec) == 0);
    CHECK(rule_cost(Rule::Then) == 0);
    CHECK(rule_cost(Rule::Else) == 0);
}

TEST_CASE("communication requires an allocated channel") {
    auto s = sys({"c", "v"}, "c!<v>.nil | c?(x).x!<>.nil");
    auto st = step(s);
    REQUIRE(st.size() == 1);
    CHECK(st[0].rule == Rule::Com);
    CHECK(st[0].cost == 0);
    CHECK(struct_equiv(st[0].next.process, parse("v!<>.nil")));
    CHECK(step(sys({"v"}, "c!<v>.nil | c?(x).x!<>.nil")).empty());
}

TEST_CASE("arity mismatch does not communicate") {
    CHECK(step(sys({"c", "v"}, "c!<v,v>.nil | c?(x).nil")).empty());
}

TEST_CASE("matching") {
    CHECK(step(sys({}, "if a = a then a!<>.nil else nil")).empty());  // names must be allocated
    auto t = step(sys({"a"}, "if a = a then a!<>.nil else nil"));
    REQUIRE(t.size() == 1);
    CHECK(t[0].rule == Rule::Then);
    CHECK(step(sys({"a"}, "if a = b then nil else b!<>.nil")).empty());
    auto e = step(sys({"a", "b"}, "if a = b then nil else b!<>.nil"));
    REQUIRE(e.size() == 1);
    CHECK(e[0].rule == Rule::Else);
    CHECK(pretty(e[0].next.process) == "b!<>.nil");
}

TEST_CASE("recursion unfolds") {
    auto st = step(sys({"c"}, "rec w.c!<>.w"));
    REQUIRE(st.size() == 1);
    CHECK(st[0].rule == Rule::Rec);
    CHECK(struct_equiv(st[0].next.process, parse("c!<>.rec w.c!<>.w")));
}

TEST_CASE("allocation and release update the resource environment") {
    auto a = step(sys({}, "alloc x.x!<>.nil"));
    REQUIRE(a.size() == 1);
    CHECK(a[0].rule == Rule::All);
    CHECK(a[0].cost == 1);
    CHECK(a[0].next.resources.allocated.size() == 1);
    auto n = *a[0].next.resources.allocated.begin();
    CHECK(n == a[0].channel);
    CHECK(free_names(a[0].next.process) == std::set<Name>{n});

    auto f = step(sys({"c"}, "free c.nil"));
    REQUIRE(f.size() == 1);
    CHECK(f[0].rule == Rule::Free);
    CHECK(f[0].cost == -1);
    CHECK(f[0].next.resources.allocated.empty());
    CHECK(step(sys({}, "free c.nil")).empty());
}

TEST_CASE("fresh names avoid names occurring in the process") {
    ResourceEnv m;
    auto n0 = fresh_name(m, {"%0", "%1"});
    CHECK(n0 == "%2");
    auto s = make_system({}, mk_alloc("x", mk_output(Ident::var("x"), {Ident::name("%0")}, mk_nil())));
    auto st = step(s);
    REQUIRE(st.size() == 1);
    CHECK(st[0].channel != "%0");
}

TEST_CASE("re-allocating a dangling name") {
    auto s = sys({"c"}, "free c.(c!<1>.nil | c?(x).nil) | alloc y.(y!<42>.nil | y?(z).nil)");
    RunOptions o;
    o.policy = Policy::Exhaustive;
    o.step.reuse_dangling = true;
    auto traces = run(s, o);
    bool mixed = false;
    for (auto& t : traces) {
        if (t.steps.size() < 3) continue;
        if (t.steps[0].rule == Rule::Free && t.steps[1].rule == Rule::All && t.steps[1].channel == "c" &&
            t.steps[2].rule == Rule::Com) {
            mixed = true;
            CHECK(t.steps[0].cost == -1);
            CHECK(t.steps[1].cost == 1);
            CHECK(t.total_cost == 0);
        }
    }
    CHECK(mixed);

    o.step.reuse_dangling = false;
    for (auto& t : run(s, o))
        for (auto& st : t.steps)
            if (st.rule == Rule::All) CHECK(st.channel != "c");
}

TEST_CASE("run respects fuel and records totals") {
    auto s = sys({"c"}, "rec w.alloc x.free x.w");
    RunOptions o;
    o.fuel = 7;
    auto traces = run(s, o);
    REQUIRE(traces.size() == 1);
    CHECK(traces[0].steps.size() == 7);
    CHECK_FALSE(traces[0].maximal);
    int sum = 0;
    for (auto& st : traces[0].steps) sum += st.cost;
    CHECK(sum == traces[0].total_cost);
    CHECK(rules_of({traces[0].steps.begin(), traces[0].steps.begin() + 3}) ==
          std::vector<Rule>{Rule::Rec, Rule::All, Rule::Free});
    CHECK(traces[0].total_cost == 0);  // rec, all, free, rec, all, free, rec
}

TEST_CASE("state hash is stable under structural congruence") {
    CHECK(state_hash(sys({"a"}, "a!<>.nil | b!<>.nil")) == state_hash(sys({"a"}, "b!<>.nil | a!<>.nil | nil")));
    CHECK(state_hash(sys({"a"}, "a!<>.nil")) != state_hash(sys({}, "a!<>.nil")));
}
