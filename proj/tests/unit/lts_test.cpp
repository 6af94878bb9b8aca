#include <doctest.h>

#include <algorithm>

#include "picr/lts.hpp"

using namespace picr;

namespace {
Configuration cfg(const char* obs, const char* proc_env, std::vector<Name> alloc, const char* p) {
    Configuration c{parse_env(obs), {}, parse(p), parse_env(proc_env)};
    c.resources.allocated = std::set<Name>(alloc.begin(), alloc.end());
    return c;
}

LtsOptions no_obs() {
    LtsOptions o;
    o.observer_moves = false;
    o.track_witness = true;
    return o;
}

std::vector<std::string> labels(const std::vector<Transition>& ts) {
    std::vector<std::string> r;
    for (auto& t : ts) r.push_back(t.rule + " " + to_string(t.label) + " @" + std::to_string(t.cost));
    std::sort(r.begin(), r.end());
    return r;
}

const char* kChan = "c : chan(chan():w):w\nv : chan():w\n";
}  // namespace

TEST_CASE("configuration validity") {
    std::string why;
    CHECK(valid_configuration(cfg(kChan, kChan, {"c", "v"}, "c!<v>.nil"), &why));
    CHECK_FALSE(valid_configuration(cfg(kChan, kChan, {"c"}, "c!<v>.nil"), &why));
    CHECK_FALSE(why.empty());
    CHECK_FALSE(valid_configuration(cfg("c : chan():u(0)\n", "c : chan():u(0)\n", {"c"}, "free c.nil")));
    CHECK(valid_configuration(cfg("c : chan():a\n", "c : chan():u(1)\n", {"c"}, "c?().free c.nil")));
    Configuration no_witness{parse_env(kChan), {}, parse("nil"), std::nullopt};
    CHECK_FALSE(valid_configuration(no_witness));
}

TEST_CASE("output and input to the observer") {
    auto out = transitions(cfg(kChan, kChan, {"c", "v"}, "c!<v>.nil"), no_obs());
    CHECK(labels(out) == std::vector<std::string>{"lOut c!(v) @0"});
    auto in = transitions(cfg(kChan, kChan, {"c", "v"}, "c?(x).x!<>.nil"), no_obs());
    CHECK(labels(in) == std::vector<std::string>{"lIn c?(v) @0"});
    REQUIRE(in.size() == 1);
    CHECK(pretty(in[0].target.process) == "v!<>.nil");
}

TEST_CASE("no action on channels the observer cannot use") {
    auto ts = transitions(cfg("v : chan():w\n", kChan, {"c", "v"}, "c!<v>.nil"), no_obs());
    CHECK(ts.empty());
}

TEST_CASE("silent moves carry reduction costs") {
    auto ts = transitions(cfg("", "c : chan():u(0)\n", {"c"}, "free c.nil"), no_obs());
    CHECK(labels(ts) == std::vector<std::string>{"lFree tau @-1"});
    REQUIRE(ts.size() == 1);
    CHECK(ts[0].target.resources.allocated.empty());
    auto a = transitions(cfg("", "", {}, "alloc x.free x.nil"), no_obs());
    CHECK(labels(a) == std::vector<std::string>{"lAll tau @1"});
    auto com = transitions(cfg("", "c : chan(chan():w):w\nv : chan():w\n", {"c", "v"}, "c!<v>.nil | c?(x).nil"),
                           no_obs());
    CHECK(labels(com) == std::vector<std::string>{"lCom-L tau @0"});
    auto rec = transitions(cfg("", kChan, {"c", "v"}, "rec w.c!<v>.w"), no_obs());
    CHECK(labels(rec) == std::vector<std::string>{"lRec tau @0"});
}

TEST_CASE("scope extrusion names extruded channels canonically") {
    auto obs = "c : chan(chan():a):w\n";
    auto c = cfg(obs, obs, {"c"}, "alloc x.c!<x>.nil");
    auto t1 = transitions(c, no_obs());
    REQUIRE(t1.size() == 1);
    auto t2 = transitions(t1[0].target, no_obs());
    CHECK(labels(t2) == std::vector<std::string>{"lOut c!(@0) @0"});
    REQUIRE(t2.size() == 1);
    CHECK(t2[0].target.observer.has("@0"));
}

TEST_CASE("observer allocation and release") {
    LtsOptions o;
    o.track_witness = true;
    auto obs = "c : chan(chan():a):w\n";
    auto c = cfg(obs, obs, {"c"}, "c?(x).x!<>.nil");
    auto ts = transitions(c, o);
    bool alloc = false;
    for (auto& t : ts)
        if (t.label.kind == ActionLabel::AllocExt) {
            alloc = true;
            CHECK(t.rule == "lAllE");
            CHECK(t.cost == 1);
            CHECK(t.target.observer.has(t.label.channel));
            CHECK(t.target.resources.has(t.label.channel));
        }
    CHECK(alloc);

    auto f = cfg("c : chan():u(0)\n", "", {"c"}, "nil");
    auto fs = transitions(f, o);
    bool freed = false;
    for (auto& t : fs)
        if (t.label.kind == ActionLabel::FreeExt) {
            freed = true;
            CHECK(t.cost == -1);
            CHECK_FALSE(t.target.resources.has("c"));
        }
    CHECK(freed);
    auto aff = cfg("c : chan():a\n", "", {"c"}, "nil");
    for (auto& t : transitions(aff, o)) CHECK(t.label.kind != ActionLabel::FreeExt);
}

TEST_CASE("silent transitions agree with the reduction engine") {
    auto c = cfg("", "c : chan(chan():w):w\nv : chan():w\n", {"c", "v"},
                 "c!<v>.nil | c?(x).nil | rec w.c!<v>.w | alloc y.nil");
    auto lts = tau_transitions(c, no_obs());
    auto red = step(System{c.resources, c.process});
    CHECK(lts.size() == red.size());
    std::multiset<int> a, b;
    for (auto& t : lts) a.insert(t.cost);
    for (auto& s : red) b.insert(s.cost);
    CHECK(a == b);
}

TEST_CASE("canonical keys identify renamings and count garbage") {
    auto a = cfg("", "", {"c", "%3"}, "nil");
    a.process = mk_output(Ident::name("c"), {Ident::name("%3")}, mk_nil());
    auto b = a;
    b.resources.allocated = {"c", "%7"};
    b.process = mk_output(Ident::name("c"), {Ident::name("%7")}, mk_nil());
    CHECK(canonicalize(a).key == canonicalize(b).key);
    auto g = a;
    g.resources.allocated.insert("%9");
    auto cg = canonicalize(g);
    CHECK(cg.garbage == 1);
    CHECK(cg.key == canonicalize(a).key);
}

TEST_CASE("cost models") {
    CHECK(apply_cost(CostModel::Signed, -1) == -1);
    CHECK(apply_cost(CostModel::Absolute, -1) == 1);
    CHECK(apply_cost(CostModel::AllocOnly, -1) == 0);
    CHECK(apply_cost(CostModel::AllocOnly, 1) == 1);
    CHECK(to_string(CostModel::AllocOnly) == "alloc-only");
}

TEST_CASE("weak transitions accumulate silent costs") {
    auto obs = "c : chan(chan():w):w\nv : chan():w\n";
    auto c = cfg(obs, obs, {"c", "v"}, "alloc x.free x.c!<v>.nil");
    ActionLabel l;
    l.kind = ActionLabel::Out;
    l.channel = "c";
    l.payload = {"v"};
    auto ws = weak_transitions(c, l, 8, no_obs());
    REQUIRE(ws.size() == 1);
    CHECK(ws[0].cost == 0);
    auto abs = weak_transitions(c, l, 8, no_obs(), CostModel::Absolute);
    REQUIRE(abs.size() == 1);
    CHECK(abs[0].cost == 2);
    ActionLabel tau;
    auto taus = weak_transitions(c, tau, 8, no_obs());
    std::set<int> costs;
    for (auto& w : taus) costs.insert(w.cost);
    CHECK(costs == std::set<int>{0, 1});
}

TEST_CASE("explorer closures report truncation") {
    Explorer ex(no_obs(), CostModel::Signed, 3);
    int id = ex.intern(cfg("", "", {}, "rec w.alloc x.w"));
    auto& cl = ex.tau_closure(id);
    CHECK_FALSE(cl.total);
    Explorer ex2(no_obs(), CostModel::Signed, 3);
    int id2 = ex2.intern(cfg("", "", {}, "nil"));
    CHECK(ex2.tau_closure(id2).total);
    CHECK(ex2.intern(cfg("", "", {}, "nil | nil")) == id2);
}

TEST_CASE("barbs") {
    auto env = "c : chan():w\nd : chan():w\ne : chan():w\n";
    auto obs = "c : chan():w\nd : chan():w\n";
    CHECK(barbs(cfg(obs, env, {"c", "d", "e"}, "c!<>.nil | d?().nil | e!<>.nil"), 4) == std::set<Name>{"c"});
    CHECK(barbs(cfg(obs, env, {"c", "d", "e"}, "alloc x.d!<>.nil"), 4) == std::set<Name>{"d"});
    CHECK(barbs(cfg(obs, env, {"c", "d", "e"}, "alloc x.d!<>.nil"), 0).empty());
}
