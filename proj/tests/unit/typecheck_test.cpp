#include <doctest.h>

#include "picr/typecheck.hpp"
#include "picr/workspace.hpp"

using namespace picr;

namespace {
const std::string corpus = PICR_CORPUS;
TypeEnv env(const char* f) { return load_env(corpus + "/envs/" + f); }
ProcessTerm proc(const char* f) { return load_process(corpus + "/procs/" + f); }
TypeEnv E(const char* s) { return parse_env(s); }
}  // namespace

TEST_CASE("output and input") {
    auto g = E("c : chan(chan():w):w\nv : chan():w\n");
    CHECK(check_process(g, parse("c!<v>.nil")).accepted);
    CHECK(check_process(g, parse("c?(x).x!<>.nil")).accepted);
    CHECK_FALSE(check_process(g, parse("v!<v>.nil")).accepted);  // arity
    CHECK_FALSE(check_process(g, parse("d!<v>.nil")).accepted);  // unknown channel
}

TEST_CASE("affine permissions are used at most once") {
    auto g = E("c : chan():a\n");
    CHECK(check_process(g, parse("c!<>.nil")).accepted);
    CHECK_FALSE(check_process(g, parse("c!<>.c!<>.nil")).accepted);
    CHECK(check_process(g, parse("nil")).accepted);  // weakening
}

TEST_CASE("unique-after-i counts down on use") {
    auto g = E("c : chan():u(1)\n");
    CHECK(check_process(g, parse("c!<>.c!<>.nil")).accepted);
    CHECK(check_process(g, parse("c!<>.free c.nil")).accepted);
    CHECK_FALSE(check_process(g, parse("free c.nil")).accepted);
}

TEST_CASE("release needs a unique-now permission") {
    CHECK(check_process(E("c : chan():u(0)\n"), parse("free c.nil")).accepted);
    CHECK_FALSE(check_process(E("c : chan():a\n"), parse("free c.nil")).accepted);
    CHECK_FALSE(check_process(E("c : chan():w\n"), parse("free c.nil")).accepted);
    CHECK_FALSE(check_process(E("c : chan():u(0)\n"), parse("free c.c!<>.nil")).accepted);
}

TEST_CASE("allocation yields a unique-now channel") {
    CHECK(check_process(TypeEnv{}, parse("alloc x.free x.nil")).accepted);
    CHECK(check_process(E("c : chan(chan():a):w\n"), parse("alloc x.c!<x>.nil")).accepted);
    CHECK_FALSE(check_process(TypeEnv{}, parse("alloc x.free x.free x.nil")).accepted);
}

TEST_CASE("strong update revises a unique-now channel") {
    auto g = E("c : chan(chan(chan():w):a):w\nd : chan(chan(chan(chan():w):w):a):w\n");
    CHECK(check_process(g, parse("alloc x.c!<x>.x?(y).d!<x>.nil")).accepted);
}

TEST_CASE("parallel composition splits permissions") {
    auto g = E("c : chan():u(0)\n");
    CHECK(check_process(g, parse("c!<>.nil | c?().free c.nil")).accepted);
    CHECK_FALSE(check_process(g, parse("free c.nil | free c.nil")).accepted);
}

TEST_CASE("system rule checks domain and consistency") {
    ResourceEnv m;
    m.allocated = {"c"};
    CHECK(check_system(E("c : chan():u(0)\n"), m, parse("free c.nil")).accepted);
    CHECK_FALSE(check_system(E("d : chan():u(0)\n"), m, parse("free d.nil")).accepted);
    CHECK_FALSE(check_system(E("c : chan():u(0)\nc : chan():u(1)\n"), m, parse("nil")).accepted);
    CHECK_FALSE(check_system(env("free_affine.env"), m, proc("free_affine.pi")).accepted);
}

TEST_CASE("clients and servers are typeable") {
    for (auto* f : {"c0.pi", "c1.pi", "c2.pi", "c2p.pi", "c3.pi", "c4.pi"}) {
        INFO(f);
        auto v = check_process(env("clients.env"), proc(f));
        CHECK(v.accepted);
        CHECK(replay(env("clients.env"), proc(f), v));
    }
    for (auto* f : {"s1.pi", "s2.pi", "context_c0.pi", "context_c1.pi"}) {
        INFO(f);
        CHECK(check_process(env("context_int.env"), proc(f)).accepted);
    }
}

TEST_CASE("distinct answer types rule out the single up-front channel") {
    CHECK(check_process(env("clients_distinct.env"), proc("c1.pi")).accepted);
    CHECK(check_process(env("clients_distinct.env"), proc("c2.pi")).accepted);
    auto v = check_process(env("clients_distinct.env"), proc("c4.pi"));
    CHECK_FALSE(v.accepted);
    CHECK_FALSE(v.diagnostics.empty());
}

TEST_CASE("buffer environments") {
    for (auto* f : {"buff.pi", "ebuff.pi"}) {
        INFO(f);
        CHECK(check_process(env("buffer_int.env"), proc(f)).accepted);
        auto v = check_process(env("buffer_int_paper.env"), proc(f));
        CHECK_FALSE(v.accepted);
        REQUIRE_FALSE(v.diagnostics.empty());
        CHECK(v.diagnostics[0].pos.line > 0);
    }
    CHECK(check_process(env("backend_int.env"), proc("backend_bck.pi")).accepted);
    CHECK(check_process(env("backend_int.env"), proc("backend_ebk.pi")).accepted);
}

TEST_CASE("derivations record rules with positions") {
    auto v = check_process(E("c : chan():u(0)\n"), parse("c!<>.\nfree c.nil"));
    REQUIRE(v.accepted);
    bool saw_free = false;
    for (auto& s : v.derivation)
        if (s.rule == "tFree") {
            saw_free = true;
            CHECK(s.pos.line == 2);
        }
    CHECK(saw_free);
}
