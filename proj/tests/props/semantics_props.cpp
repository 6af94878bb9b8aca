#include <doctest.h>

#include <algorithm>

#include "gen.hpp"
#include "picr/typecheck.hpp"
#include "picr/workspace.hpp"

using namespace picr;

namespace {

System random_system(gen::Rng& r) {
    auto p = gen::process(r);
    std::vector<Name> alloc;
    for (auto& n : free_names(p))
        if (r() % 4) alloc.push_back(n);
    return make_system(alloc, p);
}

std::vector<std::pair<int, std::string>> outcomes(const std::vector<CostedStep>& steps) {
    std::vector<std::pair<int, std::string>> out;
    for (auto& s : steps) out.emplace_back(s.cost, state_hash(s.next));
    std::sort(out.begin(), out.end());
    return out;
}

struct Start {
    std::string label;
    Configuration config;
};

std::vector<Start> corpus_starts() {
    auto ws = load_workspace(std::string(PICR_CORPUS) + "/workspace.toml");
    auto env = [](const char* f) { return load_env(std::string(PICR_CORPUS) + "/envs/" + f); };
    std::vector<Start> out;
    for (auto* s : {"C0", "C1", "C2", "C2p", "C3", "C4"})
        out.push_back({s, initial_configuration(env("clients_obs.env"), load_system(ws, s))});
    for (auto* s : {"Buff", "eBuff"})
        out.push_back({s, initial_configuration(env("buffer_ext.env"), load_system(ws, s))});
    for (auto* s : {"Bck", "eBk"})
        out.push_back({s, initial_configuration(env("backend_obs.env"), load_system(ws, s))});
    return out;
}

}  // namespace

TEST_CASE("every reduction step changes the allocation by its cost") {
    gen::Rng r(301);
    RunOptions o;
    o.policy = Policy::Exhaustive;
    o.fuel = 6;
    o.max_traces = 40;
    size_t steps = 0;
    for (int i = 0; i < gen::kCases; ++i) {
        auto s = random_system(r);
        INFO(pretty(s.process));
        for (auto& t : run(s, o)) {
            int sum = 0;
            auto before = s.resources.allocated.size();
            for (auto& st : t.steps) {
                auto after = st.next.resources.allocated.size();
                CHECK(static_cast<long>(after) - static_cast<long>(before) == st.cost);
                CHECK(st.cost == rule_cost(st.rule));
                before = after;
                sum += st.cost;
                ++steps;
            }
            CHECK(sum == t.total_cost);
        }
    }
    CHECK(steps > 1000);
}

TEST_CASE("silent transitions coincide with reductions") {
    gen::Rng r(302);
    LtsOptions o;
    o.observer_moves = false;
    for (int i = 0; i < gen::kCases; ++i) {
        auto s = random_system(r);
        INFO(pretty(s.process));
        Configuration c{TypeEnv{}, s.resources, s.process, std::nullopt};
        auto red = step(s);
        auto lts = tau_transitions(c, o);
        std::vector<CostedStep> as_steps;
        for (auto& t : lts) {
            CostedStep cs;
            cs.next = System{t.target.resources, t.target.process};
            cs.cost = t.cost;
            as_steps.push_back(cs);
        }
        CHECK(outcomes(red) == outcomes(as_steps));
    }
}

TEST_CASE("transitions preserve configuration validity") {
    gen::Rng r(303);
    auto starts = corpus_starts();
    LtsOptions o;
    o.track_witness = true;
    size_t checked = 0;
    for (int i = 0; i < gen::kCases; ++i) {
        Configuration cur;
        std::string label;
        if (i % 2) {
            auto& s = starts[static_cast<size_t>(i / 2) % starts.size()];
            cur = s.config;
            label = s.label;
        } else {
            auto smp = gen::typed_system(r);
            cur = initial_configuration(gen::observer(), smp.sys);
            label = smp.text;
        }
        INFO(label);
        REQUIRE(valid_configuration(cur));
        for (int k = 0; k < 6; ++k) {
            auto ts = transitions(cur, o);
            if (ts.empty()) break;
            auto& t = ts[r() % ts.size()];
            std::string why;
            INFO(to_string(t.label));
            CHECK(valid_configuration(t.target, &why));
            if (t.label.kind != ActionLabel::Tau) CHECK(t.cost == label_cost(t.label));
            cur = t.target;
            ++checked;
        }
    }
    CHECK(checked > 1000);
}

TEST_CASE("canonical keys are invariant under renaming internal names") {
    gen::Rng r(304);
    LtsOptions o;
    o.observer_moves = false;
    o.track_witness = true;
    size_t compared = 0;
    for (int i = 0; i < gen::kCases; ++i) {
        auto smp = gen::typed_system(r);
        auto c = initial_configuration(gen::observer(), smp.sys);
        // walk a little to create internal names
        for (int k = 0; k < 3; ++k) {
            auto ts = tau_transitions(c, o);
            if (ts.empty()) break;
            c = ts[r() % ts.size()].target;
        }
        std::map<Name, Name> ren;
        for (auto& n : c.resources.allocated)
            if (!n.empty() && n[0] == '%') ren[n] = "%" + std::to_string(100 + r() % 900) + "_" + std::to_string(ren.size());
        if (ren.empty()) continue;
        auto d = c;
        d.process = rename_names(c.process, ren);
        d.resources.allocated.clear();
        for (auto& n : c.resources.allocated) d.resources.allocated.insert(ren.count(n) ? ren[n] : n);
        CHECK(canonicalize(c).key == canonicalize(d).key);
        ++compared;
    }
    CHECK(compared > 100);
}

TEST_CASE("typing derivations replay") {
    gen::Rng r(305);
    for (int i = 0; i < gen::kCases; ++i) {
        auto smp = gen::typed_system(r);
        auto v = check_process(smp.sys.env, smp.sys.system.process);
        INFO(smp.text);
        REQUIRE(v.accepted);
        CHECK(replay(smp.sys.env, smp.sys.system.process, v));
    }
}
