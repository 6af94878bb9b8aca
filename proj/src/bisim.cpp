#include "picr/bisim.hpp"

#include <chrono>
#include <deque>
#include <map>
#include <memory>
#include <set>
#include <tuple>

namespace picr {

std::string to_string(Verdict::Result r) {
    switch (r) {
        case Verdict::Holds: return "holds";
        case Verdict::Refuted: return "refuted";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

Configuration initial_configuration(const TypeEnv& observer, const TypedSystem& s) {
    return Configuration{observer, s.system.resources, s.system.process, s.env};
}

std::vector<std::vector<Type>> game_templates(const TypeEnv& observer, const TypedSystem& left,
                                              const TypedSystem& right) {
    std::vector<std::vector<Type>> out;
    std::set<std::string> seen;
    for (auto* e : {&observer, &left.env, &right.env})
        for (auto& t : env_templates(*e)) {
            std::string k;
            for (auto& x : t) k += type_key(x) + ",";
            if (seen.insert(k).second) out.push_back(t);
        }
    return out;
}

std::string name_free_shape(const ProcessTerm& p) {
    Subst s;
    for (auto& n : free_names(p)) s.chans[n] = "_";
    return debruijn(rename_names(p, s.chans));
}

namespace {

std::string gamma_key(const CanonicalConfiguration& c) { return c.key.substr(0, c.key.find("|M:")); }

int cap_of(const BisimOptions& o) { return o.bounded ? *o.bounded : o.credit_cap; }

// Credit after a matched move, or -1 when the move is not allowed.
int next_credit(int c, int delta, const BisimOptions& o) {
    int v = c + delta;
    if (v < 0) return -1;
    if (o.bounded) return v > *o.bounded ? -1 : v;
    return std::min(v, o.credit_cap);
}

bool restricted_label(const ActionLabel& l) {
    return l.kind == ActionLabel::Out || l.kind == ActionLabel::In || l.kind == ActionLabel::Tau;
}

LtsOptions lts_options(const BisimOptions& o, bool observer_moves, const std::vector<std::vector<Type>>& tpls) {
    LtsOptions l;
    l.ext_alloc_limit = o.ext_alloc_limit;
    l.observer_moves = observer_moves;
    l.alloc_templates = tpls;
    return l;
}

struct GameAnswer {
    int pos;
    int delta;
    int cost;  // defender's cost
};

struct Challenge {
    bool left;
    ActionLabel label;
    int cost;
    int target;  // challenger's target state
    std::vector<GameAnswer> answers;
};

struct Game {
    const BisimOptions& opts;
    Explorer ex;
    std::vector<std::pair<int, int>> pos;
    std::vector<int> depth;
    int cur_depth = -1;
    std::map<std::pair<int, int>, int> index;
    std::vector<std::vector<Challenge>> challenges;
    size_t expanded = 0;
    bool frontier = false;
    bool total = true;
    bool env_rewrites = false;
    std::vector<uint64_t> win;
    std::vector<std::vector<int>> rank;
    size_t rounds = 0;

    Game(const BisimOptions& o, LtsOptions lo) : opts(o), ex(std::move(lo), o.cost_model, o.tau_depth) {}

    int position(int l, int r) {
        auto it = index.find({l, r});
        if (it != index.end()) return it->second;
        int id = static_cast<int>(pos.size());
        pos.push_back({l, r});
        depth.push_back(cur_depth + 1);
        index.emplace(std::make_pair(l, r), id);
        return id;
    }

    std::vector<Challenge> challenges_at(int l, int r) {
        std::vector<Challenge> out;
        std::set<std::string> seen;
        for (bool left : {true, false}) {
            int me = left ? l : r, other = left ? r : l;
            auto es = ex.edges(me);
            for (auto& e : es) {
                int k = apply_cost(opts.cost_model, e.cost);
                if (!seen.insert((left ? "L" : "R") + e.label_key + "@" + std::to_string(k) + ">" +
                                 std::to_string(e.target))
                         .second)
                    continue;
                if (e.label.kind == ActionLabel::EnvRewrite) env_rewrites = true;
                Challenge ch{left, e.label, k, e.target, {}};
                auto gk = gamma_key(ex.state(e.target));
                bool tot = true;
                auto ans = ex.weak(other, e.label, &tot);
                total = total && tot;
                for (auto& a : ans) {
                    if (gamma_key(ex.state(a.target)) != gk) continue;
                    int p = left ? position(e.target, a.target) : position(a.target, e.target);
                    ch.answers.push_back({p, left ? a.cost - k : k - a.cost, a.cost});
                }
                out.push_back(std::move(ch));
            }
        }
        return out;
    }

    void start(int l0, int r0) {
        cur_depth = -1;
        position(l0, r0);
    }

    // Expands positions closer than `limit` to the start, within the budget.
    void build(int limit) {
        while (expanded < pos.size() && expanded < opts.state_budget && depth[expanded] < limit) {
            auto [l, r] = pos[expanded];
            cur_depth = depth[expanded];
            auto chs = challenges_at(l, r);
            challenges.push_back(std::move(chs));
            ++expanded;
        }
        frontier = expanded < pos.size();
    }

    bool complete() const { return expanded == pos.size(); }
    bool budget_hit() const { return frontier && expanded >= opts.state_budget; }

    // Backward attractor over (position, credit) pairs: a pair is lost once
    // some challenge has no answer leading to a pair not yet lost. Ranks
    // record the order of losses.
    void solve() {
        int cap = cap_of(opts);
        size_t k = static_cast<size_t>(cap) + 1;
        uint64_t full = (uint64_t(1) << k) - 1;
        win.assign(pos.size(), full);
        rank.assign(pos.size(), std::vector<int>(k, 0));
        std::vector<std::vector<std::tuple<int, int, int>>> rev(pos.size());
        std::vector<std::vector<uint32_t>> count(expanded);
        std::deque<std::pair<int, int>> lost;
        int clock = 0;
        auto lose = [&](int p, int c) {
            win[static_cast<size_t>(p)] &= ~(uint64_t(1) << c);
            rank[static_cast<size_t>(p)][static_cast<size_t>(c)] = ++clock;
            lost.push_back({p, c});
        };
        for (size_t p = 0; p < expanded; ++p) {
            const auto& chs = challenges[p];
            count[p].assign(chs.size() * k, 0);
            for (size_t j = 0; j < chs.size(); ++j)
                for (size_t ai = 0; ai < chs[j].answers.size(); ++ai) {
                    const auto& a = chs[j].answers[ai];
                    rev[static_cast<size_t>(a.pos)].push_back(
                        {static_cast<int>(p), static_cast<int>(j), static_cast<int>(ai)});
                    for (int c = 0; c <= cap; ++c)
                        if (next_credit(c, a.delta, opts) >= 0) ++count[p][j * k + static_cast<size_t>(c)];
                }
            for (int c = 0; c <= cap; ++c)
                for (size_t j = 0; j < chs.size(); ++j)
                    if (count[p][j * k + static_cast<size_t>(c)] == 0) {
                        lose(static_cast<int>(p), c);
                        break;
                    }
        }
        while (!lost.empty()) {
            auto [q, v] = lost.front();
            lost.pop_front();
            for (auto [p, j, ai] : rev[static_cast<size_t>(q)]) {
                const auto& a = challenges[static_cast<size_t>(p)][static_cast<size_t>(j)].answers[static_cast<size_t>(ai)];
                for (int c = 0; c <= cap; ++c) {
                    if (!wins(p, c) || next_credit(c, a.delta, opts) != v) continue;
                    if (--count[static_cast<size_t>(p)][static_cast<size_t>(j) * k + static_cast<size_t>(c)] == 0)
                        lose(p, c);
                }
            }
        }
        rounds = static_cast<size_t>(clock);
    }

    bool wins(int p, int c) const { return (win[static_cast<size_t>(p)] >> c) & 1; }

    std::string pretty_of(int state) const { return pretty(ex.state(state).config.process); }

    std::vector<TraceStep> counterexample(int credit) const {
        std::vector<TraceStep> out;
        int p = 0, c = credit;
        while (true) {
            int r = rank[static_cast<size_t>(p)][static_cast<size_t>(c)];
            const Challenge* losing = nullptr;
            for (auto& ch : challenges[static_cast<size_t>(p)]) {
                bool all_lost = true;
                for (auto& a : ch.answers) {
                    int v = next_credit(c, a.delta, opts);
                    if (v < 0) continue;
                    int ra = rank[static_cast<size_t>(a.pos)][static_cast<size_t>(v)];
                    if (ra == 0 || ra >= r) {
                        all_lost = false;
                        break;
                    }
                }
                if (all_lost) {
                    losing = &ch;
                    break;
                }
            }
            if (!losing) return out;  // not reachable for a removed position
            auto [l, rr] = pos[static_cast<size_t>(p)];
            TraceStep st;
            st.left_challenges = losing->left;
            st.label = losing->label;
            st.challenge_cost = losing->cost;
            st.credit_before = c;
            const GameAnswer* best = nullptr;
            int best_v = -1, best_rank = -1;
            for (auto& a : losing->answers) {
                int v = next_credit(c, a.delta, opts);
                if (v < 0) continue;
                int ra = rank[static_cast<size_t>(a.pos)][static_cast<size_t>(v)];
                if (ra > best_rank) {
                    best = &a;
                    best_v = v;
                    best_rank = ra;
                }
            }
            if (!best) {
                int lt = losing->left ? losing->target : l;
                int rt = losing->left ? rr : losing->target;
                st.left_key = ex.state(lt).key;
                st.right_key = ex.state(rt).key;
                st.left_pretty = pretty_of(lt);
                st.right_pretty = pretty_of(rt);
                st.answers_available = losing->answers.size();
                st.credit_after = c;
                for (size_t i = 0; i < losing->answers.size(); ++i) {
                    int raw = c + losing->answers[i].delta;
                    if (i == 0 || raw > st.credit_after) st.credit_after = raw;
                }
                out.push_back(std::move(st));
                return out;
            }
            auto [nl, nr] = pos[static_cast<size_t>(best->pos)];
            st.answered = true;
            st.answer_cost = best->cost;
            st.credit_after = best_v;
            st.left_key = ex.state(nl).key;
            st.right_key = ex.state(nr).key;
            st.left_pretty = pretty_of(nl);
            st.right_pretty = pretty_of(nr);
            out.push_back(std::move(st));
            p = best->pos;
            c = best_v;
        }
    }

    std::vector<WitnessEntry> witness(int credit) const {
        std::vector<WitnessEntry> out;
        std::set<std::pair<int, int>> seen{{0, credit}};
        std::deque<std::pair<int, int>> queue{{0, credit}};
        while (!queue.empty()) {
            auto [p, c] = queue.front();
            queue.pop_front();
            auto [l, r] = pos[static_cast<size_t>(p)];
            out.push_back({ex.state(l).config, ex.state(r).config, ex.state(l).key, ex.state(r).key, c});
            for (auto& ch : challenges[static_cast<size_t>(p)])
                for (auto& a : ch.answers) {
                    int v = next_credit(c, a.delta, opts);
                    if (v >= 0 && wins(a.pos, v) && seen.insert({a.pos, v}).second) queue.push_back({a.pos, v});
                }
        }
        return out;
    }
};

void validate_inputs(const TypeEnv& observer, const TypedSystem& left, const TypedSystem& right, int credit,
                     const BisimOptions& opts) {
    if (opts.credit_cap < 0 || opts.credit_cap > 62) throw BisimError("credit cap must lie in 0..62");
    if (credit < 0) throw BisimError("credit must be non-negative");
    if (credit > opts.credit_cap) throw BisimError("credit exceeds the credit cap");
    if (opts.bounded && (*opts.bounded < 0 || *opts.bounded > 62)) throw BisimError("bound must lie in 0..62");
    if (opts.bounded && credit > *opts.bounded) throw BisimError("credit exceeds the bound");
    std::string why;
    if (!valid_configuration(initial_configuration(observer, left), &why))
        throw BisimError("left configuration is invalid: " + why);
    if (!valid_configuration(initial_configuration(observer, right), &why))
        throw BisimError("right configuration is invalid: " + why);
}

}  // namespace

Verdict check_leq(const TypeEnv& observer, const TypedSystem& left, const TypedSystem& right, int credit,
                  const BisimOptions& opts) {
    validate_inputs(observer, left, right, credit, opts);
    auto start = std::chrono::steady_clock::now();
    auto tpls = game_templates(observer, left, right);
    Verdict v;
    v.credit = credit;
    auto finish = [&](Game& g) {
        v.stats.positions = g.pos.size();
        v.stats.states = g.ex.size();
        v.stats.rounds = g.rounds;
        v.stats.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        return v;
    };
    auto run = [&](bool full) {
        auto g = std::make_unique<Game>(opts, lts_options(opts, full, tpls));
        int l = g->ex.intern(initial_configuration(observer, left));
        int r = g->ex.intern(initial_configuration(observer, right));
        if (gamma_key(g->ex.state(l)) != gamma_key(g->ex.state(r)))
            throw BisimError("left and right do not share the observer environment");
        g->start(l, r);
        for (int limit = 4;; limit *= 2) {
            g->build(limit);
            g->solve();
            if (!g->wins(0, credit) || g->complete() || g->budget_hit()) return g;
        }
    };
    {
        auto g = run(false);
        if (!g->wins(0, credit) && g->total) {
            v.result = Verdict::Refuted;
            v.restricted_refutation = true;
            v.counterexample = g->counterexample(credit);
            return finish(*g);
        }
    }
    auto g = run(true);
    v.closure_total = g->total;
    v.used_env_rewrites = g->env_rewrites;
    if (g->complete()) {
        for (int c = 0; c <= cap_of(opts); ++c)
            if (g->wins(0, c)) {
                v.min_credit = c;
                break;
            }
    }
    if (g->wins(0, credit)) {
        if (!g->complete()) {
            v.result = Verdict::Inconclusive;
            v.bound_hit = "state_budget";
        } else {
            v.result = Verdict::Holds;
            v.witness = g->witness(credit);
        }
    } else if (g->total) {
        v.result = Verdict::Refuted;
        v.counterexample = g->counterexample(credit);
    } else {
        v.result = Verdict::Inconclusive;
        v.bound_hit = "tau_depth";
    }
    return finish(*g);
}

namespace {

Verdict least_credit(const TypeEnv& observer, const TypedSystem& left, const TypedSystem& right,
                     const BisimOptions& opts) {
    int top = cap_of(opts);
    auto v = check_leq(observer, left, right, top, opts);
    if (v.result != Verdict::Holds || !v.min_credit || *v.min_credit == top) return v;
    return check_leq(observer, left, right, *v.min_credit, opts);
}

}  // namespace

EqVerdict check_eq(const TypeEnv& observer, const TypedSystem& left, const TypedSystem& right,
                   const BisimOptions& opts) {
    return {least_credit(observer, left, right, opts), least_credit(observer, right, left, opts)};
}

RefinedVerdict check_refined(const TypeEnv& observer, const TypedSystem& left, const TypedSystem& right,
                             const BisimOptions& opts) {
    RefinedVerdict out;
    BisimOptions sig = opts;
    sig.cost_model = CostModel::Signed;
    out.signed_forward = least_credit(observer, left, right, sig);
    out.signed_backward = least_credit(observer, right, left, sig);
    if (out.signed_forward.result != Verdict::Holds) {
        out.result = out.signed_forward.result;
        return out;
    }
    if (out.signed_backward.result == Verdict::Refuted) {
        out.result = Verdict::Holds;
        return out;
    }
    BisimOptions alloc = opts;
    alloc.cost_model = CostModel::AllocOnly;
    out.alloc_forward = least_credit(observer, left, right, alloc);
    if (out.signed_backward.result == Verdict::Inconclusive && out.alloc_forward->result != Verdict::Holds)
        out.result = Verdict::Inconclusive;
    else
        out.result = out.alloc_forward->result;
    return out;
}

bool replay_counterexample(const TypeEnv& observer, const TypedSystem& left, const TypedSystem& right,
                           int credit, const BisimOptions& opts, const std::vector<TraceStep>& trace,
                           std::string* why) {
    auto fail = [&](const std::string& s) {
        if (why) *why = s;
        return false;
    };
    if (trace.empty()) return fail("empty counterexample");
    auto tpls = game_templates(observer, left, right);
    bool observer_moves = false;
    for (auto& st : trace)
        if (!restricted_label(st.label)) observer_moves = true;
    Explorer ex(lts_options(opts, observer_moves, tpls), opts.cost_model, opts.tau_depth);
    int l = ex.intern(initial_configuration(observer, left));
    int r = ex.intern(initial_configuration(observer, right));
    int c = credit;
    for (size_t i = 0; i < trace.size(); ++i) {
        const auto& st = trace[i];
        if (st.credit_before != c) return fail("credit mismatch at step " + std::to_string(i));
        int me = st.left_challenges ? l : r, other = st.left_challenges ? r : l;
        const std::string& my_key = st.left_challenges ? st.left_key : st.right_key;
        int target = -1;
        auto es = ex.edges(me);
        for (auto& e : es)
            if (e.label_key == st.label.key() && apply_cost(opts.cost_model, e.cost) == st.challenge_cost &&
                ex.state(e.target).key == my_key)
                target = e.target;
        if (target < 0) return fail("challenge " + to_string(st.label) + " not available at step " + std::to_string(i));
        auto gk = gamma_key(ex.state(target));
        bool tot = true;
        auto answers = ex.weak(other, st.label, &tot);
        int k = st.challenge_cost;
        if (!st.answered) {
            if (i + 1 != trace.size()) return fail("unanswered challenge before the end");
            for (auto& a : answers) {
                if (gamma_key(ex.state(a.target)) != gk) continue;
                int delta = st.left_challenges ? a.cost - k : k - a.cost;
                if (next_credit(c, delta, opts) >= 0)
                    return fail("final challenge has a credit-respecting answer");
            }
            return true;
        }
        const std::string& other_key = st.left_challenges ? st.right_key : st.left_key;
        int found = -1;
        for (auto& a : answers)
            if (a.cost == st.answer_cost && ex.state(a.target).key == other_key) found = a.target;
        if (found < 0) return fail("recorded answer not available at step " + std::to_string(i));
        int delta = st.left_challenges ? st.answer_cost - k : k - st.answer_cost;
        int v = next_credit(c, delta, opts);
        if (v < 0 || v != st.credit_after) return fail("credit update mismatch at step " + std::to_string(i));
        c = v;
        l = st.left_challenges ? target : found;
        r = st.left_challenges ? found : target;
    }
    return fail("counterexample does not end in a stuck challenge");
}

bool verify_witness(const std::vector<WitnessEntry>& witness, const BisimOptions& opts,
                    const std::vector<std::vector<Type>>& alloc_templates, std::string* why) {
    auto fail = [&](const std::string& s) {
        if (why) *why = s;
        return false;
    };
    std::set<std::tuple<std::string, std::string, int>> rel;
    for (auto& w : witness) rel.insert({w.left_key, w.right_key, w.credit});
    Explorer ex(lts_options(opts, true, alloc_templates), opts.cost_model, opts.tau_depth);
    for (size_t i = 0; i < witness.size(); ++i) {
        const auto& w = witness[i];
        if (w.credit < 0 || w.credit > cap_of(opts)) return fail("credit out of range in entry " + std::to_string(i));
        int l = ex.intern(w.left), r = ex.intern(w.right);
        if (ex.state(l).key != w.left_key || ex.state(r).key != w.right_key)
            return fail("entry " + std::to_string(i) + " is not in canonical form");
        if (gamma_key(ex.state(l)) != gamma_key(ex.state(r)))
            return fail("entry " + std::to_string(i) + " relates different observers");
        for (bool left : {true, false}) {
            int me = left ? l : r, other = left ? r : l;
            auto es = ex.edges(me);
            for (auto& e : es) {
                int k = apply_cost(opts.cost_model, e.cost);
                auto gk = gamma_key(ex.state(e.target));
                bool tot = true;
                bool matched = false;
                for (auto& a : ex.weak(other, e.label, &tot)) {
                    if (gamma_key(ex.state(a.target)) != gk) continue;
                    int v = next_credit(w.credit, left ? a.cost - k : k - a.cost, opts);
                    if (v < 0) continue;
                    const auto& lk = left ? ex.state(e.target).key : ex.state(a.target).key;
                    const auto& rk = left ? ex.state(a.target).key : ex.state(e.target).key;
                    if (rel.count({lk, rk, v})) {
                        matched = true;
                        break;
                    }
                }
                if (!matched)
                    return fail("entry " + std::to_string(i) + ": " + (left ? "left" : "right") + " challenge " +
                                to_string(e.label) + " is not matched inside the relation");
            }
        }
    }
    return true;
}

}  // namespace picr
