#include "picr/reduction.hpp"

#include <algorithm>
#include <functional>
#include <iomanip>
#include <sstream>
#include <unordered_set>

namespace picr {

Name fresh_name(ResourceEnv& m, const std::set<Name>& avoid) {
    while (true) {
        Name c = "%" + std::to_string(m.fresh_counter++);
        if (!m.allocated.count(c) && !avoid.count(c)) return c;
    }
}

std::string to_string(Rule r) {
    switch (r) {
        case Rule::Com: return "rCom";
        case Rule::Then: return "rThen";
        case Rule::Else: return "rElse";
        case Rule::Rec: return "rRec";
        case Rule::All: return "rAll";
        case Rule::Free: return "rFree";
    }
    return "?";
}

int rule_cost(Rule r) {
    if (r == Rule::All) return 1;
    if (r == Rule::Free) return -1;
    return 0;
}

System make_system(const std::vector<Name>& alloc, ProcessTerm p) {
    System s;
    s.resources.allocated.insert(alloc.begin(), alloc.end());
    s.process = std::move(p);
    return s;
}

std::string state_hash(const System& s) {
    std::string text;
    for (auto& c : s.resources.allocated) text += c + ",";
    text += "|" + canonicalize_struct(s.process).key;
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << std::hash<std::string>{}(text);
    return os.str();
}

namespace {

ProcessTerm replace_components(const std::vector<ProcessTerm>& comps,
                               const std::vector<std::pair<size_t, ProcessTerm>>& repl) {
    std::vector<ProcessTerm> out;
    for (size_t i = 0; i < comps.size(); ++i) {
        auto it = std::find_if(repl.begin(), repl.end(), [&](auto& r) { return r.first == i; });
        out.push_back(it == repl.end() ? comps[i] : it->second);
    }
    std::vector<ProcessTerm> flat;
    for (auto& c : out)
        for (auto& f : flatten_par(c)) flat.push_back(f);
    return build_par(flat);
}

std::vector<Name> names_of(const std::vector<Ident>& ids) {
    std::vector<Name> out;
    for (auto& i : ids) out.push_back(i.text);
    return out;
}

}  // namespace

std::vector<CostedStep> step(const System& s, const StepOptions& opts) {
    std::vector<CostedStep> out;
    std::unordered_set<std::string> seen;
    auto comps = flatten_par(s.process);
    const auto& m = s.resources;
    auto emit = [&](Rule r, std::vector<size_t> pos, Name ch, ResourceEnv res, ProcessTerm p) {
        CostedStep st;
        st.next.resources = std::move(res);
        st.next.process = std::move(p);
        st.cost = rule_cost(r);
        st.rule = r;
        st.position = std::move(pos);
        st.channel = std::move(ch);
        auto key = to_string(r) + "|" + state_hash(st.next);
        if (seen.insert(key).second) out.push_back(std::move(st));
    };
    for (size_t i = 0; i < comps.size(); ++i) {
        const auto& c = comps[i];
        std::visit(
            [&](const auto& n) {
                using N = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<N, Output>) {
                    if (n.subject.is_var || !m.has(n.subject.text)) return;
                    for (size_t j = 0; j < comps.size(); ++j) {
                        if (j == i) continue;
                        auto in = std::get_if<Input>(&comps[j]->node);
                        if (!in || in->subject.is_var || in->subject.text != n.subject.text) continue;
                        if (in->params.size() != n.payload.size()) continue;
                        Subst sub;
                        auto pl = names_of(n.payload);
                        for (size_t k = 0; k < pl.size(); ++k) sub.chans[in->params[k]] = pl[k];
                        auto p = replace_components(comps, {{i, n.cont}, {j, substitute(in->cont, sub)}});
                        emit(Rule::Com, {i, j}, n.subject.text, m, p);
                    }
                } else if constexpr (std::is_same_v<N, Match>) {
                    if (n.left.is_var || n.right.is_var) return;
                    if (n.left.text == n.right.text) {
                        if (m.has(n.left.text))
                            emit(Rule::Then, {i}, n.left.text, m, replace_components(comps, {{i, n.then_branch}}));
                    } else if (m.has(n.left.text) && m.has(n.right.text)) {
                        emit(Rule::Else, {i}, n.left.text, m, replace_components(comps, {{i, n.else_branch}}));
                    }
                } else if constexpr (std::is_same_v<N, Rec>) {
                    Subst sub;
                    sub.procs[n.binder] = c;
                    emit(Rule::Rec, {i}, "", m, replace_components(comps, {{i, substitute(n.body, sub)}}));
                } else if constexpr (std::is_same_v<N, Alloc>) {
                    auto fn = free_names(s.process);
                    std::vector<Name> picks;
                    if (opts.reuse_dangling)
                        for (auto& d : fn)
                            if (!m.has(d)) picks.push_back(d);
                    ResourceEnv fresh_m = m;
                    picks.push_back(fresh_name(fresh_m, fn));
                    for (auto& nm : picks) {
                        ResourceEnv r = nm == picks.back() ? fresh_m : m;
                        r.allocated.insert(nm);
                        Subst sub;
                        sub.chans[n.binder] = nm;
                        emit(Rule::All, {i}, nm, r, replace_components(comps, {{i, substitute(n.cont, sub)}}));
                    }
                } else if constexpr (std::is_same_v<N, Free>) {
                    if (n.subject.is_var || !m.has(n.subject.text)) return;
                    ResourceEnv r = m;
                    r.allocated.erase(n.subject.text);
                    emit(Rule::Free, {i}, n.subject.text, r, replace_components(comps, {{i, n.cont}}));
                }
            },
            c->node);
    }
    return out;
}

namespace {

int priority(Rule r) {
    switch (r) {
        case Rule::Com: return 0;
        case Rule::Then:
        case Rule::Else: return 1;
        case Rule::Rec: return 2;
        case Rule::Free: return 3;
        case Rule::All: return 4;
    }
    return 5;
}

}  // namespace

std::vector<Trace> run(const System& s, const RunOptions& opts) {
    std::vector<Trace> out;
    if (opts.policy == Policy::OnePath) {
        Trace t;
        System cur = s;
        while (t.steps.size() < opts.fuel) {
            auto steps = step(cur, opts.step);
            if (steps.empty()) {
                t.maximal = true;
                break;
            }
            auto best = std::min_element(steps.begin(), steps.end(), [](auto& a, auto& b) {
                if (priority(a.rule) != priority(b.rule)) return priority(a.rule) < priority(b.rule);
                return a.position < b.position;
            });
            cur = best->next;
            t.total_cost += best->cost;
            t.steps.push_back(*best);
        }
        if (!t.maximal && step(cur, opts.step).empty()) t.maximal = true;
        out.push_back(std::move(t));
        return out;
    }
    Trace cur;
    std::function<void(const System&)> dfs = [&](const System& st) {
        if (out.size() >= opts.max_traces) return;
        if (cur.steps.size() >= opts.fuel) {
            out.push_back(cur);
            return;
        }
        auto steps = step(st, opts.step);
        if (steps.empty()) {
            Trace t = cur;
            t.maximal = true;
            out.push_back(std::move(t));
            return;
        }
        for (auto& x : steps) {
            cur.steps.push_back(x);
            cur.total_cost += x.cost;
            dfs(x.next);
            cur.total_cost -= x.cost;
            cur.steps.pop_back();
            if (out.size() >= opts.max_traces) return;
        }
    };
    dfs(s);
    return out;
}

}  // namespace picr
