#include "picr/lts.hpp"

#include <algorithm>
#include <functional>

#include "picr/typecheck.hpp"

namespace picr {

namespace {

bool is_observer_name(const Name& n) { return !n.empty() && n[0] == '@'; }

std::set<Name> used_names(const Configuration& c) {
    std::set<Name> s = free_names(c.process);
    for (auto& a : c.observer.items) s.insert(a.id);
    s.insert(c.resources.allocated.begin(), c.resources.allocated.end());
    if (c.witness)
        for (auto& a : c.witness->items) s.insert(a.id);
    return s;
}

Name fresh_observer_name(const std::set<Name>& used) {
    for (unsigned k = 0;; ++k) {
        Name n = "@" + std::to_string(k);
        if (!used.count(n)) return n;
    }
}

std::string payload_key(const std::vector<Type>& pl) {
    std::string s;
    for (auto& t : pl) s += type_key(t) + ",";
    return s;
}

std::string names_str(const std::vector<Name>& ns) {
    std::string s = "(";
    for (size_t i = 0; i < ns.size(); ++i) s += (i ? "," : "") + ns[i];
    return s + ")";
}

// Observer's own use of an assumption as a communication subject.
std::optional<TypeEnv> observer_use(const TypeEnv& g, size_t i) {
    auto t = g.items[i].type;
    auto d = attr_decrement(attr_of(t));
    TypeEnv r = g;
    switch (d.kind) {
        case Decrement::Undefined: return std::nullopt;
        case Decrement::Absent: r.items.erase(r.items.begin() + static_cast<long>(i)); return r;
        case Decrement::Defined: r.items[i].type = mk_chan(payload_of(t), d.attr); return r;
    }
    return std::nullopt;
}

ProcessTerm with_component(const std::vector<ProcessTerm>& comps, size_t i, const ProcessTerm& repl) {
    std::vector<ProcessTerm> out;
    for (size_t k = 0; k < comps.size(); ++k) {
        if (k != i) {
            out.push_back(comps[k]);
            continue;
        }
        for (auto& f : flatten_par(repl)) out.push_back(f);
    }
    return build_par(out);
}

ProcessTerm with_components(const std::vector<ProcessTerm>& comps, size_t i, const ProcessTerm& pi, size_t j,
                            const ProcessTerm& pj) {
    std::vector<ProcessTerm> out;
    for (size_t k = 0; k < comps.size(); ++k) {
        if (k == i) {
            for (auto& f : flatten_par(pi)) out.push_back(f);
        } else if (k == j) {
            for (auto& f : flatten_par(pj)) out.push_back(f);
        } else {
            out.push_back(comps[k]);
        }
    }
    return build_par(out);
}

TypeEnv rename_env(const TypeEnv& e, const std::map<Name, Name>& ren) {
    TypeEnv r = e;
    for (auto& a : r.items) {
        auto it = ren.find(a.id);
        if (it != ren.end()) a.id = it->second;
    }
    return r;
}

ResourceEnv rename_resources(const ResourceEnv& m, const std::map<Name, Name>& ren) {
    ResourceEnv r;
    r.fresh_counter = m.fresh_counter;
    for (auto& c : m.allocated) {
        auto it = ren.find(c);
        r.allocated.insert(it == ren.end() ? c : it->second);
    }
    return r;
}

TypeEnv without_id(const TypeEnv& e, const Name& id) {
    TypeEnv r;
    for (auto& a : e.items)
        if (a.id != id) r.items.push_back(a);
    return r;
}

// ---------------------------------------------------------------------------
// Witness propagation: candidate process environments for a target, the
// first of which passes validation is kept.

std::vector<TypeEnv> witness_candidates(const Configuration& src, const Transition& t,
                                        const std::vector<ProcessTerm>& comps, size_t comp,
                                        const std::map<Name, Name>& ren) {
    const TypeEnv& d = *src.witness;
    std::vector<TypeEnv> out;
    switch (t.label.kind) {
        case ActionLabel::Tau:
            if (t.rule == "lAll") {
                TypeEnv e = d;
                e.add(t.label.channel, mk_chan({}, Attribute::u(0)));
                out.push_back(e);
            } else if (t.rule == "lFree") {
                out.push_back(without_id(d, t.label.channel));
            } else {
                out.push_back(d);
            }
            break;
        case ActionLabel::Out: {
            auto o = std::get_if<Output>(&comps[comp]->node);
            std::vector<Type> want;
            // Payload types: those the observer gained, matched by position.
            const auto& names = t.label.payload;
            std::vector<Name> orig;
            for (auto& i : o->payload) orig.push_back(i.text);
            for (size_t k = 0; k < names.size(); ++k) {
                Type ty;
                for (auto it = t.target.observer.items.rbegin(); it != t.target.observer.items.rend(); ++it)
                    if (it->id == names[k]) {
                        ty = it->type;
                        break;
                    }
                want.push_back(ty);
            }
            auto subj = subject_variants(d, t.label.channel, env_templates(d), names.size());
            std::function<void(size_t, const TypeEnv&)> rec = [&](size_t k, const TypeEnv& e) {
                if (out.size() > 64) return;
                if (k == orig.size()) {
                    out.push_back(rename_env(e, ren));
                    return;
                }
                if (!want[k]) return;
                for (auto& pv : payload_variants(e, orig[k], want[k])) rec(k + 1, pv.after);
            };
            for (auto& s : subj) rec(0, s.after);
            out.push_back(rename_env(d, ren));
            break;
        }
        case ActionLabel::In: {
            auto in = std::get_if<Input>(&comps[comp]->node);
            auto subj = subject_variants(d, t.label.channel, env_templates(d), in->params.size());
            // Types the observer handed over: the observer assumption used for
            // each payload name is the one that disappeared or was kept.
            std::vector<Type> given;
            for (auto& a : src.observer.items)
                if (a.id == t.label.channel && !is_proc(a.type)) {
                    auto pl = payload_of(a.type);
                    if (pl.size() == in->params.size()) {
                        given = pl;
                        break;
                    }
                }
            for (auto& s : subj) {
                std::vector<std::vector<Type>> pls{s.payload};
                if (!given.empty() && !payload_equal(given, s.payload)) pls.push_back(given);
                for (auto& pl : pls) {
                    TypeEnv e = s.after;
                    for (size_t k = 0; k < pl.size(); ++k) e.add(t.label.payload[k], pl[k]);
                    out.push_back(e);
                }
            }
            break;
        }
        default: out.push_back(d); break;
    }
    return out;
}

void attach_witness(const Configuration& src, Transition& t, const std::vector<ProcessTerm>& comps, size_t comp,
                    const std::map<Name, Name>& ren) {
    if (!src.witness) return;
    for (auto& cand : witness_candidates(src, t, comps, comp, ren)) {
        Configuration probe = t.target;
        probe.witness = cand;
        if (valid_configuration(probe)) {
            t.target.witness = cand;
            return;
        }
    }
    t.target.witness.reset();
}

// ---------------------------------------------------------------------------

void tau_moves(const Configuration& c, const std::vector<ProcessTerm>& comps, std::vector<Transition>& out,
               std::vector<size_t>& where) {
    const auto& m = c.resources;
    for (size_t i = 0; i < comps.size(); ++i) {
        const auto& p = comps[i];
        auto emit = [&](const std::string& rule, int cost, Name ch, ResourceEnv res, ProcessTerm q) {
            Transition t;
            t.label.kind = ActionLabel::Tau;
            t.label.channel = std::move(ch);
            t.cost = cost;
            t.rule = rule;
            t.target = Configuration{c.observer, std::move(res), std::move(q), std::nullopt};
            out.push_back(std::move(t));
            where.push_back(i);
        };
        std::visit(
            [&](const auto& n) {
                using N = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<N, Output>) {
                    if (n.subject.is_var || !m.has(n.subject.text)) return;
                    for (size_t j = 0; j < comps.size(); ++j) {
                        auto in = j == i ? nullptr : std::get_if<Input>(&comps[j]->node);
                        if (!in || in->subject.is_var || in->subject.text != n.subject.text ||
                            in->params.size() != n.payload.size())
                            continue;
                        Subst s;
                        for (size_t k = 0; k < n.payload.size(); ++k) s.chans[in->params[k]] = n.payload[k].text;
                        emit(i < j ? "lCom-L" : "lCom-R", 0, n.subject.text, m,
                             with_components(comps, i, n.cont, j, substitute(in->cont, s)));
                    }
                } else if constexpr (std::is_same_v<N, Match>) {
                    if (n.left.is_var || n.right.is_var) return;
                    if (n.left.text == n.right.text) {
                        if (m.has(n.left.text)) emit("lThen", 0, n.left.text, m, with_component(comps, i, n.then_branch));
                    } else if (m.has(n.left.text) && m.has(n.right.text)) {
                        emit("lElse", 0, n.left.text, m, with_component(comps, i, n.else_branch));
                    }
                } else if constexpr (std::is_same_v<N, Rec>) {
                    Subst s;
                    s.procs[n.binder] = p;
                    emit("lRec", 0, "", m, with_component(comps, i, substitute(n.body, s)));
                } else if constexpr (std::is_same_v<N, Alloc>) {
                    ResourceEnv r = m;
                    Name fresh = fresh_name(r, used_names(c));
                    r.allocated.insert(fresh);
                    Subst s;
                    s.chans[n.binder] = fresh;
                    emit("lAll", 1, fresh, r, with_component(comps, i, substitute(n.cont, s)));
                } else if constexpr (std::is_same_v<N, Free>) {
                    if (n.subject.is_var || !m.has(n.subject.text) || c.observer.has(n.subject.text)) return;
                    ResourceEnv r = m;
                    r.allocated.erase(n.subject.text);
                    emit("lFree", -1, n.subject.text, r, with_component(comps, i, n.cont));
                }
            },
            p->node);
    }
}

void out_moves(const Configuration& c, const std::vector<ProcessTerm>& comps, std::vector<Transition>& out,
               std::vector<size_t>& where, std::vector<std::map<Name, Name>>& rens) {
    const auto& g = c.observer;
    for (size_t i = 0; i < comps.size(); ++i) {
        auto o = std::get_if<Output>(&comps[i]->node);
        if (!o || o->subject.is_var || !g.has(o->subject.text)) continue;
        const Name& ch = o->subject.text;
        std::set<std::string> seen;
        for (size_t idx : g.indices(ch)) {
            auto ty = g.items[idx].type;
            if (is_proc(ty) || !seen.insert(type_key(ty)).second) continue;
            auto g1 = observer_use(g, idx);
            if (!g1) continue;
            auto pl = payload_of(ty);
            if (pl.size() != o->payload.size()) continue;
            auto used = used_names(c);
            std::map<Name, Name> ren;
            std::vector<Name> label;
            for (auto& d : o->payload) {
                if (!g.has(d.text) && !ren.count(d.text)) {
                    auto f = fresh_observer_name(used);
                    used.insert(f);
                    ren[d.text] = f;
                }
                label.push_back(ren.count(d.text) ? ren[d.text] : d.text);
            }
            TypeEnv g2 = *g1;
            for (size_t k = 0; k < label.size(); ++k) g2.add(label[k], pl[k]);
            Transition t;
            t.label.kind = ActionLabel::Out;
            t.label.channel = ch;
            t.label.payload = label;
            t.rule = "lOut";
            t.target = Configuration{g2, rename_resources(c.resources, ren),
                                     rename_names(with_component(comps, i, o->cont), ren), std::nullopt};
            out.push_back(std::move(t));
            where.push_back(i);
            rens.push_back(ren);
        }
    }
}

void in_moves(const Configuration& c, const std::vector<ProcessTerm>& comps, std::vector<Transition>& out,
              std::vector<size_t>& where) {
    const auto& g = c.observer;
    for (size_t i = 0; i < comps.size(); ++i) {
        auto in = std::get_if<Input>(&comps[i]->node);
        if (!in || in->subject.is_var || !g.has(in->subject.text)) continue;
        const Name& ch = in->subject.text;
        std::set<std::string> seen_ty, seen_target;
        for (size_t idx : g.indices(ch)) {
            auto ty = g.items[idx].type;
            if (is_proc(ty) || !seen_ty.insert(type_key(ty)).second) continue;
            auto g1 = observer_use(g, idx);
            if (!g1) continue;
            auto pl = payload_of(ty);
            if (pl.size() != in->params.size()) continue;
            std::vector<Name> chosen;
            std::function<void(size_t, const TypeEnv&)> rec = [&](size_t k, const TypeEnv& e) {
                if (k == pl.size()) {
                    std::string key = names_str(chosen) + "|" + env_key(e);
                    if (!seen_target.insert(key).second) return;
                    Subst s;
                    for (size_t j = 0; j < chosen.size(); ++j) s.chans[in->params[j]] = chosen[j];
                    Transition t;
                    t.label.kind = ActionLabel::In;
                    t.label.channel = ch;
                    t.label.payload = chosen;
                    t.rule = "lIn";
                    t.target = Configuration{e, c.resources, with_component(comps, i, substitute(in->cont, s)),
                                             std::nullopt};
                    out.push_back(std::move(t));
                    where.push_back(i);
                    return;
                }
                auto want = pl[k];
                auto wa = attr_of(want);
                for (size_t j = 0; j < e.items.size(); ++j) {
                    auto have = e.items[j].type;
                    if (is_proc(have)) continue;
                    std::optional<TypeEnv> next;
                    if (type_equal(have, want)) {
                        if (is_unrestricted(have)) {
                            next = e;
                        } else {
                            TypeEnv r = e;
                            r.items.erase(r.items.begin() + static_cast<long>(j));
                            next = r;
                        }
                    } else if (attr_of(have).kind == Attribute::Unrestricted && wa.kind == Attribute::Affine &&
                               payload_equal(payload_of(have), payload_of(want))) {
                        next = e;
                    }
                    if (!next) continue;
                    chosen.push_back(e.items[j].id);
                    rec(k + 1, *next);
                    chosen.pop_back();
                }
            };
            rec(0, *g1);
        }
    }
}

void observer_moves(const Configuration& c, const std::vector<ProcessTerm>& comps, const LtsOptions& opts,
                    std::vector<Transition>& out, std::vector<size_t>& where) {
    const auto& g = c.observer;
    auto push = [&](Transition t) {
        out.push_back(std::move(t));
        where.push_back(0);
    };
    // lStr, restricted to rewrites demanded by pending process inputs.
    std::vector<Type> demanded;
    std::set<std::string> dk;
    std::set<size_t> unique_subjects;
    for (auto& p : comps) {
        auto in = std::get_if<Input>(&p->node);
        if (!in || in->subject.is_var) continue;
        for (size_t idx : g.indices(in->subject.text)) {
            auto ty = g.items[idx].type;
            if (is_proc(ty)) continue;
            auto a = attr_of(ty);
            if (a.kind == Attribute::Unique && a.index == 0) unique_subjects.insert(idx);
            for (auto& t : payload_of(ty))
                if (dk.insert(type_key(t)).second) demanded.push_back(t);
        }
    }
    std::set<std::string> seen;
    auto rewrite = [&](RewriteDescriptor d, TypeEnv g2) {
        if (!seen.insert(env_key(g2)).second) return;
        Transition t;
        t.label.kind = ActionLabel::EnvRewrite;
        t.label.rewrite = std::move(d);
        t.rule = "lStr";
        t.target = Configuration{g2, c.resources, c.process, std::nullopt};
        push(std::move(t));
    };
    auto split = [&](size_t j, const Type& first, const Type& second) {
        TypeEnv g2 = g;
        g2.items[j].type = first;
        g2.items.insert(g2.items.begin() + static_cast<long>(j) + 1, Assumption{g.items[j].id, second});
        rewrite({RewriteDescriptor::Split, g.items[j].id, g.items[j].type, first, second}, g2);
    };
    for (size_t j : unique_subjects) {
        auto pl = payload_of(g.items[j].type);
        split(j, mk_chan(pl, Attribute::a()), mk_chan(pl, Attribute::u(1)));
    }
    for (auto& want : demanded) {
        auto wp = payload_of(want);
        auto wa = attr_of(want);
        for (size_t j = 0; j < g.items.size(); ++j) {
            auto have = g.items[j].type;
            if (is_proc(have) || type_equal(have, want)) continue;
            auto ha = attr_of(have);
            if (payload_equal(payload_of(have), wp)) {
                if (ha.kind == Attribute::Unique && wa.kind == Attribute::Affine) {
                    split(j, want, mk_chan(wp, Attribute::u(ha.index + 1)));
                } else if (ha.kind == Attribute::Unique && wa.kind == Attribute::Unique && wa.index == ha.index + 1) {
                    split(j, want, mk_chan(wp, Attribute::a()));
                }
                if (attr_sub(ha, wa)) {
                    TypeEnv g2 = g;
                    g2.items[j].type = want;
                    rewrite({RewriteDescriptor::Sub, g.items[j].id, have, want, nullptr}, g2);
                }
            } else if (ha.kind == Attribute::Unique && ha.index == 0) {
                TypeEnv g2 = g;
                g2.items[j].type = mk_chan(wp, Attribute::u(0));
                rewrite({RewriteDescriptor::Revise, g.items[j].id, have, g2.items[j].type, nullptr}, g2);
            }
        }
    }
    // lAllE
    size_t ext = 0;
    for (auto& id : g.domain()) ext += is_observer_name(id);
    if (ext < opts.ext_alloc_limit) {
        auto tpls = opts.alloc_templates;
        if (tpls.empty()) {
            tpls = env_templates(g);
            if (c.witness)
                for (auto& t : env_templates(*c.witness)) tpls.push_back(t);
        }
        auto fresh = fresh_observer_name(used_names(c));
        std::set<std::string> tk;
        for (auto& tpl : tpls) {
            if (!tk.insert(payload_key(tpl)).second) continue;
            Transition t;
            t.label.kind = ActionLabel::AllocExt;
            t.label.channel = fresh;
            t.label.type = mk_chan(tpl, Attribute::u(0));
            t.cost = 1;
            t.rule = "lAllE";
            TypeEnv g2 = g;
            g2.add(fresh, t.label.type);
            ResourceEnv m2 = c.resources;
            m2.allocated.insert(fresh);
            t.target = Configuration{g2, m2, c.process, std::nullopt};
            push(std::move(t));
        }
    }
    // lFreeE
    std::set<Name> freed;
    for (size_t j = 0; j < g.items.size(); ++j) {
        auto ty = g.items[j].type;
        if (is_proc(ty)) continue;
        auto a = attr_of(ty);
        const auto& id = g.items[j].id;
        if (a.kind != Attribute::Unique || a.index != 0 || !c.resources.has(id) || !freed.insert(id).second) continue;
        Transition t;
        t.label.kind = ActionLabel::FreeExt;
        t.label.channel = id;
        t.cost = -1;
        t.rule = "lFreeE";
        TypeEnv g2 = g;
        g2.items.erase(g2.items.begin() + static_cast<long>(j));
        ResourceEnv m2 = c.resources;
        m2.allocated.erase(id);
        t.target = Configuration{g2, m2, c.process, std::nullopt};
        push(std::move(t));
    }
}

}  // namespace

// ---------------------------------------------------------------------------

bool valid_configuration(const Configuration& c, std::string* why) {
    auto say = [&](const std::string& s) {
        if (why) *why = s;
        return false;
    };
    for (auto& id : c.observer.domain())
        if (!c.resources.has(id)) return say("observer name '" + id + "' is not allocated");
    if (!c.witness) return say("no process environment witnesses the configuration");
    if (auto d = consistency_diagnostic(env_concat(c.observer, *c.witness)))
        return say("observer and process environments conflict: " + *d);
    auto v = check_system(*c.witness, c.resources, c.process);
    if (!v.accepted)
        return say("process does not typecheck: " + (v.diagnostics.empty() ? std::string("rejected")
                                                                            : v.diagnostics.front().message));
    return true;
}

std::string ActionLabel::key() const {
    switch (kind) {
        case Out: return "out " + channel + names_str(payload);
        case In: return "in " + channel + names_str(payload);
        case Tau: return "tau";
        case AllocExt: return "alloc " + channel + ":" + type_key(type);
        case FreeExt: return "free " + channel;
        case EnvRewrite: {
            static const char* k[] = {"sub", "split", "revise"};
            std::string s = std::string("env ") + k[rewrite.kind] + " " + rewrite.id + ":" + type_key(rewrite.from) +
                            ">" + type_key(rewrite.to);
            if (rewrite.rest) s += "+" + type_key(rewrite.rest);
            return s;
        }
    }
    return "?";
}

std::string to_string(const ActionLabel& l) {
    switch (l.kind) {
        case ActionLabel::Out: return l.channel + "!" + names_str(l.payload);
        case ActionLabel::In: return l.channel + "?" + names_str(l.payload);
        case ActionLabel::Tau: return "tau";
        case ActionLabel::AllocExt: return "alloc " + l.channel + " : " + to_string(l.type);
        case ActionLabel::FreeExt: return "free " + l.channel;
        case ActionLabel::EnvRewrite: {
            const auto& r = l.rewrite;
            std::string s = "env ";
            if (r.kind == RewriteDescriptor::Sub) s += "sub ";
            if (r.kind == RewriteDescriptor::Split) s += "split ";
            if (r.kind == RewriteDescriptor::Revise) s += "revise ";
            s += r.id + " : " + to_string(r.from) + " => " + to_string(r.to);
            if (r.rest) s += " , " + to_string(r.rest);
            return s;
        }
    }
    return "?";
}

bool is_observer_move(const ActionLabel& l) {
    return l.kind == ActionLabel::AllocExt || l.kind == ActionLabel::FreeExt || l.kind == ActionLabel::EnvRewrite;
}

int label_cost(const ActionLabel& l) {
    if (l.kind == ActionLabel::AllocExt) return 1;
    if (l.kind == ActionLabel::FreeExt) return -1;
    return 0;
}

std::optional<Configuration> apply_observer_move(const Configuration& c, const ActionLabel& l) {
    Configuration r = c;
    auto& g = r.observer;
    auto find = [&](const Name& id, const std::function<bool(const Type&)>& ok) -> std::optional<size_t> {
        for (size_t j = 0; j < g.items.size(); ++j)
            if (g.items[j].id == id && !is_proc(g.items[j].type) && ok(g.items[j].type)) return j;
        return std::nullopt;
    };
    switch (l.kind) {
        case ActionLabel::AllocExt:
            if (used_names(c).count(l.channel)) return std::nullopt;
            g.add(l.channel, l.type);
            r.resources.allocated.insert(l.channel);
            break;
        case ActionLabel::FreeExt: {
            auto j = find(l.channel, [](const Type& t) {
                auto a = attr_of(t);
                return a.kind == Attribute::Unique && a.index == 0;
            });
            if (!j || !c.resources.has(l.channel)) return std::nullopt;
            g.items.erase(g.items.begin() + static_cast<long>(*j));
            r.resources.allocated.erase(l.channel);
            break;
        }
        case ActionLabel::EnvRewrite: {
            const auto& d = l.rewrite;
            auto j = find(d.id, [&](const Type& t) { return type_equal(t, d.from); });
            if (!j) return std::nullopt;
            g.items[*j].type = d.to;
            if (d.kind == RewriteDescriptor::Split)
                g.items.insert(g.items.begin() + static_cast<long>(*j) + 1, Assumption{d.id, d.rest});
            break;
        }
        default: return std::nullopt;
    }
    if (r.witness && !consistent(env_concat(r.observer, *r.witness))) return std::nullopt;
    return r;
}

std::vector<Transition> tau_transitions(const Configuration& c, const LtsOptions& opts) {
    auto comps = flatten_par(c.process);
    std::vector<Transition> out;
    std::vector<size_t> where;
    tau_moves(c, comps, out, where);
    if (opts.track_witness)
        for (size_t k = 0; k < out.size(); ++k) attach_witness(c, out[k], comps, where[k], {});
    return out;
}

std::vector<Transition> transitions(const Configuration& c, const LtsOptions& opts) {
    auto comps = flatten_par(c.process);
    std::vector<Transition> out;
    std::vector<size_t> where;
    std::vector<std::map<Name, Name>> rens;
    out_moves(c, comps, out, where, rens);
    size_t n_out = out.size();
    in_moves(c, comps, out, where);
    tau_moves(c, comps, out, where);
    if (opts.observer_moves) observer_moves(c, comps, opts, out, where);
    if (opts.track_witness)
        for (size_t k = 0; k < out.size(); ++k)
            attach_witness(c, out[k], comps, where[k], k < n_out ? rens[k] : std::map<Name, Name>{});
    return out;
}

// ---------------------------------------------------------------------------
// Canonical forms

namespace {

using NameFn = std::function<std::string(const Name&)>;

std::string ser_with(const ProcessTerm& p, const NameFn& nf) { return debruijn(p, nf); }

TypeEnv normalize_env(const TypeEnv& g) {
    std::vector<std::pair<std::string, Assumption>> items;
    std::set<std::string> unr;
    for (auto& a : g.items) {
        auto k = a.id + ":" + type_key(a.type);
        if (is_unrestricted(a.type) && !unr.insert(k).second) continue;
        items.push_back({k, a});
    }
    std::stable_sort(items.begin(), items.end(), [](auto& x, auto& y) { return x.first < y.first; });
    TypeEnv r;
    for (auto& [_, a] : items) r.items.push_back(a);
    return r;
}

}  // namespace


CanonicalConfiguration canonicalize(const Configuration& c) {
    CanonicalConfiguration out;
    TypeEnv g = normalize_env(c.observer);
    std::set<Name> dom;
    for (auto& a : g.items) dom.insert(a.id);
    auto comps = flatten_par(c.process);
    std::vector<std::set<Name>> comp_names;
    std::set<Name> internal;
    for (auto& p : comps) {
        std::set<Name> s;
        for (auto& n : free_names(p))
            if (!dom.count(n)) {
                s.insert(n);
                internal.insert(n);
            }
        comp_names.push_back(std::move(s));
    }
    std::map<Name, std::string> color;
    for (auto& n : internal) color[n] = c.resources.has(n) ? "A" : "D";
    auto colored = [&](const ProcessTerm& p, const Name* mark) {
        return ser_with(p, [&](const Name& n) -> std::string {
            if (dom.count(n)) return "n:" + n;
            if (mark && n == *mark) return "*";
            return "#" + color[n];
        });
    };
    size_t distinct = std::set<std::string>([&] {
                          std::set<std::string> s;
                          for (auto& [_, v] : color) s.insert(v);
                          return s;
                      }()).size();
    for (int round = 0; round < 3 && !internal.empty(); ++round) {
        std::map<Name, std::string> sig;
        for (auto& n : internal) {
            std::vector<std::string> parts;
            for (size_t k = 0; k < comps.size(); ++k)
                if (comp_names[k].count(n)) parts.push_back(colored(comps[k], &n));
            std::sort(parts.begin(), parts.end());
            std::string s = color[n] + "{";
            for (auto& x : parts) s += x + ";";
            sig[n] = s + "}";
        }
        std::set<std::string> uniq;
        for (auto& [_, s] : sig) uniq.insert(s);
        std::map<std::string, std::string> rank;
        for (auto& s : uniq) rank[s] = "c" + std::to_string(rank.size());
        for (auto& n : internal) color[n] = rank[sig[n]];
        if (uniq.size() == distinct) break;
        distinct = uniq.size();
    }
    std::vector<std::pair<std::string, size_t>> order;
    for (size_t k = 0; k < comps.size(); ++k) order.push_back({colored(comps[k], nullptr), k});
    std::stable_sort(order.begin(), order.end(), [](auto& a, auto& b) { return a.first < b.first; });
    std::map<Name, Name> ren;
    for (auto& [_, k] : order) {
        ser_with(comps[k], [&](const Name& n) -> std::string {
            if (!dom.count(n) && !ren.count(n)) ren[n] = "%" + std::to_string(ren.size());
            return "";
        });
    }
    std::vector<ProcessTerm> sorted;
    std::string pkey;
    for (auto& [_, k] : order) {
        auto q = rename_names(comps[k], ren);
        pkey += debruijn(q) + ";";
        sorted.push_back(q);
    }
    ResourceEnv m;
    size_t garbage = 0;
    for (auto& n : c.resources.allocated) {
        if (dom.count(n)) m.allocated.insert(n);
        else if (ren.count(n)) m.allocated.insert(ren[n]);
        else ++garbage;
    }
    std::string key;
    for (auto& a : g.items) key += a.id + ":" + type_key(a.type) + ";";
    key += "|M:";
    for (auto& n : m.allocated) key += n + ",";
    key += "|P:" + pkey;
    out.config.observer = g;
    out.config.resources = m;
    out.config.process = build_par(sorted);
    if (c.witness) {
        TypeEnv w;
        for (auto& a : c.witness->items) {
            auto it = ren.find(a.id);
            Name id = it == ren.end() ? a.id : it->second;
            if (m.has(id)) w.add(id, a.type);
        }
        out.config.witness = w;
    }
    out.key = std::move(key);
    out.garbage = garbage;
    for (auto& [a, b] : ren)
        if (a != b) out.renaming[a] = b;
    return out;
}

int apply_cost(CostModel m, int k) {
    switch (m) {
        case CostModel::Signed: return k;
        case CostModel::Absolute: return k < 0 ? -k : k;
        case CostModel::AllocOnly: return k < 0 ? 0 : k;
    }
    return k;
}

std::string to_string(CostModel m) {
    switch (m) {
        case CostModel::Signed: return "signed";
        case CostModel::Absolute: return "absolute";
        case CostModel::AllocOnly: return "alloc-only";
    }
    return "?";
}

// ---------------------------------------------------------------------------

Explorer::Explorer(LtsOptions opts, CostModel model, size_t tau_depth)
    : opts_(std::move(opts)), model_(model), tau_depth_(tau_depth) {}

int Explorer::intern(const Configuration& c) {
    auto cc = canonicalize(c);
    auto it = index_.find(cc.key);
    if (it != index_.end()) {
        auto& st = states_[static_cast<size_t>(it->second)];
        if (!st.config.witness && cc.config.witness) st.config.witness = cc.config.witness;
        return it->second;
    }
    int id = static_cast<int>(states_.size());
    index_.emplace(cc.key, id);
    states_.push_back(std::move(cc));
    return id;
}

const std::vector<Explorer::Edge>& Explorer::edges(int id) {
    auto it = edges_.find(id);
    if (it != edges_.end()) return it->second;
    Configuration cfg = states_[static_cast<size_t>(id)].config;
    std::vector<Edge> es;
    for (auto& t : transitions(cfg, opts_)) {
        Edge e;
        e.label_key = t.label.key();
        e.label = std::move(t.label);
        e.cost = t.cost;
        e.rule = t.rule;
        e.target = intern(t.target);
        es.push_back(std::move(e));
    }
    return edges_.emplace(id, std::move(es)).first->second;
}

const Explorer::Closure& Explorer::tau_closure(int id) {
    auto it = closures_.find(id);
    if (it != closures_.end()) return it->second;
    Closure cl;
    std::set<std::pair<int, int>> seen{{id, 0}};
    std::vector<std::pair<int, int>> frontier{{id, 0}};
    cl.reach.push_back({id, 0});
    for (size_t depth = 0; depth < tau_depth_ && !frontier.empty(); ++depth) {
        std::vector<std::pair<int, int>> next;
        for (auto [s, c] : frontier) {
            auto es = edges(s);
            for (auto& e : es) {
                if (e.label.kind != ActionLabel::Tau) continue;
                std::pair<int, int> p{e.target, c + apply_cost(model_, e.cost)};
                if (seen.insert(p).second) {
                    next.push_back(p);
                    cl.reach.push_back(p);
                }
            }
        }
        frontier = std::move(next);
    }
    for (auto [s, c] : frontier) {
        auto es = edges(s);
        for (auto& e : es)
            if (e.label.kind == ActionLabel::Tau && !seen.count({e.target, c + apply_cost(model_, e.cost)}))
                cl.total = false;
    }
    return closures_.emplace(id, std::move(cl)).first->second;
}

std::vector<Explorer::Answer> Explorer::weak(int id, const ActionLabel& label, bool* total) {
    std::string ck = std::to_string(id) + "|" + label.key();
    auto hit = weak_cache_.find(ck);
    if (hit != weak_cache_.end()) {
        if (total) *total = *total && hit->second.second;
        return hit->second.first;
    }
    bool tot = true;
    auto cl = tau_closure(id);
    tot = tot && cl.total;
    std::vector<Answer> out;
    if (label.kind == ActionLabel::Tau) {
        for (auto [s, c] : cl.reach) out.push_back({s, c});
    } else {
        std::set<std::pair<int, int>> seen;
        auto after = [&](int c1, int mid, int target) {
            auto cl2 = tau_closure(target);
            tot = tot && cl2.total;
            for (auto [s3, c3] : cl2.reach) {
                int cost = c1 + mid + c3;
                if (seen.insert({s3, cost}).second) out.push_back({s3, cost});
            }
        };
        auto key = label.key();
        for (auto [s1, c1] : cl.reach) {
            if (is_observer_move(label)) {
                Configuration cfg = states_[static_cast<size_t>(s1)].config;
                auto next = apply_observer_move(cfg, label);
                if (next) after(c1, apply_cost(model_, label_cost(label)), intern(*next));
                continue;
            }
            auto es = edges(s1);
            for (auto& e : es)
                if (e.label_key == key) after(c1, apply_cost(model_, e.cost), e.target);
        }
    }
    if (total) *total = *total && tot;
    weak_cache_.emplace(ck, std::make_pair(out, tot));
    return out;
}

std::vector<WeakStep> weak_transitions(const Configuration& c, const ActionLabel& label, size_t depth,
                                       const LtsOptions& opts, CostModel model) {
    Explorer ex(opts, model, depth);
    int id = ex.intern(c);
    bool total = true;
    auto ans = ex.weak(id, label, &total);
    std::vector<WeakStep> out;
    for (auto& a : ans) out.push_back({a.cost, ex.state(a.target)});
    return out;
}

std::set<Name> barbs(const Configuration& c, size_t fuel) {
    std::set<Name> out;
    std::set<std::string> seen;
    std::vector<System> frontier{System{c.resources, c.process}};
    for (size_t depth = 0; depth <= fuel && !frontier.empty(); ++depth) {
        std::vector<System> next;
        for (auto& s : frontier) {
            if (!seen.insert(state_hash(s)).second) continue;
            for (auto& p : flatten_par(s.process)) {
                auto o = std::get_if<Output>(&p->node);
                if (o && !o->subject.is_var && c.observer.has(o->subject.text)) out.insert(o->subject.text);
            }
            if (depth == fuel) continue;
            for (auto& st : step(s)) next.push_back(st.next);
        }
        frontier = std::move(next);
    }
    return out;
}

}  // namespace picr
