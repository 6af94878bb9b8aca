#include "picr/typecheck.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace picr {

namespace {

std::string payload_str(const std::vector<Type>& pl) {
    std::string s = "(";
    for (size_t i = 0; i < pl.size(); ++i) s += (i ? "," : "") + to_string(pl[i]);
    return s + ")";
}

std::string variant_key(const std::vector<Type>& pl, const TypeEnv& env) {
    std::string k;
    for (auto& t : pl) k += type_key(t) + ",";
    return k + "|" + env_key(env);
}

TypeEnv replace_at(const TypeEnv& env, size_t i, const Type& t) {
    TypeEnv r = env;
    r.items[i].type = t;
    return r;
}

TypeEnv remove_at(const TypeEnv& env, size_t i) {
    TypeEnv r = env;
    r.items.erase(r.items.begin() + static_cast<long>(i));
    return r;
}

struct Base {
    TypeEnv env;
    size_t pos;
    std::string detail;
};

// The assumption at index i, plus variants where a u(j) assumption absorbs m
// affine co-assumptions (tJoin with pUnq), becoming u(j-m).
std::vector<Base> bases_at(const TypeEnv& env, size_t i) {
    std::vector<Base> out{{env, i, ""}};
    auto t = env.items[i].type;
    auto a = attr_of(t);
    if (a.kind != Attribute::Unique || a.index == 0) return out;
    auto pl = payload_of(t);
    std::vector<size_t> aff;
    for (size_t j = 0; j < env.items.size(); ++j) {
        if (j == i || env.items[j].id != env.items[i].id || is_proc(env.items[j].type)) continue;
        auto aj = attr_of(env.items[j].type);
        if (aj.kind == Attribute::Affine && payload_equal(payload_of(env.items[j].type), pl))
            aff.push_back(j);
    }
    for (size_t m = 1; m <= std::min<size_t>(a.index, aff.size()); ++m) {
        TypeEnv e = replace_at(env, i, mk_chan(pl, Attribute::u(a.index - static_cast<unsigned>(m))));
        std::vector<size_t> rm(aff.begin(), aff.begin() + static_cast<long>(m));
        size_t pos = i;
        for (auto it = rm.rbegin(); it != rm.rend(); ++it) {
            e.items.erase(e.items.begin() + static_cast<long>(*it));
            if (*it < pos) --pos;
        }
        out.push_back({e, pos, "tJoin x" + std::to_string(m) + "; "});
    }
    return out;
}

}  // namespace

std::vector<SubjectUse> subject_variants(const TypeEnv& env, const std::string& id,
                                         const std::vector<std::vector<Type>>& templates,
                                         size_t arity) {
    std::vector<SubjectUse> out;
    std::set<std::string> seen;
    auto push = [&](std::vector<Type> pl, TypeEnv after, std::string d) {
        if (pl.size() != arity) return;
        if (!seen.insert(variant_key(pl, after)).second) return;
        out.push_back({std::move(pl), std::move(after), std::move(d)});
    };
    for (size_t i : env.indices(id)) {
        if (is_proc(env.items[i].type)) continue;
        for (auto& b : bases_at(env, i)) {
            auto t = b.env.items[b.pos].type;
            auto a = attr_of(t);
            auto pl = payload_of(t);
            std::string d = b.detail + id + " : " + to_string(t);
            switch (a.kind) {
                case Attribute::Affine: push(pl, remove_at(b.env, b.pos), d); break;
                case Attribute::Unrestricted: push(pl, b.env, d); break;
                case Attribute::Unique: {
                    unsigned next = a.index == 0 ? 0 : a.index - 1;
                    push(pl, replace_at(b.env, b.pos, mk_chan(pl, Attribute::u(next))),
                         d + (a.index == 0 ? " (sIndx)" : ""));
                    if (a.index == 0) {
                        for (auto& tpl : templates) {
                            if (tpl.size() != arity || payload_equal(tpl, pl)) continue;
                            push(tpl, replace_at(b.env, b.pos, mk_chan(tpl, Attribute::u(0))),
                                 d + " tRev to " + payload_str(tpl));
                        }
                    }
                    break;
                }
            }
        }
    }
    return out;
}

std::vector<PayloadUse> payload_variants(const TypeEnv& env, const std::string& id, const Type& required) {
    std::vector<PayloadUse> out;
    std::set<std::string> seen;
    auto push = [&](TypeEnv after, std::string d) {
        if (!seen.insert(env_key(after)).second) return;
        out.push_back({std::move(after), std::move(d)});
    };
    if (is_proc(required)) {
        for (size_t i : env.indices(id))
            if (is_proc(env.items[i].type)) push(env, id + " : proc");
        return out;
    }
    auto want_pl = payload_of(required);
    auto at = attr_of(required);
    for (size_t i : env.indices(id)) {
        if (is_proc(env.items[i].type)) continue;
        for (auto& b : bases_at(env, i)) {
            auto e = b.env;
            auto t = e.items[b.pos].type;
            auto as = attr_of(t);
            std::string d = b.detail + id + " : " + to_string(t);
            if (!payload_equal(payload_of(t), want_pl)) {
                if (!(as.kind == Attribute::Unique && as.index == 0)) continue;
                t = mk_chan(want_pl, as);
                e = replace_at(e, b.pos, t);
                d += " tRev";
            }
            if (as == at) {
                if (as.kind == Attribute::Unrestricted) push(e, d);
                else push(remove_at(e, b.pos), d);
            } else if (as.kind == Attribute::Unique && at.kind == Attribute::Affine) {
                push(replace_at(e, b.pos, mk_chan(want_pl, Attribute::u(as.index + 1))), d + " pUnq");
            } else if (as.kind == Attribute::Unique && at.kind == Attribute::Unique && at.index > as.index) {
                push(replace_at(e, b.pos, mk_chan(want_pl, Attribute::a())), d + " pUnq sIndx");
            } else if (attr_sub(as, at)) {
                if (at.kind == Attribute::Unrestricted) push(replace_at(e, b.pos, required), d + " tSub");
                else if (as.kind == Attribute::Unrestricted) push(e, d + " tSub");
                else push(remove_at(e, b.pos), d + " tSub");
            }
        }
    }
    return out;
}

std::vector<PayloadUse> unique_now_variants(const TypeEnv& env, const std::string& id) {
    std::vector<PayloadUse> out;
    std::set<std::string> seen;
    for (size_t i : env.indices(id)) {
        if (is_proc(env.items[i].type)) continue;
        for (auto& b : bases_at(env, i)) {
            auto t = b.env.items[b.pos].type;
            auto a = attr_of(t);
            if (a.kind != Attribute::Unique || a.index != 0) continue;
            auto after = remove_at(b.env, b.pos);
            if (seen.insert(env_key(after)).second)
                out.push_back({after, b.detail + id + " : " + to_string(t)});
        }
    }
    return out;
}

namespace {

using Scope = std::map<Var, std::string>;
using Cont = std::function<bool(const TypeEnv&)>;

void number_binders(const ProcessTerm& p, std::map<const Process*, int>& ids) {
    ids.emplace(p.get(), static_cast<int>(ids.size()));
    std::visit(
        [&](const auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Output> || std::is_same_v<N, Input> ||
                          std::is_same_v<N, Alloc> || std::is_same_v<N, Free>) {
                number_binders(n.cont, ids);
            } else if constexpr (std::is_same_v<N, Match>) {
                number_binders(n.then_branch, ids);
                number_binders(n.else_branch, ids);
            } else if constexpr (std::is_same_v<N, Rec>) {
                number_binders(n.body, ids);
            } else if constexpr (std::is_same_v<N, Par>) {
                number_binders(n.left, ids);
                number_binders(n.right, ids);
            }
        },
        p->node);
}

TypeEnv intersect(const TypeEnv& a, const TypeEnv& b) {
    std::multiset<std::string> bk;
    for (auto& x : b.items) bk.insert(x.id + ":" + type_key(x.type));
    TypeEnv r;
    for (auto& x : a.items) {
        auto it = bk.find(x.id + ":" + type_key(x.type));
        if (it == bk.end()) continue;
        bk.erase(it);
        r.items.push_back(x);
    }
    return r;
}

class Checker {
public:
    Checker(const TypeEnv& env, const ProcessTerm& p, const TypingOptions& opts)
        : opts_(opts), templates_(env_templates(env)) {
        number_binders(p, node_ids_);
    }

    TypingVerdict run(const TypeEnv& env, const ProcessTerm& p) {
        TypingVerdict v;
        v.accepted = check(p, {}, env, [](const TypeEnv&) { return true; });
        if (v.accepted) {
            v.derivation = deriv_;
            v.choices = trail_;
        } else {
            if (exhausted_)
                v.diagnostics.push_back({"search", "search budget exhausted after " +
                                                       std::to_string(steps_) + " rule applications",
                                         {}});
            if (best_) v.diagnostics.push_back(*best_);
            if (v.diagnostics.empty()) v.diagnostics.push_back({"search", "no derivation found", {}});
        }
        return v;
    }

private:
    const TypingOptions& opts_;
    std::vector<std::vector<Type>> templates_;
    std::map<const Process*, int> node_ids_;
    std::vector<DerivationStep> deriv_;
    std::vector<int> trail_;
    size_t cursor_ = 0;
    size_t steps_ = 0;
    bool exhausted_ = false;
    std::optional<Diagnostic> best_;
    size_t best_depth_ = 0;

    bool fail(const std::string& rule, const std::string& msg, SrcPos pos) {
        if (!best_ || deriv_.size() > best_depth_) {
            best_ = Diagnostic{rule, msg, pos};
            best_depth_ = deriv_.size();
        }
        return false;
    }

    bool choose(size_t n, const std::function<bool(size_t)>& f) {
        if (opts_.forced) {
            if (cursor_ >= opts_.forced->size()) return false;
            int idx = (*opts_.forced)[cursor_];
            if (idx < 0 || static_cast<size_t>(idx) >= n) return false;
            ++cursor_;
            trail_.push_back(idx);
            if (f(static_cast<size_t>(idx))) return true;
            trail_.pop_back();
            --cursor_;
            return false;
        }
        for (size_t i = 0; i < n; ++i) {
            if (exhausted_) return false;
            trail_.push_back(static_cast<int>(i));
            if (f(i)) return true;
            trail_.pop_back();
        }
        return false;
    }

    // Records a derivation step for the duration of `body`.
    bool with_step(const std::string& rule, const std::string& detail, SrcPos pos,
                   const std::function<bool()>& body) {
        deriv_.push_back({rule, detail, pos});
        if (body()) return true;
        deriv_.pop_back();
        return false;
    }

    std::optional<std::string> resolve(const Ident& i, const Scope& sc) const {
        if (!i.is_var) return i.text;
        auto it = sc.find(i.text);
        if (it == sc.end()) return std::nullopt;
        return it->second;
    }

    std::string local(const Var& v, const ProcessTerm& p) const {
        return v + "#" + std::to_string(node_ids_.at(p.get()));
    }

    std::string show_env(const TypeEnv& env, const std::string& id) const {
        std::string s;
        for (auto& a : env.items)
            if (a.id == id) s += (s.empty() ? "" : ", ") + a.id + " : " + to_string(a.type);
        return s.empty() ? "none" : s;
    }

    bool provide(const std::vector<std::string>& ids, const std::vector<Type>& pl, size_t k,
                 const TypeEnv& env, SrcPos pos, const std::function<bool(const TypeEnv&)>& next) {
        if (k == ids.size()) return next(env);
        auto vs = payload_variants(env, ids[k], pl[k]);
        if (vs.empty())
            return fail("tOut", "no permission to send '" + ids[k] + "' at type " + to_string(pl[k]) +
                                    " (available: " + show_env(env, ids[k]) + ")",
                        pos);
        return choose(vs.size(), [&](size_t i) {
            return with_step("tOut.payload", ids[k] + " : " + to_string(pl[k]) + " via " + vs[i].detail, pos,
                             [&] { return provide(ids, pl, k + 1, vs[i].after, pos, next); });
        });
    }

    bool check(const ProcessTerm& p, const Scope& sc, const TypeEnv& env, const Cont& k) {
        if (exhausted_) return false;
        if (++steps_ > opts_.max_steps) {
            exhausted_ = true;
            return false;
        }
        return std::visit(
            [&](const auto& n) -> bool {
                using N = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<N, Nil>) {
                    return with_step("tNil", "", p->pos, [&] { return k(env); });
                } else if constexpr (std::is_same_v<N, Output>) {
                    return check_output(p, n, sc, env, k);
                } else if constexpr (std::is_same_v<N, Input>) {
                    return check_input(p, n, sc, env, k);
                } else if constexpr (std::is_same_v<N, Match>) {
                    return check_match(p, n, sc, env, k);
                } else if constexpr (std::is_same_v<N, Rec>) {
                    return check_rec(p, n, sc, env, k);
                } else if constexpr (std::is_same_v<N, ProcVar>) {
                    auto it = sc.find(n.var);
                    if (it == sc.end()) return fail("tVar", "unbound process variable '" + n.var + "'", p->pos);
                    for (size_t i : env.indices(it->second))
                        if (is_proc(env.items[i].type))
                            return with_step("tVar", n.var, p->pos, [&] { return k(env); });
                    return fail("tVar", "no proc assumption for '" + n.var + "'", p->pos);
                } else if constexpr (std::is_same_v<N, Par>) {
                    return with_step("tPar", "", p->pos, [&] {
                        return check(n.left, sc, env,
                                     [&](const TypeEnv& rest) { return check(n.right, sc, rest, k); });
                    });
                } else if constexpr (std::is_same_v<N, Alloc>) {
                    auto id = local(n.binder, p);
                    TypeEnv e = env;
                    e.add(id, mk_chan({}, Attribute::u(0)));
                    Scope s2 = sc;
                    s2[n.binder] = id;
                    return with_step("tAll", n.binder + " : chan():u(0)", p->pos,
                                     [&] { return check(n.cont, s2, e, k); });
                } else {
                    auto id = resolve(n.subject, sc);
                    if (!id) return fail("tFree", "unbound variable '" + n.subject.text + "'", p->pos);
                    auto vs = unique_now_variants(env, *id);
                    if (vs.empty())
                        return fail("tFree",
                                    "free " + *id + " needs a unique-now permission chan(..):u(0) (available: " +
                                        show_env(env, *id) + ")",
                                    p->pos);
                    return choose(vs.size(), [&](size_t i) {
                        return with_step("tFree", vs[i].detail, p->pos,
                                         [&] { return check(n.cont, sc, vs[i].after, k); });
                    });
                }
            },
            p->node);
    }

    bool check_output(const ProcessTerm& p, const Output& n, const Scope& sc, const TypeEnv& env,
                      const Cont& k) {
        auto s = resolve(n.subject, sc);
        if (!s) return fail("tOut", "unbound variable '" + n.subject.text + "'", p->pos);
        std::vector<std::string> ids;
        for (auto& v : n.payload) {
            auto r = resolve(v, sc);
            if (!r) return fail("tOut", "unbound variable '" + v.text + "'", p->pos);
            ids.push_back(*r);
        }
        auto tpls = templates_;
        std::vector<Type> own;
        for (auto& id : ids) {
            auto ix = env.indices(id);
            if (ix.empty()) break;
            own.push_back(env.items[ix.front()].type);
        }
        if (own.size() == ids.size()) tpls.push_back(own);
        auto vs = subject_variants(env, *s, tpls, ids.size());
        if (vs.empty())
            return fail("tOut",
                        "no usable output permission on '" + *s + "' with arity " + std::to_string(ids.size()) +
                            " (available: " + show_env(env, *s) + ")",
                        p->pos);
        return choose(vs.size(), [&](size_t i) {
            return with_step("tOut", *s + "!" + payload_str(vs[i].payload) + " using " + vs[i].detail, p->pos, [&] {
                return provide(ids, vs[i].payload, 0, vs[i].after, p->pos,
                               [&](const TypeEnv& e) { return check(n.cont, sc, e, k); });
            });
        });
    }

    bool check_input(const ProcessTerm& p, const Input& n, const Scope& sc, const TypeEnv& env,
                     const Cont& k) {
        auto s = resolve(n.subject, sc);
        if (!s) return fail("tIn", "unbound variable '" + n.subject.text + "'", p->pos);
        auto vs = subject_variants(env, *s, templates_, n.params.size());
        if (vs.empty())
            return fail("tIn",
                        "no usable input permission on '" + *s + "' with arity " +
                            std::to_string(n.params.size()) + " (available: " + show_env(env, *s) + ")",
                        p->pos);
        return choose(vs.size(), [&](size_t i) {
            TypeEnv e = vs[i].after;
            Scope s2 = sc;
            for (size_t j = 0; j < n.params.size(); ++j) {
                auto id = local(n.params[j], p) + "." + std::to_string(j);
                s2[n.params[j]] = id;
                e.add(id, vs[i].payload[j]);
            }
            return with_step("tIn", *s + "?" + payload_str(vs[i].payload) + " using " + vs[i].detail, p->pos,
                             [&] { return check(n.cont, s2, e, k); });
        });
    }

    bool check_match(const ProcessTerm& p, const Match& n, const Scope& sc, const TypeEnv& env,
                     const Cont& k) {
        auto l = resolve(n.left, sc), r = resolve(n.right, sc);
        if (!l || !r) return fail("tIf", "unbound variable in match", p->pos);
        for (auto& id : {*l, *r})
            if (!env.has(id))
                return fail("tIf", "name matching on '" + id + "' requires a permission for it", p->pos);
        std::vector<std::string> owned{*l};
        if (*r != *l) owned.push_back(*r);
        return with_step("tIf", *l + " = " + *r, p->pos, [&] {
            return check(n.then_branch, sc, env, [&](const TypeEnv& l1) {
                return check(n.else_branch, sc, env, [&](const TypeEnv& l2) {
                    return keep_owned(owned, 0, env, intersect(l1, l2), k);
                });
            });
        });
    }

    // The matched identifiers must stay with the conditional: unless an
    // unrestricted copy exists, one of their assumptions leaves the leftover.
    bool keep_owned(const std::vector<std::string>& ids, size_t i, const TypeEnv& env, const TypeEnv& lo,
                    const Cont& k) {
        if (i == ids.size()) return k(lo);
        bool unr = false;
        for (size_t j : env.indices(ids[i])) unr |= is_unrestricted(env.items[j].type);
        auto idx = lo.indices(ids[i]);
        if (unr || idx.empty()) return keep_owned(ids, i + 1, env, lo, k);
        return choose(idx.size(), [&](size_t c) { return keep_owned(ids, i + 1, env, remove_at(lo, idx[c]), k); });
    }

    bool check_rec(const ProcessTerm& p, const Rec& n, const Scope& sc, const TypeEnv& env, const Cont& k) {
        std::vector<size_t> uniques;
        for (size_t i = 0; i < env.items.size(); ++i)
            if (!is_proc(env.items[i].type) && attr_of(env.items[i].type).kind == Attribute::Unique)
                uniques.push_back(i);
        return promote(p, n, sc, env, uniques, 0, env, k);
    }

    // Each unique assumption is either left outside the recursion or weakened
    // to unrestricted (sUnq) so that the body may use it.
    bool promote(const ProcessTerm& p, const Rec& n, const Scope& sc, const TypeEnv& env,
                 const std::vector<size_t>& uniques, size_t i, const TypeEnv& cur, const Cont& k) {
        if (i < uniques.size()) {
            auto t = cur.items[uniques[i]].type;
            std::vector<std::vector<Type>> pls{payload_of(t)};
            if (attr_of(t).index == 0)
                for (auto& tpl : templates_)
                    if (!payload_equal(tpl, pls[0])) pls.push_back(tpl);
            return choose(pls.size() + 1, [&](size_t c) {
                if (c == 0) return promote(p, n, sc, env, uniques, i + 1, cur, k);
                auto& pl = pls[c - 1];
                std::string d = cur.items[uniques[i]].id + " : " + to_string(t) +
                                (c > 1 ? " tRev to " + payload_str(pl) : "") + " to w";
                return with_step("tSub", d, p->pos, [&] {
                    return promote(p, n, sc, env, uniques, i + 1,
                                   replace_at(cur, uniques[i], mk_chan(pl, Attribute::w())), k);
                });
            });
        }
        TypeEnv body_env;
        for (auto& a : cur.items)
            if (is_unrestricted(a.type)) body_env.items.push_back(a);
        auto id = local(n.binder, p);
        body_env.add(id, mk_proc());
        Scope s2 = sc;
        s2[n.binder] = id;
        auto d0 = deriv_.size();
        auto t0 = trail_.size();
        auto c0 = cursor_;
        deriv_.push_back({"tRec", n.binder, p->pos});
        if (!check(n.body, s2, body_env, [](const TypeEnv&) { return true; })) {
            deriv_.resize(d0);
            return false;
        }
        if (k(cur)) return true;
        deriv_.resize(d0);
        trail_.resize(t0);
        cursor_ = c0;
        return false;
    }
};

}  // namespace

TypingVerdict check_process(const TypeEnv& env, const ProcessTerm& p, const TypingOptions& opts) {
    Checker c(env, p, opts);
    return c.run(env, p);
}

TypingVerdict check_system(const TypeEnv& env, const ResourceEnv& m, const ProcessTerm& p,
                           const TypingOptions& opts) {
    for (auto& id : env.domain()) {
        if (!m.has(id)) {
            TypingVerdict v;
            v.diagnostics.push_back({"tSys", "'" + id + "' is typed but not allocated", {}});
            return v;
        }
    }
    if (auto d = consistency_diagnostic(env)) {
        TypingVerdict v;
        v.diagnostics.push_back({"tSys", "inconsistent environment: " + *d, {}});
        return v;
    }
    return check_process(env, p, opts);
}

bool replay(const TypeEnv& env, const ProcessTerm& p, const TypingVerdict& v) {
    if (!v.accepted) return false;
    TypingOptions o;
    o.forced = &v.choices;
    auto r = check_process(env, p, o);
    if (!r.accepted || r.derivation.size() != v.derivation.size()) return false;
    for (size_t i = 0; i < r.derivation.size(); ++i)
        if (r.derivation[i].rule != v.derivation[i].rule || r.derivation[i].detail != v.derivation[i].detail)
            return false;
    return true;
}

}  // namespace picr
