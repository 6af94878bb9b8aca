#include "picr/types.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>

namespace picr {

std::string to_string(const Attribute& a) {
    switch (a.kind) {
        case Attribute::Unrestricted: return "w";
        case Attribute::Affine: return "a";
        case Attribute::Unique: return "u(" + std::to_string(a.index) + ")";
    }
    return "?";
}

Type mk_chan(std::vector<Type> payload, Attribute a) {
    auto t = std::make_shared<ChannelType>();
    t->kind = ChannelType::Chan;
    t->payload = std::move(payload);
    t->attr = a;
    return t;
}
Type mk_tvar(std::string x) {
    auto t = std::make_shared<ChannelType>();
    t->kind = ChannelType::TVarRef;
    t->var = std::move(x);
    return t;
}
Type mk_mu(std::string x, Type body) {
    auto t = std::make_shared<ChannelType>();
    t->kind = ChannelType::Mu;
    t->var = std::move(x);
    t->body = std::move(body);
    return t;
}
Type mk_proc() {
    static const Type p = [] {
        auto t = std::make_shared<ChannelType>();
        t->kind = ChannelType::Proc;
        return Type(t);
    }();
    return p;
}

// ---------------------------------------------------------------------------
// Parsing and printing

namespace {

class TypeParser {
public:
    explicit TypeParser(const std::string& s) : s_(s) {}

    Type parse_all() {
        auto t = parse();
        skip();
        if (i_ != s_.size()) fail("trailing input");
        return t;
    }

private:
    const std::string& s_;
    size_t i_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw TypeError("type syntax error at offset " + std::to_string(i_) + ": " + msg +
                        " in '" + s_ + "'");
    }
    void skip() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }
    bool sym(char c) {
        skip();
        if (i_ < s_.size() && s_[i_] == c) {
            ++i_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!sym(c)) fail(std::string("expected '") + c + "'");
    }
    std::string word() {
        skip();
        size_t j = i_;
        while (j < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_' || s_[j] == '\''))
            ++j;
        if (j == i_) fail("expected identifier");
        auto w = s_.substr(i_, j - i_);
        i_ = j;
        return w;
    }

    Attribute attr() {
        auto w = word();
        if (w == "w") return Attribute::w();
        if (w == "a") return Attribute::a();
        if (w == "u") {
            if (!sym('(')) return Attribute::u(0);
            auto n = word();
            if (!std::all_of(n.begin(), n.end(), [](char c) { return std::isdigit(c); }))
                fail("expected a natural number in u(...)");
            expect(')');
            return Attribute::u(static_cast<unsigned>(std::stoul(n)));
        }
        fail("unknown attribute '" + w + "'");
    }

    Type parse() {
        auto w = word();
        if (w == "proc") return mk_proc();
        if (w == "mu") {
            auto x = word();
            expect('.');
            return mk_mu(x, parse());
        }
        if (w == "chan") {
            expect('(');
            std::vector<Type> pl;
            if (!sym(')')) {
                pl.push_back(parse());
                while (sym(',')) pl.push_back(parse());
                expect(')');
            }
            expect(':');
            return mk_chan(std::move(pl), attr());
        }
        return mk_tvar(w);
    }
};

void print_type(const Type& t, std::string& out) {
    switch (t->kind) {
        case ChannelType::Proc: out += "proc"; break;
        case ChannelType::TVarRef: out += t->var; break;
        case ChannelType::Mu:
            out += "mu " + t->var + ".";
            print_type(t->body, out);
            break;
        case ChannelType::Chan:
            out += "chan(";
            for (size_t i = 0; i < t->payload.size(); ++i) {
                if (i) out += ",";
                print_type(t->payload[i], out);
            }
            out += "):" + to_string(t->attr);
            break;
    }
}

}  // namespace

Type parse_type(const std::string& text) {
    TypeParser p(text);
    auto t = p.parse_all();
    check_well_formed(t);
    return t;
}

std::string to_string(const Type& t) {
    std::string out;
    print_type(t, out);
    return out;
}

namespace {

bool closed_rec(const Type& t, std::set<std::string>& bound) {
    switch (t->kind) {
        case ChannelType::Proc: return true;
        case ChannelType::TVarRef: return bound.count(t->var) > 0;
        case ChannelType::Mu: {
            bool fresh = bound.insert(t->var).second;
            bool ok = closed_rec(t->body, bound);
            if (fresh) bound.erase(t->var);
            return ok;
        }
        case ChannelType::Chan:
            for (auto& p : t->payload)
                if (!closed_rec(p, bound)) return false;
            return true;
    }
    return false;
}

bool contractive_rec(const Type& t, const std::set<std::string>& unguarded) {
    switch (t->kind) {
        case ChannelType::Proc: return true;
        case ChannelType::TVarRef: return !unguarded.count(t->var);
        case ChannelType::Mu: {
            auto u = unguarded;
            u.insert(t->var);
            return contractive_rec(t->body, u);
        }
        case ChannelType::Chan:
            for (auto& p : t->payload)
                if (!contractive_rec(p, {})) return false;
            return true;
    }
    return false;
}

bool proc_only_at_top(const Type& t, bool top) {
    switch (t->kind) {
        case ChannelType::Proc: return top;
        case ChannelType::TVarRef: return true;
        case ChannelType::Mu: return proc_only_at_top(t->body, false);
        case ChannelType::Chan:
            for (auto& p : t->payload)
                if (!proc_only_at_top(p, false)) return false;
            return true;
    }
    return false;
}

Type subst_tvar(const Type& t, const std::string& x, const Type& s) {
    switch (t->kind) {
        case ChannelType::Proc: return t;
        case ChannelType::TVarRef: return t->var == x ? s : t;
        case ChannelType::Mu:
            if (t->var == x) return t;
            return mk_mu(t->var, subst_tvar(t->body, x, s));
        case ChannelType::Chan: {
            std::vector<Type> pl;
            pl.reserve(t->payload.size());
            for (auto& p : t->payload) pl.push_back(subst_tvar(p, x, s));
            return mk_chan(std::move(pl), t->attr);
        }
    }
    return t;
}

}  // namespace

bool is_closed(const Type& t) {
    std::set<std::string> b;
    return closed_rec(t, b);
}

bool is_contractive(const Type& t) { return contractive_rec(t, {}); }

void check_well_formed(const Type& t) {
    if (!is_closed(t)) throw TypeError("type is not closed: " + to_string(t));
    if (!is_contractive(t)) throw TypeError("type is not contractive: " + to_string(t));
    if (!proc_only_at_top(t, true)) throw TypeError("proc may only appear at top level: " + to_string(t));
}

Type unfold(const Type& t) {
    Type cur = t;
    int guard = 0;
    while (cur->kind == ChannelType::Mu) {
        cur = subst_tvar(cur->body, cur->var, cur);
        if (++guard > 10000) throw TypeError("non-contractive type: " + to_string(t));
    }
    if (cur->kind == ChannelType::TVarRef) throw TypeError("open type: " + to_string(t));
    return cur;
}

bool is_proc(const Type& t) { return unfold(t)->kind == ChannelType::Proc; }

Attribute attr_of(const Type& t) {
    auto u = unfold(t);
    if (u->kind != ChannelType::Chan) return Attribute::w();
    return u->attr;
}

std::vector<Type> payload_of(const Type& t) {
    auto u = unfold(t);
    return u->kind == ChannelType::Chan ? u->payload : std::vector<Type>{};
}

bool is_unrestricted(const Type& t) {
    auto u = unfold(t);
    return u->kind == ChannelType::Proc || u->attr.kind == Attribute::Unrestricted;
}

Type with_attr(const Type& t, Attribute a) { return mk_chan(payload_of(t), a); }
Type with_payload(const Type& t, std::vector<Type> payload) {
    return mk_chan(std::move(payload), attr_of(t));
}

// ---------------------------------------------------------------------------
// Equality: coinductive comparison over unfoldings with a visited-pair memo.

namespace {

bool eq_rec(const Type& a0, const Type& b0, std::set<std::pair<std::string, std::string>>& seen) {
    auto a = unfold(a0), b = unfold(b0);
    if (a->kind != b->kind) return false;
    if (a->kind == ChannelType::Proc) return true;
    if (!(a->attr == b->attr) || a->payload.size() != b->payload.size()) return false;
    auto key = std::make_pair(to_string(a), to_string(b));
    if (!seen.insert(key).second) return true;
    for (size_t i = 0; i < a->payload.size(); ++i)
        if (!eq_rec(a->payload[i], b->payload[i], seen)) return false;
    return true;
}

}  // namespace

bool type_equal(const Type& t1, const Type& t2) {
    if (t1 == t2) return true;
    std::set<std::pair<std::string, std::string>> seen;
    return eq_rec(t1, t2, seen);
}

bool payload_equal(const std::vector<Type>& a, const std::vector<Type>& b) {
    if (a.size() != b.size()) return false;
    std::set<std::pair<std::string, std::string>> seen;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i] && !eq_rec(a[i], b[i], seen)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Canonical keys by type-graph minimization.

namespace {

struct TypeGraph {
    struct Node {
        bool proc = false;
        Attribute attr;
        std::vector<int> kids;
    };
    std::vector<Node> nodes;
    std::vector<Type> heads;
};

TypeGraph build_graph(const Type& root) {
    TypeGraph g;
    std::map<std::string, int> ids;
    std::vector<Type> work;
    auto intern = [&](const Type& t) {
        auto u = unfold(t);
        auto s = to_string(u);
        auto it = ids.find(s);
        if (it != ids.end()) return it->second;
        int id = static_cast<int>(g.nodes.size());
        ids.emplace(s, id);
        TypeGraph::Node n;
        n.proc = u->kind == ChannelType::Proc;
        n.attr = u->attr;
        g.nodes.push_back(n);
        g.heads.push_back(u);
        work.push_back(u);
        return id;
    };
    intern(root);
    for (size_t k = 0; k < g.nodes.size(); ++k) {
        auto u = g.heads[k];
        if (u->kind != ChannelType::Chan) continue;
        std::vector<int> kids;
        for (auto& p : u->payload) kids.push_back(intern(p));
        g.nodes[k].kids = std::move(kids);
    }
    return g;
}

std::string minimized_key(const Type& root) {
    auto g = build_graph(root);
    size_t n = g.nodes.size();
    std::vector<int> cls(n);
    {
        std::map<std::string, int> sig;
        for (size_t i = 0; i < n; ++i) {
            auto& nd = g.nodes[i];
            std::string s = nd.proc ? "p" : to_string(nd.attr) + "/" + std::to_string(nd.kids.size());
            auto it = sig.emplace(s, static_cast<int>(sig.size())).first;
            cls[i] = it->second;
        }
    }
    size_t count = 0;
    while (true) {
        std::map<std::vector<int>, int> sig;
        std::vector<int> next(n);
        for (size_t i = 0; i < n; ++i) {
            std::vector<int> s{cls[i]};
            for (int k : g.nodes[i].kids) s.push_back(cls[k]);
            auto it = sig.emplace(s, static_cast<int>(sig.size())).first;
            next[i] = it->second;
        }
        cls = std::move(next);
        if (sig.size() == count) break;
        count = sig.size();
    }
    std::map<int, int> order;
    std::string out;
    std::function<void(int)> dfs = [&](int i) {
        auto it = order.find(cls[i]);
        if (it != order.end()) {
            out += "^" + std::to_string(it->second);
            return;
        }
        order.emplace(cls[i], static_cast<int>(order.size()));
        auto& nd = g.nodes[i];
        if (nd.proc) {
            out += "proc";
            return;
        }
        out += to_string(nd.attr) + "(";
        for (size_t k = 0; k < nd.kids.size(); ++k) {
            if (k) out += ",";
            dfs(nd.kids[k]);
        }
        out += ")";
    };
    dfs(0);
    return out;
}

}  // namespace

std::string type_key(const Type& t) {
    thread_local std::unordered_map<const ChannelType*, std::pair<Type, std::string>> by_ptr;
    thread_local std::unordered_map<std::string, std::string> by_text;
    auto it = by_ptr.find(t.get());
    if (it != by_ptr.end()) return it->second.second;
    auto text = to_string(t);
    auto jt = by_text.find(text);
    std::string key = jt != by_text.end() ? jt->second : minimized_key(t);
    if (jt == by_text.end()) by_text.emplace(text, key);
    if (by_ptr.size() > 200000) by_ptr.clear();
    by_ptr.emplace(t.get(), std::make_pair(t, key));
    return key;
}

// ---------------------------------------------------------------------------
// Attributes, subtyping, splitting

Decrement attr_decrement(const Attribute& a) {
    switch (a.kind) {
        case Attribute::Affine: return {Decrement::Absent, {}};
        case Attribute::Unrestricted: return {Decrement::Defined, Attribute::w()};
        case Attribute::Unique:
            if (a.index == 0) return {Decrement::Undefined, {}};
            return {Decrement::Defined, Attribute::u(a.index - 1)};
    }
    return {Decrement::Undefined, {}};
}

bool attr_sub(const Attribute& a1, const Attribute& a2) {
    if (a1 == a2) return true;
    if (a1.kind == Attribute::Unique) {
        if (a2.kind == Attribute::Unique) return a2.index >= a1.index;
        return true;  // sUnq, then sAff
    }
    return a1.kind == Attribute::Unrestricted && a2.kind == Attribute::Affine;
}

bool subtype(const Type& t1, const Type& t2) {
    if (type_equal(t1, t2)) return true;
    auto a = unfold(t1), b = unfold(t2);
    if (a->kind == ChannelType::Proc || b->kind == ChannelType::Proc)
        return a->kind == b->kind;
    return attr_sub(a->attr, b->attr) && payload_equal(a->payload, b->payload);
}

bool can_split(const Type& t, const Type& t1, const Type& t2) {
    auto u = unfold(t);
    if (u->kind == ChannelType::Proc) return is_proc(t1) && is_proc(t2);
    if (u->attr.kind == Attribute::Unrestricted) return type_equal(t, t1) && type_equal(t, t2);
    if (u->attr.kind != Attribute::Unique) return false;
    auto matches = [&](const Type& x, Attribute a) {
        auto ux = unfold(x);
        return ux->kind == ChannelType::Chan && ux->attr == a && payload_equal(ux->payload, u->payload);
    };
    auto aff = Attribute::a(), next = Attribute::u(u->attr.index + 1);
    return (matches(t1, aff) && matches(t2, next)) || (matches(t1, next) && matches(t2, aff));
}

std::vector<std::vector<Type>> payload_templates(const Type& t) {
    std::vector<std::vector<Type>> out;
    if (is_proc(t)) return out;
    auto g = build_graph(t);
    for (auto& h : g.heads)
        if (h->kind == ChannelType::Chan) out.push_back(h->payload);
    return out;
}

// ---------------------------------------------------------------------------
// Environments

bool TypeEnv::has(const std::string& id) const {
    for (auto& a : items)
        if (a.id == id) return true;
    return false;
}

std::vector<size_t> TypeEnv::indices(const std::string& id) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < items.size(); ++i)
        if (items[i].id == id) out.push_back(i);
    return out;
}

std::vector<std::string> TypeEnv::domain() const {
    std::set<std::string> s;
    for (auto& a : items) s.insert(a.id);
    return {s.begin(), s.end()};
}

TypeEnv parse_env(const std::string& text) {
    TypeEnv env;
    size_t start = 0;
    int lineno = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        ++lineno;
        start = end + 1;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) {
            if (end == text.size()) break;
            continue;
        }
        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw TypeError("environment line " + std::to_string(lineno) + ": expected 'IDENT : TYPE'");
        std::string id = line.substr(0, colon);
        id.erase(0, id.find_first_not_of(" \t"));
        id.erase(id.find_last_not_of(" \t") + 1);
        if (id.empty() || !std::all_of(id.begin(), id.end(), [](char c) {
                return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
            }))
            throw TypeError("environment line " + std::to_string(lineno) + ": bad identifier '" + id + "'");
        try {
            env.add(id, parse_type(line.substr(colon + 1)));
        } catch (const TypeError& e) {
            throw TypeError("environment line " + std::to_string(lineno) + ": " + e.what());
        }
        if (end == text.size()) break;
    }
    return env;
}

std::string to_string(const TypeEnv& env) {
    std::string out;
    for (auto& a : env.items) out += a.id + " : " + to_string(a.type) + "\n";
    return out;
}

std::string env_key(const TypeEnv& env) {
    std::vector<std::string> parts;
    parts.reserve(env.items.size());
    for (auto& a : env.items) parts.push_back(a.id + ":" + type_key(a.type));
    std::sort(parts.begin(), parts.end());
    std::string out;
    for (auto& p : parts) out += p + ";";
    return out;
}

bool env_equal(const TypeEnv& a, const TypeEnv& b) { return env_key(a) == env_key(b); }

TypeEnv env_concat(const TypeEnv& a, const TypeEnv& b) {
    TypeEnv r = a;
    r.items.insert(r.items.end(), b.items.begin(), b.items.end());
    return r;
}

std::vector<std::vector<Type>> env_templates(const TypeEnv& env) {
    std::vector<std::vector<Type>> out;
    std::set<std::string> seen;
    auto add = [&](const std::vector<Type>& p) {
        std::string k;
        for (auto& t : p) k += type_key(t) + ",";
        if (seen.insert(k).second) out.push_back(p);
    };
    add({});
    for (auto& a : env.items)
        for (auto& p : payload_templates(a.type)) add(p);
    return out;
}

std::optional<std::string> consistency_diagnostic(const TypeEnv& env) {
    std::map<std::string, std::vector<Type>> groups;
    for (auto& a : env.items) groups[a.id].push_back(a.type);
    for (auto& [id, ts] : groups) {
        size_t procs = 0;
        for (auto& t : ts) procs += is_proc(t);
        if (procs == ts.size()) continue;
        if (procs)
            return "identifier '" + id + "' has both process and channel assumptions";
        auto p0 = payload_of(ts[0]);
        for (auto& t : ts)
            if (!payload_equal(payload_of(t), p0))
                return "identifier '" + id +
                       "' has assumptions with different object types (a strong update can only "
                       "revise a sole unique-now assumption)";
        size_t uniques = 0, affines = 0, unr = 0;
        unsigned j = 0;
        for (auto& t : ts) {
            auto a = attr_of(t);
            if (a.kind == Attribute::Unique) {
                ++uniques;
                j = a.index;
            } else if (a.kind == Attribute::Affine) {
                ++affines;
            } else {
                ++unr;
            }
        }
        if (uniques > 1) return "identifier '" + id + "' has more than one unique assumption";
        if (uniques == 1 && unr > 0)
            return "identifier '" + id + "' mixes a unique and an unrestricted assumption";
        if (uniques == 1 && affines > j)
            return "identifier '" + id + "' has u(" + std::to_string(j) + ") with " +
                   std::to_string(affines) + " affine co-assumption(s); at most " +
                   std::to_string(j) + " are derivable by splitting";
    }
    return std::nullopt;
}

bool consistent(const TypeEnv& env) { return !consistency_diagnostic(env).has_value(); }

TypeEnv env_split(const TypeEnv& env, const std::string& id, const Type& t, const Type& t1,
                  const Type& t2) {
    if (!can_split(t, t1, t2))
        throw EnvError("split not derivable: " + to_string(t) + " into " + to_string(t1) + " and " +
                       to_string(t2));
    for (size_t i = 0; i < env.items.size(); ++i) {
        if (env.items[i].id == id && type_equal(env.items[i].type, t)) {
            TypeEnv r = env;
            r.items[i].type = t1;
            r.items.insert(r.items.begin() + static_cast<long>(i) + 1, Assumption{id, t2});
            return r;
        }
    }
    throw EnvError("no assumption " + id + " : " + to_string(t));
}

TypeEnv env_join(const TypeEnv& env, const std::string& id, const Type& t1, const Type& t2,
                 const Type& t) {
    if (!can_split(t, t1, t2))
        throw EnvError("join not derivable: " + to_string(t1) + " and " + to_string(t2) + " into " +
                       to_string(t));
    for (size_t i = 0; i < env.items.size(); ++i) {
        if (env.items[i].id != id || !type_equal(env.items[i].type, t1)) continue;
        for (size_t j = 0; j < env.items.size(); ++j) {
            if (j == i || env.items[j].id != id || !type_equal(env.items[j].type, t2)) continue;
            TypeEnv r = env;
            r.items[i].type = t;
            r.items.erase(r.items.begin() + static_cast<long>(j));
            return r;
        }
    }
    throw EnvError("assumptions to join are absent for " + id);
}

TypeEnv env_revise(const TypeEnv& env, const std::string& id, const std::vector<Type>& payload) {
    for (size_t i = 0; i < env.items.size(); ++i) {
        auto& a = env.items[i];
        if (a.id != id || is_proc(a.type)) continue;
        auto at = attr_of(a.type);
        if (at.kind == Attribute::Unique && at.index == 0) {
            TypeEnv r = env;
            r.items[i].type = mk_chan(payload, Attribute::u(0));
            return r;
        }
    }
    throw EnvError("no unique-now assumption for " + id);
}

}  // namespace picr
