#include "picr/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

namespace picr {

namespace {

ProcessTerm make(auto node, SrcPos pos) {
    return std::make_shared<const Process>(Process{std::move(node), pos});
}

}  // namespace

ProcessTerm mk_nil(SrcPos pos) { return make(Nil{}, pos); }
ProcessTerm mk_output(Ident subject, std::vector<Ident> payload, ProcessTerm cont, SrcPos pos) {
    return make(Output{std::move(subject), std::move(payload), std::move(cont)}, pos);
}
ProcessTerm mk_input(Ident subject, std::vector<Var> params, ProcessTerm cont, SrcPos pos) {
    return make(Input{std::move(subject), std::move(params), std::move(cont)}, pos);
}
ProcessTerm mk_match(Ident l, Ident r, ProcessTerm t, ProcessTerm e, SrcPos pos) {
    return make(Match{std::move(l), std::move(r), std::move(t), std::move(e)}, pos);
}
ProcessTerm mk_rec(Var binder, ProcessTerm body, SrcPos pos) {
    return make(Rec{std::move(binder), std::move(body)}, pos);
}
ProcessTerm mk_procvar(Var v, SrcPos pos) { return make(ProcVar{std::move(v)}, pos); }
ProcessTerm mk_par(ProcessTerm l, ProcessTerm r, SrcPos pos) {
    return make(Par{std::move(l), std::move(r)}, pos);
}
ProcessTerm mk_alloc(Var binder, ProcessTerm cont, SrcPos pos) {
    return make(Alloc{std::move(binder), std::move(cont)}, pos);
}
ProcessTerm mk_free(Ident subject, ProcessTerm cont, SrcPos pos) {
    return make(Free{std::move(subject), std::move(cont)}, pos);
}

ParseError::ParseError(const std::string& msg, int line, int col)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
      line_(line),
      col_(col) {}

// ---------------------------------------------------------------------------
// Lexer / parser

namespace {

enum class Tok { Id, Sym, End };

struct Token {
    Tok kind;
    std::string text;
    int line, col;
};

bool id_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

std::vector<Token> lex(const std::string& s) {
    std::vector<Token> out;
    int line = 1, col = 1;
    size_t i = 0;
    auto adv = [&](size_t n) {
        for (size_t k = 0; k < n; ++k) {
            if (s[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    while (i < s.size()) {
        char c = s[i];
        if (c == '#') {
            while (i < s.size() && s[i] != '\n') adv(1);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            adv(1);
            continue;
        }
        if (id_char(c) && c != '\'') {
            size_t j = i;
            while (j < s.size() && id_char(s[j])) ++j;
            out.push_back({Tok::Id, s.substr(i, j - i), line, col});
            adv(j - i);
            continue;
        }
        if (std::string("!<>.?(),|=").find(c) != std::string::npos) {
            out.push_back({Tok::Sym, std::string(1, c), line, col});
            adv(1);
            continue;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
    out.push_back({Tok::End, "", line, col});
    return out;
}

const std::set<std::string> kKeywords = {"nil", "if", "then", "else", "rec", "alloc", "free"};

class Parser {
public:
    Parser(std::vector<Token> toks, ParseOptions opts) : toks_(std::move(toks)), opts_(opts) {}

    ProcessTerm parse_all() {
        auto p = parse_par();
        if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
        return p;
    }

private:
    enum class Kind { Chan, Proc };

    std::vector<Token> toks_;
    size_t pos_ = 0;
    ParseOptions opts_;
    std::vector<std::pair<std::string, Kind>> scope_;

    const Token& peek() const { return toks_[pos_]; }
    SrcPos here() const { return {peek().line, peek().col}; }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, peek().line, peek().col);
    }
    bool is_sym(const char* s) const { return peek().kind == Tok::Sym && peek().text == s; }
    bool is_kw(const char* s) const { return peek().kind == Tok::Id && peek().text == s; }
    void expect_sym(const char* s) {
        if (!is_sym(s)) {
            if (peek().kind == Tok::End) fail(std::string("expected '") + s + "' before end of input");
            fail(std::string("expected '") + s + "' but found '" + peek().text + "'");
        }
        ++pos_;
    }
    void expect_kw(const char* s) {
        if (!is_kw(s)) fail(std::string("expected '") + s + "'");
        ++pos_;
    }
    std::string ident() {
        if (peek().kind != Tok::Id) {
            if (peek().kind == Tok::End) fail("expected identifier before end of input");
            fail("expected identifier but found '" + peek().text + "'");
        }
        if (kKeywords.count(peek().text)) fail("keyword '" + peek().text + "' used as identifier");
        return toks_[pos_++].text;
    }

    const std::pair<std::string, Kind>* lookup(const std::string& id) const {
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
            if (it->first == id) return &*it;
        return nullptr;
    }

    Ident channel_ident() {
        auto p = here();
        std::string id = ident();
        const auto* b = lookup(id);
        if (!b) return Ident::name(id);
        if (b->second == Kind::Proc)
            throw ParseError("process variable '" + id + "' used as a channel", p.line, p.col);
        return Ident::var(id);
    }

    ProcessTerm parse_par() {
        auto p = parse_prefix();
        while (is_sym("|")) {
            auto pos = here();
            ++pos_;
            auto r = parse_prefix();
            p = mk_par(p, r, pos);
        }
        return p;
    }

    ProcessTerm bound(const std::string& binder, Kind k, bool par_allowed) {
        scope_.push_back({binder, k});
        auto body = par_allowed ? parse_par() : parse_prefix();
        scope_.pop_back();
        return body;
    }

    ProcessTerm parse_prefix() {
        auto pos = here();
        if (peek().kind == Tok::End) fail("unexpected end of input, expected a process");
        if (is_sym("(")) {
            ++pos_;
            auto p = parse_par();
            expect_sym(")");
            return p;
        }
        if (is_kw("nil")) {
            ++pos_;
            return mk_nil(pos);
        }
        if (is_kw("if")) {
            ++pos_;
            Ident l = channel_ident();
            expect_sym("=");
            Ident r = channel_ident();
            expect_kw("then");
            auto t = parse_par();
            expect_kw("else");
            auto e = parse_prefix();
            return mk_match(l, r, t, e, pos);
        }
        if (is_kw("rec")) {
            ++pos_;
            std::string w = ident();
            expect_sym(".");
            return mk_rec(w, bound(w, Kind::Proc, false), pos);
        }
        if (is_kw("alloc")) {
            ++pos_;
            std::string x = ident();
            expect_sym(".");
            return mk_alloc(x, bound(x, Kind::Chan, false), pos);
        }
        if (is_kw("free")) {
            ++pos_;
            Ident u = channel_ident();
            expect_sym(".");
            return mk_free(u, parse_prefix(), pos);
        }
        if (peek().kind != Tok::Id) fail("expected a process but found '" + peek().text + "'");

        // Identifier-led forms: output, input, or process variable.
        size_t save = pos_;
        std::string id = ident();
        if (is_sym("!")) {
            pos_ = save;
            Ident subj = channel_ident();
            expect_sym("!");
            expect_sym("<");
            std::vector<Ident> payload;
            if (!is_sym(">")) {
                payload.push_back(channel_ident());
                while (is_sym(",")) {
                    ++pos_;
                    payload.push_back(channel_ident());
                }
            }
            expect_sym(">");
            ProcessTerm cont;
            if (is_sym(".")) {
                ++pos_;
                cont = parse_prefix();
            } else {
                cont = mk_nil(here());
            }
            return mk_output(subj, std::move(payload), cont, pos);
        }
        if (is_sym("?")) {
            pos_ = save;
            Ident subj = channel_ident();
            expect_sym("?");
            expect_sym("(");
            std::vector<Var> params;
            if (!is_sym(")")) {
                params.push_back(ident());
                while (is_sym(",")) {
                    ++pos_;
                    params.push_back(ident());
                }
            }
            expect_sym(")");
            for (size_t i = 0; i < params.size(); ++i)
                for (size_t j = i + 1; j < params.size(); ++j)
                    if (params[i] == params[j])
                        throw ParseError("duplicate input parameter '" + params[i] + "'", pos.line,
                                         pos.col);
            expect_sym(".");
            for (auto& x : params) scope_.push_back({x, Kind::Chan});
            auto cont = parse_prefix();
            scope_.resize(scope_.size() - params.size());
            return mk_input(subj, std::move(params), cont, pos);
        }
        const auto* b = lookup(id);
        if (b && b->second == Kind::Chan)
            throw ParseError("channel variable '" + id + "' used as a process", pos.line, pos.col);
        if (!b && opts_.require_closed)
            throw ParseError("unbound process variable '" + id + "'", pos.line, pos.col);
        return mk_procvar(id, pos);
    }
};

}  // namespace

ProcessTerm parse(const std::string& text, const ParseOptions& opts) {
    Parser p(lex(text), opts);
    return p.parse_all();
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string join_idents(const std::vector<Ident>& ids) {
    std::string s;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) s += ",";
        s += ids[i].text;
    }
    return s;
}

std::string join_vars(const std::vector<Var>& ids) {
    std::string s;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) s += ",";
        s += ids[i];
    }
    return s;
}

void print(const ProcessTerm& p, bool top, std::string& out) {
    std::visit(
        [&](const auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Nil>) {
                out += "nil";
            } else if constexpr (std::is_same_v<N, Output>) {
                out += n.subject.text + "!<" + join_idents(n.payload) + ">.";
                print(n.cont, false, out);
            } else if constexpr (std::is_same_v<N, Input>) {
                out += n.subject.text + "?(" + join_vars(n.params) + ").";
                print(n.cont, false, out);
            } else if constexpr (std::is_same_v<N, Match>) {
                out += "if " + n.left.text + " = " + n.right.text + " then ";
                print(n.then_branch, true, out);
                out += " else ";
                print(n.else_branch, false, out);
            } else if constexpr (std::is_same_v<N, Rec>) {
                out += "rec " + n.binder + ".";
                print(n.body, false, out);
            } else if constexpr (std::is_same_v<N, ProcVar>) {
                out += n.var;
            } else if constexpr (std::is_same_v<N, Alloc>) {
                out += "alloc " + n.binder + ".";
                print(n.cont, false, out);
            } else if constexpr (std::is_same_v<N, Free>) {
                out += "free " + n.subject.text + ".";
                print(n.cont, false, out);
            } else if constexpr (std::is_same_v<N, Par>) {
                if (!top) out += "(";
                print(n.left, true, out);
                out += " | ";
                bool right_par = std::holds_alternative<Par>(n.right->node);
                if (right_par) out += "(";
                print(n.right, true, out);
                if (right_par) out += ")";
                if (!top) out += ")";
            }
        },
        p->node);
}

}  // namespace

std::string pretty(const ProcessTerm& p) {
    std::string out;
    print(p, true, out);
    return out;
}

// ---------------------------------------------------------------------------
// Names and variables

namespace {

void collect_names(const ProcessTerm& p, std::set<Name>& out) {
    auto id = [&](const Ident& i) {
        if (!i.is_var) out.insert(i.text);
    };
    std::visit(
        [&](const auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Output>) {
                id(n.subject);
                for (auto& v : n.payload) id(v);
                collect_names(n.cont, out);
            } else if constexpr (std::is_same_v<N, Input>) {
                id(n.subject);
                collect_names(n.cont, out);
            } else if constexpr (std::is_same_v<N, Match>) {
                id(n.left);
                id(n.right);
                collect_names(n.then_branch, out);
                collect_names(n.else_branch, out);
            } else if constexpr (std::is_same_v<N, Rec>) {
                collect_names(n.body, out);
            } else if constexpr (std::is_same_v<N, Par>) {
                collect_names(n.left, out);
                collect_names(n.right, out);
            } else if constexpr (std::is_same_v<N, Alloc>) {
                collect_names(n.cont, out);
            } else if constexpr (std::is_same_v<N, Free>) {
                id(n.subject);
                collect_names(n.cont, out);
            }
        },
        p->node);
}

void collect_vars(const ProcessTerm& p, std::set<Var>& bound, std::set<Var>& out) {
    auto id = [&](const Ident& i) {
        if (i.is_var && !bound.count(i.text)) out.insert(i.text);
    };
    auto under = [&](const std::vector<Var>& bs, const ProcessTerm& body) {
        std::vector<Var> added;
        for (auto& b : bs)
            if (bound.insert(b).second) added.push_back(b);
        collect_vars(body, bound, out);
        for (auto& b : added) bound.erase(b);
    };
    std::visit(
        [&](const auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Output>) {
                id(n.subject);
                for (auto& v : n.payload) id(v);
                collect_vars(n.cont, bound, out);
            } else if constexpr (std::is_same_v<N, Input>) {
                id(n.subject);
                under(n.params, n.cont);
            } else if constexpr (std::is_same_v<N, Match>) {
                id(n.left);
                id(n.right);
                collect_vars(n.then_branch, bound, out);
                collect_vars(n.else_branch, bound, out);
            } else if constexpr (std::is_same_v<N, Rec>) {
                under({n.binder}, n.body);
            } else if constexpr (std::is_same_v<N, ProcVar>) {
                if (!bound.count(n.var)) out.insert(n.var);
            } else if constexpr (std::is_same_v<N, Par>) {
                collect_vars(n.left, bound, out);
                collect_vars(n.right, bound, out);
            } else if constexpr (std::is_same_v<N, Alloc>) {
                under({n.binder}, n.cont);
            } else if constexpr (std::is_same_v<N, Free>) {
                id(n.subject);
                collect_vars(n.cont, bound, out);
            }
        },
        p->node);
}

}  // namespace

std::set<Name> free_names(const ProcessTerm& p) {
    std::set<Name> out;
    collect_names(p, out);
    return out;
}

std::set<Var> free_vars(const ProcessTerm& p) {
    std::set<Var> bound, out;
    collect_vars(p, bound, out);
    return out;
}

bool is_closed(const ProcessTerm& p) { return free_vars(p).empty(); }

// ---------------------------------------------------------------------------
// Substitution

namespace {

struct SubstCtx {
    Subst s;
    std::set<std::string> range;  // texts that must not be captured by binders
};

std::set<std::string> range_texts(const Subst& s) {
    std::set<std::string> r;
    for (auto& [_, n] : s.chans) r.insert(n);
    for (auto& [_, t] : s.procs) {
        for (auto& v : free_vars(t)) r.insert(v);
        for (auto& n : free_names(t)) r.insert(n);
    }
    return r;
}

Var fresh_binder(const Var& b, const std::set<std::string>& avoid, const ProcessTerm& body) {
    auto names = free_names(body);
    auto vars = free_vars(body);
    Var c = b;
    do {
        c += "'";
    } while (avoid.count(c) || names.count(c) || vars.count(c));
    return c;
}

ProcessTerm subst_rec(const ProcessTerm& p, const Subst& s);

// Renames free occurrences of variable `from` (of either kind) to `to`.
ProcessTerm rename_var(const ProcessTerm& p, const Var& from, const Var& to) {
    auto fix = [&](const Ident& i) { return (i.is_var && i.text == from) ? Ident::var(to) : i; };
    return std::visit(
        [&](const auto& n) -> ProcessTerm {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Nil>) {
                return p;
            } else if constexpr (std::is_same_v<N, Output>) {
                std::vector<Ident> pl;
                for (auto& x : n.payload) pl.push_back(fix(x));
                return mk_output(fix(n.subject), pl, rename_var(n.cont, from, to), p->pos);
            } else if constexpr (std::is_same_v<N, Input>) {
                bool shadow = std::find(n.params.begin(), n.params.end(), from) != n.params.end();
                return mk_input(fix(n.subject), n.params,
                                shadow ? n.cont : rename_var(n.cont, from, to), p->pos);
            } else if constexpr (std::is_same_v<N, Match>) {
                return mk_match(fix(n.left), fix(n.right), rename_var(n.then_branch, from, to),
                                rename_var(n.else_branch, from, to), p->pos);
            } else if constexpr (std::is_same_v<N, Rec>) {
                return mk_rec(n.binder, n.binder == from ? n.body : rename_var(n.body, from, to),
                              p->pos);
            } else if constexpr (std::is_same_v<N, ProcVar>) {
                return n.var == from ? mk_procvar(to, p->pos) : p;
            } else if constexpr (std::is_same_v<N, Par>) {
                return mk_par(rename_var(n.left, from, to), rename_var(n.right, from, to), p->pos);
            } else if constexpr (std::is_same_v<N, Alloc>) {
                return mk_alloc(n.binder, n.binder == from ? n.cont : rename_var(n.cont, from, to),
                                p->pos);
            } else {
                return mk_free(fix(n.subject), rename_var(n.cont, from, to), p->pos);
            }
        },
        p->node);
}

// Handles one binder group: drops shadowed entries and renames binders that
// would capture something from the substitution range.
ProcessTerm under_binders(std::vector<Var>& binders, const ProcessTerm& body0, const Subst& s0) {
    Subst s = s0;
    for (auto& b : binders) {
        s.chans.erase(b);
        s.procs.erase(b);
    }
    if (s.empty()) return body0;
    auto fv = free_vars(body0);
    bool touches = false;
    for (auto& [v, _] : s.chans) touches |= fv.count(v) > 0;
    for (auto& [v, _] : s.procs) touches |= fv.count(v) > 0;
    if (!touches) return body0;
    ProcessTerm body = body0;
    auto range = range_texts(s);
    for (auto& b : binders) {
        if (!range.count(b)) continue;
        std::set<std::string> avoid = range;
        for (auto& o : binders) avoid.insert(o);
        Var nb = fresh_binder(b, avoid, body);
        body = rename_var(body, b, nb);
        b = nb;
    }
    return subst_rec(body, s);
}

ProcessTerm subst_rec(const ProcessTerm& p, const Subst& s) {
    auto id = [&](const Ident& i) -> Ident {
        if (!i.is_var) return i;
        if (s.procs.count(i.text))
            throw std::invalid_argument("kind mismatch: channel variable '" + i.text +
                                        "' mapped to a process");
        auto it = s.chans.find(i.text);
        return it == s.chans.end() ? i : Ident::name(it->second);
    };
    return std::visit(
        [&](const auto& n) -> ProcessTerm {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Nil>) {
                return p;
            } else if constexpr (std::is_same_v<N, Output>) {
                std::vector<Ident> pl;
                for (auto& v : n.payload) pl.push_back(id(v));
                return mk_output(id(n.subject), std::move(pl), subst_rec(n.cont, s), p->pos);
            } else if constexpr (std::is_same_v<N, Input>) {
                auto params = n.params;
                auto body = under_binders(params, n.cont, s);
                return mk_input(id(n.subject), params, body, p->pos);
            } else if constexpr (std::is_same_v<N, Match>) {
                return mk_match(id(n.left), id(n.right), subst_rec(n.then_branch, s),
                                subst_rec(n.else_branch, s), p->pos);
            } else if constexpr (std::is_same_v<N, Rec>) {
                std::vector<Var> bs{n.binder};
                auto body = under_binders(bs, n.body, s);
                return mk_rec(bs[0], body, p->pos);
            } else if constexpr (std::is_same_v<N, ProcVar>) {
                if (s.chans.count(n.var))
                    throw std::invalid_argument("kind mismatch: process variable '" + n.var +
                                                "' mapped to a name");
                auto it = s.procs.find(n.var);
                return it == s.procs.end() ? p : it->second;
            } else if constexpr (std::is_same_v<N, Par>) {
                return mk_par(subst_rec(n.left, s), subst_rec(n.right, s), p->pos);
            } else if constexpr (std::is_same_v<N, Alloc>) {
                std::vector<Var> bs{n.binder};
                auto body = under_binders(bs, n.cont, s);
                return mk_alloc(bs[0], body, p->pos);
            } else {
                return mk_free(id(n.subject), subst_rec(n.cont, s), p->pos);
            }
        },
        p->node);
}

}  // namespace

ProcessTerm substitute(const ProcessTerm& p, const Subst& s) {
    if (s.empty()) return p;
    return subst_rec(p, s);
}

ProcessTerm rename_names(const ProcessTerm& p, const std::map<Name, Name>& ren) {
    if (ren.empty()) return p;
    auto id = [&](const Ident& i) -> Ident {
        if (i.is_var) return i;
        auto it = ren.find(i.text);
        return it == ren.end() ? i : Ident::name(it->second);
    };
    return std::visit(
        [&](const auto& n) -> ProcessTerm {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Nil> || std::is_same_v<N, ProcVar>) {
                return p;
            } else if constexpr (std::is_same_v<N, Output>) {
                std::vector<Ident> pl;
                for (auto& v : n.payload) pl.push_back(id(v));
                return mk_output(id(n.subject), std::move(pl), rename_names(n.cont, ren), p->pos);
            } else if constexpr (std::is_same_v<N, Input>) {
                return mk_input(id(n.subject), n.params, rename_names(n.cont, ren), p->pos);
            } else if constexpr (std::is_same_v<N, Match>) {
                return mk_match(id(n.left), id(n.right), rename_names(n.then_branch, ren),
                                rename_names(n.else_branch, ren), p->pos);
            } else if constexpr (std::is_same_v<N, Rec>) {
                return mk_rec(n.binder, rename_names(n.body, ren), p->pos);
            } else if constexpr (std::is_same_v<N, Par>) {
                return mk_par(rename_names(n.left, ren), rename_names(n.right, ren), p->pos);
            } else if constexpr (std::is_same_v<N, Alloc>) {
                return mk_alloc(n.binder, rename_names(n.cont, ren), p->pos);
            } else {
                return mk_free(id(n.subject), rename_names(n.cont, ren), p->pos);
            }
        },
        p->node);
}

// ---------------------------------------------------------------------------
// Structural congruence

std::vector<ProcessTerm> flatten_par(const ProcessTerm& p) {
    std::vector<ProcessTerm> out;
    std::vector<ProcessTerm> stack{p};
    while (!stack.empty()) {
        auto q = stack.back();
        stack.pop_back();
        if (auto* par = std::get_if<Par>(&q->node)) {
            stack.push_back(par->right);
            stack.push_back(par->left);
        } else if (!std::holds_alternative<Nil>(q->node)) {
            out.push_back(q);
        }
    }
    return out;
}

ProcessTerm build_par(const std::vector<ProcessTerm>& comps) {
    if (comps.empty()) return mk_nil();
    ProcessTerm p = comps[0];
    for (size_t i = 1; i < comps.size(); ++i) p = mk_par(p, comps[i]);
    return p;
}

namespace {

void ser(const ProcessTerm& p, std::string& out) {
    auto id = [&](const Ident& i) {
        if (i.is_var) out += '$';
        out += i.text;
    };
    std::visit(
        [&](const auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Nil>) {
                out += "0";
            } else if constexpr (std::is_same_v<N, Output>) {
                out += "!";
                id(n.subject);
                out += "<";
                for (size_t i = 0; i < n.payload.size(); ++i) {
                    if (i) out += ",";
                    id(n.payload[i]);
                }
                out += ">.";
                ser(n.cont, out);
            } else if constexpr (std::is_same_v<N, Input>) {
                out += "?";
                id(n.subject);
                out += "(";
                for (size_t i = 0; i < n.params.size(); ++i) {
                    if (i) out += ",";
                    out += n.params[i];
                }
                out += ").";
                ser(n.cont, out);
            } else if constexpr (std::is_same_v<N, Match>) {
                out += "if(";
                id(n.left);
                out += "=";
                id(n.right);
                out += "){";
                ser(n.then_branch, out);
                out += "}{";
                ser(n.else_branch, out);
                out += "}";
            } else if constexpr (std::is_same_v<N, Rec>) {
                out += "rec " + n.binder + ".";
                ser(n.body, out);
            } else if constexpr (std::is_same_v<N, ProcVar>) {
                out += "$" + n.var;
            } else if constexpr (std::is_same_v<N, Par>) {
                out += "[";
                ser(n.left, out);
                out += "|";
                ser(n.right, out);
                out += "]";
            } else if constexpr (std::is_same_v<N, Alloc>) {
                out += "alloc " + n.binder + ".";
                ser(n.cont, out);
            } else {
                out += "free ";
                id(n.subject);
                out += ".";
                ser(n.cont, out);
            }
        },
        p->node);
}

using NameFn = std::function<std::string(const Name&)>;

void ser_db(const ProcessTerm& p, std::vector<std::string>& stack, const NameFn& nf, std::string& out) {
    auto id = [&](const Ident& i) {
        if (!i.is_var) {
            out += nf(i.text);
            return;
        }
        for (size_t k = stack.size(); k-- > 0;)
            if (stack[k] == i.text) {
                out += "$" + std::to_string(stack.size() - 1 - k);
                return;
            }
        out += "?" + i.text;
    };
    std::visit(
        [&](const auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Nil>) {
                out += "0";
            } else if constexpr (std::is_same_v<N, Output>) {
                id(n.subject);
                out += "!<";
                for (size_t k = 0; k < n.payload.size(); ++k) {
                    if (k) out += ",";
                    id(n.payload[k]);
                }
                out += ">.";
                ser_db(n.cont, stack, nf, out);
            } else if constexpr (std::is_same_v<N, Input>) {
                id(n.subject);
                out += "?" + std::to_string(n.params.size()) + ".";
                for (auto& x : n.params) stack.push_back(x);
                ser_db(n.cont, stack, nf, out);
                stack.resize(stack.size() - n.params.size());
            } else if constexpr (std::is_same_v<N, Match>) {
                out += "if(";
                id(n.left);
                out += "=";
                id(n.right);
                out += "){";
                ser_db(n.then_branch, stack, nf, out);
                out += "}{";
                ser_db(n.else_branch, stack, nf, out);
                out += "}";
            } else if constexpr (std::is_same_v<N, Rec>) {
                out += "rec.";
                stack.push_back(n.binder);
                ser_db(n.body, stack, nf, out);
                stack.pop_back();
            } else if constexpr (std::is_same_v<N, ProcVar>) {
                id(Ident::var(n.var));
            } else if constexpr (std::is_same_v<N, Par>) {
                out += "[";
                ser_db(n.left, stack, nf, out);
                out += "|";
                ser_db(n.right, stack, nf, out);
                out += "]";
            } else if constexpr (std::is_same_v<N, Alloc>) {
                out += "alloc.";
                stack.push_back(n.binder);
                ser_db(n.cont, stack, nf, out);
                stack.pop_back();
            } else {
                out += "free ";
                id(n.subject);
                out += ".";
                ser_db(n.cont, stack, nf, out);
            }
        },
        p->node);
}

ProcessTerm canon(const ProcessTerm& p);

ProcessTerm canon_inner(const ProcessTerm& p) {
    return std::visit(
        [&](const auto& n) -> ProcessTerm {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Output>) {
                return mk_output(n.subject, n.payload, canon(n.cont), p->pos);
            } else if constexpr (std::is_same_v<N, Input>) {
                return mk_input(n.subject, n.params, canon(n.cont), p->pos);
            } else if constexpr (std::is_same_v<N, Match>) {
                return mk_match(n.left, n.right, canon(n.then_branch), canon(n.else_branch),
                                p->pos);
            } else if constexpr (std::is_same_v<N, Rec>) {
                return mk_rec(n.binder, canon(n.body), p->pos);
            } else if constexpr (std::is_same_v<N, Alloc>) {
                return mk_alloc(n.binder, canon(n.cont), p->pos);
            } else if constexpr (std::is_same_v<N, Free>) {
                return mk_free(n.subject, canon(n.cont), p->pos);
            } else {
                return p;
            }
        },
        p->node);
}

ProcessTerm canon(const ProcessTerm& p) {
    auto comps = flatten_par(p);
    std::vector<std::pair<std::string, ProcessTerm>> keyed;
    keyed.reserve(comps.size());
    for (auto& c : comps) {
        auto cc = canon_inner(c);
        keyed.emplace_back(debruijn(cc), cc);
    }
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ProcessTerm> sorted;
    for (auto& [_, c] : keyed) sorted.push_back(c);
    return build_par(sorted);
}

}  // namespace

std::string serialize(const ProcessTerm& p) {
    std::string out;
    ser(p, out);
    return out;
}

std::string debruijn(const ProcessTerm& p, const std::function<std::string(const Name&)>& name) {
    std::vector<std::string> stack;
    std::string out;
    ser_db(p, stack, name ? name : [](const Name& n) { return n; }, out);
    return out;
}

CanonicalProcess canonicalize_struct(const ProcessTerm& p) {
    auto c = canon(p);
    return {c, debruijn(c)};
}

bool struct_equiv(const ProcessTerm& a, const ProcessTerm& b) {
    return canonicalize_struct(a).key == canonicalize_struct(b).key;
}

}  // namespace picr
