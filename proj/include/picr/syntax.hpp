#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace picr {

// Channel constants and variables share one identifier namespace; which one an
// occurrence denotes is decided at the binding site by the parser.
using Name = std::string;
using Var = std::string;

struct Ident {
    bool is_var = false;
    std::string text;

    static Ident name(std::string n) { return {false, std::move(n)}; }
    static Ident var(std::string v) { return {true, std::move(v)}; }
    bool operator==(const Ident&) const = default;
    auto operator<=>(const Ident&) const = default;
};

struct SrcPos {
    int line = 0;
    int col = 0;
};

struct Process;
using ProcessTerm = std::shared_ptr<const Process>;

struct Output {
    Ident subject;
    std::vector<Ident> payload;
    ProcessTerm cont;
};
struct Input {
    Ident subject;
    std::vector<Var> params;
    ProcessTerm cont;
};
struct Nil {};
struct Match {
    Ident left, right;
    ProcessTerm then_branch, else_branch;
};
struct Rec {
    Var binder;
    ProcessTerm body;
};
struct ProcVar {
    Var var;
};
struct Par {
    ProcessTerm left, right;
};
struct Alloc {
    Var binder;
    ProcessTerm cont;
};
struct Free {
    Ident subject;
    ProcessTerm cont;
};

struct Process {
    std::variant<Output, Input, Nil, Match, Rec, ProcVar, Par, Alloc, Free> node;
    SrcPos pos;
};

ProcessTerm mk_nil(SrcPos pos = {});
ProcessTerm mk_output(Ident subject, std::vector<Ident> payload, ProcessTerm cont, SrcPos pos = {});
ProcessTerm mk_input(Ident subject, std::vector<Var> params, ProcessTerm cont, SrcPos pos = {});
ProcessTerm mk_match(Ident l, Ident r, ProcessTerm t, ProcessTerm e, SrcPos pos = {});
ProcessTerm mk_rec(Var binder, ProcessTerm body, SrcPos pos = {});
ProcessTerm mk_procvar(Var v, SrcPos pos = {});
ProcessTerm mk_par(ProcessTerm l, ProcessTerm r, SrcPos pos = {});
ProcessTerm mk_alloc(Var binder, ProcessTerm cont, SrcPos pos = {});
ProcessTerm mk_free(Ident subject, ProcessTerm cont, SrcPos pos = {});

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int line, int col);
    int line() const { return line_; }
    int col() const { return col_; }

private:
    int line_, col_;
};

struct ParseOptions {
    // When set, a bare identifier used as a process must be bound by an
    // enclosing rec; otherwise it is reported as an unbound variable.
    bool require_closed = true;
};

ProcessTerm parse(const std::string& text, const ParseOptions& opts = {});

// Inverse of parse (up to whitespace and redundant parentheses).
std::string pretty(const ProcessTerm& p);

std::set<Name> free_names(const ProcessTerm& p);
std::set<Var> free_vars(const ProcessTerm& p);
bool is_closed(const ProcessTerm& p);

// A substitution maps channel variables to names and process variables to
// terms. Mapping a variable to the wrong kind throws std::invalid_argument.
struct Subst {
    std::map<Var, Name> chans;
    std::map<Var, ProcessTerm> procs;
    bool empty() const { return chans.empty() && procs.empty(); }
};
ProcessTerm substitute(const ProcessTerm& p, const Subst& s);

// Renames free channel constants (not variables).
ProcessTerm rename_names(const ProcessTerm& p, const std::map<Name, Name>& ren);

// Top-level parallel components with nil dropped, in syntactic order.
std::vector<ProcessTerm> flatten_par(const ProcessTerm& p);
// Left-nested parallel composition; nil for an empty list.
ProcessTerm build_par(const std::vector<ProcessTerm>& comps);

struct CanonicalProcess {
    ProcessTerm term;
    std::string key;
    bool operator==(const CanonicalProcess& o) const { return key == o.key; }
};
// Parallel components flattened and sorted; the key identifies terms up to
// structural congruence and alpha-conversion.
CanonicalProcess canonicalize_struct(const ProcessTerm& p);

// Alpha-invariant serialization: bound variables become binder indices and
// names are printed through `name` when given.
std::string debruijn(const ProcessTerm& p, const std::function<std::string(const Name&)>& name = nullptr);

// Structural serialization (variables and names tagged so the two kinds never
// collide). Used for ordering and hashing.
std::string serialize(const ProcessTerm& p);

bool struct_equiv(const ProcessTerm& a, const ProcessTerm& b);

}  // namespace picr
