#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace picr {

struct Attribute {
    enum Kind { Unrestricted, Affine, Unique };
    Kind kind = Unrestricted;
    unsigned index = 0;  // meaningful for Unique only

    static Attribute w() { return {Unrestricted, 0}; }
    static Attribute a() { return {Affine, 0}; }
    static Attribute u(unsigned i) { return {Unique, i}; }
    bool operator==(const Attribute& o) const {
        return kind == o.kind && (kind != Unique || index == o.index);
    }
};

std::string to_string(const Attribute& a);

struct ChannelType;
using Type = std::shared_ptr<const ChannelType>;

struct ChannelType {
    enum Kind { Chan, TVarRef, Mu, Proc };
    Kind kind = Chan;
    std::vector<Type> payload;  // Chan
    Attribute attr;             // Chan
    std::string var;            // TVarRef, Mu binder
    Type body;                  // Mu
};

Type mk_chan(std::vector<Type> payload, Attribute a);
Type mk_tvar(std::string x);
Type mk_mu(std::string x, Type body);
Type mk_proc();

class TypeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// "proc" | "chan(" T-list? ")" ":" A | ID | "mu" ID "." T
Type parse_type(const std::string& text);
std::string to_string(const Type& t);

// Closed: every variable bound. Contractive: every variable under a Chan
// constructor relative to its binder.
bool is_closed(const Type& t);
bool is_contractive(const Type& t);
void check_well_formed(const Type& t);  // throws TypeError

// Unfolds leading mu binders; result is Chan or Proc.
Type unfold(const Type& t);
bool is_proc(const Type& t);
// Attribute and payload of the head constructor after unfolding.
Attribute attr_of(const Type& t);
std::vector<Type> payload_of(const Type& t);
bool is_unrestricted(const Type& t);  // proc or chan(..):w
// Same payload, new attribute (unfolded head).
Type with_attr(const Type& t, Attribute a);
Type with_payload(const Type& t, std::vector<Type> payload);

bool type_equal(const Type& t1, const Type& t2);
bool payload_equal(const std::vector<Type>& a, const std::vector<Type>& b);
// Canonical key: equal keys iff type_equal. Computed by minimizing the type
// graph, independently of type_equal.
std::string type_key(const Type& t);

struct Decrement {
    enum Kind { Absent, Defined, Undefined };
    Kind kind;
    Attribute attr;  // when Defined
};
Decrement attr_decrement(const Attribute& a);

bool attr_sub(const Attribute& a1, const Attribute& a2);
bool subtype(const Type& t1, const Type& t2);
bool can_split(const Type& t, const Type& t1, const Type& t2);

// Channel payload lists occurring anywhere inside t (after unfolding).
std::vector<std::vector<Type>> payload_templates(const Type& t);

// ---------------------------------------------------------------------------
// Environments

struct Assumption {
    std::string id;
    Type type;
};

struct TypeEnv {
    std::vector<Assumption> items;

    void add(std::string id, Type t) { items.push_back({std::move(id), std::move(t)}); }
    bool has(const std::string& id) const;
    std::vector<size_t> indices(const std::string& id) const;
    std::vector<std::string> domain() const;  // sorted, distinct
    size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
};

// "IDENT : TYPE" per line, '#' comments; duplicates build the multiset.
TypeEnv parse_env(const std::string& text);
std::string to_string(const TypeEnv& env);
// Order-insensitive key; identical multisets (modulo type_equal) share it.
std::string env_key(const TypeEnv& env);
bool env_equal(const TypeEnv& a, const TypeEnv& b);
TypeEnv env_concat(const TypeEnv& a, const TypeEnv& b);
std::vector<std::vector<Type>> env_templates(const TypeEnv& env);

bool consistent(const TypeEnv& env);
// Explanation for the first inconsistent identifier group, if any.
std::optional<std::string> consistency_diagnostic(const TypeEnv& env);

class EnvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

TypeEnv env_split(const TypeEnv& env, const std::string& id, const Type& t, const Type& t1,
                  const Type& t2);
TypeEnv env_join(const TypeEnv& env, const std::string& id, const Type& t1, const Type& t2,
                 const Type& t);
TypeEnv env_revise(const TypeEnv& env, const std::string& id, const std::vector<Type>& payload);

}  // namespace picr
