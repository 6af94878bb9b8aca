#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "picr/reduction.hpp"
#include "picr/syntax.hpp"
#include "picr/types.hpp"

namespace picr {

struct Configuration {
    TypeEnv observer;
    ResourceEnv resources;
    ProcessTerm process;
    // Process-side typing environment witnessing validity, when tracked.
    std::optional<TypeEnv> witness;
};

// dom(observer) allocated, witness present, (observer, witness) consistent and
// the witness types the system.
bool valid_configuration(const Configuration& c, std::string* why = nullptr);

struct RewriteDescriptor {
    enum Kind { Sub, Split, Revise };
    Kind kind = Sub;
    std::string id;
    Type from;
    Type to;   // Sub/Revise result, or first Split half
    Type rest; // second Split half
};

struct ActionLabel {
    enum Kind { Out, In, Tau, AllocExt, FreeExt, EnvRewrite };
    Kind kind = Tau;
    Name channel;
    std::vector<Name> payload;
    Type type;  // AllocExt
    RewriteDescriptor rewrite;

    std::string key() const;  // identity used for matching moves
    bool visible() const { return kind != Tau; }
};
std::string to_string(const ActionLabel& l);

struct Transition {
    ActionLabel label;
    int cost = 0;
    std::string rule;  // lOut, lIn, lCom, lThen, lElse, lRec, lAll, lFree, lAllE, lFreeE, lStr
    Configuration target;
};

struct LtsOptions {
    size_t ext_alloc_limit = 2;  // observer-allocated names simultaneously in dom(Γ)
    bool observer_moves = true;  // lAllE, lFreeE, lStr
    bool track_witness = false;
    // Payload templates for lAllE; when empty they are drawn from Γ and the witness.
    std::vector<std::vector<Type>> alloc_templates;
};

std::vector<Transition> transitions(const Configuration& c, const LtsOptions& opts = {});
// Applies an observer move (AllocExt, FreeExt, EnvRewrite) to any configuration
// sharing the observer environment; nullopt when it is not applicable.
std::optional<Configuration> apply_observer_move(const Configuration& c, const ActionLabel& label);
bool is_observer_move(const ActionLabel& l);
int label_cost(const ActionLabel& l);
// Silent process moves only, computed independently of the reduction engine.
std::vector<Transition> tau_transitions(const Configuration& c, const LtsOptions& opts = {});

struct CanonicalConfiguration {
    Configuration config;
    std::string key;
    size_t garbage = 0;
    std::map<Name, Name> renaming;  // original -> canonical, for renamed names
};
CanonicalConfiguration canonicalize(const Configuration& c);

enum class CostModel { Signed, Absolute, AllocOnly };
int apply_cost(CostModel m, int k);
std::string to_string(CostModel m);

// Memoized exploration over canonical configurations.
class Explorer {
public:
    struct Edge {
        ActionLabel label;
        std::string label_key;
        int cost = 0;  // raw cost
        std::string rule;
        int target = -1;
    };
    struct Closure {
        std::vector<std::pair<int, int>> reach;  // (state, accumulated transformed cost)
        bool total = true;
    };
    struct Answer {
        int target;
        int cost;
    };

    Explorer(LtsOptions opts, CostModel model = CostModel::Signed, size_t tau_depth = 32);

    int intern(const Configuration& c);
    const CanonicalConfiguration& state(int id) const { return states_[static_cast<size_t>(id)]; }
    size_t size() const { return states_.size(); }
    const std::vector<Edge>& edges(int id);
    const Closure& tau_closure(int id);
    // μ̂-answers: τ* for Tau, τ*·μ·τ* otherwise; `total` is cleared when some
    // τ-closure was cut by the depth bound.
    // Observer moves are answered by applying the same move.
    std::vector<Answer> weak(int id, const ActionLabel& label, bool* total);
    CostModel model() const { return model_; }
    const LtsOptions& options() const { return opts_; }

private:
    LtsOptions opts_;
    CostModel model_;
    size_t tau_depth_;
    std::deque<CanonicalConfiguration> states_;
    std::unordered_map<std::string, int> index_;
    std::unordered_map<int, std::vector<Edge>> edges_;
    std::unordered_map<int, Closure> closures_;
    std::unordered_map<std::string, std::pair<std::vector<Answer>, bool>> weak_cache_;
};

struct WeakStep {
    int cost;
    CanonicalConfiguration target;
};
// Convenience wrapper: all (cost, target) pairs of weak transitions for a label.
std::vector<WeakStep> weak_transitions(const Configuration& c, const ActionLabel& label, size_t depth,
                                       const LtsOptions& opts = {}, CostModel model = CostModel::Signed);

std::set<Name> barbs(const Configuration& c, size_t fuel);

}  // namespace picr
