#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "picr/lts.hpp"

namespace picr {

// A system together with the process-side environment that types it.
struct TypedSystem {
    System system;
    TypeEnv env;
};

struct BisimOptions {
    int credit_cap = 8;
    size_t tau_depth = 32;
    size_t state_budget = 200000;  // game positions
    CostModel cost_model = CostModel::Signed;
    std::optional<int> bounded;  // credits must stay within 0..m
    size_t ext_alloc_limit = 2;
    size_t jobs = 1;  // parallelism hint; the solver is sequential
};

struct BisimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TraceStep {
    bool left_challenges = true;
    ActionLabel label;
    int challenge_cost = 0;
    bool answered = false;
    int answer_cost = 0;
    int credit_before = 0;
    int credit_after = 0;  // for the final challenge: best credit any answer reaches
    size_t answers_available = 0;
    std::string left_key, right_key;  // position reached (or the stuck one)
    std::string left_pretty, right_pretty;
};

struct WitnessEntry {
    Configuration left, right;
    std::string left_key, right_key;
    int credit = 0;
};

struct GameStats {
    size_t positions = 0;
    size_t states = 0;
    size_t rounds = 0;
    double millis = 0;
};

struct Verdict {
    enum Result { Holds, Refuted, Inconclusive };
    Result result = Inconclusive;
    int credit = 0;
    std::string bound_hit;  // "tau_depth" or "state_budget" when inconclusive
    bool closure_total = true;
    bool restricted_refutation = false;  // refuted without observer moves
    std::optional<int> min_credit;       // least credit winning for the defender
    std::vector<WitnessEntry> witness;
    std::vector<TraceStep> counterexample;
    bool used_env_rewrites = false;
    GameStats stats;
};
std::string to_string(Verdict::Result r);

Configuration initial_configuration(const TypeEnv& observer, const TypedSystem& s);

Verdict check_leq(const TypeEnv& observer, const TypedSystem& left, const TypedSystem& right, int credit,
                  const BisimOptions& opts = {});

struct EqVerdict {
    Verdict forward, backward;
    bool holds() const { return forward.result == Verdict::Holds && backward.result == Verdict::Holds; }
};
// Both directions, each at the least credit within 0..cap.
EqVerdict check_eq(const TypeEnv& observer, const TypedSystem& left, const TypedSystem& right,
                   const BisimOptions& opts = {});

struct RefinedVerdict {
    Verdict::Result result = Verdict::Inconclusive;
    Verdict signed_forward, signed_backward;
    std::optional<Verdict> alloc_forward;
};
RefinedVerdict check_refined(const TypeEnv& observer, const TypedSystem& left, const TypedSystem& right,
                             const BisimOptions& opts = {});

// Replays a counterexample through a fresh transition-system exploration and
// checks that it ends in a challenge with no credit-respecting answer.
bool replay_counterexample(const TypeEnv& observer, const TypedSystem& left, const TypedSystem& right,
                           int credit, const BisimOptions& opts, const std::vector<TraceStep>& trace,
                           std::string* why = nullptr);

// Single-pass check that every witness entry satisfies the transfer clauses
// with successors again in the witness.
bool verify_witness(const std::vector<WitnessEntry>& witness, const BisimOptions& opts,
                    const std::vector<std::vector<Type>>& alloc_templates, std::string* why = nullptr);

// Payload templates offered to observer allocations for a pair of systems.
std::vector<std::vector<Type>> game_templates(const TypeEnv& observer, const TypedSystem& left,
                                              const TypedSystem& right);

// Process shape with every channel name abstracted.
std::string name_free_shape(const ProcessTerm& p);

}  // namespace picr
