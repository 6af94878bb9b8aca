#pragma once

#include <string>
#include <vector>

#include "picr/reduction.hpp"
#include "picr/syntax.hpp"
#include "picr/types.hpp"

namespace picr {

struct DerivationStep {
    std::string rule;    // tOut, tIn, tPar, ... or a structural rewrite
    std::string detail;  // instantiation summary
    SrcPos pos;
};

struct Diagnostic {
    std::string rule;
    std::string message;
    SrcPos pos;
};

struct TypingVerdict {
    bool accepted = false;
    std::vector<DerivationStep> derivation;
    // Indices of the alternatives taken at each backtracking point, in order.
    std::vector<int> choices;
    std::vector<Diagnostic> diagnostics;
};

struct TypingOptions {
    size_t max_steps = 2000000;  // search budget (rule applications)
    // When non-empty, the search follows these alternatives instead of
    // exploring; used to replay a recorded derivation.
    const std::vector<int>* forced = nullptr;
};

TypingVerdict check_process(const TypeEnv& env, const ProcessTerm& p, const TypingOptions& opts = {});

// tSys: dom(env) within the allocated set, env consistent, and env types p.
TypingVerdict check_system(const TypeEnv& env, const ResourceEnv& m, const ProcessTerm& p,
                           const TypingOptions& opts = {});

// Re-runs the search along the recorded choices and checks that it reaches
// the same derivation.
bool replay(const TypeEnv& env, const ProcessTerm& p, const TypingVerdict& v);

// ---------------------------------------------------------------------------
// Permission accounting helpers, shared with the transition system.

// Using `id` as a communication subject: the payload of the permission used
// and the environment after the use (continuation assumption included).
struct SubjectUse {
    std::vector<Type> payload;
    TypeEnv after;
    std::string detail;
};
std::vector<SubjectUse> subject_variants(const TypeEnv& env, const std::string& id,
                                         const std::vector<std::vector<Type>>& templates,
                                         size_t arity);

// Providing `id` at type `required` (as a payload): the environment left over.
struct PayloadUse {
    TypeEnv after;
    std::string detail;
};
std::vector<PayloadUse> payload_variants(const TypeEnv& env, const std::string& id, const Type& required);

// Ways to obtain a unique-now permission on `id` (possibly joining affine
// co-assumptions), with the environment after removing it.
std::vector<PayloadUse> unique_now_variants(const TypeEnv& env, const std::string& id);

}  // namespace picr
