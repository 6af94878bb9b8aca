#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "picr/syntax.hpp"

namespace picr {

// Allocated channels plus an inexhaustible supply of deallocated ones.
struct ResourceEnv {
    std::set<Name> allocated;
    unsigned long fresh_counter = 0;

    bool has(const Name& c) const { return allocated.count(c) > 0; }
};

// Next "%k" name (k >= counter) not in `avoid`; advances the counter.
Name fresh_name(ResourceEnv& m, const std::set<Name>& avoid);

struct System {
    ResourceEnv resources;
    ProcessTerm process;
};

enum class Rule { Com, Then, Else, Rec, All, Free };
std::string to_string(Rule r);
int rule_cost(Rule r);

struct CostedStep {
    System next;
    int cost = 0;
    Rule rule = Rule::Com;
    // Indices of the top-level parallel components involved.
    std::vector<size_t> position;
    Name channel;  // channel acted upon (allocated name for rAll)
};

struct StepOptions {
    // Besides the canonical fresh name, let rAll also pick each deallocated
    // name already occurring in the process (re-allocation of a dangling name).
    bool reuse_dangling = false;
};

std::vector<CostedStep> step(const System& s, const StepOptions& opts = {});

struct Trace {
    std::vector<CostedStep> steps;
    int total_cost = 0;
    bool maximal = false;  // ended in a stuck system (not by fuel)
};

enum class Policy { OnePath, Exhaustive };

struct RunOptions {
    size_t fuel = 16;
    Policy policy = Policy::OnePath;
    size_t max_traces = 10000;
    StepOptions step;
};

std::vector<Trace> run(const System& s, const RunOptions& opts);

// Structural hash of a system (allocated set and canonical process).
std::string state_hash(const System& s);

System make_system(const std::vector<Name>& alloc, ProcessTerm p);

}  // namespace picr
