#pragma once

// Builds a validator from a program by symbolic execution. The validator
// carries one validation state per live execution hypothesis; each consumed
// (query, answer) pair havocs the choice cell, pins the query cell, executes
// the program symbolically (forking at every branch), constrains the answer
// cell to the observation, and drops hypotheses whose constraints became
// unsatisfiable. An empty hypothesis set rejects the trace.

#include <optional>
#include <string>
#include <vector>

#include "mbt/prog.hpp"
#include "mbt/qac.hpp"
#include "mbt/symbolic.hpp"

namespace mbt::dual {

using DualValidatorState = std::vector<sym::ValidationState>;

struct Options {
    // Hard cap on live hypotheses per step; exceeding it is a configuration
    // error, never a silent prune.
    std::optional<std::size_t> state_cap;
};

// Raised by validator_of for programs whose divisions are not by a nonzero
// constant; the solver's theory does not cover symbolic divisors.
struct UnsupportedDivision : ConfigError {
    UnsupportedDivision() : ConfigError("program divides by a non-constant expression") {}
};

// Single state mapping every address to #0 with the constraint #0 = 0,
// mirroring the all-zero initial memory.
DualValidatorState initial_dual_state(std::size_t address_count);

// Re-points address d at a fresh variable; no constraint.
sym::ValidationState havoc(prog::Address d, sym::ValidationState v);

// Fresh x; address d now maps to x; adds x = e translated under the
// pre-write mapping.
sym::ValidationState write_rule(prog::Address d, const prog::SExp& e, sym::ValidationState v);

// Symbolic execution: Return keeps the state, Write applies write_rule, IfLe
// forks with the guard (and its negation) translated under the current
// mapping.
std::vector<sym::ValidationState> exec(const prog::Prog& p, sym::ValidationState v);

// One validator step over every live hypothesis; nothing means rejection.
std::optional<DualValidatorState> vstep(const prog::Prog& p, Value q, Value a,
                                        const DualValidatorState& dv, const qac::ChoiceDomain& dom,
                                        const Options& opts = {});

// Like vstep on a rejecting input: pretty-prints each dead hypothesis's
// unsatisfiable constraint set.
std::string rejection_report(const prog::Prog& p, Value q, Value a, const DualValidatorState& dv);

// Deduplicates hypotheses equal up to variable renaming. Not applied by
// default; renaming-equivalence is an engineering add-on, not part of the
// construction.
DualValidatorState canonical(const DualValidatorState& dv);

qac::ValidatorModel validator_of(const prog::Prog& p, const qac::ChoiceDomain& dom,
                                 const Options& opts = {});

}  // namespace mbt::dual
