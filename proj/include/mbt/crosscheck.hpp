#pragma once

// Random-program equivalence sweeps: checks that the dualized validator and
// the brute-force oracle agree on every trace up to a given length. The two
// routes stay independent — the oracle side only runs the concrete program,
// the validator side only solves constraints — and prefixes are shared so the
// sweep visits every trace without re-deriving its prefix.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mbt/dualize.hpp"
#include "mbt/prog.hpp"
#include "mbt/qac.hpp"
#include "mbt/util.hpp"

namespace mbt::crosscheck {

struct ProgGenConfig {
    int max_if_depth = 3;
    prog::Address max_address = 3;
    Value const_lo = -4;
    Value const_hi = 4;
    int max_writes = 3;   // per straight-line block
    int max_expr_depth = 2;
};

prog::Prog random_program(Rng& rng, const ProgGenConfig& cfg);

struct SweepConfig {
    qac::ChoiceDomain dom{-8, 8};
    Value query_lo = -3;
    Value query_hi = 3;
    Value answer_lo = -3;
    Value answer_hi = 3;
    int max_trace_len = 3;
    // Every trace (not just valid prefixes) contributes one comparison; from
    // these, spot_samples are re-verified through the public accepts_trace /
    // oracle_valid entry points as a check on the sweep machinery itself.
    int spot_samples = 0;
    Rng* spot_rng = nullptr;
};

struct SweepResult {
    bool ok = true;
    std::uint64_t traces_checked = 0;
    std::uint64_t spot_checked = 0;
    std::string mismatch;  // first disagreement, if any
};

SweepResult sweep_program(const prog::Prog& p, const SweepConfig& cfg);

}  // namespace mbt::crosscheck
