#pragma once

// Query-answer-choice server models, validators, and the brute-force trace
// oracle. A server model is an opaque state plus a step function over
// (query, internal choice); a validator consumes (query, answer) pairs and
// may reject. The oracle decides trace validity by exhaustive search over
// choice sequences drawn from a bounded domain and is the ground truth the
// rest of the project is checked against.

#include <any>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "mbt/util.hpp"

namespace mbt::qac {

struct TraceEntry {
    Value query = 0;
    Value answer = 0;
    bool operator==(const TraceEntry&) const = default;
};

using Trace = std::vector<TraceEntry>;

// Inclusive bounds for choice enumeration. The theory quantifies choices over
// all integers; the oracle needs a finite domain to terminate.
struct ChoiceDomain {
    Value lo = -8;
    Value hi = 8;
};

// Nondeterministic server: step is total and deterministic given
// (query, choice, state). The state type is hidden behind std::any so model
// authors can pick whatever representation they like.
struct ServerModel {
    std::any state;
    std::function<std::pair<Value, std::any>(Value query, Value choice, const std::any& state)> step;
};

// Validator: step yields the next state, or nothing to reject.
struct ValidatorModel {
    std::any state;
    std::function<std::optional<std::any>(Value query, Value answer, const std::any& state)> step;
};

std::pair<Value, ServerModel> step_server(const ServerModel& m, Value q, Value c);

std::optional<ValidatorModel> step_validator(const ValidatorModel& v, Value q, Value a);

// True iff some choice sequence within dom makes m produce t. Depth-first
// search, choices ascending from dom.lo; first witness wins.
bool oracle_valid(const ServerModel& m, const Trace& t, const ChoiceDomain& dom);

// Folds step_validator over t; true iff every step accepts.
bool accepts_trace(const ValidatorModel& v, const Trace& t);

}  // namespace mbt::qac
