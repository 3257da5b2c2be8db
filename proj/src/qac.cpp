#include "mbt/qac.hpp"

namespace mbt::qac {

std::pair<Value, ServerModel> step_server(const ServerModel& m, Value q, Value c) {
    auto [answer, next] = m.step(q, c, m.state);
    return {answer, ServerModel{std::move(next), m.step}};
}

std::optional<ValidatorModel> step_validator(const ValidatorModel& v, Value q, Value a) {
    auto next = v.step(q, a, v.state);
    if (!next) return std::nullopt;
    return ValidatorModel{std::move(*next), v.step};
}

namespace {

bool oracle_search(const ServerModel& m, const std::any& state, const Trace& t, std::size_t idx,
                   const ChoiceDomain& dom) {
    if (idx == t.size()) return true;
    const auto [q, a] = t[idx];
    for (Value c = dom.lo; c <= dom.hi; ++c) {
        auto [answer, next] = m.step(q, c, state);
        if (answer == a && oracle_search(m, next, t, idx + 1, dom)) return true;
    }
    return false;
}

}  // namespace

bool oracle_valid(const ServerModel& m, const Trace& t, const ChoiceDomain& dom) {
    return oracle_search(m, m.state, t, 0, dom);
}

bool accepts_trace(const ValidatorModel& v, const Trace& t) {
    std::any state = v.state;
    for (const auto& [q, a] : t) {
        auto next = v.step(q, a, state);
        if (!next) return false;
        state = std::move(*next);
    }
    return true;
}

}  // namespace mbt::qac
