#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mbt {

using Value = std::int64_t;

// Arithmetic on model values is two's-complement wrapping 64-bit. The same
// helpers are used by the concrete evaluator and by the constraint solver, so
// both routes agree bit-for-bit even when intermediate values overflow.
inline Value wrap_add(Value a, Value b) {
    return static_cast<Value>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
inline Value wrap_sub(Value a, Value b) {
    return static_cast<Value>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
inline Value wrap_mul(Value a, Value b) {
    return static_cast<Value>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

struct DivByZero : std::runtime_error {
    DivByZero() : std::runtime_error("division by zero") {}
};

// Integer division truncating toward zero; divisor zero throws.
inline Value checked_div(Value a, Value b) {
    if (b == 0) throw DivByZero{};
    if (a == std::numeric_limits<Value>::min() && b == -1) return a;  // wraps
    return a / b;
}

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic RNG used everywhere a random decision is made. Distributions
// are derived by hand from the raw engine output so that a seed produces the
// same stream on every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    // Uniform in [lo, hi], inclusive.
    Value range(Value lo, Value hi) {
        return lo + static_cast<Value>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // True with probability percent/100.
    bool chance(unsigned percent) { return below(100) < percent; }

    bool coin() { return (next() & 1u) != 0; }

    template <class T>
    const T& pick(const std::vector<T>& xs) {
        return xs[below(xs.size())];
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace mbt
