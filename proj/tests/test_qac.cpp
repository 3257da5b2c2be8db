#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mbt/qac.hpp"
#include "mbt/util.hpp"

using namespace mbt;
using namespace mbt::qac;

namespace {

// Compare-and-set: answers 0 when the query is no greater than the stored
// number, else stores the query and answers 1. Deterministic, so the choice
// argument is ignored.
ServerModel cmp_set_server() {
    ServerModel m;
    m.state = Value{0};
    m.step = [](Value q, Value, const std::any& s) -> std::pair<Value, std::any> {
        const Value n = std::any_cast<Value>(s);
        if (q <= n) return {0, n};
        return {1, q};
    };
    return m;
}

ValidatorModel cmp_set_validator() {
    ValidatorModel v;
    v.state = Value{0};
    v.step = [](Value q, Value a, const std::any& s) -> std::optional<std::any> {
        const Value n = std::any_cast<Value>(s);
        if (q <= n) return a == 0 ? std::optional<std::any>{n} : std::nullopt;
        return a == 1 ? std::optional<std::any>{q} : std::nullopt;
    };
    return v;
}

// Compare-and-reset: like compare-and-set, but a successful update stores the
// internal choice instead of the query.
ServerModel cmp_rst_server() {
    ServerModel m;
    m.state = Value{0};
    m.step = [](Value q, Value c, const std::any& s) -> std::pair<Value, std::any> {
        const Value n = std::any_cast<Value>(s);
        if (q <= n) return {0, n};
        return {1, c};
    };
    return m;
}

}  // namespace

TEST_CASE("step_server runs the loop body and swaps in the post state") {
    auto m = cmp_set_server();
    auto [a1, m1] = step_server(m, 5, 99);
    CHECK(a1 == 1);
    CHECK(std::any_cast<Value>(m1.state) == 5);

    auto [a2, m2] = step_server(m1, 5, 0);
    CHECK(a2 == 0);
    CHECK(std::any_cast<Value>(m2.state) == 5);

    auto rst = cmp_rst_server();
    auto [a3, m3] = step_server(rst, 3, 7);
    CHECK(a3 == 1);
    CHECK(std::any_cast<Value>(m3.state) == 7);
}

TEST_CASE("step_validator accepts matching answers and rejects the rest") {
    auto v = cmp_set_validator();
    auto v1 = step_validator(v, 5, 1);
    REQUIRE(v1.has_value());
    CHECK(std::any_cast<Value>(v1->state) == 5);

    CHECK_FALSE(step_validator(v, 5, 0).has_value());
}

TEST_CASE("oracle_valid searches choices within the domain") {
    const ChoiceDomain dom{-8, 8};
    auto m = cmp_rst_server();

    // Choice 7 at the first step explains the later 0.
    CHECK(oracle_valid(m, {{5, 1}, {3, 0}}, dom));
    // A query above the stored number forces answer 1.
    CHECK_FALSE(oracle_valid(m, {{5, 0}}, dom));
    CHECK(oracle_valid(m, {}, dom));

    // The witness choice must lie inside the domain.
    CHECK(oracle_valid(m, {{5, 1}, {8, 1}}, dom));
    CHECK_FALSE(oracle_valid(m, {{5, 1}, {9, 0}}, ChoiceDomain{0, 8}));
}

TEST_CASE("accepts_trace folds the validator over the trace") {
    auto v = cmp_set_validator();
    CHECK(accepts_trace(v, {{5, 1}, {5, 0}, {6, 1}}));
    CHECK_FALSE(accepts_trace(v, {{5, 0}}));
    CHECK(accepts_trace(v, {}));
}

TEST_CASE("empty-trace reflexivity holds for arbitrary models") {
    const ChoiceDomain dom{-2, 2};
    CHECK(oracle_valid(cmp_set_server(), {}, dom));
    CHECK(oracle_valid(cmp_rst_server(), {}, dom));
    CHECK(accepts_trace(cmp_set_validator(), {}));
}

TEST_CASE("oracle validity is prefix closed") {
    const ChoiceDomain dom{-4, 4};
    auto m = cmp_rst_server();
    Rng rng(2024);
    for (int iter = 0; iter < 200; ++iter) {
        Trace t;
        const int len = 1 + static_cast<int>(rng.below(3));
        for (int i = 0; i < len; ++i) t.push_back({rng.range(-3, 3), rng.range(-1, 2)});
        if (!oracle_valid(m, t, dom)) continue;
        Trace prefix(t.begin(), t.end() - 1);
        CHECK(oracle_valid(m, prefix, dom));
    }
}

TEST_CASE("oracle calls are deterministic") {
    const ChoiceDomain dom{-8, 8};
    auto m = cmp_rst_server();
    const Trace t{{5, 1}, {3, 0}, {4, 1}};
    const bool first = oracle_valid(m, t, dom);
    for (int i = 0; i < 5; ++i) CHECK(oracle_valid(m, t, dom) == first);
}
