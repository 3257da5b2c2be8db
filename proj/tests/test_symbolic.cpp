#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "mbt/symbolic.hpp"
#include "mbt/util.hpp"

using namespace mbt;
using namespace mbt::sym;

namespace {

Constraint eq(VExp l, VExp r) { return {std::move(l), Cmp::Eq, std::move(r)}; }
Constraint le(VExp l, VExp r) { return {std::move(l), Cmp::Le, std::move(r)}; }
Constraint lt(VExp l, VExp r) { return {std::move(l), Cmp::Lt, std::move(r)}; }

// Reference satisfiability: every variable in cs ranges over dom.
// Deliberately the dumbest possible enumeration, used to cross-check the
// production solver on tiny instances.
bool brute_solvable(const ConstraintSet& cs, const qac::ChoiceDomain& dom,
                    const std::vector<Var>& vars) {
    std::vector<Value> vals(vars.size(), dom.lo);
    for (;;) {
        Assignment asgn;
        for (std::size_t i = 0; i < vars.size(); ++i) asgn.set(vars[i], vals[i]);
        if (satisfies(asgn, cs)) return true;
        std::size_t i = 0;
        while (i < vals.size() && vals[i] == dom.hi) vals[i++] = dom.lo;
        if (i == vals.size()) return false;
        ++vals[i];
    }
}

ConstraintSet random_constraints(Rng& rng, int n_vars, int n_cs) {
    ConstraintSet cs;
    auto atom = [&]() {
        if (rng.coin()) return VExp::k(rng.range(-3, 3));
        return VExp::ref(Var{static_cast<std::uint32_t>(rng.below(n_vars))});
    };
    auto expr = [&]() {
        if (rng.chance(40)) return atom();
        const auto op = static_cast<prog::BinOp>(rng.below(3));
        return VExp::bin(op, atom(), atom());
    };
    for (int i = 0; i < n_cs; ++i) {
        const Cmp cmp = static_cast<Cmp>(rng.below(3));
        cs.push_back({expr(), cmp, expr()});
    }
    return cs;
}

}  // namespace

TEST_CASE("vexp_eval") {
    Assignment asgn;
    asgn.set(Var{0}, 0);
    CHECK(vexp_eval(VExp::ref(Var{0}), asgn) == 0);

    asgn.set(Var{3}, 5);
    CHECK(vexp_eval(VExp::bin(prog::BinOp::Add, VExp::k(2), VExp::ref(Var{3})), asgn) == 7);
    CHECK(vexp_eval(VExp::k(-12), asgn) == -12);
    CHECK_THROWS_AS(vexp_eval(VExp::bin(prog::BinOp::Div, VExp::k(1), VExp::k(0)), asgn), DivByZero);
}

TEST_CASE("satisfies") {
    Assignment zero;
    zero.set(Var{0}, 0);
    CHECK(satisfies(zero, {eq(VExp::ref(Var{0}), VExp::k(0))}));

    Assignment one;
    one.set(Var{0}, 1);
    CHECK_FALSE(satisfies(one, {eq(VExp::ref(Var{0}), VExp::k(0))}));

    CHECK(satisfies(one, {}));

    std::string diag;
    const ConstraintSet div{eq(VExp::bin(prog::BinOp::Div, VExp::k(1), VExp::ref(Var{0})), VExp::k(1))};
    CHECK_FALSE(satisfies(zero, div, &diag));
    CHECK(diag.find("division by zero") != std::string::npos);
}

TEST_CASE("solvable finds witnesses and detects contradictions") {
    const qac::ChoiceDomain dom{-8, 8};

    auto w = solvable({eq(VExp::ref(Var{0}), VExp::k(0))}, dom);
    REQUIRE(w.has_value());
    CHECK(w->get(Var{0}) == 0);

    CHECK_FALSE(solvable({eq(VExp::ref(Var{1}), VExp::k(0)), eq(VExp::ref(Var{1}), VExp::k(1))}, dom)
                    .has_value());

    CHECK_FALSE(solvable({lt(VExp::ref(Var{2}), VExp::ref(Var{3})),
                          le(VExp::ref(Var{3}), VExp::ref(Var{2}))},
                         dom)
                    .has_value());
}

TEST_CASE("solvable witnesses satisfy, and free variables stay inside the domain") {
    Rng rng(99);
    const qac::ChoiceDomain dom{-3, 3};
    for (int iter = 0; iter < 400; ++iter) {
        const auto cs = random_constraints(rng, 3, 3);
        auto w = solvable(cs, dom);
        if (w) CHECK(satisfies(*w, cs));
    }
}

TEST_CASE("solvable agrees with exhaustive enumeration on inequality-only sets") {
    // Without equalities nothing is pinned, so the production solver and the
    // all-variables-in-domain reference must agree exactly.
    Rng rng(7);
    const qac::ChoiceDomain dom{-2, 2};
    const std::vector<Var> vars{Var{0}, Var{1}, Var{2}};
    int disagreements = 0;
    for (int iter = 0; iter < 300; ++iter) {
        ConstraintSet cs = random_constraints(rng, 3, 3);
        for (auto& c : cs)
            if (c.cmp == Cmp::Eq) c.cmp = Cmp::Le;
        if (solvable(cs, dom).has_value() != brute_solvable(cs, dom, vars)) ++disagreements;
    }
    CHECK(disagreements == 0);
}

TEST_CASE("pinned variables may take values outside the domain") {
    // #5 = 100 is satisfiable even though 100 lies outside the search domain:
    // the equality forces the value, enumeration never touches it.
    const qac::ChoiceDomain dom{-8, 8};
    auto w = solvable({eq(VExp::ref(Var{5}), VExp::k(100))}, dom);
    REQUIRE(w.has_value());
    CHECK(w->get(Var{5}) == 100);

    // A chain of definitions propagates.
    auto w2 = solvable({eq(VExp::ref(Var{1}), VExp::k(20)),
                        eq(VExp::ref(Var{2}), VExp::bin(prog::BinOp::Mul, VExp::ref(Var{1}), VExp::k(3))),
                        le(VExp::k(59), VExp::ref(Var{2}))},
                       dom);
    REQUIRE(w2.has_value());
    CHECK(w2->get(Var{2}) == 60);
}

TEST_CASE("solution_values lists exactly the reachable values of the target") {
    const qac::ChoiceDomain dom{-2, 2};
    // #1 free in dom, #2 = #1 * #1.
    const ConstraintSet cs{eq(VExp::ref(Var{2}), VExp::bin(prog::BinOp::Mul, VExp::ref(Var{1}), VExp::ref(Var{1})))};
    const auto vals = solution_values(cs, dom, VExp::ref(Var{2}));
    CHECK(vals == std::vector<Value>{0, 1, 4});

    const auto direct = solution_values({}, dom, VExp::k(42));
    CHECK(direct == std::vector<Value>{42});
}

TEST_CASE("fresh returns variables unused by the state") {
    ValidationState v;
    v.vars.assign(4, Var{0});
    v.constraints.push_back(eq(VExp::ref(Var{0}), VExp::k(0)));
    v.next_fresh = 1;

    const Var a = fresh(v);
    CHECK(a.id == 1);
    const Var b = fresh(v);
    CHECK(b.id == 2);

    ValidationState ten;
    ten.next_fresh = 10;
    CHECK(fresh(ten).id == 10);
}

TEST_CASE("translate_sexp replaces reads by the address's variable") {
    ValidationState v;
    v.vars = {Var{4}, Var{7}};

    const VExp t = translate_sexp(prog::SExp::read(0), v);
    CHECK(t.kind == VExp::Kind::Var);
    CHECK(t.var == Var{4});

    CHECK(translate_sexp(prog::SExp::k(3), v).constant == 3);

    const VExp b = translate_sexp(
        prog::SExp::bin(prog::BinOp::Add, prog::SExp::read(1), prog::SExp::k(2)), v);
    CHECK(print(b) == "#7 + 2");
}

TEST_CASE("translation commutes with evaluation") {
    // If asgn maps each address's variable to the memory's value there, then
    // evaluating the translated expression equals evaluating the original.
    Rng rng(5);
    for (int iter = 0; iter < 300; ++iter) {
        ValidationState v;
        prog::Memory s;
        Assignment asgn;
        for (prog::Address a = 0; a < 4; ++a) {
            const Var var{static_cast<std::uint32_t>(a + 1)};
            v.vars.push_back(var);
            const Value val = rng.range(-9, 9);
            s.write(a, val);
            asgn.set(var, val);
        }
        auto atom = [&]() {
            if (rng.coin()) return prog::SExp::k(rng.range(-4, 4));
            return prog::SExp::read(static_cast<prog::Address>(rng.below(4)));
        };
        const auto e = prog::SExp::bin(static_cast<prog::BinOp>(rng.below(3)), atom(),
                                       prog::SExp::bin(static_cast<prog::BinOp>(rng.below(3)), atom(), atom()));
        CHECK(vexp_eval(translate_sexp(e, v), asgn) == prog::sexp_eval(e, s));
    }
}

TEST_CASE("extending an assignment at a fresh variable changes nothing") {
    Rng rng(17);
    for (int iter = 0; iter < 200; ++iter) {
        ValidationState v;
        Assignment asgn;
        for (prog::Address a = 0; a < 3; ++a) {
            const Var var{static_cast<std::uint32_t>(a)};
            v.vars.push_back(var);
            asgn.set(var, rng.range(-5, 5));
        }
        v.next_fresh = 3;
        ConstraintSet cs = random_constraints(rng, 3, 2);
        const bool before = satisfies(asgn, cs);
        const auto e = prog::SExp::bin(prog::BinOp::Add, prog::SExp::read(0), prog::SExp::read(2));
        const Value eval_before = vexp_eval(translate_sexp(e, v), asgn);

        Assignment extended = asgn;
        extended.set(fresh(v), rng.range(-5, 5));
        CHECK(satisfies(extended, cs) == before);
        CHECK(vexp_eval(translate_sexp(e, v), extended) == eval_before);
    }
}

TEST_CASE("pretty printer and constraint parser round-trip") {
    const ConstraintSet cs{
        eq(VExp::ref(Var{3}), VExp::bin(prog::BinOp::Add, VExp::ref(Var{1}), VExp::k(2))),
        lt(VExp::k(0), VExp::ref(Var{3})),
    };
    CHECK(print(cs) == "{#3 = #1 + 2, 0 < #3}");

    const auto parsed = parse_constraints("#3 = #1 + 2\n0 < #3\n");
    CHECK(print(parsed) == print(cs));

    const auto mixed = parse_constraints("#1 * (#2 - 1) <= 4   # a comment\n");
    CHECK(print(mixed) == "{#1 * (#2 - 1) <= 4}");
}
