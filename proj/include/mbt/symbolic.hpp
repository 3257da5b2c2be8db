#pragma once

// Symbolic variables, validator expressions, constraints, assignments, and a
// bounded satisfiability check. Constraint sets produced by symbolic
// execution are mostly definitional (each write pins a fresh variable to an
// expression over older ones), so the solver eliminates pinned variables by
// substitution and only enumerates the genuinely free ones over the choice
// domain. Free variables are searched ascending from the domain's low end;
// the first witness wins.

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mbt/prog.hpp"
#include "mbt/qac.hpp"
#include "mbt/util.hpp"

namespace mbt::sym {

struct Var {
    std::uint32_t id = 0;
    bool operator==(const Var&) const = default;
};

struct VExp {
    enum class Kind { Const, Var, Bin };
    Kind kind = Kind::Const;
    Value constant = 0;
    Var var;
    prog::BinOp op = prog::BinOp::Add;
    std::shared_ptr<const VExp> lhs, rhs;

    static VExp k(Value v);
    static VExp ref(Var x);
    static VExp bin(prog::BinOp op, VExp lhs, VExp rhs);
};

enum class Cmp { Lt, Le, Eq };

struct Constraint {
    VExp lhs;
    Cmp cmp = Cmp::Eq;
    VExp rhs;
};

using ConstraintSet = std::vector<Constraint>;

// Total map var -> integer, default 0.
class Assignment {
  public:
    Value get(Var x) const {
        auto it = values_.find(x.id);
        return it == values_.end() ? 0 : it->second;
    }
    void set(Var x, Value v) { values_[x.id] = v; }

  private:
    std::unordered_map<std::uint32_t, Value> values_;
};

// One execution hypothesis: address -> variable, plus the constraints
// accumulated so far. Fresh allocation is a monotone counter carried here so
// replays are deterministic.
struct ValidationState {
    std::vector<Var> vars;        // indexed by address
    ConstraintSet constraints;
    std::uint32_t next_fresh = 1;

    Var var_at(prog::Address a) const { return a < vars.size() ? vars[a] : Var{0}; }
};

// Structural evaluation substituting variables from asgn. Throws DivByZero.
Value vexp_eval(const VExp& e, const Assignment& asgn);

// True iff every comparison holds. A division by zero anywhere makes the
// assignment unsatisfying; the offending constraint goes to *diag if given.
bool satisfies(const Assignment& asgn, const ConstraintSet& cs, std::string* diag = nullptr);

// Finds an assignment satisfying cs, or nothing. Unpinned variables range
// over dom; variables pinned by an equality take their forced value even
// outside dom (this is what makes validators agree with a choice-bounded
// oracle: only the havoc'd choice variables are genuinely free).
std::optional<Assignment> solvable(const ConstraintSet& cs, const qac::ChoiceDomain& dom);

// Enumerates every satisfying assignment as above and collects the values of
// `target` into an ascending, deduplicated list. Used to answer "which
// observed answers could this hypothesis explain" in a single sweep. Values
// outside [clip_lo, clip_hi] are dropped, and the search stops early once
// every value in the clip range has been seen or the target is known not to
// depend on any enumerated variable.
std::vector<Value> solution_values(const ConstraintSet& cs, const qac::ChoiceDomain& dom,
                                   const VExp& target,
                                   Value clip_lo = std::numeric_limits<Value>::min(),
                                   Value clip_hi = std::numeric_limits<Value>::max());

Var fresh(ValidationState& v);

// Distinct variables mentioned by cs, ascending by id.
std::vector<Var> variables_of(const ConstraintSet& cs);

// Replaces each address read by the variable currently standing for it.
VExp translate_sexp(const prog::SExp& e, const ValidationState& v);

std::string print(const VExp& e);
std::string print(const Constraint& c);
std::string print(const ConstraintSet& cs);

// Parses one constraint per line, e.g. "#1 + 2 <= #2 * #2". Comparators are
// <, <=, =. Used by the constraint-file debugging command.
ConstraintSet parse_constraints(const std::string& text);

}  // namespace mbt::sym
