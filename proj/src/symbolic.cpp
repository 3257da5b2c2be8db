#include "mbt/symbolic.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <sstream>

namespace mbt::sym {

VExp VExp::k(Value v) {
    VExp e;
    e.kind = Kind::Const;
    e.constant = v;
    return e;
}

VExp VExp::ref(Var x) {
    VExp e;
    e.kind = Kind::Var;
    e.var = x;
    return e;
}

VExp VExp::bin(prog::BinOp op, VExp lhs, VExp rhs) {
    VExp e;
    e.kind = Kind::Bin;
    e.op = op;
    e.lhs = std::make_shared<const VExp>(std::move(lhs));
    e.rhs = std::make_shared<const VExp>(std::move(rhs));
    return e;
}

Value vexp_eval(const VExp& e, const Assignment& asgn) {
    switch (e.kind) {
        case VExp::Kind::Const: return e.constant;
        case VExp::Kind::Var: return asgn.get(e.var);
        case VExp::Kind::Bin: {
            const Value l = vexp_eval(*e.lhs, asgn);
            const Value r = vexp_eval(*e.rhs, asgn);
            switch (e.op) {
                case prog::BinOp::Add: return wrap_add(l, r);
                case prog::BinOp::Sub: return wrap_sub(l, r);
                case prog::BinOp::Mul: return wrap_mul(l, r);
                case prog::BinOp::Div: return checked_div(l, r);
            }
        }
    }
    return 0;
}

namespace {

bool holds(Value l, Cmp cmp, Value r) {
    switch (cmp) {
        case Cmp::Lt: return l < r;
        case Cmp::Le: return l <= r;
        case Cmp::Eq: return l == r;
    }
    return false;
}

void collect_vars(const VExp& e, std::set<std::uint32_t>& out) {
    switch (e.kind) {
        case VExp::Kind::Const: return;
        case VExp::Kind::Var: out.insert(e.var.id); return;
        case VExp::Kind::Bin:
            collect_vars(*e.lhs, out);
            collect_vars(*e.rhs, out);
            return;
    }
}

}  // namespace

bool satisfies(const Assignment& asgn, const ConstraintSet& cs, std::string* diag) {
    for (const auto& c : cs) {
        try {
            if (!holds(vexp_eval(c.lhs, asgn), c.cmp, vexp_eval(c.rhs, asgn))) {
                if (diag) *diag = "unsatisfied: " + print(c);
                return false;
            }
        } catch (const DivByZero&) {
            if (diag) *diag = "division by zero in: " + print(c);
            return false;
        }
    }
    return true;
}

namespace {

// Shared machinery for solvable() and solution_values(). Equalities with a
// lone variable on one side whose definition does not (transitively) refer
// back to itself become substitutions; everything else is enumerated or
// checked. The spec's unit propagation for #x = c and #x = #y falls out as
// the degenerate cases of a definition.
//
// Setup compiles the constraint set into a dense form: variables become
// indices, and a static schedule records which definitions to evaluate and
// which constraints to check after each enumeration level. The enumeration
// itself then backtracks by plain overwrites, with no allocation.
class Search {
  public:
    Search(const ConstraintSet& cs, const qac::ChoiceDomain& dom) : dom_(dom) {
        // Dense variable numbering.
        std::set<std::uint32_t> id_set;
        std::vector<std::set<std::uint32_t>> cvars(cs.size());
        for (std::size_t i = 0; i < cs.size(); ++i) {
            collect_vars(cs[i].lhs, cvars[i]);
            collect_vars(cs[i].rhs, cvars[i]);
            id_set.insert(cvars[i].begin(), cvars[i].end());
        }
        ids_.assign(id_set.begin(), id_set.end());
        const auto idx_of = [this](std::uint32_t id) {
            return static_cast<std::size_t>(
                std::lower_bound(ids_.begin(), ids_.end(), id) - ids_.begin());
        };
        const std::size_t nvars = ids_.size();

        // Pick definitions in constraint order; the first equality that can
        // define a variable wins, later ones stay as checks.
        std::vector<char> is_def(cs.size(), 0);
        std::vector<const VExp*> def_rhs(nvars, nullptr);
        for (std::size_t i = 0; i < cs.size(); ++i) {
            if (cs[i].cmp != Cmp::Eq) continue;
            const auto try_define = [&](const VExp& side, const VExp& other) {
                if (side.kind != VExp::Kind::Var) return false;
                const auto v = idx_of(side.var.id);
                if (def_rhs[v]) return false;
                std::set<std::uint32_t> rhs_vars;
                collect_vars(other, rhs_vars);
                if (rhs_vars.count(side.var.id)) return false;
                def_rhs[v] = &other;
                return true;
            };
            if (try_define(cs[i].lhs, cs[i].rhs) || try_define(cs[i].rhs, cs[i].lhs)) is_def[i] = 1;
        }

        // Dependencies per defined variable; cycles get demoted to checks
        // (their variables are enumerated like free ones).
        std::vector<std::vector<std::size_t>> def_deps(nvars);
        for (std::size_t v = 0; v < nvars; ++v) {
            if (!def_rhs[v]) continue;
            std::set<std::uint32_t> deps;
            collect_vars(*def_rhs[v], deps);
            for (auto d : deps) def_deps[v].push_back(idx_of(d));
        }
        std::vector<char> defined(nvars, 0);
        for (std::size_t v = 0; v < nvars; ++v) defined[v] = def_rhs[v] != nullptr;
        for (;;) {
            // Detect definitions reachable from free variables; the rest are
            // cyclic and fall back to enumeration.
            std::vector<char> ok(nvars, 0);
            bool progress = true;
            while (progress) {
                progress = false;
                for (std::size_t v = 0; v < nvars; ++v) {
                    if (!defined[v] || ok[v]) continue;
                    bool ready = true;
                    for (auto d : def_deps[v])
                        if (defined[d] && !ok[d]) { ready = false; break; }
                    if (ready) {
                        ok[v] = 1;
                        progress = true;
                    }
                }
            }
            bool demoted = false;
            for (std::size_t v = 0; v < nvars; ++v) {
                if (defined[v] && !ok[v]) {
                    defined[v] = 0;
                    def_rhs[v] = nullptr;
                    demoted = true;
                    break;  // demote one at a time; others may become acyclic
                }
            }
            if (!demoted) break;
        }
        for (std::size_t i = 0; i < cs.size(); ++i) {
            if (!is_def[i]) continue;
            const auto& side = cs[i].lhs.kind == VExp::Kind::Var ? cs[i].lhs : cs[i].rhs;
            if (!defined[idx_of(side.var.id)]) is_def[i] = 0;
        }

        for (std::size_t v = 0; v < nvars; ++v)
            if (!defined[v]) free_.push_back(v);

        // Static schedule: after assigning free_[L], evaluate the definitions
        // that became computable (in dependency order) and run the checks
        // whose variables are all known. Level 0 of the schedule (the
        // prologue) covers constants.
        levels_.resize(free_.size() + 1);
        std::vector<char> known(nvars, 0);
        std::vector<char> def_placed(nvars, 0);
        std::vector<char> check_done(cs.size(), 0);
        const auto fill_level = [&](Level& level) {
            bool progress = true;
            while (progress) {
                progress = false;
                for (std::size_t v = 0; v < nvars; ++v) {
                    if (!defined[v] || def_placed[v]) continue;
                    bool ready = true;
                    for (auto d : def_deps[v])
                        if (!known[d]) { ready = false; break; }
                    if (ready) {
                        level.defs.push_back({v, def_rhs[v]});
                        def_placed[v] = 1;
                        known[v] = 1;
                        progress = true;
                    }
                }
            }
            for (std::size_t i = 0; i < cs.size(); ++i) {
                if (is_def[i] || check_done[i]) continue;
                bool all = true;
                for (auto id : cvars[i])
                    if (!known[idx_of(id)]) { all = false; break; }
                if (all) {
                    level.checks.push_back(&cs[i]);
                    check_done[i] = 1;
                }
            }
        };
        fill_level(levels_[0]);
        for (std::size_t L = 0; L < free_.size(); ++L) {
            known[free_[L]] = 1;
            fill_level(levels_[L + 1]);
        }
    }

    std::size_t free_count() const { return free_.size(); }

    // True iff the (dense) target expression depends on an enumerated
    // variable, directly or through definitions.
    bool depends_on_free(const VExp& target) const {
        std::set<std::uint32_t> deps;
        collect_vars(target, deps);
        for (auto id : deps) {
            const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
            if (it == ids_.end() || *it != id) continue;  // unconstrained: defaults to 0
            if (tainted_by_free(static_cast<std::size_t>(it - ids_.begin()))) return true;
        }
        return false;
    }

    // Runs fn on each satisfying assignment; fn returning false stops the
    // search. fn receives the dense value vector; use value_of() to read an
    // arbitrary expression under it.
    bool enumerate(const std::function<bool(const std::vector<Value>&)>& fn) {
        values_.assign(ids_.size(), 0);
        if (!run_level(levels_[0])) return false;
        return walk(0, fn);
    }

    // Evaluates e under a dense value vector. Throws DivByZero.
    Value value_of(const VExp& e, const std::vector<Value>& values) const {
        switch (e.kind) {
            case VExp::Kind::Const: return e.constant;
            case VExp::Kind::Var: {
                const auto it = std::lower_bound(ids_.begin(), ids_.end(), e.var.id);
                if (it == ids_.end() || *it != e.var.id) return 0;
                return values[static_cast<std::size_t>(it - ids_.begin())];
            }
            case VExp::Kind::Bin: {
                const Value l = value_of(*e.lhs, values);
                const Value r = value_of(*e.rhs, values);
                switch (e.op) {
                    case prog::BinOp::Add: return wrap_add(l, r);
                    case prog::BinOp::Sub: return wrap_sub(l, r);
                    case prog::BinOp::Mul: return wrap_mul(l, r);
                    case prog::BinOp::Div: return checked_div(l, r);
                }
            }
        }
        return 0;
    }

    Assignment to_assignment(const std::vector<Value>& values) const {
        Assignment a;
        for (std::size_t v = 0; v < ids_.size(); ++v) a.set(Var{ids_[v]}, values[v]);
        return a;
    }

  private:
    struct Level {
        std::vector<std::pair<std::size_t, const VExp*>> defs;
        std::vector<const Constraint*> checks;
    };

    bool tainted_by_free(std::size_t v) const {
        // Free variables taint themselves; defined ones taint through deps.
        if (taint_memo_.size() != ids_.size()) taint_memo_.assign(ids_.size(), -1);
        if (taint_memo_[v] >= 0) return taint_memo_[v] != 0;
        taint_memo_[v] = 0;
        for (auto f : free_) {
            if (f == v) {
                taint_memo_[v] = 1;
                return true;
            }
        }
        for (const auto& level : levels_) {
            for (const auto& [dv, rhs] : level.defs) {
                if (dv != v) continue;
                std::set<std::uint32_t> deps;
                collect_vars(*rhs, deps);
                for (auto id : deps) {
                    const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
                    if (it != ids_.end() && *it == id &&
                        tainted_by_free(static_cast<std::size_t>(it - ids_.begin()))) {
                        taint_memo_[v] = 1;
                        return true;
                    }
                }
                return false;
            }
        }
        return false;
    }

    bool run_level(const Level& level) {
        for (const auto& [v, rhs] : level.defs) {
            try {
                values_[v] = value_of(*rhs, values_);
            } catch (const DivByZero&) {
                return false;
            }
        }
        for (const auto* c : level.checks) {
            try {
                if (!holds(value_of(c->lhs, values_), c->cmp, value_of(c->rhs, values_))) return false;
            } catch (const DivByZero&) {
                return false;
            }
        }
        return true;
    }

    bool walk(std::size_t L, const std::function<bool(const std::vector<Value>&)>& fn) {
        if (L == free_.size()) return !fn(values_);
        for (Value v = dom_.lo; v <= dom_.hi; ++v) {
            values_[free_[L]] = v;
            if (run_level(levels_[L + 1]) && walk(L + 1, fn)) return true;
        }
        return false;
    }

    qac::ChoiceDomain dom_;
    std::vector<std::uint32_t> ids_;    // sorted var ids; index = dense handle
    std::vector<std::size_t> free_;     // dense handles, ascending id
    std::vector<Level> levels_;         // [0] = prologue, [L+1] after free_[L]
    std::vector<Value> values_;
    mutable std::vector<signed char> taint_memo_;
};

}  // namespace

std::optional<Assignment> solvable(const ConstraintSet& cs, const qac::ChoiceDomain& dom) {
    std::optional<Assignment> witness;
    Search search(cs, dom);
    search.enumerate([&](const std::vector<Value>& values) {
        witness = search.to_assignment(values);
        return false;  // first witness wins
    });
    return witness;
}

std::vector<Value> solution_values(const ConstraintSet& cs, const qac::ChoiceDomain& dom,
                                   const VExp& target, Value clip_lo, Value clip_hi) {
    std::set<Value> out;
    Search search(cs, dom);
    const bool varies = search.depends_on_free(target);
    const bool clipped = clip_lo > std::numeric_limits<Value>::min() ||
                         clip_hi < std::numeric_limits<Value>::max();
    const std::uint64_t want =
        clipped ? static_cast<std::uint64_t>(clip_hi - clip_lo + 1) : 0;
    search.enumerate([&](const std::vector<Value>& values) {
        try {
            const Value v = search.value_of(target, values);
            if (v >= clip_lo && v <= clip_hi) out.insert(v);
        } catch (const DivByZero&) {
        }
        if (!varies) return false;                    // value cannot change
        if (clipped && out.size() == want) return false;  // saw the whole range
        return true;
    });
    return {out.begin(), out.end()};
}

Var fresh(ValidationState& v) {
    return Var{v.next_fresh++};
}

std::vector<Var> variables_of(const ConstraintSet& cs) {
    std::set<std::uint32_t> ids;
    for (const auto& c : cs) {
        collect_vars(c.lhs, ids);
        collect_vars(c.rhs, ids);
    }
    std::vector<Var> out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(Var{id});
    return out;
}

VExp translate_sexp(const prog::SExp& e, const ValidationState& v) {
    switch (e.kind) {
        case prog::SExp::Kind::Const: return VExp::k(e.constant);
        case prog::SExp::Kind::Read: return VExp::ref(v.var_at(e.src));
        case prog::SExp::Kind::Bin:
            return VExp::bin(e.op, translate_sexp(*e.lhs, v), translate_sexp(*e.rhs, v));
    }
    return VExp::k(0);
}

namespace {

void print_vexp_to(const VExp& e, std::ostream& out, int parent_prec) {
    switch (e.kind) {
        case VExp::Kind::Const: out << e.constant; return;
        case VExp::Kind::Var: out << '#' << e.var.id; return;
        case VExp::Kind::Bin: {
            const int prec = (e.op == prog::BinOp::Add || e.op == prog::BinOp::Sub) ? 1 : 2;
            const char* sym = e.op == prog::BinOp::Add ? " + " : e.op == prog::BinOp::Sub ? " - "
                              : e.op == prog::BinOp::Mul ? " * " : " / ";
            const bool paren = prec < parent_prec;
            if (paren) out << '(';
            print_vexp_to(*e.lhs, out, prec);
            out << sym;
            print_vexp_to(*e.rhs, out, prec + 1);
            if (paren) out << ')';
            return;
        }
    }
}

}  // namespace

std::string print(const VExp& e) {
    std::ostringstream out;
    print_vexp_to(e, out, 0);
    return out.str();
}

std::string print(const Constraint& c) {
    const char* sym = c.cmp == Cmp::Lt ? " < " : c.cmp == Cmp::Le ? " <= " : " = ";
    return print(c.lhs) + sym + print(c.rhs);
}

std::string print(const ConstraintSet& cs) {
    std::string out = "{";
    for (std::size_t i = 0; i < cs.size(); ++i) {
        if (i) out += ", ";
        out += print(cs[i]);
    }
    out += "}";
    return out;
}

// --- constraint file parser -------------------------------------------------

namespace {

class CLexer {
  public:
    explicit CLexer(const std::string& s) : s_(s) {}

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
    }

    bool eof() {
        skip_ws();
        return pos_ >= s_.size();
    }

    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    char take() {
        skip_ws();
        return s_[pos_++];
    }

    Value number() {
        skip_ws();
        std::size_t end = pos_;
        if (end < s_.size() && s_[end] == '-') ++end;
        while (end < s_.size() && std::isdigit(static_cast<unsigned char>(s_[end]))) ++end;
        if (end == pos_) throw prog::ParseError("expected number in constraint: " + s_);
        Value v = std::stoll(s_.substr(pos_, end - pos_));
        pos_ = end;
        return v;
    }

  private:
    const std::string& s_;
    std::size_t pos_ = 0;
};

VExp parse_vexp(CLexer& lex);

VExp parse_vatom(CLexer& lex) {
    const char c = lex.peek();
    if (c == '#') {
        lex.take();
        return VExp::ref(Var{static_cast<std::uint32_t>(lex.number())});
    }
    if (c == '(') {
        lex.take();
        VExp e = parse_vexp(lex);
        if (lex.take() != ')') throw prog::ParseError("expected ')' in constraint");
        return e;
    }
    return VExp::k(lex.number());
}

VExp parse_vterm(CLexer& lex) {
    VExp acc = parse_vatom(lex);
    while (lex.peek() == '*' || lex.peek() == '/') {
        const char op = lex.take();
        acc = VExp::bin(op == '*' ? prog::BinOp::Mul : prog::BinOp::Div, std::move(acc), parse_vatom(lex));
    }
    return acc;
}

VExp parse_vexp(CLexer& lex) {
    VExp acc = parse_vterm(lex);
    while (lex.peek() == '+' || lex.peek() == '-') {
        const char op = lex.take();
        acc = VExp::bin(op == '+' ? prog::BinOp::Add : prog::BinOp::Sub, std::move(acc), parse_vterm(lex));
    }
    return acc;
}

}  // namespace

ConstraintSet parse_constraints(const std::string& text) {
    ConstraintSet cs;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        // '#' starts a comment unless it is a variable reference like #12.
        for (std::size_t h = line.find('#'); h != std::string::npos; h = line.find('#', h + 1)) {
            if (h + 1 >= line.size() || !std::isdigit(static_cast<unsigned char>(line[h + 1]))) {
                line = line.substr(0, h);
                break;
            }
        }
        bool blank = true;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) { blank = false; break; }
        if (blank) continue;
        CLexer lex(line);
        Constraint c;
        c.lhs = parse_vexp(lex);
        const char op = lex.take();
        if (op == '<') {
            if (lex.peek() == '=') {
                lex.take();
                c.cmp = Cmp::Le;
            } else {
                c.cmp = Cmp::Lt;
            }
        } else if (op == '=') {
            c.cmp = Cmp::Eq;
        } else {
            throw prog::ParseError("expected comparator in constraint: " + line);
        }
        c.rhs = parse_vexp(lex);
        if (!lex.eof()) throw prog::ParseError("trailing input in constraint: " + line);
        cs.push_back(std::move(c));
    }
    return cs;
}

}  // namespace mbt::sym
