#include "mbt/dualize.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace mbt::dual {

DualValidatorState initial_dual_state(std::size_t address_count) {
    sym::ValidationState v;
    v.vars.assign(std::max<std::size_t>(address_count, 2), sym::Var{0});
    v.constraints.push_back({sym::VExp::ref(sym::Var{0}), sym::Cmp::Eq, sym::VExp::k(0)});
    v.next_fresh = 1;
    return {std::move(v)};
}

sym::ValidationState havoc(prog::Address d, sym::ValidationState v) {
    const sym::Var x = sym::fresh(v);
    if (d >= v.vars.size()) v.vars.resize(d + 1, sym::Var{0});
    v.vars[d] = x;
    return v;
}

sym::ValidationState write_rule(prog::Address d, const prog::SExp& e, sym::ValidationState v) {
    const sym::VExp source = sym::translate_sexp(e, v);  // pre-write mapping
    const sym::Var x = sym::fresh(v);
    if (d >= v.vars.size()) v.vars.resize(d + 1, sym::Var{0});
    v.vars[d] = x;
    v.constraints.push_back({sym::VExp::ref(x), sym::Cmp::Eq, source});
    return v;
}

std::vector<sym::ValidationState> exec(const prog::Prog& p, sym::ValidationState v) {
    switch (p.kind) {
        case prog::Prog::Kind::Return: return {std::move(v)};
        case prog::Prog::Kind::Write:
            return exec(*p.next, write_rule(p.dst, *p.expr, std::move(v)));
        case prog::Prog::Kind::IfLe: {
            const sym::VExp l = sym::translate_sexp(*p.cl, v);
            const sym::VExp r = sym::translate_sexp(*p.cr, v);
            sym::ValidationState taken = v;
            taken.constraints.push_back({l, sym::Cmp::Le, r});
            sym::ValidationState other = std::move(v);
            other.constraints.push_back({r, sym::Cmp::Lt, l});
            auto out = exec(*p.then_, std::move(taken));
            auto rest = exec(*p.else_, std::move(other));
            out.insert(out.end(), std::make_move_iterator(rest.begin()),
                       std::make_move_iterator(rest.end()));
            return out;
        }
    }
    return {};
}

namespace {

// havoc !0, pin !1 to the query, run the program. Shared by vstep and the
// rejection report.
std::vector<sym::ValidationState> step_states(const prog::Prog& p, Value q,
                                              const sym::ValidationState& v) {
    sym::ValidationState s = havoc(0, v);
    s = write_rule(1, prog::SExp::k(q), std::move(s));
    return exec(p, std::move(s));
}

}  // namespace

std::optional<DualValidatorState> vstep(const prog::Prog& p, Value q, Value a,
                                        const DualValidatorState& dv, const qac::ChoiceDomain& dom,
                                        const Options& opts) {
    DualValidatorState survivors;
    for (const auto& v : dv) {
        for (auto& s : step_states(p, q, v)) {
            s.constraints.push_back({sym::VExp::ref(s.var_at(1)), sym::Cmp::Eq, sym::VExp::k(a)});
            if (sym::solvable(s.constraints, dom)) survivors.push_back(std::move(s));
        }
    }
    if (opts.state_cap && survivors.size() > *opts.state_cap) {
        throw ConfigError("validator hypothesis count " + std::to_string(survivors.size()) +
                          " exceeds the configured cap of " + std::to_string(*opts.state_cap));
    }
    if (survivors.empty()) return std::nullopt;
    return survivors;
}

std::string rejection_report(const prog::Prog& p, Value q, Value a, const DualValidatorState& dv) {
    std::ostringstream out;
    out << "rejected (q=" << q << ", a=" << a << "); no hypothesis explains the answer:\n";
    for (const auto& v : dv) {
        for (auto s : step_states(p, q, v)) {
            s.constraints.push_back({sym::VExp::ref(s.var_at(1)), sym::Cmp::Eq, sym::VExp::k(a)});
            out << "  Conflict: " << sym::print(s.constraints) << "\n";
        }
    }
    return out.str();
}

namespace {

// Renames variables in first-occurrence order over (vars, constraints) so
// alpha-equivalent states compare equal.
struct CanonState {
    std::vector<std::uint32_t> vars;
    std::string constraints;
    bool operator<(const CanonState& o) const {
        return std::tie(vars, constraints) < std::tie(o.vars, o.constraints);
    }
};

void canon_vexp(const sym::VExp& e, std::map<std::uint32_t, std::uint32_t>& renaming,
                std::ostringstream& out) {
    switch (e.kind) {
        case sym::VExp::Kind::Const: out << e.constant; return;
        case sym::VExp::Kind::Var: {
            auto [it, fresh] = renaming.try_emplace(e.var.id, static_cast<std::uint32_t>(renaming.size()));
            out << '#' << it->second;
            return;
        }
        case sym::VExp::Kind::Bin:
            out << '(';
            canon_vexp(*e.lhs, renaming, out);
            out << static_cast<int>(e.op);
            canon_vexp(*e.rhs, renaming, out);
            out << ')';
            return;
    }
}

CanonState canonical_of(const sym::ValidationState& v) {
    std::map<std::uint32_t, std::uint32_t> renaming;
    CanonState c;
    for (auto var : v.vars) {
        auto [it, fresh] = renaming.try_emplace(var.id, static_cast<std::uint32_t>(renaming.size()));
        c.vars.push_back(it->second);
    }
    std::ostringstream out;
    for (const auto& con : v.constraints) {
        canon_vexp(con.lhs, renaming, out);
        out << static_cast<int>(con.cmp);
        canon_vexp(con.rhs, renaming, out);
        out << ';';
    }
    c.constraints = out.str();
    return c;
}

}  // namespace

DualValidatorState canonical(const DualValidatorState& dv) {
    DualValidatorState out;
    std::vector<CanonState> seen;
    for (const auto& v : dv) {
        CanonState c = canonical_of(v);
        if (std::find_if(seen.begin(), seen.end(), [&](const CanonState& s) {
                return !(s < c) && !(c < s);
            }) != seen.end()) {
            continue;
        }
        seen.push_back(std::move(c));
        out.push_back(v);
    }
    return out;
}

qac::ValidatorModel validator_of(const prog::Prog& p, const qac::ChoiceDomain& dom,
                                 const Options& opts) {
    if (!prog::division_is_safe(p)) throw UnsupportedDivision{};
    auto body = std::make_shared<const prog::Prog>(p);
    const std::size_t addresses = prog::max_address(p) + 1;
    qac::ValidatorModel m;
    m.state = initial_dual_state(addresses);
    m.step = [body, dom, opts](Value q, Value a, const std::any& state) -> std::optional<std::any> {
        const auto& dv = std::any_cast<const DualValidatorState&>(state);
        auto next = vstep(*body, q, a, dv, dom, opts);
        if (!next) return std::nullopt;
        return std::any{std::move(*next)};
    };
    return m;
}

}  // namespace mbt::dual
