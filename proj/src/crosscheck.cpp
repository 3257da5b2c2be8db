#include "mbt/crosscheck.hpp"

#include <map>
#include <set>
#include <sstream>

namespace mbt::crosscheck {

namespace {

prog::SExp random_sexp(Rng& rng, const ProgGenConfig& cfg, int depth) {
    if (depth <= 0 || rng.chance(55)) {
        if (rng.coin()) return prog::SExp::k(rng.range(cfg.const_lo, cfg.const_hi));
        return prog::SExp::read(static_cast<prog::Address>(rng.below(cfg.max_address + 1)));
    }
    const auto roll = rng.below(10);
    prog::BinOp op = roll < 4 ? prog::BinOp::Add : roll < 7 ? prog::BinOp::Sub
                     : roll < 9 ? prog::BinOp::Mul : prog::BinOp::Div;
    prog::SExp lhs = random_sexp(rng, cfg, depth - 1);
    if (op == prog::BinOp::Div) {
        // Keep the dualizer's theory decidable: divisors are nonzero constants.
        Value d = rng.range(cfg.const_lo, cfg.const_hi);
        if (d == 0) d = 1;
        return prog::SExp::bin(op, std::move(lhs), prog::SExp::k(d));
    }
    return prog::SExp::bin(op, std::move(lhs), random_sexp(rng, cfg, depth - 1));
}

prog::Prog random_block(Rng& rng, const ProgGenConfig& cfg, int if_depth) {
    const int writes = static_cast<int>(rng.below(cfg.max_writes + 1));
    const bool branch = if_depth > 0 && rng.chance(45);
    prog::Prog tail = prog::Prog::ret();
    if (branch) {
        tail = prog::Prog::ifle(random_sexp(rng, cfg, cfg.max_expr_depth),
                                random_sexp(rng, cfg, cfg.max_expr_depth),
                                random_block(rng, cfg, if_depth - 1),
                                random_block(rng, cfg, if_depth - 1));
    }
    for (int i = 0; i < writes; ++i) {
        tail = prog::Prog::write(static_cast<prog::Address>(rng.below(cfg.max_address + 1)),
                                 random_sexp(rng, cfg, cfg.max_expr_depth), std::move(tail));
    }
    return tail;
}

struct MemKey {
    std::vector<Value> cells;
    bool operator<(const MemKey& o) const { return cells < o.cells; }
};

MemKey key_of(const prog::Memory& m, std::size_t width) {
    MemKey k;
    k.cells.resize(width, 0);
    for (std::size_t i = 0; i < width; ++i) k.cells[i] = m.read(static_cast<prog::Address>(i));
    return k;
}

struct SpotSample {
    qac::Trace trace;
    bool expected = false;
};

class Sweep {
  public:
    Sweep(const prog::Prog& p, const SweepConfig& cfg)
        : p_(p), cfg_(cfg), width_(prog::max_address(p) + 1) {}

    SweepResult run() {
        SweepResult res;
        std::vector<SpotSample> samples;

        std::set<MemKey> initial{key_of(prog::Memory{}, width_)};
        qac::Trace prefix;
        walk(initial, dual::initial_dual_state(width_), prefix, res, samples);

        if (res.ok && !samples.empty()) {
            const auto server = prog::server_of(p_);
            const auto validator = dual::validator_of(p_, cfg_.dom);
            for (const auto& s : samples) {
                const bool o = qac::oracle_valid(server, s.trace, cfg_.dom);
                const bool v = qac::accepts_trace(validator, s.trace);
                if (o != s.expected || v != s.expected) {
                    res.ok = false;
                    res.mismatch = "spot re-verification disagreed with the sweep on " +
                                   describe(s.trace);
                    break;
                }
                ++res.spot_checked;
            }
        }
        return res;
    }

  private:
    static std::string describe(const qac::Trace& t) {
        std::ostringstream out;
        out << "[";
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (i) out << ", ";
            out << "(" << t[i].query << "," << t[i].answer << ")";
        }
        out << "]";
        return out.str();
    }

    void record_sample(const qac::Trace& t, bool expected, std::vector<SpotSample>& samples) {
        if (!cfg_.spot_rng || cfg_.spot_samples <= 0) return;
        // Reservoir-free cheap sampling: keep roughly spot_samples per sweep.
        if (static_cast<int>(samples.size()) < cfg_.spot_samples) {
            if (cfg_.spot_rng->chance(5)) samples.push_back({t, expected});
        }
    }

    void walk(const std::set<MemKey>& mems, const dual::DualValidatorState& dv, qac::Trace& prefix,
              SweepResult& res, std::vector<SpotSample>& samples) {
        if (!res.ok) return;
        if (static_cast<int>(prefix.size()) >= cfg_.max_trace_len) return;

        for (Value q = cfg_.query_lo; q <= cfg_.query_hi && res.ok; ++q) {
            // Oracle route: concrete post-states reachable with this query,
            // bucketed by the answer they produce.
            std::map<Value, std::set<MemKey>> by_answer;
            for (const auto& mk : mems) {
                prog::Memory m;
                for (std::size_t i = 0; i < mk.cells.size(); ++i)
                    m.write(static_cast<prog::Address>(i), mk.cells[i]);
                for (Value c = cfg_.dom.lo; c <= cfg_.dom.hi; ++c) {
                    prog::Memory s = m;
                    s.write(0, c);
                    s.write(1, q);
                    prog::Memory out = prog::eval(p_, s);
                    by_answer[out.read(1)].insert(key_of(out, width_));
                }
            }

            // Validator route: run the symbolic step once per hypothesis and
            // collect which answers each one can explain.
            struct Branch {
                sym::ValidationState state;
                std::vector<Value> answers;
            };
            std::vector<Branch> branches;
            for (const auto& v : dv) {
                sym::ValidationState s = dual::havoc(0, v);
                s = dual::write_rule(1, prog::SExp::k(q), std::move(s));
                for (auto& b : dual::exec(p_, std::move(s))) {
                    auto answers = sym::solution_values(b.constraints, cfg_.dom,
                                                        sym::VExp::ref(b.var_at(1)),
                                                        cfg_.answer_lo, cfg_.answer_hi);
                    branches.push_back({std::move(b), std::move(answers)});
                }
            }

            for (Value a = cfg_.answer_lo; a <= cfg_.answer_hi && res.ok; ++a) {
                const bool oracle_says = by_answer.count(a) > 0;

                dual::DualValidatorState survivors;
                for (const auto& b : branches) {
                    if (std::binary_search(b.answers.begin(), b.answers.end(), a)) {
                        sym::ValidationState s = b.state;
                        s.constraints.push_back(
                            {sym::VExp::ref(s.var_at(1)), sym::Cmp::Eq, sym::VExp::k(a)});
                        survivors.push_back(std::move(s));
                    }
                }
                const bool validator_says = !survivors.empty();

                prefix.push_back({q, a});
                ++res.traces_checked;
                if (oracle_says != validator_says) {
                    res.ok = false;
                    res.mismatch = "oracle=" + std::string(oracle_says ? "valid" : "invalid") +
                                   " validator=" + std::string(validator_says ? "accept" : "reject") +
                                   " on trace " + describe(prefix) + " for program:\n" +
                                   prog::print_program(p_);
                } else {
                    record_sample(prefix, oracle_says, samples);
                    if (oracle_says) walk(by_answer[a], survivors, prefix, res, samples);
                }
                prefix.pop_back();
            }
        }
    }

    const prog::Prog& p_;
    const SweepConfig& cfg_;
    std::size_t width_;
};

}  // namespace

prog::Prog random_program(Rng& rng, const ProgGenConfig& cfg) {
    return random_block(rng, cfg, cfg.max_if_depth);
}

SweepResult sweep_program(const prog::Prog& p, const SweepConfig& cfg) {
    return Sweep(p, cfg).run();
}

}  // namespace mbt::crosscheck
