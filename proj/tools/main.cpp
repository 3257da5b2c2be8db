// Command-line driver: derive testers from the HTTP model and run them
// against in-process or remote servers, validate integer-machine traces
// against program specifications, run the mutant kill matrix, and solve
// constraint files for debugging.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mbt/crosscheck.hpp"
#include "mbt/dualize.hpp"
#include "mbt/runner.hpp"
#include "mbt/symbolic.hpp"

namespace {

constexpr int kExitAccept = 0;
constexpr int kExitReject = 1;
constexpr int kExitError = 2;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mbt::ConfigError("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_report(const std::string& path, const nlohmann::ordered_json& j) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw mbt::ConfigError("cannot write " + path);
    out << j.dump(2) << "\n";
}

// One trace per line, whitespace-separated "query answer" pairs; '#' starts
// a comment.
std::vector<mbt::qac::Trace> parse_traces(const std::string& text) {
    std::vector<mbt::qac::Trace> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::vector<mbt::Value> numbers;
        mbt::Value v;
        while (fields >> v) numbers.push_back(v);
        if (numbers.empty()) continue;
        if (numbers.size() % 2 != 0) throw mbt::ConfigError("odd number of values in: " + line);
        mbt::qac::Trace t;
        for (std::size_t i = 0; i < numbers.size(); i += 2) t.push_back({numbers[i], numbers[i + 1]});
        out.push_back(std::move(t));
    }
    return out;
}

int run_spec_validation(const std::string& spec_path, const std::string& trace_path,
                        const mbt::qac::ChoiceDomain& dom) {
    const auto program = mbt::prog::parse_program(read_file(spec_path));
    const auto traces = parse_traces(read_file(trace_path));
    const auto validator = mbt::dual::validator_of(program, dom);
    const auto server = mbt::prog::server_of(program);

    int rejected = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const bool accepted = mbt::qac::accepts_trace(validator, traces[i]);
        const bool producible = mbt::qac::oracle_valid(server, traces[i], dom);
        std::cout << "trace " << (i + 1) << ": " << (accepted ? "ACCEPT" : "REJECT")
                  << (accepted == producible ? "" : "  [oracle disagrees!]") << "\n";
        if (!accepted) {
            ++rejected;
            // Replay the accepted prefix to locate the failing step.
            auto dv = std::any_cast<mbt::dual::DualValidatorState>(validator.state);
            for (const auto& [q, a] : traces[i]) {
                auto next = mbt::dual::vstep(program, q, a, dv, dom);
                if (!next) {
                    std::cout << mbt::dual::rejection_report(program, q, a, dv);
                    break;
                }
                dv = *next;
            }
        }
        if (accepted != producible) return kExitError;  // should be impossible
    }
    return rejected == 0 ? kExitAccept : kExitReject;
}

int run_selftest() {
    using namespace mbt;

    std::cout << "compare-and-reset regression... " << std::flush;
    {
        const auto p = prog::cmp_rst_program();
        const qac::ChoiceDomain dom{-8, 8};
        const auto validator = dual::validator_of(p, dom);
        const auto server = prog::server_of(p);
        const std::vector<std::pair<qac::Trace, bool>> cases = {
            {{{5, 1}, {3, 0}}, true},
            {{{5, 1}, {5, 1}}, true},
            {{{5, 0}}, false},
            {{{0, 1}}, false},
        };
        for (const auto& [trace, expected] : cases) {
            if (qac::accepts_trace(validator, trace) != expected ||
                qac::oracle_valid(server, trace, dom) != expected) {
                std::cout << "FAIL\n";
                return kExitReject;
            }
        }
    }
    std::cout << "ok\n";

    std::cout << "solver sanity... " << std::flush;
    {
        const auto cs = sym::parse_constraints("#1 = 3\n#2 = #1 * #1\n#2 <= 9\n");
        const auto witness = sym::solvable(cs, qac::ChoiceDomain{-8, 8});
        if (!witness || witness->get(sym::Var{2}) != 9) {
            std::cout << "FAIL\n";
            return kExitReject;
        }
    }
    std::cout << "ok\n";

    std::cout << "oracle equivalence sweep (100 random programs)... " << std::flush;
    {
        Rng rng(20240901);
        Rng spot(20240902);
        crosscheck::ProgGenConfig gencfg;
        crosscheck::SweepConfig cfg;
        cfg.spot_rng = &spot;
        cfg.spot_samples = 5;
        std::uint64_t traces = 0;
        for (int i = 0; i < 100; ++i) {
            const auto p = crosscheck::random_program(rng, gencfg);
            const auto res = crosscheck::sweep_program(p, cfg);
            traces += res.traces_checked;
            if (!res.ok) {
                std::cout << "FAIL\n" << res.mismatch << "\n";
                return kExitReject;
            }
        }
        std::cout << "ok (" << traces << " traces)\n";
    }

    std::cout << "tester vs correct in-process server (3 seeds)... " << std::flush;
    {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            runner::RunConfig config;
            config.seed = seed;
            config.fuel = 400;
            const auto report = runner::run_test(config);
            if (!report.verdict.accepted()) {
                std::cout << "FAIL (seed " << seed << ": " << report.verdict.message << ")\n";
                return kExitReject;
            }
        }
    }
    std::cout << "ok\nselftest passed\n";
    return kExitAccept;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"model-derived conformance tester for an HTTP/1.1 subset"};
    app.require_subcommand(1);

    // --- test ------------------------------------------------------------
    auto* test = app.add_subcommand("test", "run the derived tester against a target");
    std::uint64_t seed = 1;
    std::uint64_t fuel = 1000;
    unsigned timeout_ms = 50;
    std::string target = "inproc";
    std::string mutant_name;
    std::string report_path;
    std::size_t shrink_budget = 200;
    mbt::Value choice_lo = -8, choice_hi = 8;
    std::string spec_path, trace_path;
    bool reorder = false;
    test->add_option("--seed", seed, "random seed");
    test->add_option("--fuel", fuel, "interaction budget")->check(CLI::PositiveNumber);
    test->add_option("--timeout-ms", timeout_ms, "receive poll timeout");
    test->add_option("--target", target, "inproc or socket:HOST:PORT");
    test->add_option("--mutant", mutant_name, "in-process mutant (m1..m4), default correct");
    test->add_option("--report", report_path, "write a JSON report here");
    test->add_option("--shrink-budget", shrink_budget, "max shrink reruns");
    test->add_option("--choice-lo", choice_lo, "choice domain lower bound (spec mode)");
    test->add_option("--choice-hi", choice_hi, "choice domain upper bound (spec mode)");
    test->add_option("--spec", spec_path, "integer-machine program file: validate --trace");
    test->add_option("--trace", trace_path, "trace file for --spec");
    test->add_flag("--reorder", reorder, "in-process reordering shim");

    // --- selftest --------------------------------------------------------
    auto* selftest = app.add_subcommand("selftest", "internal oracle suites");

    // --- mutants -----------------------------------------------------------
    auto* mutants = app.add_subcommand("mutants", "kill matrix over all mutants");
    unsigned matrix_seeds = 5;
    std::uint64_t matrix_fuel = 10000;
    std::string matrix_report;
    std::uint64_t matrix_seed_base = 1;
    mutants->add_option("--seeds", matrix_seeds, "seeds per mutant")->check(CLI::PositiveNumber);
    mutants->add_option("--fuel", matrix_fuel, "interaction budget per run");
    mutants->add_option("--seed", matrix_seed_base, "first seed");
    mutants->add_option("--report", matrix_report, "write a JSON report here");

    // --- solve -------------------------------------------------------------
    auto* solve = app.add_subcommand("solve", "solve a constraint file");
    std::string solve_input;
    mbt::Value solve_lo = -8, solve_hi = 8;
    solve->add_option("input", solve_input, "file of constraints, one per line")->required();
    solve->add_option("--choice-lo", solve_lo, "domain lower bound");
    solve->add_option("--choice-hi", solve_hi, "domain upper bound");

    CLI11_PARSE(app, argc, argv);

    try {
        if (selftest->parsed()) return run_selftest();

        if (solve->parsed()) {
            const auto cs = mbt::sym::parse_constraints(read_file(solve_input));
            std::cout << "constraints: " << mbt::sym::print(cs) << "\n";
            const auto witness = mbt::sym::solvable(cs, {solve_lo, solve_hi});
            if (!witness) {
                std::cout << "UNSAT over [" << solve_lo << ", " << solve_hi << "]\n";
                return kExitReject;
            }
            std::cout << "SAT; witness:\n";
            for (const auto var : mbt::sym::variables_of(cs)) {
                std::cout << "  #" << var.id << " = " << witness->get(var) << "\n";
            }
            return kExitAccept;
        }

        if (mutants->parsed()) {
            mbt::runner::RunConfig base;
            base.seed = matrix_seed_base;
            base.fuel = matrix_fuel;
            const auto matrix = mbt::runner::run_matrix(base, matrix_seeds);
            for (const auto& cell : matrix.cells) {
                std::cout << mbt::sut::mutant_name(cell.mutant) << " seed " << cell.seed << ": "
                          << (cell.killed ? "REJECT" : "ACCEPT") << " (" << cell.messages
                          << " messages)\n";
            }
            for (const auto m : mbt::sut::all_mutants()) {
                std::cout << mbt::sut::mutant_name(m)
                          << " median messages: " << matrix.median_messages(m) << "\n";
            }
            std::cout << (matrix.all_killed ? "all mutants killed" : "SURVIVORS REMAIN") << "\n";
            write_report(matrix_report, mbt::runner::matrix_json(matrix));
            return matrix.all_killed ? kExitAccept : kExitReject;
        }

        // test
        if (!spec_path.empty()) {
            if (trace_path.empty()) {
                std::cerr << "--spec requires --trace\n";
                return kExitError;
            }
            return run_spec_validation(spec_path, trace_path, {choice_lo, choice_hi});
        }

        mbt::runner::RunConfig config;
        config.seed = seed;
        config.fuel = fuel;
        config.recv_timeout_ms = timeout_ms;
        config.shrink_budget = shrink_budget;
        config.reorder = reorder;
        if (target == "inproc") {
            config.target = mbt::runner::RunConfig::Target::Inproc;
            if (!mutant_name.empty()) {
                const auto m = mbt::sut::mutant_by_name(mutant_name);
                if (!m) {
                    std::cerr << "unknown mutant '" << mutant_name << "'\n";
                    return kExitError;
                }
                config.mutant = m;
            }
        } else if (target.rfind("socket:", 0) == 0) {
            const auto rest = target.substr(7);
            const auto colon = rest.rfind(':');
            if (colon == std::string::npos) {
                std::cerr << "socket target must be socket:HOST:PORT\n";
                return kExitError;
            }
            config.target = mbt::runner::RunConfig::Target::Socket;
            config.host = rest.substr(0, colon);
            config.port = std::stoi(rest.substr(colon + 1));
        } else {
            std::cerr << "unknown target '" << target << "'\n";
            return kExitError;
        }

        const auto report = mbt::runner::run_test(config);
        std::cout << (report.verdict.accepted()  ? "ACCEPT"
                      : report.verdict.rejected() ? "REJECT"
                                                  : "ERROR")
                  << ": " << report.verdict.message << "\n";
        std::cout << "messages: " << report.stats.messages << ", events: " << report.stats.events
                  << "\n";
        if (!report.shrunk.empty()) {
            std::cout << "shrunk counterexample (" << report.shrunk.size() << " requests):\n";
            for (const auto& in : report.shrunk) {
                std::cout << "  [" << in.label << "] " << in.jexp.dump() << "\n";
            }
        }
        write_report(report_path, mbt::runner::report_json(report));
        if (report.verdict.accepted()) return kExitAccept;
        return report.verdict.rejected() ? kExitReject : kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}
