#pragma once

// Ties the pipeline together: builds the composed model, derives the tester,
// wires the generators and the codec to a transport, runs it under a fuel
// bound, shrinks counterexamples by replaying Jexp sequences, and renders
// JSON reports. Also hosts the mutant kill matrix.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbt/harness.hpp"
#include "mbt/qac.hpp"
#include "mbt/sut.hpp"
#include "mbt/tester.hpp"

namespace mbt::runner {

struct RunConfig {
    std::uint64_t seed = 1;
    std::uint64_t fuel = 1000;
    unsigned recv_timeout_ms = 50;

    // In-process target: the correct server or one mutant. Socket target:
    // host and port (no acceptance claims attach to this mode).
    enum class Target { Inproc, Socket };
    Target target = Target::Inproc;
    std::optional<sut::MutantId> mutant;
    bool reorder = false;  // in-process reordering shim
    std::string host = "127.0.0.1";
    int port = 8080;

    std::size_t shrink_budget = 200;
    harness::GenConfig gen;
};

struct RunReport {
    tester::Verdict verdict;
    std::uint64_t seed = 0;
    std::uint64_t fuel = 0;
    tester::ExecuteStats stats;
    std::uint64_t messages_to_verdict = 0;
    harness::LabelledTrace trace;      // of the run backing the verdict
    harness::InputSequence inputs;     // Jexps issued during the original run
    harness::InputSequence shrunk;     // minimized counterexample, if rejected
    std::vector<std::uint64_t> tick_offsets;  // per trace entry, in events
    double wall_ms = 0.0;              // zeroed for in-process targets
};

RunReport run_test(const RunConfig& config);

struct MutantCell {
    sut::MutantId mutant;
    std::uint64_t seed = 0;
    bool killed = false;
    std::uint64_t messages = 0;
};

struct MatrixReport {
    std::vector<MutantCell> cells;
    bool all_killed = true;
    double wall_ms = 0.0;

    std::uint64_t median_messages(sut::MutantId m) const;
};

MatrixReport run_matrix(const RunConfig& base, unsigned seeds);

nlohmann::ordered_json report_json(const RunReport& report);
nlohmann::ordered_json matrix_json(const MatrixReport& report);

}  // namespace mbt::runner
