#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <set>
#include <thread>

#include "mbt/runner.hpp"

using namespace mbt;
using runner::RunConfig;

TEST_CASE("identical configurations produce byte-identical reports in-process") {
    RunConfig config;
    config.seed = 11;
    config.fuel = 300;

    const auto a = runner::report_json(runner::run_test(config));
    const auto b = runner::report_json(runner::run_test(config));
    CHECK(a.dump() == b.dump());

    RunConfig rejecting = config;
    rejecting.mutant = sut::MutantId::M4_wrong_target;
    rejecting.fuel = 5000;
    const auto c = runner::report_json(runner::run_test(rejecting));
    const auto d = runner::report_json(runner::run_test(rejecting));
    CHECK(c.dump() == d.dump());
    CHECK(c["verdict"] == "REJECT");
}

TEST_CASE("the tester accepts the correct server through the reordering shim") {
    RunConfig config;
    config.seed = 5;
    config.fuel = 150;
    config.reorder = true;
    const auto report = runner::run_test(config);
    INFO(report.verdict.message);
    CHECK(report.verdict.accepted());
}

TEST_CASE("labels: requests odd and increasing, responses pair with their requests") {
    RunConfig config;
    config.seed = 23;
    config.fuel = 400;
    const auto report = runner::run_test(config);
    REQUIRE(report.verdict.accepted());
    CHECK(report.trace.size() > 20);

    std::uint64_t last_request = 0;
    std::set<std::uint64_t> sent;
    for (const auto& m : report.trace) {
        if (m.label % 2 == 1) {
            CHECK(m.label > last_request);
            last_request = m.label;
            sent.insert(m.label);
        } else {
            REQUIRE(m.label != 0);
            CHECK(sent.count(m.label - 1) == 1);
        }
    }
    CHECK(report.inputs.size() == sent.size());
}

TEST_CASE("rejections come with a shrunk counterexample that still rejects") {
    RunConfig config;
    config.seed = 2;
    config.fuel = 10000;
    config.mutant = sut::MutantId::M4_wrong_target;
    config.shrink_budget = 200;
    const auto report = runner::run_test(config);
    REQUIRE(report.verdict.rejected());
    REQUIRE_FALSE(report.shrunk.empty());
    CHECK(report.shrunk.size() <= 2);
    CHECK(report.trace.size() <= 4);  // the confirming run's trace

    // Shrinking keeps original labels.
    for (const auto& in : report.shrunk) CHECK(in.label % 2 == 1);
}

TEST_CASE("socket target: the derived tester runs over real connections") {
    std::atomic<bool> stop{false};
    std::atomic<int> port{0};
    std::thread server_thread([&] {
        sut::serve_tcp(0, std::nullopt, 77, stop, [&](int p) { port = p; });
    });
    while (port.load() == 0) std::this_thread::yield();

    RunConfig config;
    config.target = RunConfig::Target::Socket;
    config.host = "127.0.0.1";
    config.port = port.load();
    config.seed = 3;
    config.fuel = 60;
    config.recv_timeout_ms = 20;
    const auto report = runner::run_test(config);
    INFO(report.verdict.message);
    CHECK(report.verdict.accepted());
    CHECK(report.stats.messages > 4);

    stop = true;
    server_thread.join();
}
