#include "mbt/runner.hpp"

#include <algorithm>
#include <chrono>
#include <memory>

#include "mbt/wire.hpp"

namespace mbt::runner {

using harness::IR;
using http::ConcPacket;

namespace {

// Thrown by the replay generator when the candidate input sequence is spent;
// the run is then over (nothing further could have been reproduced).
struct ReplayExhausted {};

struct Session {
    std::unique_ptr<sut::ReferenceServer> server;
    std::unique_ptr<sut::Transport> transport;
};

Session make_session(const RunConfig& config) {
    Session s;
    if (config.target == RunConfig::Target::Socket) {
        s.transport = std::make_unique<sut::SocketTransport>(config.host, config.port);
        return s;
    }
    // Distinct streams for the server's coin and the tester's generator.
    s.server = std::make_unique<sut::ReferenceServer>(config.mutant, config.seed * 2654435761u + 1);
    if (config.reorder) {
        s.transport = std::make_unique<sut::ReorderingTransport>(*s.server,
                                                                 config.seed * 40503u + 7);
    } else {
        s.transport = std::make_unique<sut::InprocTransport>(*s.server);
    }
    return s;
}

// One tester execution. When `replay` is set, requests come from the given
// Jexp sequence (with their original labels) instead of the generator.
struct RunOnce {
    explicit RunOnce(const RunConfig& c, const harness::InputSequence* r = nullptr)
        : config(c), replay(r) {}

    const RunConfig& config;
    const harness::InputSequence* replay = nullptr;

    tester::Verdict verdict;
    tester::ExecuteStats stats;
    harness::TraceRecorder recorder;
    harness::InputSequence inputs;
    std::vector<std::vector<IR>> hole_values;
    std::vector<std::uint64_t> tick_offsets;

    void go() {
        Session session = make_session(config);
        Rng rng(config.seed);
        const harness::FunctionRegistry registry;

        // The model mirrors the environment: the delay-free in-process
        // transport cannot reorder, so the synchronous server model is
        // dualized directly; with the reordering shim or real sockets the
        // server is composed with the wire model first.
        const bool reordering_possible =
            config.reorder || config.target == RunConfig::Target::Socket;
        auto model = reordering_possible
                         ? tester::observe_model(http::compose(http::server_http({}),
                                                               http::tcp_network({}), {}, {}))
                         : tester::observe_model(http::server_http({}));

        // The Jexp chosen at GenPacket is recorded when the send happens
        // (generation and send are always paired).
        struct Pending {
            std::uint64_t label = 0;
            harness::Jexp jexp;
            std::vector<IR> holes;
        };
        std::optional<Pending> pending;
        std::size_t replay_idx = 0;

        tester::ExecuteHooks hooks;
        hooks.gen_bool = [&rng]() { return rng.coin(); };

        hooks.gen_packet = [&](const http::Sigma& state) -> ConcPacket {
            Pending p;
            if (replay) {
                if (replay_idx >= replay->size()) throw ReplayExhausted{};
                p.label = (*replay)[replay_idx].label;
                p.jexp = (*replay)[replay_idx].jexp;
                ++replay_idx;
            } else {
                p.jexp = harness::gen_request_jexp(state, recorder.trace(), rng, config.gen);
            }

            auto ir = harness::eval_jexp(p.jexp, recorder.trace(), registry, &p.holes);
            std::optional<http::Request> request = ir ? harness::request_of_ir(*ir) : std::nullopt;
            if (!request) {
                // A hole no message can satisfy: fall back to a literal ETag
                // so the run keeps moving.
                harness::Jexp literal = p.jexp;
                if (literal.contains("precondition") && literal["precondition"].is_object()) {
                    literal["precondition"]["etag"] =
                        harness::gen_etag(recorder.trace(), rng, config.gen);
                }
                p.jexp = literal;
                p.holes.clear();
                ir = harness::eval_jexp(literal, recorder.trace(), registry, &p.holes);
                request = ir ? harness::request_of_ir(*ir) : std::nullopt;
            }
            if (!request) throw ConfigError("generated jexp did not evaluate to a request");

            ConcPacket packet;
            packet.source = p.jexp.contains("from") && p.jexp["from"].is_number_unsigned()
                                ? p.jexp["from"].get<http::Endpoint>()
                                : 1;
            packet.destination = http::kServerEndpoint;
            packet.payload = *request;
            pending = std::move(p);
            return packet;
        };

        hooks.send = [&](const ConcPacket& packet) -> std::optional<std::string> {
            return session.transport->send(packet.source,
                                           wire::encode_request(packet.request()));
        };

        hooks.recv = [&]() -> tester::RecvOutcome {
            const auto got = session.transport->recv(config.recv_timeout_ms);
            switch (got.kind) {
                case sut::RecvResult::Kind::Silence: return tester::RecvOutcome::silence();
                case sut::RecvResult::Kind::Fault: return tester::RecvOutcome::fault(got.error);
                case sut::RecvResult::Kind::Message: break;
            }
            std::string diag;
            const auto response = wire::decode_response(got.bytes, &diag);
            if (!response) {
                return tester::RecvOutcome::violation("unparseable response: " + diag);
            }
            ConcPacket packet;
            packet.source = http::kServerEndpoint;
            packet.destination = got.endpoint;
            packet.payload = *response;
            return tester::RecvOutcome::arrived(packet);
        };

        hooks.record = [&](const ConcPacket& packet, bool sent) {
            if (sent) {
                const auto forced = pending && replay ? std::optional<std::uint64_t>{pending->label}
                                                      : std::nullopt;
                const auto label = recorder.record_sent(
                    harness::request_ir(packet.request(), packet.source), packet.source, forced);
                if (pending) {
                    inputs.push_back({label, pending->jexp});
                    hole_values.push_back(pending->holes);
                    pending.reset();
                }
            } else {
                recorder.record_received(
                    harness::response_ir(packet.response(), packet.destination),
                    packet.destination);
            }
            tick_offsets.push_back(stats.events);
        };

        tester::ObserverOptions observer_options;
        observer_options.merge_equivalent_hypotheses = !reordering_possible;
        if (reordering_possible) observer_options.max_outstanding = 4;
        try {
            verdict = tester::execute_observer(config.fuel, std::move(model), hooks, &stats,
                                               observer_options);
        } catch (const ReplayExhausted&) {
            verdict = {tester::Verdict::Kind::Accept, "replay input exhausted"};
        }
    }
};

}  // namespace

RunReport run_test(const RunConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();

    RunOnce original(config);
    original.go();

    RunReport report;
    report.verdict = original.verdict;
    report.seed = config.seed;
    report.fuel = config.fuel;
    report.stats = original.stats;
    report.messages_to_verdict = original.stats.messages;
    report.trace = original.recorder.trace();
    report.inputs = original.inputs;
    report.tick_offsets = original.tick_offsets;

    if (report.verdict.rejected() && config.shrink_budget > 0 && !original.inputs.empty()) {
        harness::LabelledTrace last_trace;
        tester::Verdict last_verdict;

        const harness::CandidateRunner candidate_runner =
            [&](const harness::InputSequence& candidate) {
                RunOnce replay(config, &candidate);
                replay.go();
                harness::RunOutcome out;
                out.rejected = replay.verdict.rejected();
                out.hole_values = replay.hole_values;
                if (out.rejected) {
                    last_trace = replay.recorder.trace();
                    last_verdict = replay.verdict;
                }
                return out;
            };
        report.shrunk = harness::shrink_loop(original.inputs, candidate_runner,
                                             config.shrink_budget);
        // The confirming run's trace is the minimal counterexample's trace.
        report.trace = last_trace;
        report.verdict = last_verdict;
    }

    if (config.target == RunConfig::Target::Socket) {
        report.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
    }
    return report;
}

std::uint64_t MatrixReport::median_messages(sut::MutantId m) const {
    std::vector<std::uint64_t> xs;
    for (const auto& c : cells)
        if (c.mutant == m && c.killed) xs.push_back(c.messages);
    if (xs.empty()) return 0;
    std::sort(xs.begin(), xs.end());
    return xs[xs.size() / 2];
}

MatrixReport run_matrix(const RunConfig& base, unsigned seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    MatrixReport report;
    for (const auto mutant : sut::all_mutants()) {
        for (unsigned s = 0; s < seeds; ++s) {
            RunConfig config = base;
            config.target = RunConfig::Target::Inproc;
            config.mutant = mutant;
            config.seed = base.seed + s;
            config.shrink_budget = 0;  // the matrix only needs verdicts
            const RunReport run = run_test(config);
            report.cells.push_back(
                {mutant, config.seed, run.verdict.rejected(), run.messages_to_verdict});
            if (!run.verdict.rejected()) report.all_killed = false;
        }
    }
    report.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

nlohmann::ordered_json report_json(const RunReport& report) {
    nlohmann::ordered_json j;
    j["verdict"] = report.verdict.accepted()  ? "ACCEPT"
                   : report.verdict.rejected() ? "REJECT"
                                               : "ERROR";
    j["message"] = report.verdict.message;
    j["seed"] = report.seed;
    j["fuel"] = report.fuel;
    j["events"] = report.stats.events;
    j["messages"] = report.stats.messages;
    j["messages_to_verdict"] = report.messages_to_verdict;

    nlohmann::ordered_json trace = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < report.trace.size(); ++i) {
        const auto& m = report.trace[i];
        nlohmann::ordered_json entry;
        entry["label"] = m.label;
        entry["direction"] = (m.label % 2 == 1) ? "sent" : "received";
        entry["message"] = m.message;
        entry["tick"] = i < report.tick_offsets.size() ? report.tick_offsets[i] : 0;
        trace.push_back(entry);
    }
    j["trace"] = trace;

    nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
    for (const auto& in : report.inputs) {
        nlohmann::ordered_json entry;
        entry["label"] = in.label;
        entry["jexp"] = in.jexp;
        inputs.push_back(entry);
    }
    j["inputs"] = inputs;

    nlohmann::ordered_json shrunk = nlohmann::ordered_json::array();
    for (const auto& in : report.shrunk) {
        nlohmann::ordered_json entry;
        entry["label"] = in.label;
        entry["jexp"] = in.jexp;
        shrunk.push_back(entry);
    }
    j["shrunk"] = shrunk;
    j["wall_ms"] = report.wall_ms;
    return j;
}

nlohmann::ordered_json matrix_json(const MatrixReport& report) {
    nlohmann::ordered_json j;
    j["all_killed"] = report.all_killed;
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& c : report.cells) {
        nlohmann::ordered_json cell;
        cell["mutant"] = sut::mutant_name(c.mutant);
        cell["seed"] = c.seed;
        cell["verdict"] = c.killed ? "REJECT" : "ACCEPT";
        cell["messages"] = c.messages;
        cells.push_back(cell);
    }
    j["cells"] = cells;
    nlohmann::ordered_json medians;
    for (const auto m : sut::all_mutants())
        medians[sut::mutant_name(m)] = report.median_messages(m);
    j["median_messages"] = medians;
    j["wall_ms"] = report.wall_ms;
    return j;
}

}  // namespace mbt::runner
