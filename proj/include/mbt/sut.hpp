#pragma once

// In-tree systems under test: a correct reference server for the HTTP subset
// plus four single-deviation mutants, and the transports the tester speaks
// through. The reference server is an independent implementation (its own
// parser, its own store) rather than a replay of the model; the mutants each
// flip exactly one behavior.

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mbt/http_model.hpp"
#include "mbt/util.hpp"

namespace mbt::sut {

enum class MutantId {
    M1_strong_inm,    // evaluates If-None-Match with strong comparison
    M2_skip_404,      // missing-target GET answers 403 instead of 404
    M3_skip_precond,  // never checks If-Match on PUT
    M4_wrong_target,  // PUT writes to a different target, still answers 204
};

const char* mutant_name(MutantId m);
std::optional<MutantId> mutant_by_name(const std::string& name);
std::vector<MutantId> all_mutants();

// Sequential bytes-in/bytes-out server. ETags are fresh "tag-<n>" strings,
// weak-form with probability one half, so testers must cope with both
// validator strengths.
class ReferenceServer {
  public:
    ReferenceServer(std::optional<MutantId> mutant, std::uint64_t seed);

    // One complete request message in, one complete response message out.
    std::string handle(const std::string& request_bytes);

  private:
    struct Entry {
        std::string content;
        std::string etag;
    };

    std::string fresh_etag();
    std::string respond(int status, const std::string& etag, const std::string& body) const;

    std::optional<MutantId> mutant_;
    Rng rng_;
    int counter_ = 0;
    std::vector<std::pair<std::string, Entry>> store_;
};

// What a receive attempt produced.
struct RecvResult {
    enum class Kind { Silence, Message, Fault };
    Kind kind = Kind::Silence;
    http::Endpoint endpoint = 0;
    std::string bytes;
    std::string error;

    static RecvResult silence() { return {}; }
    static RecvResult message(http::Endpoint ep, std::string b) {
        return {Kind::Message, ep, std::move(b), {}};
    }
    static RecvResult fault(std::string why) { return {Kind::Fault, 0, {}, std::move(why)}; }
};

class Transport {
  public:
    virtual ~Transport() = default;
    // Sends one request message on the given client endpoint's connection.
    virtual std::optional<std::string> send(http::Endpoint from, const std::string& bytes) = 0;
    // Polls for one response message from any connection.
    virtual RecvResult recv(unsigned timeout_ms) = 0;
};

// Synchronous in-process transport: each request is handled immediately and
// its response queued in FIFO order. Delay-free and deterministic.
class InprocTransport : public Transport {
  public:
    explicit InprocTransport(ReferenceServer& server) : server_(server) {}

    std::optional<std::string> send(http::Endpoint from, const std::string& bytes) override;
    RecvResult recv(unsigned timeout_ms) override;

  private:
    ReferenceServer& server_;
    std::deque<std::pair<http::Endpoint, std::string>> ready_;
};

// In-process transport with a reordering shim: responses are released in a
// random order that preserves per-connection FIFO, and a poll may come up
// empty even when responses are pending, simulating delay.
class ReorderingTransport : public Transport {
  public:
    ReorderingTransport(ReferenceServer& server, std::uint64_t seed, unsigned delay_percent = 30)
        : server_(server), rng_(seed), delay_percent_(delay_percent) {}

    std::optional<std::string> send(http::Endpoint from, const std::string& bytes) override;
    RecvResult recv(unsigned timeout_ms) override;

  private:
    ReferenceServer& server_;
    Rng rng_;
    unsigned delay_percent_;
    std::map<http::Endpoint, std::deque<std::string>> pending_;
};

// Serves a reference server over TCP on the given port (0 picks one);
// handles pipelined requests per connection in arrival order. Returns the
// bound port once listening; runs until *stop. on_ready, when given, is
// called with the bound port before serving.
int serve_tcp(int port, std::optional<MutantId> mutant, std::uint64_t seed,
              const std::atomic<bool>& stop,
              const std::function<void(int)>& on_ready = {});

// One TCP connection per client endpoint against an external server.
// Blocking connect, non-blocking reads under the poll timeout.
class SocketTransport : public Transport {
  public:
    SocketTransport(std::string host, int port);
    ~SocketTransport() override;

    std::optional<std::string> send(http::Endpoint from, const std::string& bytes) override;
    RecvResult recv(unsigned timeout_ms) override;

  private:
    std::optional<std::string> ensure_connected(http::Endpoint from);

    std::string host_;
    int port_;
    std::map<http::Endpoint, int> fds_;
    std::map<http::Endpoint, std::string> buffers_;
};

}  // namespace mbt::sut
