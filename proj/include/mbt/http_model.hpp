#pragma once

// Symbolic model of the HTTP/1.1 GET/PUT + ETag subset, the TCP reordering
// model, and their composition. The server model is an interaction tree that
// receives request packets and sends symbolic response packets whose ETag
// fields may be unresolved choices. The network model buffers packets and
// emits them in any order that preserves per-connection FIFO. Composition
// wires the two together into a single tree of the same event family as the
// server, now describing what a client on the far side of the wire may
// observe.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mbt/itree.hpp"
#include "mbt/symbolic.hpp"
#include "mbt/util.hpp"

namespace mbt::http {

// --- application representation ---------------------------------------------

enum class Method { Get, Put };
enum class PrecondKind { IfMatch, IfNoneMatch };
enum class CmpMode { Strong, Weak };

struct Precondition {
    PrecondKind kind = PrecondKind::IfMatch;
    std::string etag;
    bool operator==(const Precondition&) const = default;
};

struct Request {
    Method method = Method::Get;
    std::string target;
    std::optional<Precondition> precondition;
    std::string body;  // empty for GET
    bool operator==(const Request&) const = default;
};

// String-valued symbolic expression: a literal ETag or an unresolved choice.
// The empty literal stands for "no ETag".
struct EtagExp {
    enum class Kind { Lit, Var };
    Kind kind = Kind::Lit;
    std::string lit;
    sym::Var var;

    static EtagExp literal(std::string s);
    static EtagExp variable(sym::Var x);
    bool is_empty_lit() const { return kind == Kind::Lit && lit.empty(); }
    bool operator==(const EtagExp&) const = default;
};

// Boolean condition comparing a request's literal ETag against a (possibly
// symbolic) stored one.
struct EtagCond {
    std::string lit;
    EtagExp sym;
    CmpMode mode = CmpMode::Strong;
    bool operator==(const EtagCond&) const = default;
};

// Wire-form comparison: strong comparison rejects weak validators outright,
// weak comparison strips the W/ prefix from both sides.
bool etag_match(const std::string& lit, const std::string& other, CmpMode mode);

bool is_weak_etag(const std::string& etag);
std::string opaque_of(const std::string& etag);

struct StatusCode {
    static constexpr int kOk = 200;
    static constexpr int kNoContent = 204;
    static constexpr int kNotModified = 304;
    static constexpr int kNotFound = 404;
    static constexpr int kPreconditionFailed = 412;
};

struct SymField {
    std::string name;
    std::variant<std::string, EtagExp> value;
    bool operator==(const SymField&) const = default;
};

struct SymbolicResponse {
    int status = StatusCode::kOk;
    std::vector<SymField> fields;
    std::string body;
    bool operator==(const SymbolicResponse&) const = default;
};

struct ConcreteResponse {
    int status = StatusCode::kOk;
    std::vector<std::pair<std::string, std::string>> fields;
    std::string body;
    bool operator==(const ConcreteResponse&) const = default;

    std::optional<std::string> field(const std::string& name) const;
};

using Endpoint = std::uint32_t;
inline constexpr Endpoint kServerEndpoint = 0;

template <class Resp>
struct Packet {
    Endpoint source = 0;
    Endpoint destination = 0;
    std::variant<Request, Resp> payload;
    bool operator==(const Packet&) const = default;

    bool is_request() const { return std::holds_alternative<Request>(payload); }
    const Request& request() const { return std::get<Request>(payload); }
    const Resp& response() const { return std::get<Resp>(payload); }
};

using SymPacket = Packet<SymbolicResponse>;
using ConcPacket = Packet<ConcreteResponse>;

// Server state: association list path -> resource, paths unique, insertion
// order stable (generators enumerate it).
struct Resource {
    std::string content;
    EtagExp etag;  // empty literal = no ETag assigned
    bool operator==(const Resource&) const = default;
};

// Immutable value with shared storage: the model copies its state into
// every event and continuation, so copies must be cheap; updates go through
// upsert, which rebuilds the list once.
class Sigma {
  public:
    using Entry = std::pair<std::string, Resource>;

    Sigma() = default;
    Sigma(std::initializer_list<Entry> entries)
        : data_(std::make_shared<const std::vector<Entry>>(entries)) {}
    explicit Sigma(std::vector<Entry> entries)
        : data_(std::make_shared<const std::vector<Entry>>(std::move(entries))) {}

    bool empty() const { return !data_ || data_->empty(); }
    std::size_t size() const { return data_ ? data_->size() : 0; }
    const Entry& operator[](std::size_t i) const { return (*data_)[i]; }

    std::vector<Entry>::const_iterator begin() const { return storage().begin(); }
    std::vector<Entry>::const_iterator end() const { return storage().end(); }

    bool operator==(const Sigma& other) const { return storage() == other.storage(); }

  private:
    static const std::vector<Entry>& storage_empty() {
        static const std::vector<Entry> kEmpty;
        return kEmpty;
    }
    const std::vector<Entry>& storage() const { return data_ ? *data_ : storage_empty(); }

    std::shared_ptr<const std::vector<Entry>> data_;
};

const Resource* lookup(const Sigma& state, const std::string& path);
Sigma upsert(const Sigma& state, const std::string& path, Resource r);

// --- server model event family ----------------------------------------------

struct EvRecv {
    Sigma state;  // exposed so generators can target existing paths
    bool operator==(const EvRecv&) const = default;
};
struct EvSend {
    SymPacket packet;
    bool operator==(const EvSend&) const = default;
};
struct EvChoice {
    bool operator==(const EvChoice&) const = default;
};
struct EvOr {
    bool operator==(const EvOr&) const = default;
};
struct EvDecide {
    EtagCond cond;
    bool operator==(const EvDecide&) const = default;
};

using SmEvent = std::variant<EvRecv, EvSend, EvChoice, EvOr, EvDecide>;

struct Unit {
    bool operator==(const Unit&) const = default;
};

using SmResult = std::variant<Unit, bool, EtagExp, SymPacket>;
using SmTree = itree::ITree<SmEvent, SmResult, itree::Never>;

// The GET/PUT + ETag server model. Each iteration receives a request packet,
// evaluates its precondition symbolically (both branches live on via
// Decide), and answers per the subset semantics: 200/404 for GET, 204 for a
// successful PUT (whose fresh ETag is either an internal choice or absent),
// 304 for a matched If-None-Match GET, 412 for failed preconditions.
SmTree server_http(Sigma state);

// --- network model ------------------------------------------------------------

struct EvAbsorb {
    bool operator==(const EvAbsorb&) const = default;
};
struct EvEmit {
    SymPacket packet;
    bool operator==(const EvEmit&) const = default;
};
struct EvNetOr {
    bool operator==(const EvNetOr&) const = default;
};

using NetEvent = std::variant<EvAbsorb, EvEmit, EvNetOr>;
using NetResult = std::variant<Unit, bool, SymPacket>;
using NetTree = itree::ITree<NetEvent, NetResult, itree::Never>;

using NetBuffer = std::vector<SymPacket>;

// A connection is the unordered endpoint pair, so a request and its response
// share one FIFO.
bool same_connection(const SymPacket& a, const SymPacket& b);

// One packet per connection, the earliest-buffered, in order of first
// appearance.
std::vector<SymPacket> oldest_in_each_conn(const NetBuffer& buffer);

// TCP wire model: each iteration either emits the oldest packet of some
// connection (one Or per candidate) or absorbs. An empty buffer must absorb.
NetTree tcp_network(NetBuffer buffer);

// --- composition ---------------------------------------------------------------

// Pairs the server's sends/receives with the network's absorbs/emits through
// an incoming and an outgoing buffer. The result speaks the server family
// again, but its Recv/Send now face the clients. The server runs at higher
// priority: the network only steps when the server is starved on an empty
// incoming buffer.
SmTree compose(SmTree server, NetTree net, NetBuffer incoming, NetBuffer outgoing);

}  // namespace mbt::http
