#pragma once

// Derivation pipeline from the composed symbolic model to an executable
// tester. Dualization turns the model's sends/receives into the observer's
// receives/sends and its symbolic branches into constraint events;
// unification resolves those events against an ETag knowledge base, throwing
// when an execution hypothesis can no longer explain the observations;
// backtracking runs the resulting nondeterministic tree on a deterministic
// machine by keeping a queue of live branches; execution drives the final
// tree against a transport under a fuel bound.

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mbt/http_model.hpp"
#include "mbt/itree.hpp"
#include "mbt/util.hpp"

namespace mbt::tester {

// --- symbolic observer --------------------------------------------------------

struct EvFromObs {
    http::Sigma state;
    bool operator==(const EvFromObs&) const = default;
};
struct EvToObs {
    bool operator==(const EvToObs&) const = default;
};
struct EvObsOr {
    bool operator==(const EvObsOr&) const = default;
};
struct EvObsChoice {
    bool operator==(const EvObsChoice&) const = default;
};
struct EvGuard {
    http::SymPacket sym;
    http::ConcPacket obs;
    bool operator==(const EvGuard&) const = default;
};
struct EvUnify {
    http::EtagCond cond;
    bool value = false;
    bool operator==(const EvUnify&) const = default;
};

using ObsEvent = std::variant<EvFromObs, EvToObs, EvObsOr, EvObsChoice, EvGuard, EvUnify>;
using ObsResult = std::variant<http::Unit, bool, http::EtagExp, http::ConcPacket>;
using ObsTree = itree::ITree<ObsEvent, ObsResult, itree::Never>;
using ObsHandlerTree = itree::ITree<ObsEvent, ObsResult, http::SmResult>;

// Dualizes one model event: Recv becomes "observe a packet from us" (the
// generated request), Send becomes "observe a packet to us" guarded against
// the symbolic one, Decide forks into the two unified outcomes, Or and
// Choice pass through.
ObsHandlerTree observe_handler(const http::SmEvent& e);

ObsTree observe_model(http::SmTree model);

// --- ETag constraint state ------------------------------------------------------

// Per-variable knowledge learned from observations: an exact wire value, an
// opaque-part pin, and comparisons that must have come out false. Strings
// are an infinite domain, so a variable with no positive pin is always
// satisfiable; pins narrow it to at most two candidates (strong and weak
// form of one opaque tag).
class EtagKnowledge {
  public:
    // All return a conflict description on contradiction.
    std::optional<std::string> bind_exact(const std::string& observed);
    std::optional<std::string> apply(const std::string& lit, http::CmpMode mode, bool outcome);

    const std::optional<std::string>& exact() const { return exact_; }
    const std::optional<std::string>& opaque() const { return opaque_; }
    const std::vector<std::pair<std::string, http::CmpMode>>& mismatches() const {
        return must_not_match_;
    }
    std::string describe() const;

  private:
    std::optional<std::string> recheck() const;

    std::optional<std::string> exact_;
    std::optional<std::string> opaque_;
    std::vector<std::pair<std::string, http::CmpMode>> must_not_match_;
};

struct EtagConstraintState {
    std::uint32_t next_var = 1;
    std::map<std::uint32_t, EtagKnowledge> vars;

    sym::Var fresh() { return sym::Var{next_var++}; }
    std::string describe() const;
};

// Unifies a symbolic response packet against an observed concrete one:
// routing, status, body and literal fields must match exactly, an ETag field
// binds or checks the variable's knowledge. Returns a conflict description
// on mismatch, otherwise updates v.
std::optional<std::string> guard_packet(const http::SymPacket& sym, const http::ConcPacket& obs,
                                        EtagConstraintState& v);

// Resolves a branch condition against the chosen outcome.
std::optional<std::string> unify_cond(const http::EtagCond& cond, bool outcome,
                                      EtagConstraintState& v);

// --- nondeterministic tester -----------------------------------------------------

struct EvNtFrom {
    http::Sigma state;
    bool operator==(const EvNtFrom&) const = default;
};
struct EvNtTo {
    bool operator==(const EvNtTo&) const = default;
};
struct EvNtOr {
    bool operator==(const EvNtOr&) const = default;
};
struct EvNtThrow {
    std::string message;
    bool operator==(const EvNtThrow&) const = default;
};

using NtEvent = std::variant<EvNtFrom, EvNtTo, EvNtOr, EvNtThrow>;
using NtResult = std::variant<http::Unit, bool, http::ConcPacket>;
using NtTree = itree::ITree<NtEvent, NtResult, std::pair<EtagConstraintState, itree::Never>>;

using UnifyHandlerTree =
    itree::ITree<NtEvent, NtResult, std::pair<EtagConstraintState, ObsResult>>;

UnifyHandlerTree unify_handler(const ObsEvent& e, const EtagConstraintState& v);

// observe + unify over a symbolic model (composed or not).
NtTree nondet_tester(http::SmTree model);

// --- backtracking ------------------------------------------------------------------

struct EvClientSend {
    http::ConcPacket packet;
    bool operator==(const EvClientSend&) const = default;
};
struct EvClientRecv {
    bool operator==(const EvClientRecv&) const = default;
};
struct EvGenPacket {
    http::Sigma state;
    bool operator==(const EvGenPacket&) const = default;
};
struct EvGenBool {
    bool operator==(const EvGenBool&) const = default;
};
struct EvTThrow {
    std::string message;
    bool operator==(const EvTThrow&) const = default;
};

using TeEvent = std::variant<EvClientSend, EvClientRecv, EvGenPacket, EvGenBool, EvTThrow>;
using TeResult = std::variant<http::Unit, bool, http::ConcPacket, std::optional<http::ConcPacket>>;
using TeTree = itree::ITree<TeEvent, TeResult, itree::Never>;

using BranchQueue = std::deque<NtTree>;

// Advances a branch to its first observation (or throw), splitting at every
// Or passed on the way. Every result has a FromObserver, ToObserver, or
// Throw head. Advancing eagerly keeps the queue free of unresolved history:
// each observation is resolved into every live branch exactly once, so no
// branch ever replays old observations.
std::vector<NtTree> advance_to_observe(NtTree branch);

// Matches one advanced branch against an observation: a matching tag feeds
// the observed packet, a mismatch becomes an immediate throw, an existing
// throw stays.
NtTree match_observe(bool from_observer, const http::ConcPacket& packet, NtTree advanced);

// advance_to_observe + match_observe over a whole queue.
BranchQueue expect(bool from_observer, const http::ConcPacket& packet, const BranchQueue& branches);

// Deterministic tester: explores the branch queue, generating requests at
// FromObserver, receiving at ToObserver (postponing the branch when the wire
// is silent), splitting at Or, and rejecting only when every branch threw.
TeTree backtrack(NtTree current, BranchQueue others);

// --- execution -----------------------------------------------------------------------

struct Verdict {
    enum class Kind { Accept, Reject, Error };
    Kind kind = Kind::Accept;
    std::string message;

    bool accepted() const { return kind == Kind::Accept; }
    bool rejected() const { return kind == Kind::Reject; }
};

struct ExecuteStats {
    std::uint64_t events = 0;
    std::uint64_t messages = 0;        // packets sent plus packets received
    std::uint64_t empty_receives = 0;  // silent polls (starvation indicator)
};

// What one receive attempt produced: nothing yet, a decoded packet, bytes
// the codec refuses (a SUT violation, hence a rejection), or a transport
// fault (an environment error, not the SUT's).
struct RecvOutcome {
    enum class Kind { Silence, Packet, Violation, Fault };
    Kind kind = Kind::Silence;
    http::ConcPacket packet;
    std::string message;

    static RecvOutcome silence() { return {}; }
    static RecvOutcome arrived(http::ConcPacket p) {
        return {Kind::Packet, std::move(p), {}};
    }
    static RecvOutcome violation(std::string why) { return {Kind::Violation, {}, std::move(why)}; }
    static RecvOutcome fault(std::string why) { return {Kind::Fault, {}, std::move(why)}; }
};

// The runner supplies generation, recording, and transport as callbacks.
struct ExecuteHooks {
    std::function<http::ConcPacket(const http::Sigma&)> gen_packet;
    std::function<bool()> gen_bool;
    std::function<std::optional<std::string>(const http::ConcPacket&)> send;
    std::function<RecvOutcome()> recv;
    std::function<void(const http::ConcPacket&, bool sent)> record;  // optional
};

// Runs the tester tree until it throws (reject) or the interaction budget is
// exhausted (accept). Each send and each receive attempt consumes one unit
// of fuel, so a silent wire cannot starve the run: every retry is a receive
// attempt. Generation events are free; between two interactions the branch
// walk always progresses (dead branches surface their throw and are popped,
// and the model's silent segments are finite).
Verdict execute(std::uint64_t fuel, TeTree tree, const ExecuteHooks& hooks,
                ExecuteStats* stats = nullptr);

// --- fused production driver -------------------------------------------------------

// backtrack + execute in one loop over observer trees paired with their
// explicit constraint state. Same semantics as executing
// backtrack(nondet_tester(model), {}): Or splits push the sibling to the
// front, throws pop the queue, silence postpones FIFO-style, sends and
// receive attempts consume fuel.
//
struct ObserverOptions {
    // Merge branches whose FromObserver state and ETag knowledge coincide
    // (or where one is strictly less constrained) at loop-top positions.
    // Only sound when the state in the event determines the whole
    // hypothesis, i.e. for the synchronous server model; the composed model
    // carries in-flight buffers the event does not show, so merging must
    // stay off there.
    bool merge_equivalent_hypotheses = false;
    // When nonzero, a branch about to generate a request while this many
    // requests are unanswered is rotated to the back in favor of branches
    // that can receive. Pure scheduling: it changes exploration order, never
    // the hypothesis set, and keeps the composed model's interleaving space
    // bounded during silent stretches.
    std::size_t max_outstanding = 0;
};

Verdict execute_observer(std::uint64_t fuel, ObsTree model, const ExecuteHooks& hooks,
                         ExecuteStats* stats = nullptr, const ObserverOptions& options = {});

// --- bounded reachability ---------------------------------------------------------

// One entry of a fixed observation sequence: a packet the tester sent
// (from_observer) or received.
struct Observation {
    bool from_observer = false;
    http::ConcPacket packet;
};

// True iff some path of the nondeterministic tester consumes the whole
// observation sequence without throwing, using at most or_budget branch
// decisions along the path.
bool observation_reachable(const NtTree& tester, const std::vector<Observation>& observations,
                           int or_budget);

}  // namespace mbt::tester
