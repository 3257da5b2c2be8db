#pragma once

// Test-input machinery: a JSON-shaped intermediate representation for
// messages, the Jexp input language whose holes reference earlier trace
// messages by label, loose evaluation that degrades gracefully when a rerun
// produces a different trace, the state- and trace-based generators, and the
// greedy shrinking loop. Inputs are Jexps rather than concrete requests so a
// shrunk input re-instantiated against a fresh run keeps its meaning despite
// inter-execution nondeterminism.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mbt/http_model.hpp"
#include "mbt/util.hpp"

namespace mbt::harness {

// Object field order is part of the representation, hence ordered_json.
using IR = nlohmann::ordered_json;

// A Jexp is IR-shaped; holes are objects {"$label": n, "$path": "...",
// "$fn": "name"}, so Jexps serialize as plain JSON.
using Jexp = nlohmann::ordered_json;

bool is_hole(const IR& node);
Jexp make_hole(std::uint64_t label, const std::string& path, const std::string& fn);

// --- Jpath ---------------------------------------------------------------------

struct JpathStep {
    enum class Kind { Index, Field };
    Kind kind = Kind::Field;
    std::size_t index = 1;  // 1-based
    std::string field;
    bool operator==(const JpathStep&) const = default;
};

// Steps applied left to right, starting at the whole message ("this").
using Jpath = std::vector<JpathStep>;

// Syntax: this ( '#' index | '@' field )*, fields as JSON string literals,
// e.g. this@"files"#2@"mode". The quoting makes '@' and '#' inside field
// names unambiguous.
Jpath parse_jpath(const std::string& text);
std::string print_jpath(const Jpath& path);

// Strict navigation: nothing on any shape mismatch.
std::optional<IR> get_jpath(const Jpath& path, const IR& j);

// Like get_jpath, but a failing index step retries the other array elements
// left to right; the first element under which the remaining path evaluates
// wins. Field steps stay strict.
std::optional<IR> loose_get_jpath(const Jpath& path, const IR& j);

// --- labelled traces --------------------------------------------------------------

struct LabelledMessage {
    std::uint64_t label = 0;
    IR message;
};

using LabelledTrace = std::vector<LabelledMessage>;

std::optional<IR> get_label(std::uint64_t label, const LabelledTrace& t);

// Message IR shapes used on the wire of this harness.
IR request_ir(const http::Request& q, http::Endpoint from);
IR response_ir(const http::ConcreteResponse& a, http::Endpoint to);
std::optional<http::Request> request_of_ir(const IR& j);

// Assigns labels as messages are recorded: requests get increasing odd
// labels (or a caller-forced label during replay), a response gets its
// request's label + 1, matched through the per-endpoint FIFO of outstanding
// requests.
class TraceRecorder {
  public:
    std::uint64_t record_sent(const IR& request, http::Endpoint from,
                              std::optional<std::uint64_t> forced_label = std::nullopt);
    std::uint64_t record_received(const IR& response, http::Endpoint to);

    const LabelledTrace& trace() const { return trace_; }

  private:
    LabelledTrace trace_;
    std::uint64_t next_odd_ = 1;
    std::map<http::Endpoint, std::vector<std::uint64_t>> outstanding_;
};

// --- Jexp evaluation ---------------------------------------------------------------

class FunctionRegistry {
  public:
    // Ships with "id" and "mode_add_write".
    FunctionRegistry();

    void add(const std::string& name, std::function<IR(const IR&)> fn);
    const std::function<IR(const IR&)>& get(const std::string& name) const;  // throws ConfigError

  private:
    std::map<std::string, std::function<IR(const IR&)>> fns_;
};

// Replaces every hole by fn(loose_get_jpath(path, get_label(label, t))),
// falling back to the other trace messages in recording order when the
// label is missing or its message cannot evaluate the path. Nothing if some
// hole can be satisfied by no message at all. Unknown function names throw
// ConfigError. hole_values, when given, receives each hole's replacement in
// traversal order (used by shrinking).
std::optional<IR> eval_jexp(const Jexp& e, const LabelledTrace& t, const FunctionRegistry& reg,
                            std::vector<IR>* hole_values = nullptr);

// --- generators ----------------------------------------------------------------------

struct GenConfig {
    unsigned heuristic_weight = 90;  // out of 100
    unsigned clients = 2;
    unsigned no_precondition_weight = 30;
    // Among hole candidates, how often to prefer responses whose request hit
    // the same target (those ETags actually exercise the precondition).
    unsigned same_target_weight = 80;
};

// Weighted toward paths that exist in the server state; the rest (and the
// empty-state case) are short random paths.
std::string gen_path(const http::Sigma& state, Rng& rng, const GenConfig& cfg = {});

// Weighted toward ETags observed in trace responses; the rest are random.
std::string gen_etag(const LabelledTrace& trace, Rng& rng, const GenConfig& cfg = {});

// A request-shaped Jexp whose ETag slot references a prior response's ETag
// field by label with weight heuristic_weight, else falls back to a literal.
Jexp gen_request_jexp(const http::Sigma& state, const LabelledTrace& trace, Rng& rng,
                      const GenConfig& cfg = {});

// --- shrinking ------------------------------------------------------------------------

struct LabeledJexp {
    std::uint64_t label = 0;  // stable across shrinking
    Jexp jexp;
};

using InputSequence = std::vector<LabeledJexp>;

// What the runner reports back per candidate run.
struct RunOutcome {
    bool rejected = false;
    // Per input, the hole replacement values of that run (empty when the
    // input never got instantiated, e.g. the run rejected earlier).
    std::vector<std::vector<IR>> hole_values;
};

using CandidateRunner = std::function<RunOutcome(const InputSequence&)>;

// Candidates in deterministic order: drop one input (each position), then
// per input: replace one hole by its last concrete instantiation, halve the
// body, drop the precondition.
std::vector<InputSequence> shrink_candidates(const InputSequence& inputs,
                                             const std::vector<std::vector<IR>>& last_hole_values);

// Greedy first-improvement shrinking: replaces the current counterexample
// with the first candidate that still rejects, restarting until no candidate
// improves or the budget (counted in runner calls) is spent. The result is
// confirmed by a final run; throws ConfigError if the initial input does not
// reject.
InputSequence shrink_loop(const InputSequence& failing, const CandidateRunner& runner,
                          std::size_t budget);

}  // namespace mbt::harness
