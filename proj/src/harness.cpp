#include "mbt/harness.hpp"

#include <algorithm>

namespace mbt::harness {

bool is_hole(const IR& node) {
    return node.is_object() && node.contains("$label") && node.contains("$path") &&
           node.contains("$fn");
}

Jexp make_hole(std::uint64_t label, const std::string& path, const std::string& fn) {
    Jexp h;
    h["$label"] = label;
    h["$path"] = path;
    h["$fn"] = fn;
    return h;
}

// --- Jpath ---------------------------------------------------------------------

Jpath parse_jpath(const std::string& text) {
    std::size_t pos = 0;
    const auto fail = [&](const std::string& what) -> void {
        throw ConfigError("bad jpath '" + text + "': " + what);
    };
    if (text.rfind("this", 0) != 0) fail("must start with 'this'");
    pos = 4;
    Jpath path;
    while (pos < text.size()) {
        const char sep = text[pos++];
        if (sep == '#') {
            std::size_t end = pos;
            while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
            if (end == pos) fail("expected index after '#'");
            JpathStep s;
            s.kind = JpathStep::Kind::Index;
            s.index = std::stoull(text.substr(pos, end - pos));
            if (s.index == 0) fail("indices are 1-based");
            path.push_back(std::move(s));
            pos = end;
        } else if (sep == '@') {
            if (pos >= text.size() || text[pos] != '"') fail("expected quoted field after '@'");
            std::string field;
            ++pos;
            bool closed = false;
            while (pos < text.size()) {
                const char c = text[pos++];
                if (c == '\\' && pos < text.size()) {
                    field.push_back(text[pos++]);
                } else if (c == '"') {
                    closed = true;
                    break;
                } else {
                    field.push_back(c);
                }
            }
            if (!closed) fail("unterminated field name");
            JpathStep s;
            s.kind = JpathStep::Kind::Field;
            s.field = std::move(field);
            path.push_back(std::move(s));
        } else {
            fail("expected '#' or '@'");
        }
    }
    return path;
}

std::string print_jpath(const Jpath& path) {
    std::string out = "this";
    for (const auto& s : path) {
        if (s.kind == JpathStep::Kind::Index) {
            out += "#" + std::to_string(s.index);
        } else {
            out += "@";
            std::string quoted = "\"";
            for (char c : s.field) {
                if (c == '"' || c == '\\') quoted.push_back('\\');
                quoted.push_back(c);
            }
            quoted.push_back('"');
            out += quoted;
        }
    }
    return out;
}

namespace {

std::optional<IR> get_from(const Jpath& path, std::size_t i, const IR& j, bool loose) {
    if (i == path.size()) return j;
    const auto& step = path[i];
    if (step.kind == JpathStep::Kind::Field) {
        if (!j.is_object() || !j.contains(step.field)) return std::nullopt;
        return get_from(path, i + 1, j.at(step.field), loose);
    }
    if (!j.is_array()) return std::nullopt;
    if (step.index <= j.size()) {
        if (auto hit = get_from(path, i + 1, j.at(step.index - 1), loose)) return hit;
        if (!loose) return std::nullopt;
    } else if (!loose) {
        return std::nullopt;
    }
    // Loose fallback: the other elements, left to right.
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (k + 1 == step.index) continue;
        if (auto hit = get_from(path, i + 1, j.at(k), loose)) return hit;
    }
    return std::nullopt;
}

}  // namespace

std::optional<IR> get_jpath(const Jpath& path, const IR& j) {
    return get_from(path, 0, j, false);
}

std::optional<IR> loose_get_jpath(const Jpath& path, const IR& j) {
    return get_from(path, 0, j, true);
}

// --- labelled traces --------------------------------------------------------------

std::optional<IR> get_label(std::uint64_t label, const LabelledTrace& t) {
    for (const auto& m : t)
        if (m.label == label) return m.message;
    return std::nullopt;
}

IR request_ir(const http::Request& q, http::Endpoint from) {
    IR j;
    j["method"] = q.method == http::Method::Get ? "GET" : "PUT";
    j["target"] = q.target;
    if (q.precondition) {
        IR p;
        p["kind"] = q.precondition->kind == http::PrecondKind::IfMatch ? "If-Match"
                                                                       : "If-None-Match";
        p["etag"] = q.precondition->etag;
        j["precondition"] = p;
    } else {
        j["precondition"] = nullptr;
    }
    j["body"] = q.body;
    j["from"] = from;
    return j;
}

IR response_ir(const http::ConcreteResponse& a, http::Endpoint to) {
    IR j;
    j["status"] = a.status;
    IR fields = IR::object();
    for (const auto& [name, value] : a.fields) fields[name] = value;
    j["fields"] = fields;
    j["body"] = a.body;
    j["to"] = to;
    return j;
}

std::optional<http::Request> request_of_ir(const IR& j) {
    if (!j.is_object() || !j.contains("method") || !j.contains("target")) return std::nullopt;
    http::Request q;
    if (j["method"] == "GET") q.method = http::Method::Get;
    else if (j["method"] == "PUT") q.method = http::Method::Put;
    else return std::nullopt;
    if (!j["target"].is_string()) return std::nullopt;
    q.target = j["target"].get<std::string>();
    if (j.contains("precondition") && j["precondition"].is_object()) {
        const auto& p = j["precondition"];
        if (!p.contains("kind") || !p.contains("etag") || !p["etag"].is_string())
            return std::nullopt;
        http::Precondition pre;
        if (p["kind"] == "If-Match") pre.kind = http::PrecondKind::IfMatch;
        else if (p["kind"] == "If-None-Match") pre.kind = http::PrecondKind::IfNoneMatch;
        else return std::nullopt;
        pre.etag = p["etag"].get<std::string>();
        if (pre.etag.empty()) return std::nullopt;
        q.precondition = pre;
    }
    if (j.contains("body") && j["body"].is_string()) q.body = j["body"].get<std::string>();
    if (q.method == http::Method::Get) q.body.clear();
    return q;
}

std::uint64_t TraceRecorder::record_sent(const IR& request, http::Endpoint from,
                                         std::optional<std::uint64_t> forced_label) {
    std::uint64_t label;
    if (forced_label) {
        label = *forced_label;
        if (label >= next_odd_) next_odd_ = label + 2;
    } else {
        label = next_odd_;
        next_odd_ += 2;
    }
    trace_.push_back({label, request});
    outstanding_[from].push_back(label);
    return label;
}

std::uint64_t TraceRecorder::record_received(const IR& response, http::Endpoint to) {
    std::uint64_t label = 0;
    auto& fifo = outstanding_[to];
    if (!fifo.empty()) {
        label = fifo.front() + 1;
        fifo.erase(fifo.begin());
    }
    trace_.push_back({label, response});
    return label;
}

// --- Jexp evaluation ---------------------------------------------------------------

namespace {

IR fn_mode_add_write(const IR& j) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) return j;
    // Mode bits are conventionally written in octal; 500 | 200 = 700.
    const auto decimal = j.get<std::int64_t>();
    if (decimal < 0) return j;
    std::int64_t octal = 0, scale = 1;
    for (std::int64_t rest = decimal; rest > 0; rest /= 10) {
        const auto digit = rest % 10;
        if (digit > 7) return j;  // not a mode
        octal += digit * scale;
        scale *= 8;
    }
    octal |= 0200;
    std::int64_t back = 0, pow10 = 1;
    for (std::int64_t rest = octal; rest > 0; rest /= 8) {
        back += (rest % 8) * pow10;
        pow10 *= 10;
    }
    return IR(back);
}

}  // namespace

FunctionRegistry::FunctionRegistry() {
    add("id", [](const IR& j) { return j; });
    add("mode_add_write", fn_mode_add_write);
}

void FunctionRegistry::add(const std::string& name, std::function<IR(const IR&)> fn) {
    fns_[name] = std::move(fn);
}

const std::function<IR(const IR&)>& FunctionRegistry::get(const std::string& name) const {
    const auto it = fns_.find(name);
    if (it == fns_.end()) throw ConfigError("unknown heuristics function '" + name + "'");
    return it->second;
}

namespace {

std::optional<IR> eval_hole(const Jexp& hole, const LabelledTrace& t, const FunctionRegistry& reg) {
    const auto label = hole.at("$label").get<std::uint64_t>();
    const Jpath path = parse_jpath(hole.at("$path").get<std::string>());
    const auto& fn = reg.get(hole.at("$fn").get<std::string>());

    // The labelled message first, then every other message in recording
    // order.
    if (auto exact = get_label(label, t)) {
        if (auto j = loose_get_jpath(path, *exact)) return fn(*j);
    }
    for (const auto& m : t) {
        if (m.label == label) continue;
        if (auto j = loose_get_jpath(path, m.message)) return fn(*j);
    }
    return std::nullopt;
}

std::optional<IR> eval_node(const Jexp& e, const LabelledTrace& t, const FunctionRegistry& reg,
                            std::vector<IR>* hole_values) {
    if (is_hole(e)) {
        auto v = eval_hole(e, t, reg);
        if (v && hole_values) hole_values->push_back(*v);
        return v;
    }
    if (e.is_object()) {
        IR out = IR::object();
        for (const auto& [key, child] : e.items()) {
            auto v = eval_node(child, t, reg, hole_values);
            if (!v) return std::nullopt;
            out[key] = *v;
        }
        return out;
    }
    if (e.is_array()) {
        IR out = IR::array();
        for (const auto& child : e) {
            auto v = eval_node(child, t, reg, hole_values);
            if (!v) return std::nullopt;
            out.push_back(*v);
        }
        return out;
    }
    return e;
}

}  // namespace

std::optional<IR> eval_jexp(const Jexp& e, const LabelledTrace& t, const FunctionRegistry& reg,
                            std::vector<IR>* hole_values) {
    return eval_node(e, t, reg, hole_values);
}

// --- generators ----------------------------------------------------------------------

namespace {

std::string random_path(Rng& rng) {
    static const char alphabet[] = "abcde";
    std::string out = "/";
    const auto len = 1 + rng.below(3);
    for (std::uint64_t i = 0; i < len; ++i) out.push_back(alphabet[rng.below(5)]);
    return out;
}

std::string random_etag(Rng& rng) {
    std::string tag = "\"r-" + std::to_string(rng.below(100)) + "\"";
    return rng.coin() ? "W/" + tag : tag;
}

std::vector<std::string> trace_etags(const LabelledTrace& trace) {
    std::vector<std::string> out;
    for (const auto& m : trace) {
        if (m.message.is_object() && m.message.contains("fields") &&
            m.message["fields"].is_object() && m.message["fields"].contains("ETag")) {
            out.push_back(m.message["fields"]["ETag"].get<std::string>());
        }
    }
    return out;
}

}  // namespace

std::string gen_path(const http::Sigma& state, Rng& rng, const GenConfig& cfg) {
    const bool heuristic = rng.chance(cfg.heuristic_weight);
    if (heuristic && !state.empty()) return state[rng.below(state.size())].first;
    return random_path(rng);
}

std::string gen_etag(const LabelledTrace& trace, Rng& rng, const GenConfig& cfg) {
    const bool heuristic = rng.chance(cfg.heuristic_weight);
    const auto seen = trace_etags(trace);
    if (heuristic && !seen.empty()) return seen[rng.below(seen.size())];
    return random_etag(rng);
}

Jexp gen_request_jexp(const http::Sigma& state, const LabelledTrace& trace, Rng& rng,
                      const GenConfig& cfg) {
    Jexp j;
    const bool is_put = rng.coin();
    j["method"] = is_put ? "PUT" : "GET";
    j["target"] = gen_path(state, rng, cfg);

    if (rng.chance(cfg.no_precondition_weight)) {
        j["precondition"] = nullptr;
    } else {
        IR p;
        p["kind"] = rng.coin() ? "If-Match" : "If-None-Match";

        // Candidate response labels; ETags from responses to the chosen
        // target are what make preconditions bite, so those are preferred
        // when any exist.
        std::vector<std::uint64_t> all_responses;
        std::vector<std::uint64_t> same_target;
        const auto& target = j["target"].get_ref<const std::string&>();
        for (const auto& m : trace) {
            if (m.label == 0 || m.label % 2 != 0) continue;
            all_responses.push_back(m.label);
            if (const auto req = get_label(m.label - 1, trace);
                req && req->is_object() && req->contains("target") && (*req)["target"] == target) {
                same_target.push_back(m.label);
            }
        }

        if (rng.chance(cfg.heuristic_weight) && !all_responses.empty()) {
            const auto& pool = (!same_target.empty() && rng.chance(cfg.same_target_weight))
                                   ? same_target
                                   : all_responses;
            const auto label = pool[rng.below(pool.size())];
            p["etag"] = make_hole(label, "this@\"fields\"@\"ETag\"", "id");
        } else {
            p["etag"] = gen_etag(trace, rng, cfg);
        }
        j["precondition"] = p;
    }

    if (is_put) {
        static const char alphabet[] = "xyzuvw";
        std::string body;
        const auto len = 1 + rng.below(5);
        for (std::uint64_t i = 0; i < len; ++i) body.push_back(alphabet[rng.below(6)]);
        j["body"] = body;
    } else {
        j["body"] = "";
    }
    j["from"] = 1 + rng.below(cfg.clients);
    return j;
}

// --- shrinking ------------------------------------------------------------------------

namespace {

// Replaces the n-th hole (in traversal order) of e with the given literal.
bool replace_hole(Jexp& e, std::size_t& countdown, const IR& literal) {
    if (is_hole(e)) {
        if (countdown == 0) {
            e = literal;
            return true;
        }
        --countdown;
        return false;
    }
    if (e.is_object() || e.is_array()) {
        for (auto& child : e) {
            if (replace_hole(child, countdown, literal)) return true;
        }
    }
    return false;
}

std::size_t count_holes(const Jexp& e) {
    if (is_hole(e)) return 1;
    std::size_t n = 0;
    if (e.is_object() || e.is_array()) {
        for (const auto& child : e) n += count_holes(child);
    }
    return n;
}

}  // namespace

std::vector<InputSequence> shrink_candidates(const InputSequence& inputs,
                                             const std::vector<std::vector<IR>>& last_hole_values) {
    std::vector<InputSequence> out;

    // Drop one input; labels of the survivors stay put.
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        InputSequence c = inputs;
        c.erase(c.begin() + static_cast<std::ptrdiff_t>(i));
        out.push_back(std::move(c));
    }

    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto holes = count_holes(inputs[i].jexp);
        const auto known =
            i < last_hole_values.size() ? last_hole_values[i].size() : std::size_t{0};
        for (std::size_t h = 0; h < holes && h < known; ++h) {
            InputSequence c = inputs;
            std::size_t countdown = h;
            replace_hole(c[i].jexp, countdown, last_hole_values[i][h]);
            out.push_back(std::move(c));
        }

        if (inputs[i].jexp.contains("body") && inputs[i].jexp["body"].is_string()) {
            const auto body = inputs[i].jexp["body"].get<std::string>();
            if (!body.empty()) {
                InputSequence c = inputs;
                c[i].jexp["body"] = body.substr(0, body.size() / 2);
                out.push_back(std::move(c));
            }
        }

        if (inputs[i].jexp.contains("precondition") && !inputs[i].jexp["precondition"].is_null()) {
            InputSequence c = inputs;
            c[i].jexp["precondition"] = nullptr;
            out.push_back(std::move(c));
        }
    }
    return out;
}

InputSequence shrink_loop(const InputSequence& failing, const CandidateRunner& runner,
                          std::size_t budget) {
    InputSequence current = failing;
    RunOutcome outcome = runner(current);
    std::size_t spent = 1;
    if (!outcome.rejected) {
        throw ConfigError("shrink_loop requires a rejecting input to start from");
    }

    bool improved = true;
    while (improved && spent < budget) {
        improved = false;
        for (const auto& candidate : shrink_candidates(current, outcome.hole_values)) {
            if (spent >= budget) break;
            RunOutcome got = runner(candidate);
            ++spent;
            if (got.rejected) {
                current = candidate;
                outcome = std::move(got);
                improved = true;
                break;
            }
        }
    }

    // Confirming run; the result must still reject.
    if (!runner(current).rejected) {
        throw ConfigError("shrunk input no longer rejects on the confirming run");
    }
    return current;
}

}  // namespace mbt::harness
