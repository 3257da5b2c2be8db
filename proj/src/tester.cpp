#include "mbt/tester.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace mbt::tester {

using http::ConcPacket;
using http::EtagExp;
using http::SmEvent;
using http::SmResult;
using http::SymPacket;
using http::Unit;

namespace {

// Continuation for events that never resume (throws).
template <class Tree>
typename Tree::Cont dead_continuation() {
    return [](const auto&) -> Tree { throw std::logic_error("resumed a throw continuation"); };
}

// A received request packet is re-read as a symbolic packet (its payload is
// concrete either way).
SymPacket to_symbolic_request(const ConcPacket& p) {
    SymPacket out;
    out.source = p.source;
    out.destination = p.destination;
    out.payload = p.request();
    return out;
}

}  // namespace

ObsHandlerTree observe_handler(const SmEvent& e) {
    using Out = ObsHandlerTree;
    if (const auto* recv = std::get_if<http::EvRecv>(&e)) {
        return Out::impure(ObsEvent{EvFromObs{recv->state}}, [](const ObsResult& r) {
            return Out::pure(SmResult{to_symbolic_request(std::get<ConcPacket>(r))});
        });
    }
    if (const auto* send = std::get_if<http::EvSend>(&e)) {
        const SymPacket px = send->packet;
        return Out::impure(ObsEvent{EvToObs{}}, [px](const ObsResult& r) {
            const ConcPacket p = std::get<ConcPacket>(r);
            return Out::impure(ObsEvent{EvGuard{px, p}},
                               [](const ObsResult&) { return Out::pure(SmResult{Unit{}}); });
        });
    }
    if (const auto* decide = std::get_if<http::EvDecide>(&e)) {
        const http::EtagCond cond = decide->cond;
        return Out::impure(ObsEvent{EvObsOr{}}, [cond](const ObsResult& b) {
            const bool branch = std::get<bool>(b);
            return Out::impure(ObsEvent{EvUnify{cond, branch}}, [branch](const ObsResult&) {
                return Out::pure(SmResult{branch});
            });
        });
    }
    if (std::holds_alternative<http::EvOr>(e)) {
        return Out::impure(ObsEvent{EvObsOr{}},
                           [](const ObsResult& b) { return Out::pure(SmResult{std::get<bool>(b)}); });
    }
    // Choice
    return Out::impure(ObsEvent{EvObsChoice{}}, [](const ObsResult& x) {
        return Out::pure(SmResult{std::get<EtagExp>(x)});
    });
}

ObsTree observe_model(http::SmTree model) {
    return itree::interp<ObsEvent, ObsResult, SmEvent, SmResult, itree::Never>(observe_handler,
                                                                               std::move(model));
}

// --- ETag knowledge -----------------------------------------------------------

std::optional<std::string> EtagKnowledge::bind_exact(const std::string& observed) {
    if (exact_) {
        if (*exact_ != observed)
            return "variable already bound to " + *exact_ + ", observed " + observed;
        return std::nullopt;
    }
    exact_ = observed;
    if (auto conflict = recheck()) {
        exact_.reset();  // leave the knowledge as it was
        return conflict;
    }
    return std::nullopt;
}

std::optional<std::string> EtagKnowledge::apply(const std::string& lit, http::CmpMode mode,
                                                bool outcome) {
    if (outcome) {
        if (mode == http::CmpMode::Strong) {
            if (http::is_weak_etag(lit))
                return "weak validator " + lit + " cannot strong-match anything";
            return bind_exact(lit);
        }
        // Weak match pins the opaque part.
        const std::string o = http::opaque_of(lit);
        if (opaque_ && *opaque_ != o)
            return "opaque tag already pinned to " + *opaque_ + ", now required " + o;
        const auto saved = opaque_;
        opaque_ = o;
        if (auto conflict = recheck()) {
            opaque_ = saved;
            return conflict;
        }
        return std::nullopt;
    }
    must_not_match_.push_back({lit, mode});
    if (auto conflict = recheck()) {
        must_not_match_.pop_back();
        return conflict;
    }
    return std::nullopt;
}

std::optional<std::string> EtagKnowledge::recheck() const {
    // Candidate wire values implied by the positive pins.
    std::vector<std::string> candidates;
    if (exact_) {
        candidates.push_back(*exact_);
        if (opaque_ && http::opaque_of(*exact_) != *opaque_)
            return "exact value " + *exact_ + " disagrees with pinned opaque tag " + *opaque_;
    } else if (opaque_) {
        candidates.push_back(*opaque_);
        candidates.push_back("W/" + *opaque_);
    } else {
        return std::nullopt;  // infinite domain, finitely many exclusions
    }
    for (const auto& cand : candidates) {
        const bool ok = std::none_of(must_not_match_.begin(), must_not_match_.end(),
                                     [&](const std::pair<std::string, http::CmpMode>& m) {
                                         return http::etag_match(m.first, cand, m.second);
                                     });
        if (ok) return std::nullopt;
    }
    return "no candidate value survives the recorded mismatches (" + describe() + ")";
}

std::string EtagKnowledge::describe() const {
    std::ostringstream out;
    if (exact_) out << "= " << *exact_;
    else if (opaque_) out << "~ " << *opaque_;
    else out << "unconstrained";
    for (const auto& [lit, mode] : must_not_match_) {
        out << ", not" << (mode == http::CmpMode::Strong ? " strongly " : " weakly ") << lit;
    }
    return out.str();
}

std::string EtagConstraintState::describe() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [id, k] : vars) {
        if (!first) out << "; ";
        first = false;
        out << "#" << id << " " << k.describe();
    }
    return out.str();
}

namespace {

std::optional<std::string> unify_etag(const EtagExp& sym, const std::string& observed,
                                      EtagConstraintState& v) {
    if (sym.kind == EtagExp::Kind::Lit) {
        if (sym.lit != observed)
            return "ETag " + observed + " differs from the specified " + sym.lit;
        return std::nullopt;
    }
    return v.vars[sym.var.id].bind_exact(observed);
}

}  // namespace

std::optional<std::string> guard_packet(const SymPacket& sym, const ConcPacket& obs,
                                        EtagConstraintState& v) {
    if (obs.is_request() || sym.is_request()) return "expected a response packet";
    if (sym.source != obs.source || sym.destination != obs.destination) {
        return "routing mismatch: expected " + std::to_string(sym.source) + "->" +
               std::to_string(sym.destination) + ", observed " + std::to_string(obs.source) +
               "->" + std::to_string(obs.destination);
    }
    const auto& want = sym.response();
    const auto& got = obs.response();
    if (want.status != got.status) {
        return "status " + std::to_string(got.status) + " differs from the specified " +
               std::to_string(want.status);
    }
    if (want.body != got.body) return "body differs from the specification";

    // Literal fields must match exactly. A symbolic ETag field binds the
    // variable to the observed value; a missing ETag field binds it to
    // "absent" (the empty tag), since an unresolved choice also covers
    // servers that generated no validator at all.
    std::size_t matched = 0;
    for (const auto& field : want.fields) {
        const auto observed = got.field(field.name);
        if (const auto* lit = std::get_if<std::string>(&field.value)) {
            if (!observed) return "missing response field " + field.name;
            if (*lit != *observed) return "field " + field.name + " differs";
            ++matched;
            continue;
        }
        const auto& sym_etag = std::get<EtagExp>(field.value);
        if (!observed) {
            if (sym_etag.kind == EtagExp::Kind::Lit) return "missing response field " + field.name;
            if (auto err = v.vars[sym_etag.var.id].bind_exact("")) return err;
            continue;  // nothing observed to count
        }
        if (observed->empty()) return "empty " + field.name + " field";
        if (auto err = unify_etag(sym_etag, *observed, v)) return err;
        ++matched;
    }
    if (matched != got.fields.size()) return "unexpected response fields";
    return std::nullopt;
}

std::optional<std::string> unify_cond(const http::EtagCond& cond, bool outcome,
                                      EtagConstraintState& v) {
    if (cond.sym.kind == EtagExp::Kind::Lit) {
        if (http::etag_match(cond.lit, cond.sym.lit, cond.mode) != outcome) {
            return "comparison of " + cond.lit + " against " +
                   (cond.sym.lit.empty() ? std::string("<no etag>") : cond.sym.lit) +
                   " cannot come out " + (outcome ? "true" : "false");
        }
        return std::nullopt;
    }
    return v.vars[cond.sym.var.id].apply(cond.lit, cond.mode, outcome);
}

UnifyHandlerTree unify_handler(const ObsEvent& e, const EtagConstraintState& v) {
    using Out = UnifyHandlerTree;
    using StateAnd = std::pair<EtagConstraintState, ObsResult>;

    if (std::holds_alternative<EvObsChoice>(e)) {
        EtagConstraintState next = v;
        const sym::Var x = next.fresh();
        return Out::pure(StateAnd{std::move(next), ObsResult{EtagExp::variable(x)}});
    }
    if (const auto* guard = std::get_if<EvGuard>(&e)) {
        EtagConstraintState next = v;
        if (auto conflict = guard_packet(guard->sym, guard->obs, next)) {
            return Out::impure(NtEvent{EvNtThrow{"Conflict: " + *conflict}},
                               dead_continuation<Out>());
        }
        return Out::pure(StateAnd{std::move(next), ObsResult{Unit{}}});
    }
    if (const auto* unify = std::get_if<EvUnify>(&e)) {
        EtagConstraintState next = v;
        if (auto conflict = unify_cond(unify->cond, unify->value, next)) {
            return Out::impure(NtEvent{EvNtThrow{"Conflict: " + *conflict}},
                               dead_continuation<Out>());
        }
        return Out::pure(StateAnd{std::move(next), ObsResult{Unit{}}});
    }
    if (std::holds_alternative<EvObsOr>(e)) {
        return Out::impure(NtEvent{EvNtOr{}}, [v](const NtResult& b) {
            return Out::pure(StateAnd{v, ObsResult{std::get<bool>(b)}});
        });
    }
    if (const auto* from = std::get_if<EvFromObs>(&e)) {
        return Out::impure(NtEvent{EvNtFrom{from->state}}, [v](const NtResult& p) {
            return Out::pure(StateAnd{v, ObsResult{std::get<ConcPacket>(p)}});
        });
    }
    // EvToObs
    return Out::impure(NtEvent{EvNtTo{}}, [v](const NtResult& p) {
        return Out::pure(StateAnd{v, ObsResult{std::get<ConcPacket>(p)}});
    });
}

NtTree nondet_tester(http::SmTree model) {
    return itree::interp_state<NtEvent, NtResult, EtagConstraintState, ObsEvent, ObsResult,
                               itree::Never>(unify_handler, observe_model(std::move(model)),
                                             EtagConstraintState{});
}

// --- backtracking ------------------------------------------------------------------

std::vector<NtTree> advance_to_observe(NtTree branch) {
    std::vector<NtTree> out;
    std::vector<NtTree> stack{std::move(branch)};
    while (!stack.empty()) {
        NtTree b = std::move(stack.back());
        stack.pop_back();
        const NtEvent& e = b.event();
        if (std::holds_alternative<EvNtOr>(e)) {
            // Both alternatives stay live; true-side first.
            stack.push_back(b.step(NtResult{false}));
            stack.push_back(b.step(NtResult{true}));
            continue;
        }
        out.push_back(std::move(b));  // FromObserver, ToObserver, or Throw
    }
    return out;
}

NtTree match_observe(bool from_observer, const ConcPacket& packet, NtTree advanced) {
    const NtEvent& e = advanced.event();
    if (std::holds_alternative<EvNtThrow>(e)) return advanced;
    if (std::holds_alternative<EvNtOr>(e)) {
        throw std::logic_error("match_observe expects an advanced branch");
    }
    const bool head_from = std::holds_alternative<EvNtFrom>(e);
    if (head_from == from_observer) return advanced.step(NtResult{packet});
    return NtTree::impure(
        NtEvent{EvNtThrow{std::string("Expect ") + (head_from ? "FromObserver" : "ToObserver") +
                          " but observed " + (from_observer ? "FromObserver" : "ToObserver")}},
        dead_continuation<NtTree>());
}

BranchQueue expect(bool from_observer, const ConcPacket& packet, const BranchQueue& branches) {
    BranchQueue out;
    for (const auto& b : branches) {
        for (auto& advanced : advance_to_observe(b)) {
            NtTree matched = match_observe(from_observer, packet, std::move(advanced));
            // A thrown branch can only ever be popped once reached; dropping
            // it now is the same verdict with less queue to carry. The
            // rejection message always comes from the branch in hand.
            if (!std::holds_alternative<EvNtThrow>(matched.event())) out.push_back(std::move(matched));
        }
    }
    return out;
}

TeTree backtrack(NtTree current, BranchQueue others) {
    return TeTree::defer([current, others]() -> TeTree {
        const NtEvent& e = current.event();

        if (std::holds_alternative<EvNtOr>(e)) {
            return TeTree::impure(TeEvent{EvGenBool{}}, [current, others](const TeResult& r) {
                const bool b = std::get<bool>(r);
                BranchQueue next = others;
                next.push_front(current.step(NtResult{!b}));
                return backtrack(current.step(NtResult{b}), std::move(next));
            });
        }

        if (const auto* thrown = std::get_if<EvNtThrow>(&e)) {
            if (others.empty()) {
                return TeTree::impure(TeEvent{EvTThrow{thrown->message}},
                                      dead_continuation<TeTree>());
            }
            BranchQueue rest = others;
            NtTree next = rest.front();
            rest.pop_front();
            return backtrack(std::move(next), std::move(rest));
        }

        if (const auto* from = std::get_if<EvNtFrom>(&e)) {
            return TeTree::impure(TeEvent{EvGenPacket{from->state}},
                                  [current, others](const TeResult& r) {
                const ConcPacket q = std::get<ConcPacket>(r);
                return TeTree::impure(TeEvent{EvClientSend{q}}, [current, others, q](const TeResult&) {
                    return backtrack(current.step(NtResult{q}), expect(true, q, others));
                });
            });
        }

        // EvNtTo
        return TeTree::impure(TeEvent{EvClientRecv{}}, [current, others](const TeResult& r) {
            const auto& maybe = std::get<std::optional<ConcPacket>>(r);
            if (maybe) {
                return backtrack(current.step(NtResult{*maybe}), expect(false, *maybe, others));
            }
            if (!others.empty()) {
                BranchQueue rest = others;
                NtTree next = rest.front();
                rest.pop_front();
                rest.push_back(current);  // postpone
                return backtrack(std::move(next), std::move(rest));
            }
            return backtrack(current, {});  // retry the receive
        });
    });
}

// --- execution -----------------------------------------------------------------------

Verdict execute(std::uint64_t fuel, TeTree tree, const ExecuteHooks& hooks, ExecuteStats* stats) {
    ExecuteStats local;
    ExecuteStats& st = stats ? *stats : local;
    std::uint64_t interactions = 0;
    while (interactions < fuel) {
        const TeEvent& e = tree.event();
        ++st.events;

        if (const auto* thrown = std::get_if<EvTThrow>(&e)) {
            return {Verdict::Kind::Reject, thrown->message};
        }
        // Generation events are branch bookkeeping; only interactions with
        // the wire (sends and receive attempts) consume fuel.
        if (std::holds_alternative<EvGenBool>(e)) {
            tree = tree.step(TeResult{hooks.gen_bool()});
            continue;
        }
        if (const auto* gen = std::get_if<EvGenPacket>(&e)) {
            tree = tree.step(TeResult{hooks.gen_packet(gen->state)});
            continue;
        }
        ++interactions;
        if (const auto* send = std::get_if<EvClientSend>(&e)) {
            if (auto err = hooks.send(send->packet)) {
                return {Verdict::Kind::Error, "transport send failed: " + *err};
            }
            if (hooks.record) hooks.record(send->packet, true);
            ++st.messages;
            tree = tree.step(TeResult{Unit{}});
            continue;
        }
        // EvClientRecv
        const RecvOutcome got = hooks.recv();
        switch (got.kind) {
            case RecvOutcome::Kind::Fault:
                return {Verdict::Kind::Error, "transport receive failed: " + got.message};
            case RecvOutcome::Kind::Violation:
                return {Verdict::Kind::Reject, got.message};
            case RecvOutcome::Kind::Packet:
                if (hooks.record) hooks.record(got.packet, false);
                ++st.messages;
                tree = tree.step(TeResult{std::optional<ConcPacket>{got.packet}});
                break;
            case RecvOutcome::Kind::Silence:
                ++st.empty_receives;
                tree = tree.step(TeResult{std::optional<ConcPacket>{}});
                break;
        }
    }
    return {Verdict::Kind::Accept, "fuel exhausted without a violation"};
}

// --- fused production driver -------------------------------------------------------

namespace {

// One live hypothesis: where the observer tree stands and what is known
// about the server's choices so far.
struct Hypothesis {
    ObsTree tree;
    EtagConstraintState knowledge;
};

// Knowledge about variables that no longer occur in the model state is
// inert: no future guard or comparison can mention them. Dropping it keeps
// hypotheses small over long runs.
void prune_knowledge(EtagConstraintState& knowledge, const http::Sigma& state) {
    std::set<std::uint32_t> live;
    for (const auto& [path, res] : state) {
        if (res.etag.kind == EtagExp::Kind::Var) live.insert(res.etag.var.id);
    }
    for (auto it = knowledge.vars.begin(); it != knowledge.vars.end();) {
        if (live.count(it->first)) ++it;
        else it = knowledge.vars.erase(it);
    }
}

struct AdvanceOutcome {
    std::vector<Hypothesis> live;     // heads are FromObs or ToObs
    std::string last_conflict;        // set when something died
};

// Walks a hypothesis to its next observation, splitting at Or, allocating at
// Choice, and resolving Guard/Unify against the hypothesis's own knowledge.
// Dead paths are dropped, remembering their conflict message.
void advance_hypothesis(Hypothesis h, AdvanceOutcome& out) {
    std::vector<Hypothesis> stack{std::move(h)};
    while (!stack.empty()) {
        Hypothesis cur = std::move(stack.back());
        stack.pop_back();
        for (;;) {
            const ObsEvent& e = cur.tree.event();
            if (std::holds_alternative<EvObsOr>(e)) {
                stack.push_back({cur.tree.step(ObsResult{false}), cur.knowledge});
                cur.tree = cur.tree.step(ObsResult{true});
                continue;
            }
            if (std::holds_alternative<EvObsChoice>(e)) {
                const sym::Var x = cur.knowledge.fresh();
                cur.tree = cur.tree.step(ObsResult{EtagExp::variable(x)});
                continue;
            }
            if (const auto* guard = std::get_if<EvGuard>(&e)) {
                if (auto conflict = guard_packet(guard->sym, guard->obs, cur.knowledge)) {
                    out.last_conflict = "Conflict: " + *conflict;
                    break;
                }
                cur.tree = cur.tree.step(ObsResult{Unit{}});
                continue;
            }
            if (const auto* unify = std::get_if<EvUnify>(&e)) {
                if (auto conflict = unify_cond(unify->cond, unify->value, cur.knowledge)) {
                    out.last_conflict = "Conflict: " + *conflict;
                    break;
                }
                cur.tree = cur.tree.step(ObsResult{Unit{}});
                continue;
            }
            out.live.push_back(std::move(cur));  // FromObs or ToObs
            break;
        }
    }
}

// Feeds an observation to every hypothesis; mismatching or conflicting ones
// die. Loop-top duplicates (same state and knowledge up to renaming) merge.
struct FeedResult {
    std::deque<Hypothesis> queue;
    std::string last_conflict;
};

// What a hypothesis claims about one resource's ETag: pinned to a concrete
// value (the empty string meaning "absent"), partially constrained, or a
// completely unconstrained choice. A free token explains every observation a
// pinned or partial one does, so a hypothesis whose tokens are pointwise
// freer-or-equal subsumes the other outright.
struct EtagTokens {
    std::string skeleton;              // paths and contents
    std::vector<std::string> tokens;   // one per resource; "" means free
};

EtagTokens loop_top_tokens(const http::Sigma& state, const EtagConstraintState& knowledge) {
    EtagTokens out;
    for (const auto& [path, res] : state) {
        out.skeleton += path;
        out.skeleton += '\x1f';
        out.skeleton += res.content;
        out.skeleton += '\x1e';
        std::string token;
        if (res.etag.kind == EtagExp::Kind::Lit) {
            token = "=" + res.etag.lit;
        } else if (const auto it = knowledge.vars.find(res.etag.var.id);
                   it != knowledge.vars.end()) {
            const EtagKnowledge& k = it->second;
            if (k.exact()) {
                token = "=" + *k.exact();
            } else if (k.opaque() || !k.mismatches().empty()) {
                token = "?" + k.describe();
            }
        }
        out.tokens.push_back(std::move(token));  // empty: free
    }
    return out;
}

bool subsumes(const EtagTokens& a, const EtagTokens& b) {
    if (a.skeleton != b.skeleton || a.tokens.size() != b.tokens.size()) return false;
    for (std::size_t i = 0; i < a.tokens.size(); ++i) {
        if (!a.tokens[i].empty() && a.tokens[i] != b.tokens[i]) return false;
    }
    return true;
}

FeedResult feed_all(bool from_observer, const ConcPacket& packet, std::deque<Hypothesis> branches,
                    bool merge) {
    FeedResult fed;
    struct Candidate {
        Hypothesis fed_hypothesis;
        std::optional<EtagTokens> loop_top;  // set when the head was FromObserver
    };
    std::vector<Candidate> candidates;

    for (auto& b : branches) {
        AdvanceOutcome advanced;
        advance_hypothesis(std::move(b), advanced);
        if (!advanced.last_conflict.empty()) fed.last_conflict = advanced.last_conflict;
        for (auto& h : advanced.live) {
            const ObsEvent& e = h.tree.event();
            const auto* from = std::get_if<EvFromObs>(&e);
            if ((from != nullptr) != from_observer) {
                fed.last_conflict = std::string("Expect ") +
                                    (from ? "FromObserver" : "ToObserver") + " but observed " +
                                    (from_observer ? "FromObserver" : "ToObserver");
                continue;
            }
            Candidate c;
            if (from) {
                prune_knowledge(h.knowledge, from->state);
                if (merge) c.loop_top = loop_top_tokens(from->state, h.knowledge);
            }
            c.fed_hypothesis = {h.tree.step(ObsResult{packet}), std::move(h.knowledge)};
            candidates.push_back(std::move(c));
        }
    }

    // Keep only hypotheses no earlier-or-freer sibling subsumes. Duplicate
    // keys keep their first representative; order is otherwise preserved.
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        bool drop = false;
        if (candidates[i].loop_top) {
            for (std::size_t j = 0; j < candidates.size() && !drop; ++j) {
                if (i == j || !candidates[j].loop_top) continue;
                const bool j_subsumes_i = subsumes(*candidates[j].loop_top, *candidates[i].loop_top);
                const bool i_subsumes_j = subsumes(*candidates[i].loop_top, *candidates[j].loop_top);
                if (j_subsumes_i && (!i_subsumes_j || j < i)) drop = true;
            }
        }
        if (!drop) fed.queue.push_back(std::move(candidates[i].fed_hypothesis));
    }
    return fed;
}

}  // namespace

Verdict execute_observer(std::uint64_t fuel, ObsTree model, const ExecuteHooks& hooks,
                         ExecuteStats* stats, const ObserverOptions& options) {
    ExecuteStats local;
    ExecuteStats& st = stats ? *stats : local;

    Hypothesis current{std::move(model), {}};
    std::deque<Hypothesis> others;
    std::string last_conflict = "rejected";
    std::uint64_t interactions = 0;
    std::uint64_t outstanding = 0;        // requests sent minus responses seen
    std::size_t send_deferrals = 0;       // consecutive rotations away from sends

    const auto pop_next = [&]() -> bool {
        if (others.empty()) return false;
        current = std::move(others.front());
        others.pop_front();
        return true;
    };

    while (interactions < fuel) {
        ++st.events;
        const ObsEvent& e = current.tree.event();

        if (std::holds_alternative<EvObsOr>(e)) {
            const bool b = hooks.gen_bool();
            others.push_front({current.tree.step(ObsResult{!b}), current.knowledge});
            current.tree = current.tree.step(ObsResult{b});
            continue;
        }
        if (std::holds_alternative<EvObsChoice>(e)) {
            const sym::Var x = current.knowledge.fresh();
            current.tree = current.tree.step(ObsResult{EtagExp::variable(x)});
            continue;
        }
        if (const auto* guard = std::get_if<EvGuard>(&e)) {
            if (auto conflict = guard_packet(guard->sym, guard->obs, current.knowledge)) {
                last_conflict = "Conflict: " + *conflict;
                if (!pop_next()) return {Verdict::Kind::Reject, last_conflict};
                continue;
            }
            current.tree = current.tree.step(ObsResult{Unit{}});
            continue;
        }
        if (const auto* unify = std::get_if<EvUnify>(&e)) {
            if (auto conflict = unify_cond(unify->cond, unify->value, current.knowledge)) {
                last_conflict = "Conflict: " + *conflict;
                if (!pop_next()) return {Verdict::Kind::Reject, last_conflict};
                continue;
            }
            current.tree = current.tree.step(ObsResult{Unit{}});
            continue;
        }

        if (const auto* from = std::get_if<EvFromObs>(&e)) {
            // Under an outstanding cap, prefer branches that can receive; a
            // full rotation without finding one lets the send proceed.
            if (options.max_outstanding && outstanding >= options.max_outstanding &&
                !others.empty() && send_deferrals <= others.size()) {
                ++send_deferrals;
                others.push_back(std::move(current));
                current = std::move(others.front());
                others.pop_front();
                continue;
            }
            send_deferrals = 0;
            ++interactions;
            ++outstanding;
            prune_knowledge(current.knowledge, from->state);
            const ConcPacket q = hooks.gen_packet(from->state);
            if (auto err = hooks.send(q)) {
                return {Verdict::Kind::Error, "transport send failed: " + *err};
            }
            if (hooks.record) hooks.record(q, true);
            ++st.messages;
            auto fed = feed_all(true, q, std::move(others), options.merge_equivalent_hypotheses);
            others = std::move(fed.queue);
            if (!fed.last_conflict.empty()) last_conflict = fed.last_conflict;
            current.tree = current.tree.step(ObsResult{q});
            continue;
        }

        // EvToObs
        ++interactions;
        const RecvOutcome got = hooks.recv();
        switch (got.kind) {
            case RecvOutcome::Kind::Fault:
                return {Verdict::Kind::Error, "transport receive failed: " + got.message};
            case RecvOutcome::Kind::Violation:
                return {Verdict::Kind::Reject, got.message};
            case RecvOutcome::Kind::Packet: {
                send_deferrals = 0;
                if (outstanding > 0) --outstanding;
                if (hooks.record) hooks.record(got.packet, false);
                ++st.messages;
                auto fed = feed_all(false, got.packet, std::move(others),
                                    options.merge_equivalent_hypotheses);
                others = std::move(fed.queue);
                if (!fed.last_conflict.empty()) last_conflict = fed.last_conflict;
                current.tree = current.tree.step(ObsResult{got.packet});
                continue;
            }
            case RecvOutcome::Kind::Silence: {
                ++st.empty_receives;
                if (!others.empty()) {
                    others.push_back(std::move(current));  // postpone
                    current = std::move(others.front());
                    others.pop_front();
                }
                continue;  // singleton: retry the receive
            }
        }
    }
    return {Verdict::Kind::Accept, "fuel exhausted without a violation"};
}

// --- bounded reachability ---------------------------------------------------------

bool observation_reachable(const NtTree& tester, const std::vector<Observation>& observations,
                           int or_budget) {
    struct Walker {
        const std::vector<Observation>& obs;
        bool go(const NtTree& t, std::size_t i, int budget) {
            if (i == obs.size()) {
                // The final observation's guard throws immediately if it
                // cannot be explained; anything else means the path holds.
                return !std::holds_alternative<EvNtThrow>(t.event());
            }
            const NtEvent& e = t.event();
            if (std::holds_alternative<EvNtThrow>(e)) return false;
            if (std::holds_alternative<EvNtOr>(e)) {
                if (budget == 0) return false;
                return go(t.step(NtResult{true}), i, budget - 1) ||
                       go(t.step(NtResult{false}), i, budget - 1);
            }
            const bool head_from = std::holds_alternative<EvNtFrom>(e);
            if (head_from != obs[i].from_observer) return false;
            return go(t.step(NtResult{obs[i].packet}), i + 1, budget);
        }
    } walker{observations};
    return walker.go(tester, 0, or_budget);
}

}  // namespace mbt::tester
