#include "mbt/http_model.hpp"

#include <algorithm>

namespace mbt::http {

EtagExp EtagExp::literal(std::string s) {
    EtagExp e;
    e.kind = Kind::Lit;
    e.lit = std::move(s);
    return e;
}

EtagExp EtagExp::variable(sym::Var x) {
    EtagExp e;
    e.kind = Kind::Var;
    e.var = x;
    return e;
}

bool is_weak_etag(const std::string& etag) {
    return etag.size() >= 2 && etag[0] == 'W' && etag[1] == '/';
}

std::string opaque_of(const std::string& etag) {
    return is_weak_etag(etag) ? etag.substr(2) : etag;
}

bool etag_match(const std::string& lit, const std::string& other, CmpMode mode) {
    switch (mode) {
        case CmpMode::Strong:
            return !is_weak_etag(lit) && !is_weak_etag(other) && lit == other;
        case CmpMode::Weak:
            return opaque_of(lit) == opaque_of(other);
    }
    return false;
}

std::optional<std::string> ConcreteResponse::field(const std::string& name) const {
    for (const auto& [n, v] : fields)
        if (n == name) return v;
    return std::nullopt;
}

const Resource* lookup(const Sigma& state, const std::string& path) {
    for (const auto& [p, r] : state)
        if (p == path) return &r;
    return nullptr;
}

Sigma upsert(const Sigma& state, const std::string& path, Resource r) {
    std::vector<Sigma::Entry> entries(state.begin(), state.end());
    for (auto& [p, existing] : entries) {
        if (p == path) {
            existing = std::move(r);
            return Sigma(std::move(entries));
        }
    }
    entries.emplace_back(path, std::move(r));
    return Sigma(std::move(entries));
}

namespace {

SymbolicResponse status_only(int status) {
    SymbolicResponse a;
    a.status = status;
    a.fields.push_back({"Content-Length", std::string("0")});
    return a;
}

SymbolicResponse ok_response(const Resource& res) {
    SymbolicResponse a;
    a.status = StatusCode::kOk;
    a.fields.push_back({"Content-Length", std::to_string(res.content.size())});
    if (!res.etag.is_empty_lit()) a.fields.push_back({"ETag", res.etag});
    a.body = res.content;
    return a;
}

}  // namespace

SmTree server_http(Sigma state) {
    return SmTree::impure(SmEvent{EvRecv{state}}, [state](const SmResult& r) -> SmTree {
        const SymPacket pq = std::get<SymPacket>(r);
        const Request q = pq.request();

        const auto respond_then = [pq](SymbolicResponse a, Sigma next) -> SmTree {
            SymPacket out;
            out.source = kServerEndpoint;
            out.destination = pq.source;
            out.payload = std::move(a);
            return SmTree::impure(SmEvent{EvSend{std::move(out)}},
                                  [next](const SmResult&) { return server_http(next); });
        };

        std::optional<Resource> res;
        if (const Resource* found = lookup(state, q.target)) res = *found;
        const EtagExp stored = res ? res->etag : EtagExp::literal("");

        const auto do_method = [=]() -> SmTree {
            if (q.method == Method::Get) {
                if (!res) return respond_then(status_only(StatusCode::kNotFound), state);
                return respond_then(ok_response(*res), state);
            }
            // PUT: the new ETag is an internal choice, or no ETag at all.
            return SmTree::impure(SmEvent{EvOr{}}, [=](const SmResult& b) -> SmTree {
                if (std::get<bool>(b)) {
                    return SmTree::impure(SmEvent{EvChoice{}}, [=](const SmResult& x) -> SmTree {
                        Sigma next = upsert(state, q.target, Resource{q.body, std::get<EtagExp>(x)});
                        return respond_then(status_only(StatusCode::kNoContent), std::move(next));
                    });
                }
                Sigma next = upsert(state, q.target, Resource{q.body, EtagExp::literal("")});
                return respond_then(status_only(StatusCode::kNoContent), std::move(next));
            });
        };

        if (!q.precondition) return do_method();

        const PrecondKind kind = q.precondition->kind;
        // If-Match is evaluated with strong comparison, If-None-Match with weak.
        EtagCond cond{q.precondition->etag, stored,
                      kind == PrecondKind::IfMatch ? CmpMode::Strong : CmpMode::Weak};
        return SmTree::impure(SmEvent{EvDecide{std::move(cond)}}, [=](const SmResult& b) -> SmTree {
            const bool matched = std::get<bool>(b);
            if (kind == PrecondKind::IfMatch) {
                if (matched) return do_method();
                return respond_then(status_only(StatusCode::kPreconditionFailed), state);
            }
            if (matched) {
                if (q.method == Method::Get)
                    return respond_then(status_only(StatusCode::kNotModified), state);
                return respond_then(status_only(StatusCode::kPreconditionFailed), state);
            }
            return do_method();
        });
    });
}

bool same_connection(const SymPacket& a, const SymPacket& b) {
    return std::minmax(a.source, a.destination) == std::minmax(b.source, b.destination);
}

std::vector<SymPacket> oldest_in_each_conn(const NetBuffer& buffer) {
    std::vector<SymPacket> out;
    for (const auto& p : buffer) {
        const bool seen = std::any_of(out.begin(), out.end(),
                                      [&](const SymPacket& q) { return same_connection(p, q); });
        if (!seen) out.push_back(p);
    }
    return out;
}

namespace {

NetBuffer without_first(NetBuffer buffer, const SymPacket& p) {
    const auto it = std::find(buffer.begin(), buffer.end(), p);
    if (it != buffer.end()) buffer.erase(it);
    return buffer;
}

NetTree pick_one(NetBuffer buffer, std::vector<SymPacket> candidates, std::size_t i) {
    if (i == candidates.size()) {
        // Nothing picked: absorb. The absorbed packet lands at the back.
        return NetTree::impure(NetEvent{EvAbsorb{}}, [buffer](const NetResult& r) {
            NetBuffer next = buffer;
            next.push_back(std::get<SymPacket>(r));
            return tcp_network(std::move(next));
        });
    }
    return NetTree::impure(NetEvent{EvNetOr{}}, [=](const NetResult& b) -> NetTree {
        if (std::get<bool>(b)) {
            const SymPacket chosen = candidates[i];
            return NetTree::impure(NetEvent{EvEmit{chosen}}, [buffer, chosen](const NetResult&) {
                return tcp_network(without_first(buffer, chosen));
            });
        }
        return pick_one(buffer, candidates, i + 1);
    });
}

}  // namespace

NetTree tcp_network(NetBuffer buffer) {
    return pick_one(buffer, oldest_in_each_conn(buffer), 0);
}

SmTree compose(SmTree server, NetTree net, NetBuffer incoming, NetBuffer outgoing) {
    return SmTree::defer([server, net, incoming, outgoing]() -> SmTree {
        const SmEvent& e = server.event();

        if (const auto* recv = std::get_if<EvRecv>(&e)) {
            if (!incoming.empty()) {
                const SymPacket pkt = incoming.front();
                NetBuffer rest(incoming.begin() + 1, incoming.end());
                return compose(server.step(SmResult{pkt}), net, std::move(rest), outgoing);
            }
            // Server starved: step the network once.
            const NetEvent& ne = net.event();
            if (std::holds_alternative<EvAbsorb>(ne)) {
                if (!outgoing.empty()) {
                    const SymPacket pkt = outgoing.front();
                    NetBuffer rest(outgoing.begin() + 1, outgoing.end());
                    return compose(server, net.step(NetResult{pkt}), incoming, std::move(rest));
                }
                // Absorb from the clients; the pending server state rides
                // along so generators can see it.
                return SmTree::impure(SmEvent{EvRecv{recv->state}}, [=](const SmResult& r) {
                    return compose(server, net.step(NetResult{std::get<SymPacket>(r)}), incoming,
                                   outgoing);
                });
            }
            if (const auto* emit = std::get_if<EvEmit>(&ne)) {
                if (emit->packet.destination == kServerEndpoint) {
                    NetBuffer next = incoming;
                    next.push_back(emit->packet);
                    return compose(server, net.step(NetResult{Unit{}}), std::move(next), outgoing);
                }
                return SmTree::impure(SmEvent{EvSend{emit->packet}}, [=](const SmResult&) {
                    return compose(server, net.step(NetResult{Unit{}}), incoming, outgoing);
                });
            }
            return SmTree::impure(SmEvent{EvOr{}}, [=](const SmResult& b) {
                return compose(server, net.step(NetResult{std::get<bool>(b)}), incoming, outgoing);
            });
        }

        if (const auto* send = std::get_if<EvSend>(&e)) {
            NetBuffer next = outgoing;
            next.push_back(send->packet);
            return compose(server.step(SmResult{Unit{}}), net, incoming, std::move(next));
        }

        // Choice, Or, Decide pass through untouched.
        return SmTree::impure(e, [=](const SmResult& x) {
            return compose(server.step(x), net, incoming, outgoing);
        });
    });
}

}  // namespace mbt::http
