#include "mbt/sut.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>

#include "mbt/wire.hpp"

namespace mbt::sut {

const char* mutant_name(MutantId m) {
    switch (m) {
        case MutantId::M1_strong_inm: return "m1-strong-inm";
        case MutantId::M2_skip_404: return "m2-skip-404";
        case MutantId::M3_skip_precond: return "m3-skip-precond";
        case MutantId::M4_wrong_target: return "m4-wrong-target";
    }
    return "?";
}

std::optional<MutantId> mutant_by_name(const std::string& name) {
    for (MutantId m : all_mutants())
        if (name == mutant_name(m)) return m;
    // Short aliases m1..m4.
    if (name == "m1") return MutantId::M1_strong_inm;
    if (name == "m2") return MutantId::M2_skip_404;
    if (name == "m3") return MutantId::M3_skip_precond;
    if (name == "m4") return MutantId::M4_wrong_target;
    return std::nullopt;
}

std::vector<MutantId> all_mutants() {
    return {MutantId::M1_strong_inm, MutantId::M2_skip_404, MutantId::M3_skip_precond,
            MutantId::M4_wrong_target};
}

ReferenceServer::ReferenceServer(std::optional<MutantId> mutant, std::uint64_t seed)
    : mutant_(mutant), rng_(seed) {}

std::string ReferenceServer::fresh_etag() {
    std::string tag = "\"tag-" + std::to_string(counter_++) + "\"";
    return rng_.coin() ? "W/" + tag : tag;
}

std::string ReferenceServer::respond(int status, const std::string& etag,
                                     const std::string& body) const {
    http::ConcreteResponse a;
    a.status = status;
    a.fields.emplace_back("Content-Length", std::to_string(body.size()));
    if (!etag.empty()) a.fields.emplace_back("ETag", etag);
    a.body = body;
    return wire::encode_response(a);
}

std::string ReferenceServer::handle(const std::string& request_bytes) {
    // Deliberately hand-rolled parsing, separate from the shared codec.
    const auto line_end = request_bytes.find("\r\n");
    if (line_end == std::string::npos) return respond(400, "", "");
    const std::string request_line = request_bytes.substr(0, line_end);

    const bool is_get = request_line.rfind("GET ", 0) == 0;
    const bool is_put = request_line.rfind("PUT ", 0) == 0;
    if (!is_get && !is_put) return respond(400, "", "");
    const auto target_end = request_line.find(' ', 4);
    if (target_end == std::string::npos) return respond(400, "", "");
    const std::string target = request_line.substr(4, target_end - 4);

    std::optional<std::pair<bool, std::string>> precond;  // (is_if_match, etag)
    std::size_t pos = line_end + 2;
    std::size_t body_len = 0;
    while (pos < request_bytes.size()) {
        const auto eol = request_bytes.find("\r\n", pos);
        if (eol == std::string::npos) return respond(400, "", "");
        const std::string line = request_bytes.substr(pos, eol - pos);
        pos = eol + 2;
        if (line.empty()) break;
        if (line.rfind("If-Match: ", 0) == 0) precond = {{true, line.substr(10)}};
        else if (line.rfind("If-None-Match: ", 0) == 0) precond = {{false, line.substr(15)}};
        else if (line.rfind("Content-Length: ", 0) == 0) body_len = std::stoull(line.substr(16));
    }
    const std::string body = request_bytes.substr(pos, body_len);

    auto entry = std::find_if(store_.begin(), store_.end(),
                              [&](const auto& kv) { return kv.first == target; });
    const bool exists = entry != store_.end();

    if (precond && precond->first) {
        // If-Match: strong comparison against the current ETag.
        const bool ok = exists && http::etag_match(precond->second, entry->second.etag,
                                                   http::CmpMode::Strong);
        const bool skip = mutant_ == MutantId::M3_skip_precond && is_put;
        if (!ok && !skip) return respond(412, "", "");
    }
    if (precond && !precond->first) {
        // If-None-Match: weak comparison per the current standard.
        const auto mode = mutant_ == MutantId::M1_strong_inm ? http::CmpMode::Strong
                                                             : http::CmpMode::Weak;
        const bool matched = exists && http::etag_match(precond->second, entry->second.etag, mode);
        if (matched) return respond(is_get ? 304 : 412, "", "");
    }

    if (is_get) {
        if (!exists) return respond(mutant_ == MutantId::M2_skip_404 ? 403 : 404, "", "");
        return respond(200, entry->second.etag, entry->second.content);
    }

    // PUT: create or replace, minting a fresh ETag.
    std::string actual = target;
    if (mutant_ == MutantId::M4_wrong_target) actual += ".bak";
    const Entry fresh{body, fresh_etag()};
    auto slot = std::find_if(store_.begin(), store_.end(),
                             [&](const auto& kv) { return kv.first == actual; });
    if (slot == store_.end()) store_.emplace_back(actual, fresh);
    else slot->second = fresh;
    return respond(204, "", "");
}

// --- in-process transports ------------------------------------------------------

std::optional<std::string> InprocTransport::send(http::Endpoint from, const std::string& bytes) {
    ready_.emplace_back(from, server_.handle(bytes));
    return std::nullopt;
}

RecvResult InprocTransport::recv(unsigned) {
    if (ready_.empty()) return RecvResult::silence();
    auto [ep, bytes] = ready_.front();
    ready_.pop_front();
    return RecvResult::message(ep, std::move(bytes));
}

std::optional<std::string> ReorderingTransport::send(http::Endpoint from,
                                                     const std::string& bytes) {
    pending_[from].push_back(server_.handle(bytes));
    return std::nullopt;
}

RecvResult ReorderingTransport::recv(unsigned) {
    std::vector<http::Endpoint> nonempty;
    for (const auto& [ep, q] : pending_)
        if (!q.empty()) nonempty.push_back(ep);
    if (nonempty.empty()) return RecvResult::silence();
    if (rng_.chance(delay_percent_)) return RecvResult::silence();  // simulated delay
    const auto ep = nonempty[rng_.below(nonempty.size())];
    std::string bytes = pending_[ep].front();
    pending_[ep].pop_front();
    return RecvResult::message(ep, std::move(bytes));
}

// --- sockets ------------------------------------------------------------------------

int serve_tcp(int port, std::optional<MutantId> mutant, std::uint64_t seed,
              const std::atomic<bool>& stop, const std::function<void(int)>& on_ready) {
    ReferenceServer server(mutant, seed);

    const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0) throw ConfigError(std::string("socket: ") + std::strerror(errno));
    const int enable = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &enable, sizeof(enable));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(listener);
        throw ConfigError(std::string("bind: ") + std::strerror(errno));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
    const int bound = ntohs(addr.sin_port);
    if (::listen(listener, 8) != 0) {
        ::close(listener);
        throw ConfigError(std::string("listen: ") + std::strerror(errno));
    }
    if (on_ready) on_ready(bound);

    std::map<int, std::string> buffers;
    while (!stop.load()) {
        std::vector<pollfd> fds{{listener, POLLIN, 0}};
        for (const auto& [fd, buf] : buffers) fds.push_back({fd, POLLIN, 0});
        const int rc = ::poll(fds.data(), fds.size(), 50);
        if (rc <= 0) continue;

        if (fds[0].revents & POLLIN) {
            const int conn = ::accept(listener, nullptr, nullptr);
            if (conn >= 0) buffers[conn];
        }
        std::vector<int> closed;
        for (std::size_t i = 1; i < fds.size(); ++i) {
            if (!(fds[i].revents & POLLIN)) continue;
            char chunk[4096];
            const auto n = ::recv(fds[i].fd, chunk, sizeof(chunk), 0);
            if (n <= 0) {
                closed.push_back(fds[i].fd);
                continue;
            }
            auto& buf = buffers[fds[i].fd];
            buf.append(chunk, static_cast<std::size_t>(n));
            while (const auto msg_len = wire::frame_one(buf)) {
                const std::string request = buf.substr(0, *msg_len);
                buf.erase(0, *msg_len);
                const std::string response = server.handle(request);
                std::size_t off = 0;
                while (off < response.size()) {
                    const auto sent = ::send(fds[i].fd, response.data() + off,
                                             response.size() - off, 0);
                    if (sent <= 0) break;
                    off += static_cast<std::size_t>(sent);
                }
            }
        }
        for (int fd : closed) {
            ::close(fd);
            buffers.erase(fd);
        }
    }
    for (const auto& [fd, buf] : buffers) ::close(fd);
    ::close(listener);
    return bound;
}

SocketTransport::SocketTransport(std::string host, int port)
    : host_(std::move(host)), port_(port) {}

SocketTransport::~SocketTransport() {
    for (const auto& [ep, fd] : fds_) ::close(fd);
}

std::optional<std::string> SocketTransport::ensure_connected(http::Endpoint from) {
    if (fds_.count(from)) return std::nullopt;

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const std::string port = std::to_string(port_);
    if (const int rc = ::getaddrinfo(host_.c_str(), port.c_str(), &hints, &result); rc != 0) {
        return std::string("getaddrinfo: ") + gai_strerror(rc);
    }
    int fd = -1;
    for (addrinfo* ai = result; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(result);
    if (fd < 0) return "cannot connect to " + host_ + ":" + port;
    fds_[from] = fd;
    buffers_[from];
    return std::nullopt;
}

std::optional<std::string> SocketTransport::send(http::Endpoint from, const std::string& bytes) {
    if (auto err = ensure_connected(from)) return err;
    const int fd = fds_[from];
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = ::send(fd, bytes.data() + off, bytes.size() - off, 0);
        if (n < 0) return std::string("send: ") + std::strerror(errno);
        off += static_cast<std::size_t>(n);
    }
    return std::nullopt;
}

RecvResult SocketTransport::recv(unsigned timeout_ms) {
    // A complete message may already be buffered.
    for (auto& [ep, buf] : buffers_) {
        if (const auto len = wire::frame_one(buf)) {
            std::string bytes = buf.substr(0, *len);
            buf.erase(0, *len);
            return RecvResult::message(ep, std::move(bytes));
        }
    }
    if (fds_.empty()) return RecvResult::silence();

    std::vector<pollfd> fds;
    std::vector<http::Endpoint> eps;
    for (const auto& [ep, fd] : fds_) {
        fds.push_back({fd, POLLIN, 0});
        eps.push_back(ep);
    }
    const int rc = ::poll(fds.data(), fds.size(), static_cast<int>(timeout_ms));
    if (rc < 0) return RecvResult::fault(std::string("poll: ") + std::strerror(errno));
    if (rc == 0) return RecvResult::silence();

    for (std::size_t i = 0; i < fds.size(); ++i) {
        if (!(fds[i].revents & POLLIN)) continue;
        char chunk[4096];
        const auto n = ::recv(fds[i].fd, chunk, sizeof(chunk), 0);
        if (n < 0) return RecvResult::fault(std::string("recv: ") + std::strerror(errno));
        if (n == 0) return RecvResult::fault("connection closed by the server");
        buffers_[eps[i]].append(chunk, static_cast<std::size_t>(n));
    }
    for (auto& [ep, buf] : buffers_) {
        if (const auto len = wire::frame_one(buf)) {
            std::string bytes = buf.substr(0, *len);
            buf.erase(0, *len);
            return RecvResult::message(ep, std::move(bytes));
        }
    }
    return RecvResult::silence();
}

}  // namespace mbt::sut
