#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <thread>

#include "mbt/harness.hpp"
#include "mbt/sut.hpp"
#include "mbt/util.hpp"
#include "mbt/wire.hpp"

using namespace mbt;
using namespace mbt::wire;
using http::ConcreteResponse;
using http::Method;
using http::PrecondKind;
using http::Request;

namespace {

Request sample_get(std::string target, std::optional<http::Precondition> pre = std::nullopt) {
    Request q;
    q.method = Method::Get;
    q.target = std::move(target);
    q.precondition = std::move(pre);
    return q;
}

Request sample_put(std::string target, std::string body,
                   std::optional<http::Precondition> pre = std::nullopt) {
    Request q;
    q.method = Method::Put;
    q.target = std::move(target);
    q.body = std::move(body);
    q.precondition = std::move(pre);
    return q;
}

}  // namespace

TEST_CASE("request encoding matches the documented wire form") {
    const auto bytes =
        encode_request(sample_get("/target", http::Precondition{PrecondKind::IfNoneMatch,
                                                                "\"tag-foo\""}));
    CHECK(bytes ==
          "GET /target HTTP/1.1\r\n"
          "If-None-Match: \"tag-foo\"\r\n"
          "Content-Length: 0\r\n"
          "\r\n");

    ConcreteResponse not_modified;
    not_modified.status = 304;
    not_modified.fields.emplace_back("Content-Length", "0");
    CHECK(encode_response(not_modified) ==
          "HTTP/1.1 304 Not Modified\r\n"
          "Content-Length: 0\r\n"
          "\r\n");
}

TEST_CASE("codec round-trips randomly generated messages") {
    Rng rng(2718);
    const harness::FunctionRegistry reg;
    for (int i = 0; i < 1000; ++i) {
        const auto jexp = harness::gen_request_jexp({}, {}, rng);
        const auto ir = harness::eval_jexp(jexp, {}, reg);
        REQUIRE(ir.has_value());
        const auto q = harness::request_of_ir(*ir);
        REQUIRE(q.has_value());
        const auto decoded = decode_request(encode_request(*q));
        REQUIRE(decoded.has_value());
        CHECK(*decoded == *q);
    }

    for (int i = 0; i < 200; ++i) {
        ConcreteResponse a;
        a.status = rng.coin() ? 200 : 204;
        std::string body;
        for (std::uint64_t k = rng.below(6); k > 0; --k) body.push_back('a' + char(rng.below(26)));
        a.body = body;
        a.fields.emplace_back("Content-Length", std::to_string(body.size()));
        if (rng.coin()) a.fields.emplace_back("ETag", rng.coin() ? "W/\"t\"" : "\"t\"");
        const auto decoded = decode_response(encode_response(a));
        REQUIRE(decoded.has_value());
        CHECK(*decoded == a);
    }
}

TEST_CASE("decoder rejects malformed messages with a diagnosis") {
    std::string diag;
    CHECK_FALSE(decode_response("HTTP/1.1 200 OK\r\n\r\n", &diag).has_value());
    CHECK(diag.find("Content-Length") != std::string::npos);

    CHECK_FALSE(decode_response("HTTP/1.1 200 OK\r\nContent-Length: 5\r\n\r\nab", &diag).has_value());
    CHECK_FALSE(decode_request("POST /x HTTP/1.1\r\nContent-Length: 0\r\n\r\n", &diag).has_value());
    CHECK_FALSE(decode_request("GET  HTTP/1.1\r\nContent-Length: 0\r\n\r\n", &diag).has_value());
    CHECK_FALSE(decode_request("GET /x HTTP/1.1\r\nIf-Match: \r\nContent-Length: 0\r\n\r\n", &diag)
                    .has_value());
    CHECK_FALSE(decode_response("garbage", &diag).has_value());
}

TEST_CASE("frame_one splits pipelined messages") {
    const std::string one = "HTTP/1.1 200 OK\r\nContent-Length: 3\r\n\r\nabc";
    const std::string buffer = one + "HTTP/1.1 204 No Content\r\nContent-Length: 0\r\n\r\n";
    const auto len = frame_one(buffer);
    REQUIRE(len.has_value());
    CHECK(*len == one.size());
    CHECK_FALSE(frame_one("HTTP/1.1 200 OK\r\nContent-Le").has_value());
    CHECK_FALSE(frame_one(one.substr(0, one.size() - 1)).has_value());
}

namespace {

http::ConcreteResponse exchange(sut::ReferenceServer& server, const Request& q) {
    const auto bytes = server.handle(encode_request(q));
    auto a = decode_response(bytes);
    REQUIRE_MESSAGE(a.has_value(), bytes);
    return *a;
}

}  // namespace

TEST_CASE("reference server implements the subset semantics") {
    sut::ReferenceServer server(std::nullopt, 7);

    // Missing target.
    CHECK(exchange(server, sample_get("/a")).status == 404);

    // Create, then read back with the minted ETag.
    CHECK(exchange(server, sample_put("/a", "hello")).status == 204);
    const auto ok = exchange(server, sample_get("/a"));
    CHECK(ok.status == 200);
    CHECK(ok.body == "hello");
    const auto etag = ok.field("ETag");
    REQUIRE(etag.has_value());
    CHECK(ok.field("Content-Length") == std::optional<std::string>{"5"});

    // Conditional GET: If-None-Match with the current tag is 304 (weak
    // comparison), another tag refetches.
    CHECK(exchange(server, sample_get("/a", http::Precondition{PrecondKind::IfNoneMatch, *etag}))
              .status == 304);
    CHECK(exchange(server, sample_get("/a", http::Precondition{PrecondKind::IfNoneMatch, "\"zz\""}))
              .status == 200);

    // Conditional PUT: If-Match must strong-match.
    const bool weak = http::is_weak_etag(*etag);
    const auto put_cond =
        exchange(server, sample_put("/a", "v2", http::Precondition{PrecondKind::IfMatch, *etag}));
    CHECK(put_cond.status == (weak ? 412 : 204));
    CHECK(exchange(server, sample_put("/a", "v3", http::Precondition{PrecondKind::IfMatch, "\"no\""}))
              .status == 412);
    // If-Match on a missing target always fails.
    CHECK(exchange(server, sample_put("/b", "x", http::Precondition{PrecondKind::IfMatch, "\"t\""}))
              .status == 412);
}

TEST_CASE("each mutant deviates in exactly its advertised way") {
    SUBCASE("m1 compares If-None-Match strongly") {
        // Find a seed whose first minted ETag is weak so weak/strong differ.
        for (std::uint64_t seed = 1;; ++seed) {
            sut::ReferenceServer probe(std::nullopt, seed);
            exchange(probe, sample_put("/a", "v"));
            const auto etag = *exchange(probe, sample_get("/a")).field("ETag");
            if (!http::is_weak_etag(etag)) continue;

            sut::ReferenceServer correct(std::nullopt, seed);
            sut::ReferenceServer mutant(sut::MutantId::M1_strong_inm, seed);
            for (auto* server : {&correct, &mutant}) exchange(*server, sample_put("/a", "v"));
            const auto pre = http::Precondition{PrecondKind::IfNoneMatch, etag};
            CHECK(exchange(correct, sample_get("/a", pre)).status == 304);
            CHECK(exchange(mutant, sample_get("/a", pre)).status == 200);
            break;
        }
    }
    SUBCASE("m2 answers 403 instead of 404") {
        sut::ReferenceServer mutant(sut::MutantId::M2_skip_404, 7);
        CHECK(exchange(mutant, sample_get("/missing")).status == 403);
    }
    SUBCASE("m3 skips the If-Match check on PUT") {
        sut::ReferenceServer mutant(sut::MutantId::M3_skip_precond, 7);
        CHECK(exchange(mutant, sample_put("/a", "v", http::Precondition{PrecondKind::IfMatch, "\"x\""}))
                  .status == 204);
        // The GET path still checks preconditions.
        CHECK(exchange(mutant, sample_get("/a", http::Precondition{PrecondKind::IfMatch, "\"x\""}))
                  .status == 412);
    }
    SUBCASE("m4 writes elsewhere but still claims success") {
        sut::ReferenceServer mutant(sut::MutantId::M4_wrong_target, 7);
        CHECK(exchange(mutant, sample_put("/a", "v")).status == 204);
        CHECK(exchange(mutant, sample_get("/a")).status == 404);
    }
}

TEST_CASE("in-process transport is synchronous FIFO") {
    sut::ReferenceServer server(std::nullopt, 3);
    sut::InprocTransport transport(server);

    CHECK(transport.recv(0).kind == sut::RecvResult::Kind::Silence);
    CHECK_FALSE(transport.send(1, encode_request(sample_put("/a", "x"))).has_value());
    CHECK_FALSE(transport.send(2, encode_request(sample_get("/a"))).has_value());

    const auto first = transport.recv(0);
    REQUIRE(first.kind == sut::RecvResult::Kind::Message);
    CHECK(first.endpoint == 1);
    CHECK(decode_response(first.bytes)->status == 204);

    const auto second = transport.recv(0);
    CHECK(second.endpoint == 2);
    CHECK(decode_response(second.bytes)->status == 200);
    CHECK(transport.recv(0).kind == sut::RecvResult::Kind::Silence);
}

TEST_CASE("reordering transport preserves per-endpoint order") {
    sut::ReferenceServer server(std::nullopt, 3);
    sut::ReorderingTransport transport(server, 99, 20);

    for (int i = 0; i < 4; ++i)
        CHECK_FALSE(transport.send(1, encode_request(sample_put("/p", std::to_string(i)))).has_value());
    for (int i = 0; i < 4; ++i)
        CHECK_FALSE(transport.send(2, encode_request(sample_get("/p"))).has_value());

    int got = 0;
    std::map<http::Endpoint, int> last_seen;
    while (got < 8) {
        const auto r = transport.recv(0);
        if (r.kind != sut::RecvResult::Kind::Message) continue;  // injected delay
        ++got;
        last_seen[r.endpoint]++;
    }
    CHECK(last_seen[1] == 4);
    CHECK(last_seen[2] == 4);
}

TEST_CASE("socket transport talks to a served reference server") {
    std::atomic<bool> stop{false};
    std::atomic<int> port{0};
    std::thread server_thread([&] {
        sut::serve_tcp(0, std::nullopt, 12, stop, [&](int p) { port = p; });
    });
    while (port.load() == 0) std::this_thread::yield();

    {
        sut::SocketTransport transport("127.0.0.1", port.load());
        CHECK_FALSE(transport.send(1, encode_request(sample_put("/s", "net"))).has_value());
        sut::RecvResult got = transport.recv(500);
        for (int tries = 0; tries < 100 && got.kind == sut::RecvResult::Kind::Silence; ++tries) {
            got = transport.recv(50);
        }
        REQUIRE(got.kind == sut::RecvResult::Kind::Message);
        CHECK(got.endpoint == 1);
        CHECK(decode_response(got.bytes)->status == 204);

        // A second endpoint gets its own connection.
        CHECK_FALSE(transport.send(2, encode_request(sample_get("/s"))).has_value());
        got = transport.recv(500);
        for (int tries = 0; tries < 100 && got.kind == sut::RecvResult::Kind::Silence; ++tries) {
            got = transport.recv(50);
        }
        REQUIRE(got.kind == sut::RecvResult::Kind::Message);
        CHECK(got.endpoint == 2);
        CHECK(decode_response(got.bytes)->body == "net");
    }

    stop = true;
    server_thread.join();
}
