#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mbt/harness.hpp"

using namespace mbt;
using namespace mbt::harness;

namespace {

// The directory-listing response used throughout the Jpath examples.
IR listing_a2() {
    return IR::parse(R"({
      "files": [
        {"name": "foo", "mode": 755},
        {"name": "bar", "mode": 500}
      ],
      "exitCode": 0
    })");
}

IR j2() { return IR::parse(R"([{"foo": 21}, {"bar": 22}])"); }
IR j3() { return IR::parse(R"([{"bar": 31}, {"baz": 32}, {"foo": 33}])"); }

}  // namespace

TEST_CASE("jpath parsing and printing") {
    const Jpath p = parse_jpath("this@\"files\"#2@\"mode\"");
    REQUIRE(p.size() == 3);
    CHECK(p[0] == JpathStep{JpathStep::Kind::Field, 1, "files"});
    CHECK(p[1] == JpathStep{JpathStep::Kind::Index, 2, ""});
    CHECK(p[2] == JpathStep{JpathStep::Kind::Field, 1, "mode"});
    CHECK(print_jpath(p) == "this@\"files\"#2@\"mode\"");

    CHECK(parse_jpath("this").empty());
    // Separators inside quoted field names are plain characters.
    const Jpath odd = parse_jpath("this@\"a@b#c\"");
    CHECK(odd[0].field == "a@b#c");
    CHECK(parse_jpath(print_jpath(odd)) == odd);

    CHECK_THROWS_AS(parse_jpath("files#2"), ConfigError);
    CHECK_THROWS_AS(parse_jpath("this#0"), ConfigError);
    CHECK_THROWS_AS(parse_jpath("this@mode"), ConfigError);
}

TEST_CASE("strict jpath navigation") {
    const IR a2 = listing_a2();
    auto mode = get_jpath(parse_jpath("this@\"files\"#2@\"mode\""), a2);
    REQUIRE(mode.has_value());
    CHECK(*mode == IR(500));

    CHECK(get_jpath(parse_jpath("this"), a2) == a2);
    CHECK_FALSE(get_jpath(parse_jpath("this@\"missing\""), a2).has_value());
    CHECK_FALSE(get_jpath(parse_jpath("this@\"files\"#3"), a2).has_value());
    CHECK_FALSE(get_jpath(parse_jpath("this#1"), a2).has_value());  // object, not array
}

TEST_CASE("loose jpath retries sibling array elements") {
    const Jpath p = parse_jpath("this#3@\"bar\"");
    // j2 has no third element: the second one carries "bar".
    CHECK(loose_get_jpath(p, j2()) == IR(22));
    // j3's third element lacks "bar": the first one has it.
    CHECK(loose_get_jpath(p, j3()) == IR(31));

    // A failing field step is not recovered.
    CHECK_FALSE(loose_get_jpath(parse_jpath("this@\"nope\""), listing_a2()).has_value());
}

TEST_CASE("strict success implies loose agreement") {
    Rng rng(77);
    const std::vector<IR> pool{listing_a2(), j2(), j3(), IR::parse(R"({"a":[1,2,3],"b":{"c":9}})")};
    const std::vector<std::string> paths{
        "this",
        "this@\"files\"#1@\"name\"",
        "this@\"files\"#2@\"mode\"",
        "this#1",
        "this#2",
        "this@\"a\"#3",
        "this@\"b\"@\"c\"",
        "this@\"exitCode\"",
    };
    for (int iter = 0; iter < 400; ++iter) {
        const IR& j = pool[rng.below(pool.size())];
        const Jpath p = parse_jpath(paths[rng.below(paths.size())]);
        if (auto strict = get_jpath(p, j)) {
            CHECK(loose_get_jpath(p, j) == strict);
        }
    }
}

TEST_CASE("eval_jexp resolves labels loosely over the whole trace") {
    const IR q1 = IR::parse(R"({"command":"ls","args":[]})");
    const IR q2 = IR::parse(R"({"command":"ls","args":[]})");
    const FunctionRegistry reg;

    // Label 6 is absent from the first trace and names an object in the
    // second; both times some other message supplies the value.
    const Jexp e = make_hole(6, "this#2@\"foo\"", "id");
    const LabelledTrace t1{{1, q1}, {2, j2()}, {5, q2}};
    CHECK(eval_jexp(e, t1, reg) == IR(21));

    const LabelledTrace t2{{3, q1}, {4, j3()}, {5, q2}, {6, listing_a2()}};
    CHECK(eval_jexp(e, t2, reg) == IR(33));

    // No message anywhere can satisfy the path.
    const LabelledTrace hopeless{{1, q1}};
    CHECK_FALSE(eval_jexp(e, hopeless, reg).has_value());
}

TEST_CASE("the chmod jexp instantiates against the labelled trace") {
    const IR q1 = IR::parse(R"({"command":"ls","args":[]})");
    const IR q2 = IR::parse(R"({"command":"ls","args":[]})");
    const IR a1 = IR::parse(R"({"files":[],"exitCode":0})");
    const LabelledTrace labelled_trace{{1, q1}, {3, q2}, {4, listing_a2()}, {2, a1}};

    Jexp e5;
    e5["command"] = "chmod";
    e5["args"] = Jexp::array({make_hole(4, "this@\"files\"#2@\"mode\"", "mode_add_write"),
                              make_hole(4, "this@\"files\"#2@\"name\"", "id")});

    const FunctionRegistry reg;
    std::vector<IR> holes;
    const auto got = eval_jexp(e5, labelled_trace, reg, &holes);
    REQUIRE(got.has_value());
    CHECK(*got == IR::parse(R"({"command":"chmod","args":[700,"bar"]})"));
    REQUIRE(holes.size() == 2);
    CHECK(holes[0] == IR(700));
    CHECK(holes[1] == IR("bar"));
}

TEST_CASE("hole-free jexps evaluate to themselves") {
    Rng rng(31);
    const FunctionRegistry reg;
    for (int iter = 0; iter < 100; ++iter) {
        const Jexp j = gen_request_jexp({}, {}, rng);  // empty trace: no holes
        REQUIRE_FALSE(j.dump().find("$label") != std::string::npos);
        CHECK(eval_jexp(j, {}, reg) == j);
    }
}

TEST_CASE("unknown hole functions are a configuration error") {
    const FunctionRegistry reg;
    const Jexp e = make_hole(2, "this", "no_such_fn");
    const LabelledTrace t{{2, IR(1)}};
    CHECK_THROWS_AS(eval_jexp(e, t, reg), ConfigError);
}

TEST_CASE("mode_add_write treats numbers as octal mode bits") {
    const FunctionRegistry reg;
    CHECK(reg.get("mode_add_write")(IR(500)) == IR(700));
    CHECK(reg.get("mode_add_write")(IR(755)) == IR(755));
    CHECK(reg.get("mode_add_write")(IR(44)) == IR(244));
    CHECK(reg.get("mode_add_write")(IR("x")) == IR("x"));  // non-numbers pass through
    CHECK(reg.get("id")(IR(500)) == IR(500));
}

TEST_CASE("trace recorder: requests odd and increasing, responses successor-labelled") {
    TraceRecorder rec;
    http::Request q;
    q.method = http::Method::Put;
    q.target = "/k";
    q.body = "v";

    const auto l1 = rec.record_sent(request_ir(q, 1), 1);
    const auto l3 = rec.record_sent(request_ir(q, 2), 2);
    CHECK(l1 == 1);
    CHECK(l3 == 3);

    http::ConcreteResponse a;
    a.status = 204;
    a.fields.emplace_back("Content-Length", "0");

    // Client 2's response matches the request it sent, not client 1's.
    CHECK(rec.record_received(response_ir(a, 2), 2) == 4);
    CHECK(rec.record_received(response_ir(a, 1), 1) == 2);

    // Replay keeps the forced labels; later fresh labels stay clear of them.
    TraceRecorder replay;
    CHECK(replay.record_sent(request_ir(q, 1), 1, 7) == 7);
    CHECK(replay.record_sent(request_ir(q, 1), 1) == 9);

    // Per-endpoint pipelining: two requests in flight answer in order.
    TraceRecorder fifo;
    CHECK(fifo.record_sent(request_ir(q, 1), 1) == 1);
    CHECK(fifo.record_sent(request_ir(q, 1), 1) == 3);
    CHECK(fifo.record_received(response_ir(a, 1), 1) == 2);
    CHECK(fifo.record_received(response_ir(a, 1), 1) == 4);
}

TEST_CASE("generator heuristics hit their weighted branch about 90% of the time") {
    GenConfig cfg;
    SUBCASE("gen_path") {
        const http::Sigma state{{"/k", {"v", http::EtagExp::literal("")}}};
        Rng rng(1234);
        int hits = 0;
        for (int i = 0; i < 10000; ++i) hits += gen_path(state, rng, cfg) == "/k";
        CHECK(hits >= 8700);
        CHECK(hits <= 9300);

        // An empty state always falls through to random paths.
        Rng rng2(99);
        for (int i = 0; i < 50; ++i) CHECK(gen_path({}, rng2, cfg) != "/k");
    }
    SUBCASE("gen_etag") {
        http::ConcreteResponse a;
        a.status = 200;
        a.fields.emplace_back("ETag", "\"srv-1\"");
        const LabelledTrace trace{{2, response_ir(a, 1)}};
        Rng rng(4321);
        int hits = 0;
        for (int i = 0; i < 10000; ++i) hits += gen_etag(trace, rng, cfg) == "\"srv-1\"";
        CHECK(hits >= 8700);
        CHECK(hits <= 9300);
    }
    SUBCASE("request jexp etag slot becomes a hole with weight 90") {
        http::ConcreteResponse a;
        a.status = 200;
        a.fields.emplace_back("ETag", "\"srv-1\"");
        const LabelledTrace trace{{2, response_ir(a, 1)}};
        Rng rng(777);
        int with_precond = 0, holes = 0;
        for (int i = 0; i < 10000; ++i) {
            const Jexp j = gen_request_jexp({}, trace, rng);
            if (j["precondition"].is_null()) continue;
            ++with_precond;
            if (is_hole(j["precondition"]["etag"])) {
                ++holes;
                CHECK(j["precondition"]["etag"]["$label"] == 2);
            }
        }
        const double ratio = static_cast<double>(holes) / with_precond;
        CHECK(ratio >= 0.87);
        CHECK(ratio <= 0.93);
    }
}

TEST_CASE("generated jexps serialize round-trip and stay in bounds") {
    Rng rng(555);
    const http::Sigma state{{"/k", {"v", http::EtagExp::literal("")}}};
    http::ConcreteResponse a;
    a.status = 200;
    a.fields.emplace_back("ETag", "W/\"t\"");
    const LabelledTrace trace{{2, response_ir(a, 1)}};
    for (int i = 0; i < 300; ++i) {
        const Jexp j = gen_request_jexp(state, trace, rng);
        CHECK(Jexp::parse(j.dump()) == j);
        CHECK(j["target"].get<std::string>().size() <= 16);
        if (j["method"] == "GET") CHECK(j["body"] == "");
    }
}

TEST_CASE("shrink_candidates enumerates drops first, then simplifications") {
    Jexp q1;
    q1["method"] = "PUT";
    q1["target"] = "/k";
    IR p;
    p["kind"] = "If-Match";
    p["etag"] = make_hole(2, "this@\"fields\"@\"ETag\"", "id");
    q1["precondition"] = p;
    q1["body"] = "xyzw";

    const InputSequence inputs{{1, q1}};
    const std::vector<std::vector<IR>> last{{IR("\"t\"")}};
    const auto cands = shrink_candidates(inputs, last);

    // One drop + hole literalization + body halving + precondition drop.
    REQUIRE(cands.size() == 4);
    CHECK(cands[0].empty());
    CHECK(cands[1][0].jexp["precondition"]["etag"] == IR("\"t\""));
    CHECK(cands[2][0].jexp["body"] == "xy");
    CHECK(cands[3][0].jexp["precondition"].is_null());
    for (const auto& c : cands)
        for (const auto& in : c) CHECK(in.label == 1);  // labels never move

    // Dropping from a longer sequence keeps the survivors' labels.
    Jexp q2 = q1;
    const InputSequence two{{1, q1}, {3, q2}};
    const auto cands2 = shrink_candidates(two, {});
    CHECK(cands2.size() >= two.size());
    CHECK(cands2[0].size() == 1);
    CHECK(cands2[0][0].label == 3);
    CHECK(cands2[1][0].label == 1);
}

TEST_CASE("shrink_loop greedily minimizes while preserving rejection") {
    // Rejection iff the sequence contains a PUT to /hot with nonempty body.
    const auto runner = [](const InputSequence& inputs) {
        RunOutcome out;
        out.hole_values.resize(inputs.size());
        for (const auto& in : inputs) {
            if (in.jexp["method"] == "PUT" && in.jexp["target"] == "/hot" &&
                in.jexp["body"].is_string() && !in.jexp["body"].get<std::string>().empty()) {
                out.rejected = true;
            }
        }
        return out;
    };

    Jexp noise;
    noise["method"] = "GET";
    noise["target"] = "/a";
    noise["precondition"] = nullptr;
    noise["body"] = "";

    Jexp hot;
    hot["method"] = "PUT";
    hot["target"] = "/hot";
    hot["precondition"] = nullptr;
    hot["body"] = "abcdefgh";

    const InputSequence failing{{1, noise}, {3, hot}, {5, noise}};
    const auto shrunk = shrink_loop(failing, runner, 200);
    REQUIRE(shrunk.size() == 1);
    CHECK(shrunk[0].label == 3);
    CHECK(shrunk[0].jexp["body"] == "a");  // halved down to one character
    CHECK(runner(shrunk).rejected);

    // An already-minimal input comes back unchanged.
    const InputSequence minimal{{1, hot}};
    auto again = shrink_loop(minimal, runner, 200);
    REQUIRE(again.size() == 1);
    CHECK(again[0].jexp["target"] == "/hot");

    // A non-rejecting start is a configuration error.
    CHECK_THROWS_AS(shrink_loop({{1, noise}}, runner, 10), ConfigError);
}
