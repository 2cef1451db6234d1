#include <doctest.h>

#include "../support.hpp"
#include "srv/dsl.hpp"

using namespace srv;
using namespace srv::dsl;

TEST_CASE("a fresh monitor starts at instant zero and resolves nothing") {
    auto spec = test::checked(examples::altitude());
    MonitorState st = start(spec);
    CHECK(st.next_instant() == 0);
    auto env = make_environment();
    auto out = finish(st, env);
    CHECK(out.resolved.empty());
    CHECK_FALSE(out.verdict);
    auto res = test::online(spec, {});
    CHECK(res.outputs.at("alt_ok").empty());
}

TEST_CASE("alt_ok resolves one instant per step") {
    auto spec = test::checked(examples::altitude());
    auto env = make_environment();
    MonitorState st = start(spec);
    auto trace = test::column<double>("altitude", {50, 120});
    auto o0 = step(st, trace[0], env);
    REQUIRE(o0.resolved.size() == 1);
    CHECK(o0.resolved[0].instant == 0);
    CHECK(o0.resolved[0].cell.value == Value::boolean(true));
    auto o1 = step(st, trace[1], env);
    REQUIRE(o1.resolved.size() == 1);
    CHECK(o1.resolved[0].cell.value == Value::boolean(false));
    CHECK(finish(st, env).resolved.empty());

    auto three = test::online(spec, test::column<double>("altitude", {50, 99, 100}));
    CHECK(test::bools(three.outputs.at("alt_ok")) == std::vector<bool>{true, true, false});
}

TEST_CASE("steps must arrive in instant order") {
    auto spec = test::checked(examples::altitude());
    auto env = make_environment();
    MonitorState st = start(spec);
    auto e = test::ev(1, {{"altitude", Value::real(1)}});
    try {
        step(st, e, env);
        FAIL("expected an instant mismatch");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::InstantMismatch);
    }
    auto wrong = test::ev(0, {{"altitude", Value::integer(1)}});
    CHECK_THROWS_AS(step(st, wrong, env), Error);
}

TEST_CASE("offsets fall back to their default outside the trace") {
    SpecBuilder b("offsets");
    b.input("altitude", Type::real());
    b.output("d", Type::real(), at("altitude", -1, lit(0.0)));
    b.output("n", Type::real(), at("altitude", 1, lit(9.0)));
    auto spec = test::checked(b.build());
    CHECK(spec->max_fwd() == 1);
    CHECK(spec->max_back() == 1);

    auto env = make_environment();
    MonitorState st = start(spec);
    auto trace = test::column<double>("altitude", {4, 5, 6});
    auto o0 = step(st, trace[0], env);
    // d(0) only needs the past; n(0) waits for instant 1.
    REQUIRE(o0.resolved.size() == 1);
    CHECK(o0.resolved[0].stream == "d");
    CHECK(o0.resolved[0].cell.value == Value::real(0.0));
    auto o1 = step(st, trace[1], env);
    bool n0 = false;
    for (const auto& r : o1.resolved) n0 = n0 || (r.stream == "n" && r.instant == 0 && r.cell.value == Value::real(5));
    CHECK(n0);
    step(st, trace[2], env);
    auto fin = finish(st, env);
    REQUIRE(fin.resolved.size() == 1);
    CHECK(fin.resolved[0].instant == 2);
    CHECK(fin.resolved[0].cell.value == Value::real(9.0));
}

TEST_CASE("look-ahead of one resolves instant zero after the second event") {
    SpecBuilder b("ahead");
    b.input("x", Type::integer());
    b.output("y", Type::integer(), at("x", 1, lit(0)));
    auto spec = test::checked(b.build());
    auto env = make_environment();
    MonitorState st = start(spec);
    CHECK(step(st, test::ev(0, {{"x", Value::integer(3)}}), env).resolved.empty());
    auto o = step(st, test::ev(1, {{"x", Value::integer(4)}}), env);
    REQUIRE(o.resolved.size() == 1);
    CHECK(o.resolved[0].instant == 0);
    CHECK(o.resolved[0].cell.value == Value::integer(4));
}

namespace {

std::map<std::string, ValueList> cols(const std::vector<double>& r, const std::vector<double>& s) {
    ValueList a, b;
    for (double x : r) a.push_back(Value::real(x));
    for (double x : s) b.push_back(Value::real(x));
    return {{"r", a}, {"s", b}};
}

// Direct reading of the crossing definition.
bool cross_oracle(const std::vector<double>& r, const std::vector<double>& s) {
    bool last = false;
    for (std::size_t t = 0; t < r.size(); ++t) {
        last = t > 0 && ((r[t] < s[t]) != (r[t - 1] < s[t - 1]));
        if (last) return true;
    }
    return last;
}

} // namespace

TEST_CASE("nested cross monitor returns early or at the end") {
    auto nested = test::checked(examples::cross_nested());
    auto env = make_environment();
    CHECK(run_nested(nested, cols({1, 3}, {2, 2}), env) == Value::boolean(true));
    CHECK(run_nested(nested, cols({1, 2}, {5, 6}), env) == Value::boolean(false));
    try {
        run_nested(nested, cols({}, {}), env);
        FAIL("expected NoVerdict");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NoVerdict);
    }
    CHECK_THROWS_AS(run_nested(nested, cols({1, 2}, {1}), env), Error);
    MonitorState st = start(nested);
    CHECK_THROWS_AS(finish(st, env), Error);
}

TEST_CASE("property: early return equals the offline value at the first true condition") {
    auto nested = test::checked(examples::cross_nested());
    std::mt19937_64 rng(3);
    for (int round = 0; round < 200; ++round) {
        std::size_t n = 1 + rng() % 30;
        std::vector<double> r, s;
        for (std::size_t i = 0; i < n; ++i) {
            r.push_back(static_cast<double>(rng() % 10));
            s.push_back(static_cast<double>(rng() % 10));
        }
        auto env = make_environment();
        Value got = run_nested(nested, cols(r, s), env);
        CHECK(got == Value::boolean(cross_oracle(r, s)));
        CHECK(got == offline_verdict(nested, columns_to_events(*nested, cols(r, s)), make_environment()));
        if (got.as_bool()) CHECK(env.stats->nested_events.load() <= static_cast<std::int64_t>(n));
    }
}

TEST_CASE("finer spec stops as soon as one destination sees six flooding sources") {
    auto finer = test::checked(examples::finer_spec(1000, 5));
    ValueList src, dst, pps;
    for (int i = 0; i < 100; ++i) {
        bool flood = i >= 20 && i < 32;
        src.push_back(Value::text("h" + std::to_string(flood ? i % 6 : i % 3)));
        dst.push_back(Value::text(flood ? "victim" : "other"));
        pps.push_back(Value::integer(flood ? 5000 : 10));
    }
    auto env = make_environment();
    Value v = run_nested(finer, {{"src", src}, {"dst", dst}, {"pps", pps}}, env);
    CHECK(v == Value::boolean(true));
    // The sixth source shows up at index 25.
    CHECK(env.stats->nested_events.load() == 26);
}

TEST_CASE("freeze and thaw resume exactly") {
    auto spec = test::checked(examples::paramaltitude());
    auto trace = test::column<double>("altitude", {90, 120, 160, 140, 80});
    auto whole = test::online(spec, trace);

    auto env = make_environment();
    MonitorState st = start(spec);
    OutputStreams got;
    auto absorb = [&](const StepOutput& o) {
        for (const auto& r : o.resolved) got[r.stream].push_back(r.cell);
    };
    for (int i = 0; i < 3; ++i) absorb(step(st, trace[static_cast<std::size_t>(i)], env));
    FrozenMonitor f = freeze(st);
    std::string text = serialize_frozen(f);
    MonitorState resumed = thaw(deserialize_frozen(text, spec));
    for (int i = 3; i < 5; ++i) absorb(step(resumed, trace[static_cast<std::size_t>(i)], env));
    absorb(finish(resumed, env));
    CHECK(got == whole.outputs);

    MonitorState fresh = thaw(freeze(start(spec)));
    CHECK(fresh.next_instant() == 0);
    CHECK(test::online(spec, trace).outputs == whole.outputs);
}

TEST_CASE("frozen states only thaw into the spec that produced them") {
    auto a = test::checked(examples::altitude());
    auto b = test::checked(examples::paramaltitude());
    std::string text = serialize_frozen(freeze(start(a)));
    try {
        deserialize_frozen(text, b);
        FAIL("expected a version mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::VersionMismatch);
    }
    json doc = json::parse(text);
    doc["version"] = 99;
    CHECK_THROWS_AS(deserialize_frozen(doc.dump(), a), Error);
}

TEST_CASE("property: window occupancy is bounded by the spec, not the trace") {
    for (const auto& b : builtins()) {
        std::size_t bound = static_cast<std::size_t>(b.spec->max_back() + b.spec->max_fwd() + 1);
        Scenario sc = b.random(99, 400);
        auto env = scenario_environment(sc);
        MonitorState st = start(b.spec);
        for (const auto& e : sc.trace) {
            step(st, e, env);
            CHECK(st.window_occupancy() <= bound);
        }
        finish(st, env);
        CHECK(st.peak_occupancy_ <= bound);
    }
}

TEST_CASE("property: every (instant, output) is reported exactly once, in order") {
    for (const auto& b : builtins()) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Scenario sc = b.random(seed, 150);
            auto env = scenario_environment(sc);
            MonitorState st = start(b.spec);
            std::map<std::string, Instant> next;
            auto check = [&](const StepOutput& o) {
                Instant last = -1;
                for (const auto& r : o.resolved) {
                    CHECK(r.instant >= last);
                    last = r.instant;
                    CHECK(r.instant == next[r.stream]);
                    next[r.stream] = r.instant + 1;
                }
            };
            for (const auto& e : sc.trace) check(step(st, e, env));
            check(finish(st, env));
            for (int id : b.spec->outputs()) {
                CHECK(next[b.spec->stream(id).name] == static_cast<Instant>(sc.trace.size()));
            }
        }
    }
}

TEST_CASE("evaluation errors poison the cell, not the monitor") {
    SpecBuilder b("div");
    b.input("x", Type::integer());
    b.output("q", Type::integer(), lit(10) / now("x"));
    b.output("after", Type::integer(), at("q", -1, lit(0)) + lit(1));
    auto spec = test::checked(b.build());
    auto res = test::online(spec, test::column<std::int64_t>("x", {2, 0, 5}));
    const auto& q = res.outputs.at("q");
    CHECK(q[0].value == Value::integer(5));
    CHECK_FALSE(q[1].ok());
    CHECK(q[2].value == Value::integer(2));
    CHECK_FALSE(res.outputs.at("after")[2].ok());
    auto off = test::offline(spec, test::column<std::int64_t>("x", {2, 0, 5}));
    CHECK(off.outputs == res.outputs);
}
