#include <doctest.h>

#include <fstream>
#include <sstream>

#include "../support.hpp"
#include "srv/cli.hpp"
#include "srv/ddos.hpp"
#include "srv/dsl.hpp"
#include "srv/spec_json.hpp"

using namespace srv;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(cli::RunConfig cfg, const std::string& input) {
    std::istringstream in(input);
    std::ostringstream out, err;
    int code = cli::cmd_run(cfg, in, out, err);
    return {code, out.str(), err.str()};
}

std::string lines(const std::vector<Event>& events) {
    std::string s;
    for (const auto& e : events) s += encode_event(e) + "\n";
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int argv_main(std::vector<std::string> args) {
    args.insert(args.begin(), "srv");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::main(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_CASE("run: altitude violation exits 1 and names the instant") {
    auto r = run({.spec = "altitude"}, lines(test::column<double>("altitude", {50, 120})));
    CHECK(r.code == cli::kViolation);
    CHECK(r.out.find(R"({"instant":1,"stream":"alt_ok","value":false})") != std::string::npos);

    auto dir = test::scratch("cli-report");
    auto ok = run({.spec = "altitude", .report = (dir / "r.json").string()},
                  lines(test::column<double>("altitude", {50, 60})));
    CHECK(ok.code == cli::kOk);
    json rep = json::parse(slurp(dir / "r.json"));
    CHECK(rep["violations"] == 0);
    CHECK(rep["events"] == 2);
    CHECK(rep["exit"] == 0);
}

TEST_CASE("run: a valid handshake exits 0") {
    std::vector<Event> trace{
        test::ev(0, {{"src", Value::text("a")}, {"dst", Value::text("b")}, {"msg", Value::text("SYN")}}),
        test::ev(1, {{"src", Value::text("b")}, {"dst", Value::text("a")}, {"msg", Value::text("SYN/ACK")}}),
        test::ev(2, {{"src", Value::text("a")}, {"dst", Value::text("b")}, {"msg", Value::text("ACK")}})};
    CHECK(run({.spec = "handshake"}, lines(trace)).code == cli::kOk);
    trace.erase(trace.begin() + 1);
    trace[1].instant = 1;
    CHECK(run({.spec = "handshake"}, lines(trace)).code == cli::kViolation);
}

TEST_CASE("run: output modes") {
    auto trace = lines(test::column<double>("altitude", {50, 120}));
    auto v = run({.spec = "paramaltitude"}, trace);
    CHECK(v.out.find("climb") == std::string::npos);
    auto f = run({.spec = "paramaltitude", .output = "full"}, trace);
    CHECK(f.out.find("climb") != std::string::npos);
    CHECK(run({.spec = "paramaltitude", .output = "everything"}, trace).code == cli::kEngineError);
}

TEST_CASE("run: retroactive specs need a log store, diagnosed up front") {
    auto trace = lines({test::ev(0, {{"op", Value::text("RW")}, {"file", Value::integer(1)}})});
    auto r = run({.spec = "retro-openfiles"}, trace);
    CHECK(r.code == cli::kEngineError);
    CHECK(r.out.empty());
    CHECK(r.err.find("--log-store") != std::string::npos);

    auto dir = test::scratch("cli-log");
    auto ok = run({.spec = "retro-openfiles", .log_store = (dir / "logs").string()}, trace);
    CHECK(ok.code == cli::kViolation);
    CHECK(slurp(dir / "logs" / "events.log") == trace);
    // A second run starts a fresh log.
    run({.spec = "retro-openfiles", .log_store = (dir / "logs").string()}, trace);
    CHECK(slurp(dir / "logs" / "events.log") == trace);

    auto s3 = run({.spec = "ddos-s3"}, "");
    CHECK(s3.code == cli::kEngineError);
    CHECK(s3.err.find("flows") != std::string::npos);
    CHECK(run({.spec = "altitude", .adapter = "srv-adapter"}, "").code == cli::kEngineError);
}

TEST_CASE("run: malformed input is reported with its line") {
    std::string input = R"({"instant":0,"streams":{"altitude":50.0}})" "\n" R"({"instant":1,"streams":{"alt":1.0}})" "\n";
    auto r = run({.spec = "altitude"}, input);
    CHECK(r.code == cli::kEngineError);
    CHECK(r.err.find("input line 2") != std::string::npos);
    auto gap = run({.spec = "altitude"}, R"({"instant":3,"streams":{"altitude":50.0}})" "\n");
    CHECK(gap.code == cli::kEngineError);
    CHECK(run({.spec = "no-such-spec"}, "").code == cli::kEngineError);
    CHECK(run({.spec = "altitude", .input = "/nonexistent/trace"}, "").code == cli::kEngineError);
}

TEST_CASE("run: evaluation errors exit 2") {
    auto dir = test::scratch("cli-err");
    dsl::SpecBuilder b("div");
    b.input("x", Type::integer());
    b.output("q_ok", Type::boolean(), dsl::lit(10) / dsl::now("x") > dsl::lit(1));
    std::ofstream(dir / "div.json") << spec_to_json(b.spec()).dump();
    auto r = run({.spec = (dir / "div.json").string(), .report = (dir / "r.json").string()},
                 lines(test::column<std::int64_t>("x", {2, 0})));
    CHECK(r.code == cli::kEngineError);
    CHECK(r.out.find(R"("error")") != std::string::npos);
    json rep = json::parse(slurp(dir / "r.json"));
    CHECK(rep["errors"] == 1);
    CHECK(rep["first_error"]["instant"] == 1);
}

TEST_CASE("run: a spec file behaves like the builtin it was exported from") {
    auto dir = test::scratch("cli-file");
    CHECK(argv_main({"show-spec", "handshake"}) == 0);
    std::ofstream(dir / "hs.json") << spec_to_json(find_builtin("handshake")->spec->source()).dump();
    Scenario sc = find_builtin("handshake")->random(4, 80);
    auto a = run({.spec = "handshake", .output = "full"}, lines(sc.trace));
    auto b = run({.spec = (dir / "hs.json").string(), .output = "full"}, lines(sc.trace));
    CHECK(a.code == b.code);
    CHECK(a.out == b.out);
}

TEST_CASE("property: exit code is a function of the *_ok streams") {
    std::mt19937_64 rng(17);
    for (int round = 0; round < 50; ++round) {
        std::vector<double> alt;
        for (int i = 1 + static_cast<int>(rng() % 20); i > 0; --i) alt.push_back(static_cast<double>(rng() % 110));
        bool high = std::any_of(alt.begin(), alt.end(), [](double a) { return a >= 100; });
        CHECK(run({.spec = "altitude"}, lines(test::column<double>("altitude", alt))).code ==
              (high ? cli::kViolation : cli::kOk));
    }
    CHECK(cli::is_violation({0, "alt_ok", Cell::of(Value::boolean(false))}));
    CHECK_FALSE(cli::is_violation({0, "alt_ok", Cell::of(Value::boolean(true))}));
    CHECK_FALSE(cli::is_violation({0, "altitude", Cell::of(Value::boolean(false))}));
    CHECK_FALSE(cli::is_violation({0, "count_ok", Cell::of(Value::integer(0))}));
    CHECK_FALSE(cli::is_violation({0, "x_ok", Cell::poisoned("boom")}));
}

TEST_CASE("ddos pipeline through the command line") {
    auto dir = test::scratch("cli-ddos");
    auto f = (dir / "d2.jsonl").string();
    REQUIRE(argv_main({"gen-traffic", "--profile", "d2", "--flows", "2000", "--seed", "4", "--out", f}) == 0);
    REQUIRE(argv_main({"summarize", "--input", f, "--out", (dir / "d2.sum").string()}) == 0);
    REQUIRE(argv_main({"summarize", "--input", f, "--out", (dir / "d2.sum2").string()}) == 0);
    CHECK(slurp(dir / "d2.sum") == slurp(dir / "d2.sum2"));
    json truth = json::parse(slurp(dir / "d2.jsonl.truth.json"));
    CHECK(truth["batches"][0]["victims"].empty());

    auto s3 = run({.spec = "ddos-s3", .input = (dir / "d2.sum").string(), .stores = {"flows=" + f},
                   .report = (dir / "s3.json").string()},
                  "");
    CHECK(s3.code == cli::kOk);
    json rep = json::parse(slurp(dir / "s3.json"));
    CHECK(rep["nested_runs"] == 0);
    CHECK(rep["nested_events"] == 0);

    // The log directory is another way to provide named stores.
    std::filesystem::create_directories(dir / "logs");
    std::filesystem::copy_file(f, dir / "logs" / "flows.log");
    CHECK(run({.spec = "ddos-s3", .input = (dir / "d2.sum").string(), .log_store = (dir / "logs").string()}, "").code ==
          cli::kOk);

    auto d1 = (dir / "d1.jsonl").string();
    REQUIRE(argv_main({"gen-traffic", "--profile", "d1", "--flows", "3000", "--seed", "2", "--out", d1}) == 0);
    auto mem = run({.spec = "ddos-s2", .input = d1, .log_store = (dir / "l1").string()}, "");
    auto ext = run({.spec = "ddos-s2", .input = d1, .log_store = (dir / "l2").string(), .adapter = SRV_ADAPTER_BIN}, "");
    CHECK(mem.code == cli::kViolation);
    CHECK(ext.code == mem.code);
    CHECK(ext.out == mem.out);

    CHECK(argv_main({"gen-traffic", "--profile", "d7", "--out", f}) == 2);
    CHECK(argv_main({"run"}) == 2);
    CHECK(argv_main({"bogus"}) == 2);
    CHECK(argv_main({"list"}) == 0);
}

TEST_CASE("oracle-check passes on builtins and locates divergences") {
    std::ostringstream out, err;
    std::istringstream empty("");
    CHECK(cli::cmd_oracle_check("altitude", "-", {}, empty, out, err) == cli::kOk);
    for (const char* name : {"crossspec", "handshake", "dyn-altitude"}) {
        Scenario sc = find_builtin(name)->random(6, 100);
        std::istringstream in(lines(sc.trace));
        CHECK(cli::cmd_oracle_check(name, "-", {}, in, out, err) == cli::kOk);
    }

    auto spec = find_builtin("paramaltitude")->spec;
    auto trace = test::column<double>("altitude", {10, 120, 160});
    auto on = test::online(spec, trace);
    auto off = test::offline(spec, trace);
    CHECK_FALSE(cli::first_divergence(*spec, on, off));
    off.outputs["alt150_ok"][2] = Cell::of(Value::boolean(true));
    off.outputs["climb"][2] = Cell::of(Value::real(0));
    auto d = cli::first_divergence(*spec, on, off);
    REQUIRE(d);
    CHECK(d->instant == 2);
    CHECK(d->stream == "alt150_ok");
    off = test::offline(spec, trace);
    off.verdict = Cell::of(Value::boolean(true));
    d = cli::first_divergence(*spec, on, off);
    REQUIRE(d);
    CHECK(d->stream == "<verdict>");
}
