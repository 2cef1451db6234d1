#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "../support.hpp"
#include "srv/ddos.hpp"

using namespace srv;

namespace {

const std::string kAdapter = SRV_ADAPTER_BIN;
const std::string kFixtures = SRV_FIXTURES;

int exit_status(const std::string& cmd) {
    int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string q(const std::string& s) { return "'" + s + "'"; }

std::vector<Event> mixed_flows(std::size_t n, std::uint64_t seed) {
    auto t = ddos::generate_traffic("d1", static_cast<std::int64_t>(n), seed);
    return ddos::flow_events(t.flows);
}

std::shared_ptr<FileBackedStore> file_store(const std::filesystem::path& p, const std::vector<Event>& events,
                                            const Schema& schema = {}) {
    auto s = std::make_shared<FileBackedStore>(p, schema);
    for (const auto& e : events) s->append(e);
    return s;
}

} // namespace

TEST_CASE("in-memory store: append, fetch and integrity") {
    InMemoryStore s;
    for (int i = 0; i < 3; ++i) s.append(test::ev(i, {{"x", Value::integer(i * 10)}}));
    auto all = s.fetch(0, 3, Value());
    REQUIRE(all.size() == 3);
    CHECK(all[2].at("x") == Value::integer(20));
    CHECK(s.fetch(3, 3, Value()).empty());
    try {
        s.append(test::ev(5, {{"x", Value::integer(0)}}));
        FAIL("expected an integrity error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::Integrity);
    }
    CHECK_THROWS_AS(s.fetch(2, 1, Value()), Error);
    CHECK_THROWS_AS(s.fetch(0, 4, Value()), Error);
    CHECK_THROWS_AS(s.fetch(0, 3, Value::integer(1)), Error);
}

TEST_CASE("file-backed store survives a reopen") {
    auto dir = test::scratch("reopen");
    auto flows = mixed_flows(3000, 4);
    std::vector<Event> before;
    {
        auto s = file_store(dir / "flows.log", flows, ddos::flow_schema());
        before = s->fetch(0, s->size(), Value());
        CHECK(before == flows);
    }
    FileBackedStore again(dir / "flows.log", ddos::flow_schema());
    CHECK(again.size() == static_cast<Instant>(flows.size()));
    CHECK(again.fetch(0, again.size(), Value()) == before);
    CHECK(read_store_index(dir / "flows.log").size() == 3);
    again.append(ddos::flow_event(ddos::event_flow(flows[0]), again.size()));
    CHECK(again.size() == static_cast<Instant>(flows.size()) + 1);
}

TEST_CASE("filters select by equality and membership") {
    auto flows = mixed_flows(50, 9);
    InMemoryStore s;
    for (const auto& e : flows) s.append(e);
    Value v = flows[17].at("dstAddr");
    auto got = s.fetch(0, s.size(), Value::record({{"dstAddr", v}}));
    std::vector<Event> want;
    for (const auto& e : flows) {
        if (e.at("dstAddr") == v) want.push_back(e);
    }
    CHECK(got == want);

    Value two = Value::set({flows[1].at("dstAddr"), flows[2].at("dstAddr")});
    auto both = s.fetch(5, 40, Value::record({{"dstAddr", two}, {"protocol", flows[1].at("protocol")}}));
    for (const auto& e : both) {
        CHECK(e.instant >= 5);
        CHECK(e.instant < 40);
        CHECK(two.as_set().count(e.at("dstAddr")) == 1);
    }
}

TEST_CASE("the last hundred events of a sliding window") {
    InMemoryStore s;
    for (int i = 0; i < 250; ++i) s.append(test::ev(i, {{"x", Value::integer(i)}}));
    for (Instant counter : {0, 50, 99, 100, 249}) {
        auto got = s.fetch(std::max<Instant>(counter - 99, 0), counter + 1, Value());
        CHECK(got.size() == static_cast<std::size_t>(std::min<Instant>(counter + 1, 100)));
        CHECK(got.back().instant == counter);
    }
}

TEST_CASE("property: index seek and full scan give the same lines") {
    auto dir = test::scratch("scan");
    auto flows = mixed_flows(5000, 21);
    auto store = file_store(dir / "f.log", flows);
    std::mt19937_64 rng(8);
    for (int i = 0; i < 40; ++i) {
        Instant a = static_cast<Instant>(rng() % 5001), b = static_cast<Instant>(rng() % 5001);
        if (a > b) std::swap(a, b);
        json filter = i % 2 ? json::object() : json{{"protocol", "UDP"}};
        CHECK(scan_store_lines(dir / "f.log", a, b, filter, true) == scan_store_lines(dir / "f.log", a, b, filter, false));
    }
}

TEST_CASE("malformed-UDP filter returns under one percent of a batch") {
    auto t = ddos::generate_traffic("d1", 10000, 7);
    InMemoryStore s;
    for (const auto& e : ddos::flow_events(t.flows)) s.append(e);
    auto got = s.fetch(0, s.size(), ddos::attack_filter(ddos::attacks()[0]));
    CHECK(got.size() > 0);
    CHECK(got.size() * 100 < t.flows.size());
    for (const auto& e : got) {
        CHECK(e.at("protocol") == Value::text("UDP"));
        CHECK(e.at("dstPort") == Value::integer(0));
    }
    CHECK(static_cast<std::int64_t>(got.size()) == t.truth[0].attack_matches);
}

// ---------------------------------------------------------------------------

TEST_CASE("adapter output is byte-identical to the in-process fetch") {
    auto dir = test::scratch("adapter");
    auto flows = mixed_flows(4000, 33);
    auto store = file_store(dir / "flows.log", flows, ddos::flow_schema());
    std::mt19937_64 rng(12);
    const auto& atk = ddos::attacks();
    for (int i = 0; i < 20; ++i) {
        Instant a = static_cast<Instant>(rng() % 4001), b = static_cast<Instant>(rng() % 4001);
        if (a > b) std::swap(a, b);
        Value filter;
        switch (i % 4) {
        case 0: filter = Value(); break;
        case 1: filter = ddos::attack_filter(atk[rng() % atk.size()]); break;
        case 2: filter = Value::record({{"dstAddr", flows[rng() % flows.size()].at("dstAddr")}}); break;
        default:
            filter = Value::record({{"protocol", Value::set({Value::text("UDP"), Value::text("ICMP")})},
                                    {"srcPort", Value::integer(53)}});
        }
        std::string doc = filter_to_json(filter).dump();
        std::string got = run_process({kAdapter, "--store", (dir / "flows.log").string(), "--from", std::to_string(a),
                                       "--to", std::to_string(b), "--filter", doc});
        std::string want;
        for (const auto& l : store->fetch_lines(a, b, filter_to_json(filter))) want += l + "\n";
        CHECK(got == want);
        std::string scan = run_process({kAdapter, "--store", (dir / "flows.log").string(), "--from", std::to_string(a),
                                        "--to", std::to_string(b), "--filter", doc, "--full-scan"});
        CHECK(scan == want);
        auto events = run_external_adapter(kAdapter, dir / "flows.log", a, b, filter, &ddos::flow_schema());
        CHECK(events == store->fetch(a, b, filter));
    }
}

TEST_CASE("adapter exit codes") {
    auto dir = test::scratch("adapter-exit");
    auto store = file_store(dir / "s.log", mixed_flows(100, 2));
    std::string base = q(kAdapter) + " --store " + q((dir / "s.log").string());
    CHECK(exit_status(base + " --from 3 --to 3 --filter '{}'") == 0);
    CHECK(run_process({kAdapter, "--store", (dir / "s.log").string(), "--from", "3", "--to", "3"}).empty());
    CHECK(exit_status(base + " --from 5 --to 2") == 2);
    CHECK(exit_status(base + " --from x --to 2") == 2);
    CHECK(exit_status(base + " --to 2") == 2);
    CHECK(exit_status(base + " --from 0 --to 2 --filter '{not json'") == 2);
    CHECK(exit_status(base + " --from 0 --to 2 --filter '[1]'") == 2);
    CHECK(exit_status(q(kAdapter) + " --store " + q((dir / "missing.log").string()) + " --from 0 --to 1") == 2);

    std::ofstream(dir / "bad.log") << R"({"instant":0,"streams":{"x":1}})" << "\n{\"instant\":1,\"str\n";
    CHECK(exit_status(q(kAdapter) + " --store " + q((dir / "bad.log").string()) + " --from 0 --to 5") == 3);
    std::ofstream(dir / "gap.log") << R"({"instant":0,"streams":{"x":1}})" << "\n"
                                   << R"({"instant":2,"streams":{"x":1}})" << "\n";
    CHECK(exit_status(q(kAdapter) + " --store " + q((dir / "gap.log").string()) + " --from 0 --to 5") == 3);
}

TEST_CASE("a failing adapter aborts the install with nothing replayed") {
    auto dir = test::scratch("failing");
    auto spec = test::checked(examples::retro_openfiles());
    Environment env = make_environment();
    env.own_log = std::make_shared<FileBackedStore>(dir / "events.log", spec->schema());
    env.retriever = std::make_shared<AdapterRetriever>("sh " + kFixtures + "/failing_adapter.sh",
                                                       std::map<std::string, std::filesystem::path>{
                                                           {"", dir / "events.log"}});
    MonitorState st = start(spec);
    step(st, test::ev(0, {{"op", Value::text("Create")}, {"file", Value::integer(1)}}), env);
    auto out = step(st, test::ev(1, {{"op", Value::text("RW")}, {"file", Value::integer(1)}}), env);
    bool saw = false;
    for (const auto& r : out.resolved) {
        if (r.stream == "files") {
            REQUIRE_FALSE(r.cell.ok());
            CHECK(r.cell.error->find("install of 1") != std::string::npos);
            CHECK(r.cell.error->find("exit status 1") != std::string::npos);
            saw = true;
        }
    }
    CHECK(saw);
    CHECK(env.stats->replayed_events.load() == 0);
    CHECK(over_stats(st)[0].live == 0);
}

TEST_CASE("adapter output outside the requested range is rejected") {
    std::string out = R"({"instant":4,"streams":{"x":1}})" "\n";
    CHECK_THROWS_AS(parse_adapter_output(out, 0, 4, nullptr), Error);
    std::string order = R"({"instant":2,"streams":{"x":1}})" "\n" R"({"instant":1,"streams":{"x":1}})" "\n";
    try {
        parse_adapter_output(order, 0, 4, nullptr);
        FAIL("expected an adapter error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK(parse_adapter_output(order.substr(0, order.find('\n') + 1), 0, 4, nullptr).size() == 1);
}

TEST_CASE("verdicts agree under in-memory, file-backed and adapter retrieval") {
    for (const char* name : {"retro-openfiles", "openfiles-when", "dyn-altitude", "packet-flow", "ddos-s2"}) {
        const Builtin* b = find_builtin(name);
        REQUIRE(b);
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            Scenario sc = b->random(seed, 150);
            auto mem = run_online(b->spec, sc.trace, scenario_environment(sc));

            auto dir = test::scratch(std::string("backends-") + name);
            Environment file = make_environment();
            auto own = std::make_shared<FileBackedStore>(dir / "events.log", b->spec->schema());
            file.own_log = own;
            auto r = std::make_shared<StoreRetriever>();
            r->add("", own);
            file.retriever = r;
            CHECK_MESSAGE(run_online(b->spec, sc.trace, file).outputs == mem.outputs, name);

            std::filesystem::remove_all(dir);
            std::filesystem::create_directories(dir);
            Environment ext = make_environment();
            ext.own_log = std::make_shared<FileBackedStore>(dir / "events.log", b->spec->schema());
            ext.retriever = std::make_shared<AdapterRetriever>(
                kAdapter, std::map<std::string, std::filesystem::path>{{"", dir / "events.log"}});
            CHECK_MESSAGE(run_online(b->spec, sc.trace, ext).outputs == mem.outputs, name);
        }
    }
}
