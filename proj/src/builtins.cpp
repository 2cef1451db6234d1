#include "srv/builtins.hpp"

#include <algorithm>
#include <random>

#include "srv/ddos.hpp"
#include "srv/dsl.hpp"

namespace srv {

using namespace dsl;

std::shared_ptr<const FunctionRegistry> default_registry() {
    static const std::shared_ptr<const FunctionRegistry> reg = ddos::make_registry();
    return reg;
}

namespace examples {

SpecPtr altitude() {
    SpecBuilder b("altitude");
    b.input("altitude", Type::real());
    b.output("alt_ok", Type::boolean(), now("altitude") < lit(100.0));
    return b.build();
}

SpecPtr paramaltitude() {
    SpecBuilder b("paramaltitude");
    b.input("altitude", Type::real());
    b.parametric("below", "th", Type::real(), Type::boolean(), now("altitude") < param("th"));
    b.output("alt100_ok", Type::boolean(), now("below", lit(100.0)));
    b.output("alt150_ok", Type::boolean(), now("below", lit(150.0)));
    b.output("climb", Type::real(), now("altitude") - at("altitude", -1, lit(0.0)));
    return b.build();
}

SpecPtr cross_nested() {
    SpecBuilder b("crossspec");
    b.input("r", Type::real());
    b.input("s", Type::real());
    b.output("lt", Type::boolean(), now("r") < now("s"));
    b.output("seen", Type::boolean(), lit(true));
    b.output("cross", Type::boolean(), at("seen", -1, lit(false)) && now("lt") != at("lt", -1, lit(false)));
    b.returns("cross", "cross");
    return b.build();
}

SpecPtr crossspec() {
    SpecBuilder b("willcross");
    b.input("r", Type::real());
    b.input("s", Type::real());
    b.output("willCross", Type::boolean(), run_spec(cross_nested(), {{"r", slice("r", 50)}, {"s", slice("s", 50)}}));
    return b.build();
}

namespace {

Type pair_type() { return Type::record({{"client", Type::text()}, {"server", Type::text()}}); }

E pair_of(E client, E server) { return call("record", {lit("client"), std::move(client), lit("server"), std::move(server)}); }

E state_step(E prev, E msg) {
    auto is = [](E x, const char* v) { return x == lit(v); };
    return ite(is(prev, "Error"), lit("Error"),
               ite(is(msg, "SYN"), ite(is(prev, "Idle") || is(prev, "Established"), lit("SynSent"), lit("Error")),
                   ite(is(msg, "SYN/ACK"), ite(is(prev, "SynSent"), lit("SynAck"), lit("Error")),
                       ite(is(msg, "ACK"), ite(is(prev, "SynAck"), lit("Established"), lit("Error")), lit("Error")))));
}

E file_state(const char* name, const char* param_name) {
    E prev = at(name, param(param_name), -1, lit("NE"));
    return ite(now("file") != param(param_name), prev,
               ite(prev == lit("Error"), lit("Error"),
                   ite(now("op") == lit("Create"), lit("Created"),
                       ite(prev == lit("Created"), lit("Created"), lit("Error")))));
}

E no_error(E map) { return !call("elem", {lit("Error"), call("elems", {std::move(map)})}); }

} // namespace

SpecPtr handshake(bool subtraced) {
    SpecBuilder b(subtraced ? "handshake-sub" : "handshake");
    b.input("src", Type::text());
    b.input("dst", Type::text());
    b.input("msg", Type::text());
    b.output("pair", pair_type(),
             ite(now("msg") == lit("SYN/ACK"), pair_of(now("dst"), now("src")), pair_of(now("src"), now("dst"))));
    // A pair leaves the parameter set one instant after its ACK so that
    // all_ok still sees the final state.
    E prev = at("params", -1, lit(Value::set({})));
    E none = lit(Value::record({{"client", Value::text("")}, {"server", Value::text("")}}));
    E kept = ite(at("msg", -1, lit("")) == lit("ACK"), call("delete", {at("pair", -1, none), prev}), prev);
    b.output("params", Type::set(pair_type()), call("insert", {now("pair"), kept}));
    E prev_state = at("state", param("p"), -1, lit("Idle"));
    b.parametric("state", "p", pair_type(), Type::text(),
                 ite(now("pair") != param("p"), prev_state, state_step(prev_state, now("msg"))));
    b.output("states", Type::map(pair_type(), Type::text()),
             over("state", now("params"), subtraced ? call("singleton", {now("pair")}) : E{}));
    b.output("all_ok", Type::boolean(), no_error(now("states")));
    return b.build();
}

SpecPtr openfiles() {
    SpecBuilder b("openfiles");
    b.input("op", Type::text());
    b.input("file", Type::integer());
    b.output("params", Type::set(Type::integer()), call("insert", {now("file"), at("params", -1, lit(Value::set({})))}));
    b.parametric("state", "f", Type::integer(), Type::text(), file_state("state", "f"));
    b.output("files", Type::map(Type::integer(), Type::text()), over("state", now("params")));
    b.output("all_ok", Type::boolean(), no_error(now("files")));
    return b.build();
}

namespace {

SpecBuilder retro_files_base(const char* name) {
    SpecBuilder b(name);
    b.input("op", Type::text());
    b.input("file", Type::integer());
    E prev = at("params", -1, lit(Value::set({})));
    b.output("params", Type::set(Type::integer()),
             ite(now("op") == lit("RW"), call("insert", {now("file"), prev}), prev));
    b.parametric("state", "f", Type::integer(), Type::text(), file_state("state", "f"));
    return b;
}

} // namespace

SpecPtr retro_openfiles() {
    SpecBuilder b = retro_files_base("retro-openfiles");
    E upd = ite(call("member", {now("file"), now("params")}), call("singleton", {now("file")}), lit(Value::set({})));
    b.output("files", Type::map(Type::integer(), Type::text()),
             over("state", now("params"), upd, init("", lit(0), call("record", {lit("file"), param("f")}))));
    b.output("all_ok", Type::boolean(), no_error(now("files")));
    return b.build();
}

SpecPtr openfiles_when() {
    SpecBuilder b = retro_files_base("openfiles-when");
    b.output("files", Type::map(Type::integer(), Type::text()),
             when("state", now("params"), "g", now("file") == param("g"),
                  init("", lit(0), call("record", {lit("file"), param("f")}))));
    b.output("all_ok", Type::boolean(), no_error(now("files")));
    return b.build();
}

SpecPtr dyn_altitude(bool retroactive) {
    SpecBuilder b(retroactive ? "dyn-altitude" : "dyn-altitude-fwd");
    b.input("altitude", Type::real());
    b.input("threshold", Type::real());
    E prev = at("mthreshold", -1, lit(Value::none()));
    b.output("mthreshold", Type::optional(Type::real()),
             ite(call("isJust", {prev}), prev,
                 ite(now("threshold") > lit(0.0), call("just", {now("threshold")}), lit(Value::none()))));
    b.parametric("ok", "p", Type::real(), Type::boolean(),
                 at("ok", param("p"), -1, lit(true)) && now("altitude") <= param("p"));
    std::optional<Initializer> past;
    if (retroactive) past = init("", lit(0));
    b.output("alt_ok", Type::boolean(),
             call("fromMaybe", {lit(true), mover("ok", now("mthreshold"), {}, past)}));
    return b.build();
}

SpecPtr finer_spec(std::int64_t threshold_pps, std::int64_t sources) {
    SpecBuilder b("finer");
    b.input("src", Type::text());
    b.input("dst", Type::text());
    b.input("pps", Type::integer());
    E prev = at("srcs", -1, lit(Value::map({})));
    b.output("srcs", Type::map(Type::text(), Type::set(Type::text())),
             ite(now("pps") > lit(threshold_pps),
                 call("insertWith", {lit("union"), now("dst"), call("singleton", {now("src")}), prev}), prev));
    b.output("under_attack", Type::boolean(),
             call("size", {call("findWithDefault", {lit(Value::set({})), now("dst"), now("srcs")})}) > lit(sources));
    b.returns("under_attack", "under_attack");
    return b.build();
}

SpecPtr packet_flow(std::int64_t threshold_pps, std::int64_t sources) {
    SpecBuilder b("packet-flow");
    b.input("src", Type::text());
    b.input("dst", Type::text());
    b.input("pps", Type::integer());
    b.output("counter", Type::integer(), at("counter", -1, lit(-1)) + lit(1));
    E high = now("pps") > lit(threshold_pps);
    Schema schema{{"src", Type::text()}, {"dst", Type::text()}, {"pps", Type::integer()}};
    E from = call("max", {now("counter") - lit(99), lit(0)});
    b.output("recent", Type::list(schema_record_type(schema)),
             ite(high, retrieve("", schema, from, now("counter") + lit(1)), lit(Value::list({}))));
    std::vector<std::pair<std::string, E>> cols;
    for (const auto& [name, _] : schema) cols.emplace_back(name, call("column", {now("recent"), lit(name)}));
    b.output("attack_ok", Type::boolean(), ite(high, !run_spec(finer_spec(threshold_pps, sources), cols), lit(true)));
    return b.build();
}

} // namespace examples

// ---------------------------------------------------------------------------

namespace {

using Rng = std::mt19937_64;

std::size_t pick_length(Rng& rng, std::size_t length) {
    return length == 0 ? 0 : std::uniform_int_distribution<std::size_t>(1, length)(rng);
}

double uni(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
std::int64_t pick(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

Event make_event(Instant i, std::initializer_list<std::pair<const char*, Value>> b) {
    Event ev;
    ev.instant = i;
    for (const auto& [k, v] : b) ev.bindings.emplace(k, v);
    return ev;
}

Scenario altitude_trace(std::uint64_t seed, std::size_t length) {
    Rng rng(seed);
    Scenario sc;
    std::size_t n = pick_length(rng, length);
    for (std::size_t i = 0; i < n; ++i) {
        sc.trace.push_back(make_event(static_cast<Instant>(i), {{"altitude", Value::real(uni(rng, 0, 200))}}));
    }
    return sc;
}

Scenario cross_trace(std::uint64_t seed, std::size_t length) {
    Rng rng(seed);
    Scenario sc;
    std::size_t n = pick_length(rng, length);
    double r = uni(rng, -5, 5), s = uni(rng, -5, 5);
    for (std::size_t i = 0; i < n; ++i) {
        r += uni(rng, -1, 1);
        s += uni(rng, -1, 1);
        sc.trace.push_back(make_event(static_cast<Instant>(i), {{"r", Value::real(r)}, {"s", Value::real(s)}}));
    }
    return sc;
}

Scenario handshake_trace(std::uint64_t seed, std::size_t length) {
    Rng rng(seed);
    Scenario sc;
    std::size_t n = pick_length(rng, length);
    const char* hosts[] = {"a", "b", "c", "d"};
    const char* msgs[] = {"SYN", "SYN/ACK", "ACK"};
    std::map<std::pair<int, int>, int> next;
    for (std::size_t i = 0; i < n; ++i) {
        int c = static_cast<int>(pick(rng, 0, 3));
        int s = static_cast<int>(pick(rng, 0, 3));
        int& k = next[{c, s}];
        int m = uni(rng, 0, 1) < 0.9 ? k : static_cast<int>(pick(rng, 0, 2));
        k = (m + 1) % 3;
        bool reply = m == 1;
        sc.trace.push_back(make_event(static_cast<Instant>(i), {{"src", Value::text(hosts[reply ? s : c])},
                                                                {"dst", Value::text(hosts[reply ? c : s])},
                                                                {"msg", Value::text(msgs[m])}}));
    }
    return sc;
}

Scenario files_trace(std::uint64_t seed, std::size_t length) {
    Rng rng(seed);
    Scenario sc;
    std::size_t n = pick_length(rng, length);
    for (std::size_t i = 0; i < n; ++i) {
        sc.trace.push_back(make_event(static_cast<Instant>(i),
                                      {{"op", Value::text(uni(rng, 0, 1) < 0.4 ? "Create" : "RW")},
                                       {"file", Value::integer(pick(rng, 0, 7))}}));
    }
    return sc;
}

Scenario dyn_altitude_trace(std::uint64_t seed, std::size_t length) {
    Rng rng(seed);
    Scenario sc;
    std::size_t n = pick_length(rng, length);
    for (std::size_t i = 0; i < n; ++i) {
        double th = uni(rng, 0, 1) < 0.05 ? uni(rng, 100, 180) : 0.0;
        sc.trace.push_back(make_event(static_cast<Instant>(i), {{"altitude", Value::real(uni(rng, 0, 200))},
                                                                {"threshold", Value::real(th)}}));
    }
    return sc;
}

Scenario packet_trace(std::uint64_t seed, std::size_t length) {
    Rng rng(seed);
    Scenario sc;
    std::size_t n = pick_length(rng, length);
    for (std::size_t i = 0; i < n; ++i) {
        bool burst = uni(rng, 0, 1) < 0.25;
        sc.trace.push_back(make_event(static_cast<Instant>(i),
                                      {{"src", Value::text("h" + std::to_string(pick(rng, 0, 11)))},
                                       {"dst", Value::text("v" + std::to_string(pick(rng, 0, burst ? 1 : 4)))},
                                       {"pps", Value::integer(burst ? pick(rng, 900, 3000) : pick(rng, 1, 500))}}));
    }
    return sc;
}

std::vector<Event> small_flows(std::uint64_t seed, std::size_t length) {
    Rng rng(seed);
    std::size_t n = pick_length(rng, length);
    static const char* profiles[] = {"d1", "d2", "d3", "d4"};
    std::string profile = profiles[seed % 4];
    std::int64_t flows = profile == "d4" ? std::max<std::int64_t>(1, static_cast<std::int64_t>(n) / 5)
                                         : static_cast<std::int64_t>(n);
    auto events = ddos::flow_events(ddos::generate_traffic(profile, flows, seed).flows);
    if (events.size() > n) events.resize(n);
    return events;
}

Scenario flow_trace(std::uint64_t seed, std::size_t length) { return Scenario{small_flows(seed, length), {}}; }

Scenario summary_trace(std::uint64_t seed, std::size_t length) {
    Scenario sc;
    auto flows = small_flows(seed, length);
    sc.trace = ddos::summarize(flows);
    sc.stores[ddos::kFlowStore] = std::move(flows);
    return sc;
}

ValidatedSpecPtr checked(SpecPtr s) { return validate_or_throw(*s, default_registry()); }

} // namespace

const std::vector<Builtin>& builtins() {
    static const std::vector<Builtin> list = [] {
        using namespace examples;
        return std::vector<Builtin>{
            {"altitude", "altitude stays below 100", checked(altitude()), altitude_trace},
            {"paramaltitude", "statically parametrized altitude thresholds", checked(paramaltitude()), altitude_trace},
            {"crossspec", "whether r and s cross within the next 50 instants", checked(crossspec()), cross_trace},
            {"handshake", "TCP three-way handshake per address pair", checked(handshake(false)), handshake_trace},
            {"handshake-sub", "handshake with subtracing", checked(handshake(true)), handshake_trace},
            {"openfiles", "files are created before use (forward)", checked(openfiles()), files_trace},
            {"retro-openfiles", "files are created before use (retroactive)", checked(retro_openfiles()), files_trace},
            {"openfiles-when", "retroactive file check written with when", checked(openfiles_when()), files_trace},
            {"dyn-altitude", "threshold discovered at runtime, past revisited", checked(dyn_altitude(true)),
             dyn_altitude_trace},
            {"dyn-altitude-fwd", "threshold discovered at runtime, forward only", checked(dyn_altitude(false)),
             dyn_altitude_trace},
            {"packet-flow", "flood check over the last hundred events", checked(packet_flow()), packet_trace},
            {"ddos-s1", "DDoS detection, brute-force entropy", ddos::build_s1(), flow_trace},
            {"ddos-s2", "DDoS detection, retroactive entropy", ddos::build_s2(), flow_trace},
            {"ddos-s3", "DDoS detection over batch summaries", ddos::build_s3(), summary_trace},
        };
    }();
    return list;
}

const Builtin* find_builtin(std::string_view name) {
    for (const auto& b : builtins()) {
        if (b.name == name) return &b;
    }
    return nullptr;
}

Environment scenario_environment(const Scenario& sc) {
    std::map<std::string, std::shared_ptr<LogStore>> named;
    for (const auto& [name, events] : sc.stores) {
        auto store = std::make_shared<InMemoryStore>();
        for (const auto& ev : events) store->append(ev);
        named[name] = store;
    }
    return make_environment(std::move(named));
}

} // namespace srv
