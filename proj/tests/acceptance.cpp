// One line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ddos_oracle.hpp"
#include "oracles.hpp"
#include "srv/ddos.hpp"

using namespace srv;
using namespace srv::ddos;

namespace {

// Pinned limits.
constexpr double kOracleSeconds = 60.0;
constexpr double kH1Seconds = 120.0;
constexpr std::size_t kTraceLength = 200;
constexpr int kOracleSeeds = 50;
constexpr std::int64_t kH1Flows = 10000;
constexpr std::int64_t kD4FlowsPerBatch = 5000;
constexpr Instant kWindowLatency = 100;
constexpr int kWindowTraces = 10;
constexpr int kSplits = 100;
constexpr int kFileTraces = 50;
constexpr std::uint64_t kTrafficSeed = 11;

int failures = 0;
std::map<int, std::string> lines;

void report(int id, const char* what, bool ok, const std::string& detail) {
    lines[id] = std::string(ok ? "PASS" : "FAIL") + " [" + std::to_string(id) + "] " + what + ": " + detail;
    if (!ok) ++failures;
}

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", x);
    return buf;
}

// --- 1 ---------------------------------------------------------------------

void online_offline() {
    auto t0 = Clock::now();
    int specs = 0, runs = 0;
    std::string first_bad;
    for (const auto& b : builtins()) {
        ++specs;
        for (int seed = 1; seed <= kOracleSeeds; ++seed) {
            Scenario sc = b.random(static_cast<std::uint64_t>(seed), kTraceLength);
            RunResult on = run_online(b.spec, sc.trace, scenario_environment(sc));
            RunResult off = run_offline(b.spec, sc.trace, scenario_environment(sc));
            ++runs;
            bool same = on.outputs == off.outputs && on.verdict.has_value() == off.verdict.has_value() &&
                        (!on.verdict || *on.verdict == *off.verdict);
            if (!same && first_bad.empty()) first_bad = b.name + " seed " + std::to_string(seed);
        }
    }
    double secs = since(t0);
    bool ok = first_bad.empty() && specs >= 9 && secs < kOracleSeconds;
    report(1, "online equals offline", ok,
           std::to_string(specs) + " builtins x " + std::to_string(kOracleSeeds) + " traces (" + std::to_string(runs) +
               " runs), " + fmt(secs) + " s (limit " + fmt(kOracleSeconds) + " s)" +
               (first_bad.empty() ? "" : ", first mismatch " + first_bad));
}

// --- DDoS runs ---------------------------------------------------------------

struct DdosRun {
    std::vector<Value> detections;
    std::vector<Value> attack_ok;
    std::int64_t max_entropy_live = 0;
};

DdosRun run_flows(const ValidatedSpecPtr& spec, const std::vector<Event>& events) {
    auto env = make_environment();
    MonitorState st = start(spec);
    DdosRun r;
    r.detections.resize(events.size());
    r.attack_ok.resize(events.size());
    auto absorb = [&](const StepOutput& out) {
        for (const auto& c : out.resolved) {
            auto t = static_cast<std::size_t>(c.instant);
            if (c.stream == "detections") r.detections[t] = c.cell.ok() ? c.cell.value : Value::text("error");
            if (c.stream == "attack_ok") r.attack_ok[t] = c.cell.ok() ? c.cell.value : Value::text("error");
        }
    };
    for (const auto& ev : events) absorb(step(st, ev, env));
    absorb(finish(st, env));
    for (const auto& o : over_stats(st)) {
        if (o.def.rfind("srcSet", 0) == 0) r.max_entropy_live = std::max(r.max_entropy_live, o.max_live);
    }
    return r;
}

Value detections_value(const std::map<int, std::string>& m) {
    ValueMap out;
    for (const auto& [k, v] : m) out[Value::integer(k)] = Value::text(v);
    return Value::map(out);
}

std::size_t distinct_dests(const std::vector<Flow>& flows) {
    std::set<std::string> d;
    for (const auto& f : flows) d.insert(f.dst);
    return d.size();
}

// --- 2 and 4 -----------------------------------------------------------------

void h1_h3() {
    auto s1 = build_s1();
    auto s2 = build_s2();
    auto t0 = Clock::now();
    bool same = true, truth = true;
    std::ostringstream detail;
    std::map<std::string, std::pair<std::int64_t, std::int64_t>> live;
    std::map<std::string, std::size_t> dests;
    for (const char* profile : {"d1", "d2", "d3"}) {
        auto traffic = generate_traffic(profile, kH1Flows, kTrafficSeed);
        auto events = flow_events(traffic.flows);
        DdosRun a = run_flows(s1, events);
        DdosRun b = run_flows(s2, events);
        bool eq = a.detections == b.detections && a.attack_ok == b.attack_ok;
        same = same && eq;
        // Both also agree with the straight-line recomputation.
        auto oracle = test::ddos_oracle(traffic.flows);
        for (std::size_t t = 0; t < events.size(); ++t) {
            truth = truth && a.detections[t] == detections_value(oracle.at[t].detections);
        }
        live[profile] = {a.max_entropy_live, b.max_entropy_live};
        dests[profile] = distinct_dests(traffic.flows);
        detail << profile << (eq ? " equal" : " DIFFER") << ", ";
    }
    double secs = since(t0);
    detail << "oracle " << (truth ? "agrees" : "DISAGREES") << ", " << fmt(secs) << " s (limit " << fmt(kH1Seconds)
           << " s)";
    report(2, "H1 S1 and S2 verdict streams identical on d1/d2/d3", same && truth && secs < kH1Seconds, detail.str());

    auto [d2s1, d2s2] = live["d2"];
    auto [d1s1, d1s2] = live["d1"];
    bool ok = d2s2 == 0 && d2s1 == static_cast<std::int64_t>(dests["d2"]) && d1s2 * 100 < d1s1;
    report(4, "H3 live entropy instances", ok,
           "d2: S2 " + std::to_string(d2s2) + ", S1 " + std::to_string(d2s1) + " vs " +
               std::to_string(dests["d2"]) + " destinations; d1: S2 " + std::to_string(d1s2) + " < 1% of S1 " +
               std::to_string(d1s1));
}

// --- 3 and 5 -----------------------------------------------------------------

void h4_h5() {
    auto traffic = generate_traffic("d4", kD4FlowsPerBatch, kTrafficSeed);
    auto events = flow_events(traffic.flows);
    DdosRun s2 = run_flows(build_s2(), events);
    Scenario sc{summarize(events), {{kFlowStore, events}}};

    auto s3 = build_s3();
    auto env = scenario_environment(sc);
    MonitorState st = start(s3);
    std::vector<Value> s3_det(sc.trace.size());
    std::vector<std::int64_t> processed;
    auto absorb = [&](const StepOutput& out) {
        for (const auto& c : out.resolved) {
            if (c.stream == "detections") s3_det[static_cast<std::size_t>(c.instant)] = c.cell.value;
        }
    };
    for (const auto& ev : sc.trace) {
        std::int64_t before = env.stats->nested_events.load();
        absorb(step(st, ev, env));
        processed.push_back(env.stats->nested_events.load() - before);
    }
    absorb(finish(st, env));

    // S2's verdict for a batch is its detections at the batch's last flow.
    std::map<std::string, Value> s2_batch;
    for (std::size_t t = 0; t < events.size(); ++t) s2_batch[traffic.flows[t].file_id] = s2.detections[t];

    bool equal = sc.trace.size() == traffic.truth.size();
    bool truth_ok = true;
    int attacked = 0;
    std::string found;
    bool h5 = true;
    std::ostringstream h5d;
    for (std::size_t b = 0; b < sc.trace.size() && b < traffic.truth.size(); ++b) {
        const auto& truth = traffic.truth[b];
        const std::string& file = sc.trace[b].at("file_id").as_text();
        equal = equal && file == truth.file_id && s3_det[b] == s2_batch[file];
        ValueMap want;
        for (const auto& v : truth.victims) want[Value::integer(v.attack)] = Value::text(v.address);
        truth_ok = truth_ok && s3_det[b] == Value::map(want);
        if (!truth.victims.empty()) {
            ++attacked;
            found = file + " attack " + std::to_string(truth.victims[0].attack) + " victim " + truth.victims[0].address;
            bool small = truth.attack_matches * 100 < truth.flows;
            h5 = h5 && processed[b] <= truth.attack_matches && small;
            h5d << file << ": " << processed[b] << " <= " << truth.attack_matches << " matches of " << truth.flows
                << " flows; ";
        } else {
            h5 = h5 && processed[b] == 0;
            h5d << file << ": " << processed[b] << "; ";
        }
    }
    report(3, "H4 S3 batch verdicts equal S2 and ground truth", equal && truth_ok && attacked == 1,
           std::to_string(sc.trace.size()) + " batches, " + std::to_string(attacked) + " attacked (" + found +
               "), S3 == S2 " + (equal ? "yes" : "NO") + ", truth " + (truth_ok ? "yes" : "NO"));
    report(5, "H5 flows processed by S3", h5, h5d.str());
}

// --- 6 -----------------------------------------------------------------------

void sliding_window() {
    const Builtin* b = find_builtin("packet-flow");
    Instant worst = -1;
    bool ok = true;
    for (int seed = 1; seed <= kWindowTraces; ++seed) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed) * 7919);
        auto pick = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
        Instant attack = pick(100, 300);
        std::int64_t gap = pick(2, 12);
        std::vector<Event> trace;
        int injected = 0;
        for (Instant i = 0; i < 450; ++i) {
            std::string src, dst;
            std::int64_t pps;
            if (i >= attack && (i - attack) % gap == 0 && injected < 10) {
                src = "a" + std::to_string(injected++);
                dst = "victim";
                pps = pick(3000, 9000);
            } else if (pick(0, 9) == 0) {
                // High-rate but from few sources: not an attack.
                src = "h" + std::to_string(pick(0, 2));
                dst = "v" + std::to_string(pick(0, 4));
                pps = pick(1500, 4000);
            } else {
                src = "h" + std::to_string(pick(0, 11));
                dst = "v" + std::to_string(pick(0, 4));
                pps = pick(1, 900);
            }
            trace.push_back(test::ev(i, {{"src", Value::text(src)}, {"dst", Value::text(dst)}, {"pps", Value::integer(pps)}}));
        }
        Scenario sc{trace, {}};
        auto got = test::bools(run_online(b->spec, trace, scenario_environment(sc)).outputs.at("attack_ok"));
        ok = ok && got == test::window_oracle(trace, 1000, 5);
        Instant detected = -1;
        for (std::size_t i = 0; i < got.size(); ++i) {
            if (!got[i]) {
                detected = static_cast<Instant>(i);
                break;
            }
        }
        bool in_bound = detected >= attack && detected - attack <= kWindowLatency;
        ok = ok && in_bound;
        worst = std::max(worst, detected < 0 ? kWindowLatency + 1 : detected - attack);
    }
    report(6, "sliding window detection latency", ok,
           std::to_string(kWindowTraces) + " traces, worst latency " + std::to_string(worst) + " instants (bound " +
               std::to_string(kWindowLatency) + ")");
}

// --- 7 -----------------------------------------------------------------------

void lifecycle() {
    using namespace test;
    int runs = 0;
    bool ok = true;
    for (Init kind : {Init::None, Init::Tagged, Init::Nothing}) {
        for (bool with_up : {true, false}) {
            auto spec = lifecycle_spec(kind, with_up);
            for (std::uint64_t seed = 1; seed <= 50; ++seed) {
                auto steps = random_steps(seed, 60);
                auto trace = to_events(steps);
                auto model = lifecycle_model(steps, kind, with_up);
                auto env = make_environment();
                MonitorState st = start(spec);
                ok = ok && model.partitioned;
                for (std::size_t t = 0; t < steps.size(); ++t) {
                    StepOutput out = step(st, trace[t], env);
                    const Value& m = out.resolved.at(0).cell.value;
                    ok = ok && m == model.result[t];
                    for (const auto& [k, _] : m.as_map()) ok = ok && steps[t].ps.count(k.as_int()) > 0;
                    ok = ok && over_stats(st).at(0).live == static_cast<std::int64_t>(steps[t].ps.size());
                }
                ok = ok && env.stats->installs.load() == model.installs;
                ++runs;
            }
        }
    }
    // Fresh instance, empty initializer, not updating: no key.
    auto spec = lifecycle_spec(Init::Tagged, true);
    auto res = run_online(spec, to_events({{{1}, {}, 0}, {{1}, {1}, 0}}), make_environment());
    bool divergence = res.outputs.at("m")[0].value == Value::map({}) &&
                      res.outputs.at("m")[1].value == Value::map({{Value::integer(1), Value::integer(1)}});
    report(7, "instance lifecycle", ok && divergence,
           std::to_string(runs) + " random runs against the model, divergence case " +
               (divergence ? "key absent" : "KEY PRESENT"));
}

// --- 8 -----------------------------------------------------------------------

void freeze_thaw() {
    const auto& list = builtins();
    std::mt19937_64 rng(97);
    int same = 0;
    std::string first_bad;
    for (int i = 0; i < kSplits; ++i) {
        const Builtin& b = list[static_cast<std::size_t>(i) % list.size()];
        Scenario sc = b.random(static_cast<std::uint64_t>(i + 1), kTraceLength);
        RunResult whole = run_online(b.spec, sc.trace, scenario_environment(sc));
        std::size_t split = std::uniform_int_distribution<std::size_t>(0, sc.trace.size())(rng);

        auto env = scenario_environment(sc);
        MonitorState st = start(b.spec);
        OutputStreams got;
        std::optional<Cell> verdict;
        auto absorb = [&](const StepOutput& o) {
            for (const auto& r : o.resolved) got[r.stream].push_back(r.cell);
            if (o.verdict && !verdict) verdict = o.verdict;
        };
        for (std::size_t t = 0; t < split; ++t) absorb(step(st, sc.trace[t], env));
        std::string text = serialize_frozen(freeze(st));
        MonitorState resumed = thaw(deserialize_frozen(text, b.spec));
        for (std::size_t t = split; t < sc.trace.size(); ++t) absorb(step(resumed, sc.trace[t], env));
        absorb(finish(resumed, env));
        for (const auto& [name, _] : whole.outputs) got.try_emplace(name);
        bool eq = got == whole.outputs && verdict.has_value() == whole.verdict.has_value() &&
                  (!verdict || *verdict == *whole.verdict);
        if (eq) {
            ++same;
        } else if (first_bad.empty()) {
            first_bad = b.name + " split " + std::to_string(split);
        }
    }
    report(8, "freeze and thaw", same == kSplits,
           std::to_string(same) + "/" + std::to_string(kSplits) + " split runs equal uninterrupted runs" +
               (first_bad.empty() ? "" : ", first mismatch " + first_bad));
}

// --- 9 -----------------------------------------------------------------------

void examples_2_5_6() {
    auto hs = [](Instant i, const char* s, const char* d, const char* m) {
        return test::ev(i, {{"src", Value::text(s)}, {"dst", Value::text(d)}, {"msg", Value::text(m)}});
    };
    auto spec = find_builtin("handshake")->spec;
    auto valid = test::bools(test::online(spec, {hs(0, "a", "b", "SYN"), hs(1, "b", "a", "SYN/ACK"), hs(2, "a", "b", "ACK")})
                                 .outputs.at("all_ok"));
    auto skip = test::bools(test::online(spec, {hs(0, "a", "b", "SYN"), hs(1, "a", "b", "ACK")}).outputs.at("all_ok"));
    bool hs_ok = valid == std::vector<bool>{true, true, true} && skip == std::vector<bool>{true, false};

    const Builtin* fwd = find_builtin("openfiles");
    const Builtin* retro = find_builtin("retro-openfiles");
    int agree = 0;
    for (int seed = 1; seed <= kFileTraces; ++seed) {
        Scenario sc = fwd->random(static_cast<std::uint64_t>(seed), kTraceLength);
        auto a = test::bools(run_online(fwd->spec, sc.trace, scenario_environment(sc)).outputs.at("all_ok"));
        auto b = test::bools(run_online(retro->spec, sc.trace, scenario_environment(sc)).outputs.at("all_ok"));
        agree += a == b && a == test::files_oracle(sc.trace) ? 1 : 0;
    }
    report(9, "handshake and file-access examples", hs_ok && agree == kFileTraces,
           std::string("valid handshake ") + (valid == std::vector<bool>{true, true, true} ? "all true" : "NOT all true") +
               ", skipped SYN/ACK " + (skip == std::vector<bool>{true, false} ? "flagged at instant 1" : "NOT flagged") +
               ", forward and retroactive agree on " + std::to_string(agree) + "/" + std::to_string(kFileTraces) +
               " traces");
}

} // namespace

int main() {
    online_offline();
    h1_h3();
    h4_h5();
    sliding_window();
    lifecycle();
    freeze_thaw();
    examples_2_5_6();
    for (const auto& [_, line] : lines) std::cout << line << "\n";
    std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
    return failures == 0 ? 0 : 1;
}
