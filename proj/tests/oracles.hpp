#pragma once

// Direct recomputations of the example monitors, shared by the unit and
// acceptance suites.

#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "srv/dsl.hpp"
#include "support.hpp"

namespace test {

using namespace srv;


// Handshake checked pair by pair, directly from the protocol description.
inline std::vector<bool> handshake_oracle(const std::vector<Event>& trace) {
    std::map<Value, std::string> states;
    std::vector<bool> out;
    std::optional<Value> last_pair;
    std::string last_msg;
    for (const auto& e : trace) {
        const std::string& msg = e.at("msg").as_text();
        Value p = msg == "SYN/ACK" ? Value::record({{"client", e.at("dst")}, {"server", e.at("src")}})
                                   : Value::record({{"client", e.at("src")}, {"server", e.at("dst")}});
        // The pair of an ACK leaves one instant later, unless it shows up
        // again right away and so never leaves the parameter set.
        if (last_pair && last_msg == "ACK" && *last_pair != p) states.erase(*last_pair);
        std::string& s = states.try_emplace(p, "Idle").first->second;
        if (s != "Error") {
            if (msg == "SYN") {
                s = (s == "Idle" || s == "Established") ? "SynSent" : "Error";
            } else if (msg == "SYN/ACK") {
                s = s == "SynSent" ? "SynAck" : "Error";
            } else if (msg == "ACK") {
                s = s == "SynAck" ? "Established" : "Error";
            } else {
                s = "Error";
            }
        }
        bool ok = true;
        for (const auto& [k, v] : states) ok = ok && v != "Error";
        out.push_back(ok);
        last_pair = p;
        last_msg = msg;
    }
    return out;
}

// A file is in error from its first RW that is not preceded by a Create.
inline std::vector<bool> files_oracle(const std::vector<Event>& trace) {
    std::set<std::int64_t> created;
    bool bad = false;
    std::vector<bool> out;
    for (const auto& e : trace) {
        std::int64_t f = e.at("file").as_int();
        if (e.at("op").as_text() == "Create") {
            created.insert(f);
        } else if (!created.count(f)) {
            bad = true;
        }
        out.push_back(!bad);
    }
    return out;
}

// Lifecycle: a counter per parameter, driven by explicit parameter and
// update sets. Tagged instances replay the past events carrying their
// parameter as tag; Nothing instances fetch an always empty past.
enum class Init { None, Tagged, Nothing };

inline ValidatedSpecPtr lifecycle_spec(Init init_kind, bool with_updating) {
    using namespace srv::dsl;
    SpecBuilder b("lifecycle");
    b.input("ps", Type::set(Type::integer()));
    b.input("up", Type::set(Type::integer()));
    b.input("tag", Type::integer());
    b.parametric("cnt", "p", Type::integer(), Type::integer(), at("cnt", param("p"), -1, lit(0)) + lit(1));
    std::optional<Initializer> past;
    if (init_kind == Init::Tagged) past = init("", lit(0), call("record", {lit("tag"), param("p")}));
    if (init_kind == Init::Nothing) past = init("", lit(0), call("record", {lit("tag"), param("p") + lit(1000)}));
    b.output("m", Type::map(Type::integer(), Type::integer()),
             over("cnt", now("ps"), with_updating ? now("up") : E{}, past));
    return checked(b.build());
}

inline Value int_set(const std::set<std::int64_t>& xs) {
    ValueSet s;
    for (auto x : xs) s.insert(Value::integer(x));
    return Value::set(s);
}

struct Step {
    std::set<std::int64_t> ps, up;
    std::int64_t tag;
};

inline std::vector<Step> random_steps(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::vector<Step> out;
    std::set<std::int64_t> ps;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::int64_t p = 0; p < 6; ++p) {
            if (rng() % 10 < 3) {
                if (ps.count(p)) ps.erase(p); else ps.insert(p);
            }
        }
        std::set<std::int64_t> up;
        for (std::int64_t p = 0; p < 6; ++p) {
            if (rng() % 2) up.insert(p);
        }
        out.push_back({ps, up, static_cast<std::int64_t>(rng() % 6)});
    }
    return out;
}

inline std::vector<Event> to_events(const std::vector<Step>& steps) {
    std::vector<Event> out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        out.push_back(test::ev(static_cast<Instant>(i), {{"ps", int_set(steps[i].ps)},
                                                         {"up", int_set(steps[i].up)},
                                                         {"tag", Value::integer(steps[i].tag)}}));
    }
    return out;
}

struct LifecycleModel {
    /// Expected over result per instant.
    std::vector<Value> result;
    std::int64_t installs = 0;
    /// Whether kept, fresh and gone partitioned prev and now at every step.
    bool partitioned = true;
};

inline LifecycleModel lifecycle_model(const std::vector<Step>& steps, Init kind, bool with_up) {
    LifecycleModel m;
    std::map<std::int64_t, std::int64_t> count;
    std::set<std::int64_t> live, prev;
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const auto& s = steps[t];
        std::set<std::int64_t> kept, fresh, gone, all = prev;
        all.insert(s.ps.begin(), s.ps.end());
        for (auto p : s.ps) (prev.count(p) ? kept : fresh).insert(p);
        for (auto p : prev) {
            if (!s.ps.count(p)) gone.insert(p);
        }
        m.partitioned = m.partitioned && kept.size() + fresh.size() + gone.size() == all.size();
        for (auto p : gone) {
            live.erase(p);
            count.erase(p);
        }
        for (auto p : fresh) {
            live.insert(p);
            ++m.installs;
            // Absent until the instance has produced a value.
            std::int64_t past = 0;
            if (kind == Init::Tagged) {
                for (std::size_t i = 0; i < t; ++i) past += steps[i].tag == p ? 1 : 0;
            }
            if (past > 0) count[p] = past;
        }
        for (auto p : live) {
            if (!with_up || s.up.count(p)) ++count[p];
        }
        prev = s.ps;
        ValueMap want;
        for (const auto& [p, c] : count) want[Value::integer(p)] = Value::integer(c);
        m.result.push_back(Value::map(want));
    }
    return m;
}

// Sliding-window flood check: at a high-rate event, whether some destination
// got high-rate events from more than `sources` distinct sources among the
// last hundred events.
inline std::vector<bool> window_oracle(const std::vector<Event>& trace, std::int64_t threshold, std::size_t sources) {
    std::vector<bool> out;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        bool ok = true;
        if (trace[i].at("pps").as_int() > threshold) {
            std::map<std::string, std::set<std::string>> srcs;
            for (std::size_t j = i >= 99 ? i - 99 : 0; j <= i; ++j) {
                if (trace[j].at("pps").as_int() <= threshold) continue;
                auto& s = srcs[trace[j].at("dst").as_text()];
                s.insert(trace[j].at("src").as_text());
                if (s.size() > sources) ok = false;
            }
        }
        out.push_back(ok);
    }
    return out;
}

} // namespace test
