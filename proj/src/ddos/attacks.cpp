#include <algorithm>
#include <fstream>

#include "srv/ddos.hpp"

namespace srv::ddos {

const char* marker_name(MarkerKind kind) { return kind == MarkerKind::PacketsPerSecond ? "pps" : "bps"; }

namespace {

using Clauses = std::vector<std::pair<std::string, Value>>;

Clauses udp_src(int port) { return {{"protocol", Value::text("UDP")}, {"srcPort", Value::integer(port)}}; }

AttackSpec make(int id, std::string name, Clauses clauses, MarkerKind kind, double t0, std::int64_t t1) {
    return AttackSpec{id, std::move(name), std::move(clauses), kind, t0, t1};
}

} // namespace

// Only the malformed UDP attack has reference thresholds; the rest
// are reflection and flood patterns with conservative thresholds.
const std::vector<AttackSpec>& attacks() {
    static const std::vector<AttackSpec> list = [] {
        constexpr auto pps = MarkerKind::PacketsPerSecond;
        constexpr auto bps = MarkerKind::BitsPerSecond;
        return std::vector<AttackSpec>{
            make(0, "udp-malformed", {{"protocol", Value::text("UDP")}, {"dstPort", Value::integer(0)}}, pps, 2000, 5),
            make(1, "dns-amplification", udp_src(53), bps, 5e8, 20),
            make(2, "ntp-amplification", udp_src(123), bps, 5e8, 10),
            make(3, "ssdp-amplification", udp_src(1900), pps, 5000, 10),
            make(4, "memcached-amplification", udp_src(11211), bps, 1e9, 5),
            make(5, "chargen-reflection", udp_src(19), pps, 4000, 10),
            make(6, "snmp-reflection", udp_src(161), bps, 4e8, 10),
            make(7, "cldap-reflection", udp_src(389), bps, 4e8, 10),
            make(8, "icmp-flood", {{"protocol", Value::text("ICMP")}}, pps, 10000, 50),
            make(9, "tcp-port-zero", {{"protocol", Value::text("TCP")}, {"dstPort", Value::integer(0)}}, pps, 2000, 5),
            make(10, "rip-reflection", udp_src(520), pps, 3000, 10),
            make(11, "netbios-reflection", udp_src(137), pps, 3000, 10),
            make(12, "mssql-reflection", udp_src(1434), pps, 3000, 10),
            make(13, "ubiquiti-reflection", udp_src(10001), bps, 4e8, 10),
        };
    }();
    return list;
}

json attacks_to_json(const std::vector<AttackSpec>& list) {
    json out = json::array();
    for (const auto& a : list) {
        json clauses = json::object();
        for (const auto& [name, v] : a.clauses) clauses[name] = to_wire(v);
        out.push_back({{"id", a.id},
                       {"name", a.name},
                       {"filter", clauses},
                       {"marker", marker_name(a.marker)},
                       {"t0", a.t0},
                       {"t1", a.t1}});
    }
    return out;
}

std::vector<AttackSpec> attacks_from_json(const json& doc) {
    std::vector<AttackSpec> out;
    for (const auto& j : doc) {
        AttackSpec a;
        a.id = j.at("id").get<int>();
        a.name = j.at("name").get<std::string>();
        for (const auto& [name, v] : j.at("filter").items()) {
            if (v.is_string()) {
                a.clauses.emplace_back(name, Value::text(v.get<std::string>()));
            } else if (v.is_number_integer()) {
                a.clauses.emplace_back(name, Value::integer(v.get<std::int64_t>()));
            } else {
                throw Error(Errc::Parse, "attack " + a.name + ": filter values must be text or integers");
            }
        }
        std::string marker = j.at("marker").get<std::string>();
        if (marker != "pps" && marker != "bps") throw Error(Errc::Parse, "attack " + a.name + ": unknown marker " + marker);
        a.marker = marker == "pps" ? MarkerKind::PacketsPerSecond : MarkerKind::BitsPerSecond;
        a.t0 = j.at("t0").get<double>();
        a.t1 = j.at("t1").get<std::int64_t>();
        if (a.t0 <= 0 || a.t1 < 1) throw Error(Errc::Parse, "attack " + a.name + ": thresholds must be positive");
        out.push_back(std::move(a));
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i].id != static_cast<int>(i)) throw Error(Errc::Parse, "attack ids must be 0, 1, ... in order");
    }
    return out;
}

const Schema& flow_schema() {
    static const Schema s{{"file_id", Type::text()},   {"startTime", Type::real()}, {"endTime", Type::real()},
                          {"srcAddr", Type::text()},   {"dstAddr", Type::text()},   {"srcPort", Type::integer()},
                          {"dstPort", Type::integer()}, {"protocol", Type::text()},  {"packets", Type::integer()},
                          {"bytes", Type::integer()}};
    return s;
}

const Schema& summary_schema() {
    static const Schema s{{"file_id", Type::text()}, {"markers", Type::list(Type::real())}};
    return s;
}

Event flow_event(const Flow& f, Instant instant) {
    Event ev;
    ev.instant = instant;
    ev.bindings = {{"file_id", Value::text(f.file_id)},      {"startTime", Value::real(f.start)},
                   {"endTime", Value::real(f.end)},          {"srcAddr", Value::text(f.src)},
                   {"dstAddr", Value::text(f.dst)},          {"srcPort", Value::integer(f.src_port)},
                   {"dstPort", Value::integer(f.dst_port)},  {"protocol", Value::text(f.protocol)},
                   {"packets", Value::integer(f.packets)},   {"bytes", Value::integer(f.bytes)}};
    return ev;
}

Flow event_flow(const Event& ev) {
    Flow f;
    f.file_id = ev.at("file_id").as_text();
    f.start = ev.at("startTime").as_float();
    f.end = ev.at("endTime").as_float();
    f.src = ev.at("srcAddr").as_text();
    f.dst = ev.at("dstAddr").as_text();
    f.src_port = ev.at("srcPort").as_int();
    f.dst_port = ev.at("dstPort").as_int();
    f.protocol = ev.at("protocol").as_text();
    f.packets = ev.at("packets").as_int();
    f.bytes = ev.at("bytes").as_int();
    return f;
}

std::vector<Event> flow_events(const std::vector<Flow>& flows) {
    std::vector<Event> out;
    out.reserve(flows.size());
    for (std::size_t i = 0; i < flows.size(); ++i) out.push_back(flow_event(flows[i], static_cast<Instant>(i)));
    return out;
}

bool matches(const AttackSpec& atk, const Flow& f) {
    Event ev = flow_event(f, 0);
    return std::all_of(atk.clauses.begin(), atk.clauses.end(),
                       [&](const auto& c) { return ev.at(c.first) == c.second; });
}

Value attack_filter(const AttackSpec& atk) { return Value::record(atk.clauses); }

double marker_rate(MarkerKind kind, std::int64_t packets, std::int64_t bits, double start, double end) {
    double volume = static_cast<double>(kind == MarkerKind::PacketsPerSecond ? packets : bits);
    return volume / std::max(end - start, 1.0);
}

std::vector<Event> summarize(const std::vector<Event>& flows) {
    struct Info {
        std::int64_t packets = 0, bits = 0;
        double start = 0, end = 0;
    };
    std::vector<Event> out;
    const auto& list = attacks();
    std::size_t i = 0;
    while (i < flows.size()) {
        const std::string file = flows[i].at("file_id").as_text();
        std::vector<std::map<std::string, Info>> info(list.size());
        std::vector<double> peak(list.size(), 0.0);
        for (; i < flows.size() && flows[i].at("file_id").as_text() == file; ++i) {
            Flow f = event_flow(flows[i]);
            for (const auto& atk : list) {
                if (!matches(atk, f)) continue;
                auto [it, fresh] = info[static_cast<std::size_t>(atk.id)].try_emplace(f.dst);
                Info& x = it->second;
                if (fresh) {
                    x = Info{f.packets, f.bytes * 8, f.start, f.end};
                } else {
                    x.packets += f.packets;
                    x.bits += f.bytes * 8;
                    x.start = std::min(x.start, f.start);
                    x.end = std::max(x.end, f.end);
                }
                double r = marker_rate(atk.marker, x.packets, x.bits, x.start, x.end);
                peak[static_cast<std::size_t>(atk.id)] = std::max(peak[static_cast<std::size_t>(atk.id)], r);
            }
        }
        ValueList markers;
        for (double p : peak) markers.push_back(Value::real(p));
        Event ev;
        ev.instant = static_cast<Instant>(out.size());
        ev.bindings = {{"file_id", Value::text(file)}, {"markers", Value::list(std::move(markers))}};
        out.push_back(std::move(ev));
    }
    return out;
}

void write_events(const std::filesystem::path& path, const std::vector<Event>& events) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + path.string());
    for (const auto& ev : events) out << encode_event(ev) << '\n';
    if (!out) throw Error(Errc::Io, "write to " + path.string() + " failed");
}

std::vector<Event> read_events(const std::filesystem::path& path, const Schema* schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + path.string());
    std::vector<Event> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(decode_event(line, schema));
    }
    return out;
}

} // namespace srv::ddos
