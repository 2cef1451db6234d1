#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "srv/event.hpp"
#include "srv/functions.hpp"
#include "srv/validate.hpp"

namespace srv::ddos {

enum class MarkerKind { PacketsPerSecond, BitsPerSecond };

const char* marker_name(MarkerKind kind);

struct AttackSpec {
    int id = 0;
    std::string name;
    /// Conjunctive equality requirements on flow fields.
    std::vector<std::pair<std::string, Value>> clauses;
    MarkerKind marker = MarkerKind::PacketsPerSecond;
    double t0 = 0;
    std::int64_t t1 = 0;
};

/// The fourteen shipped attack configurations, ordered by id.
const std::vector<AttackSpec>& attacks();

json attacks_to_json(const std::vector<AttackSpec>& list);
std::vector<AttackSpec> attacks_from_json(const json& doc);

struct Flow {
    std::string file_id;
    double start = 0;
    double end = 0;
    std::string src;
    std::string dst;
    std::int64_t src_port = 0;
    std::int64_t dst_port = 0;
    std::string protocol;
    std::int64_t packets = 1;
    std::int64_t bytes = 1;
};

/// Input streams of the flow monitors (S1, S2, flowAnalyzer).
const Schema& flow_schema();
/// Input streams of the summary monitor (S3).
const Schema& summary_schema();

Event flow_event(const Flow& f, Instant instant);
Flow event_flow(const Event& ev);

bool matches(const AttackSpec& atk, const Flow& f);
/// The attack's clauses as a log-store filter record.
Value attack_filter(const AttackSpec& atk);

/// Volume over the observed window, with a one second floor.
double marker_rate(MarkerKind kind, std::int64_t packets, std::int64_t bits, double start, double end);

/// Per batch and attack, the highest running marker rate reached by any
/// destination while the batch's matching flows are taken in order.
std::vector<Event> summarize(const std::vector<Event>& flows);

struct Victim {
    int attack = 0;
    std::string address;
};

struct BatchTruth {
    std::string file_id;
    std::int64_t flows = 0;
    std::vector<Victim> victims;
    /// Flows matching the filter of each attack planted in this batch.
    std::int64_t attack_matches = 0;
};

struct Traffic {
    std::vector<Flow> flows;
    std::vector<BatchTruth> truth;
};

/// Synthetic stand-ins for the four datasets: d1 one attacked batch, d2
/// benign with a handful of malformed UDP flows, d3 benign with many sources
/// and 100 destinations, d4 five batches of `flows` each, one attacked.
Traffic generate_traffic(const std::string& profile, std::int64_t flows, std::uint64_t seed);

json truth_to_json(const std::vector<BatchTruth>& truth);
std::vector<BatchTruth> truth_from_json(const json& doc);

void write_events(const std::filesystem::path& path, const std::vector<Event>& events);
std::vector<Event> read_events(const std::filesystem::path& path, const Schema* schema);
std::vector<Event> flow_events(const std::vector<Flow>& flows);

/// mergeAddrInfo, markerRate, maxDestAddress and justs.
void register_functions(FunctionRegistry& registry);
std::shared_ptr<FunctionRegistry> make_registry();

/// Name of the log store S3 reads flows from.
inline constexpr const char* kFlowStore = "flows";

ValidatedSpecPtr build_s1(const std::vector<AttackSpec>& list = attacks());
ValidatedSpecPtr build_s2(const std::vector<AttackSpec>& list = attacks());
ValidatedSpecPtr build_s3(const std::vector<AttackSpec>& list = attacks());
/// S2 restricted to one attack, returning its first detection.
SpecPtr flow_analyzer(const AttackSpec& atk);

/// Name of the entropy over stream of attack `id` in S1/S2.
std::string entropy_stream(int id);

} // namespace srv::ddos
