#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "srv/engine.hpp"

namespace srv::cli {

enum Exit : int { kOk = 0, kViolation = 1, kEngineError = 2 };

struct RunConfig {
    std::string spec;
    std::string input = "-";
    std::string log_store;
    std::string adapter;
    /// name=path pairs for named stores that are not in the log directory.
    std::vector<std::string> stores;
    std::string output = "verdicts";
    std::string report;
};

/// Builtin name, or path of a JSON specification document.
ValidatedSpecPtr resolve_spec(const std::string& name_or_path);

/// Log stores read by the spec, including those of instance templates and
/// nested specs. "" is the monitor's own log.
std::set<std::string> required_stores(const ValidatedSpec& spec);

/// Schema of a named store when some retrieval declares one.
std::optional<Schema> store_schema(const ValidatedSpec& spec, const std::string& store);

/// A violation: a Bool output named *_ok resolving false.
bool is_violation(const Resolved& r);

int cmd_run(const RunConfig& cfg, std::istream& in, std::ostream& out, std::ostream& err);

struct Divergence {
    Instant instant = 0;
    std::string stream;
    std::string online;
    std::string offline;
};

/// First (instant, stream) where two runs differ; the verdict compares as
/// stream "<verdict>" after the last instant.
std::optional<Divergence> first_divergence(const ValidatedSpec& spec, const RunResult& online,
                                           const RunResult& offline);

int cmd_oracle_check(const std::string& spec, const std::string& input, const std::vector<std::string>& stores,
                     std::istream& in, std::ostream& out, std::ostream& err);
int cmd_gen_traffic(const std::string& profile, std::int64_t flows, std::uint64_t seed,
                    const std::filesystem::path& out_path, std::ostream& err);
int cmd_summarize(const std::filesystem::path& input, const std::filesystem::path& out_path, std::ostream& err);

/// Argument parsing and dispatch for the srv executable.
int main(int argc, char** argv);

} // namespace srv::cli
