#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "srv/engine.hpp"

namespace srv {

/// A trace plus the contents of the named log stores it refers to.
struct Scenario {
    std::vector<Event> trace;
    std::map<std::string, std::vector<Event>> stores;
};

struct Builtin {
    std::string name;
    std::string summary;
    ValidatedSpecPtr spec;
    /// Random scenario of at most `length` root events.
    std::function<Scenario(std::uint64_t seed, std::size_t length)> random;
};

/// Builtin functions plus the DDoS helpers.
std::shared_ptr<const FunctionRegistry> default_registry();

const std::vector<Builtin>& builtins();
/// Null when unknown.
const Builtin* find_builtin(std::string_view name);

/// Fresh environment: in-memory own log and the scenario's stores.
Environment scenario_environment(const Scenario& sc);

namespace examples {

SpecPtr altitude();
SpecPtr paramaltitude();
SpecPtr crossspec();
/// The nested spec called by crossspec.
SpecPtr cross_nested();
SpecPtr handshake(bool subtraced);
SpecPtr openfiles();
SpecPtr retro_openfiles();
SpecPtr dyn_altitude(bool retroactive);
/// `when` form of the file-access monitor.
SpecPtr openfiles_when();
/// Sliding-window flood check of the last hundred events.
SpecPtr packet_flow(std::int64_t threshold_pps = 1000, std::int64_t sources = 5);
SpecPtr finer_spec(std::int64_t threshold_pps, std::int64_t sources);

} // namespace examples

} // namespace srv
