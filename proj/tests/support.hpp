#pragma once

#include <filesystem>
#include <initializer_list>
#include <random>
#include <unistd.h>
#include <string>
#include <utility>
#include <vector>

#include "srv/builtins.hpp"
#include "srv/engine.hpp"
#include "srv/offline.hpp"

namespace test {

inline srv::Event ev(srv::Instant i, std::initializer_list<std::pair<const char*, srv::Value>> b) {
    srv::Event e;
    e.instant = i;
    for (const auto& [k, v] : b) e.bindings.emplace(k, v);
    return e;
}

/// Events for a single input stream.
template <typename T>
std::vector<srv::Event> column(const char* name, const std::vector<T>& xs) {
    std::vector<srv::Event> out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        srv::Value v;
        if constexpr (std::is_same_v<T, double>) {
            v = srv::Value::real(xs[i]);
        } else if constexpr (std::is_same_v<T, bool>) {
            v = srv::Value::boolean(xs[i]);
        } else if constexpr (std::is_integral_v<T>) {
            v = srv::Value::integer(xs[i]);
        } else {
            v = srv::Value::text(xs[i]);
        }
        out.push_back(ev(static_cast<srv::Instant>(i), {{name, v}}));
    }
    return out;
}

inline srv::ValidatedSpecPtr checked(const srv::SpecPtr& s) { return srv::validate_or_throw(*s, srv::default_registry()); }

inline srv::RunResult online(const srv::ValidatedSpecPtr& spec, const std::vector<srv::Event>& trace) {
    return srv::run_online(spec, trace, srv::make_environment());
}

inline srv::RunResult offline(const srv::ValidatedSpecPtr& spec, const std::vector<srv::Event>& trace) {
    return srv::run_offline(spec, trace, srv::make_environment());
}

inline std::vector<bool> bools(const std::vector<srv::Cell>& cells) {
    std::vector<bool> out;
    for (const auto& c : cells) out.push_back(c.ok() && c.value.as_bool());
    return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("srv-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace test
