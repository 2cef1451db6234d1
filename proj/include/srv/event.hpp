#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "srv/type.hpp"
#include "srv/value.hpp"
#include "srv/value_json.hpp"

namespace srv {

using Instant = std::int64_t;

/// Declared input streams and their types, in declaration order.
using Schema = std::vector<std::pair<std::string, Type>>;

/// One observation: the value of every input stream at one instant.
struct Event {
    Instant instant = 0;
    std::map<std::string, Value, std::less<>> bindings;

    const Value& at(std::string_view stream) const;

    friend bool operator==(const Event&, const Event&) = default;
};

/// {"instant": n, "streams": {...}} on one line, keys sorted.
std::string encode_event(const Event& ev);
json event_to_json(const Event& ev);

/// Decodes one wire line. With a schema, every declared stream must be
/// bound (and nothing else); without one, values are decoded untyped.
Event decode_event(std::string_view line, const Schema* schema = nullptr);
Event event_from_json(const json& j, const Schema* schema = nullptr);

/// The event as a record value (field per binding).
Value event_record(const Event& ev);
/// Type of event_record for a schema.
Type schema_record_type(const Schema& schema);

} // namespace srv
