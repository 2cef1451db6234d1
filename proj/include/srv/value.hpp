#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "srv/error.hpp"

namespace srv {

enum class ValueKind : std::uint8_t { Unit, Bool, Int, Float, Text, Optional, Set, Map, List, Record };

const char* kind_name(ValueKind kind);

class Value;

using ValueList = std::vector<Value>;
using ValueSet = std::set<Value>;
using ValueMap = std::map<Value, Value>;

/// Record payload. Field names are kept in ascending order so that the
/// layout is fixed by the record type rather than by construction order.
struct RecordData {
    std::vector<std::string> names;
    std::vector<Value> values;
};

/// Dynamically typed datum of the data theory.
///
/// Containers are immutable and shared, so copying a Value is O(1). Every
/// operation that "modifies" a container builds a new one.
class Value {
public:
    Value() = default;

    static Value unit() { return Value(); }
    static Value boolean(bool b);
    static Value integer(std::int64_t i);
    static Value real(double d);
    static Value text(std::string s);
    static Value none();
    static Value some(Value v);
    static Value set(ValueSet s);
    static Value map(ValueMap m);
    static Value list(ValueList l);
    /// Fields may be given in any order; duplicates are rejected.
    static Value record(std::vector<std::pair<std::string, Value>> fields);

    ValueKind kind() const noexcept;

    bool as_bool() const;
    std::int64_t as_int() const;
    double as_float() const;
    const std::string& as_text() const;
    bool is_some() const;
    /// Payload of a non-empty optional.
    const Value& unwrap() const;
    const ValueSet& as_set() const;
    const ValueMap& as_map() const;
    const ValueList& as_list() const;
    const RecordData& as_record() const;
    /// Record field lookup; throws Errc::Evaluation when absent.
    const Value& field(std::string_view name) const;
    const Value* find_field(std::string_view name) const;

    /// Identity of the shared container payload, if any. Two values with the
    /// same identity are equal; used as a cheap change check.
    const void* identity() const noexcept;

    std::string str() const;

    friend bool operator==(const Value& a, const Value& b);
    friend std::strong_ordering operator<=>(const Value& a, const Value& b);

private:
    using Storage = std::variant<std::monostate, bool, std::int64_t, double, std::string,
                                 std::shared_ptr<const Value>, std::shared_ptr<const ValueSet>,
                                 std::shared_ptr<const ValueMap>, std::shared_ptr<const ValueList>,
                                 std::shared_ptr<const RecordData>>;

    explicit Value(Storage s) : storage_(std::move(s)) {}

    [[noreturn]] void kind_error(ValueKind expected) const;

    // An optional is always the shared_ptr<const Value> alternative; a null
    // pointer is the empty optional.
    Storage storage_;
};

/// Total order used for floats: IEEE totalOrder on the bit pattern.
std::strong_ordering compare_floats(double a, double b);

} // namespace srv
