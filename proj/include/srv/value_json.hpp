#pragma once

#include "json.hpp"

#include "srv/type.hpp"
#include "srv/value.hpp"

namespace srv {

using json = nlohmann::json;

/// Lossless, self-describing encoding used by specification documents and
/// frozen monitor states. Int and finite Float map to JSON numbers (floats
/// always carry a fraction or exponent), lists to arrays, Text to strings;
/// the other kinds use a single-key tag object: {"unit":true},
/// {"none":true}, {"some":v}, {"set":[..]}, {"map":[[k,v],..]},
/// {"record":{..}}, {"float_bits":n} for non-finite floats.
json to_tagged(const Value& v);
Value from_tagged(const json& j);

/// Event wire encoding: Bool/Int/Float/Text map to JSON scalars, Optional to
/// null or the wrapped value, Set and List to arrays, Record and Map<Text,_>
/// to objects, other maps to arrays of [key, value] pairs, Unit to null.
json to_wire(const Value& v);

/// Type-directed wire decoding; throws Errc::Parse on mismatch.
Value from_wire(const json& j, const Type& t);

/// Decoding without a type: numbers, strings, booleans, arrays as lists,
/// objects as Map<Text,_>, null as the empty optional.
Value from_wire_untyped(const json& j);

} // namespace srv
