#pragma once

#include <string>

#include "srv/spec.hpp"
#include "srv/value_json.hpp"

namespace srv {

// Tree-structured specification documents. Every expression is an object
// with an "op" discriminator mirroring the Expr node kinds.
json spec_to_json(const Specification& spec);
Specification spec_from_json(const json& j);

json expr_to_json(const ExprPtr& e);
ExprPtr expr_from_json(const json& j);

/// Canonical document text (sorted keys, no whitespace).
std::string canonical_spec_text(const Specification& spec);

/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string spec_hash(const Specification& spec);
std::string fnv1a_hex(std::string_view text);

} // namespace srv
