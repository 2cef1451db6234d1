#pragma once

#include <vector>

#include "srv/engine.hpp"

namespace srv {

/// Reference evaluator. Keeps every value of every stream, resolves
/// references by memoized recursion over the whole (known) trace and
/// recomputes over-instances from their local traces from scratch. Slow by
/// design; used as the oracle for the online engine.
///
/// `env` supplies named stores; the monitor's own log ("") is the trace.
RunResult run_offline(const ValidatedSpecPtr& spec, const std::vector<Event>& trace, const Environment& env);

/// Verdict of a nested spec computed offline: value at the first instant
/// whose condition holds, else at the last instant.
Value offline_verdict(const ValidatedSpecPtr& spec, const std::vector<Event>& trace, const Environment& env);

} // namespace srv
