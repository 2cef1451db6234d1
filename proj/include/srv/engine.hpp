#pragma once

#include <atomic>
#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "srv/event.hpp"
#include "srv/retriever.hpp"
#include "srv/validate.hpp"

namespace srv {

/// A resolved value, or the evaluation error that poisoned it.
struct Cell {
    Value value;
    std::shared_ptr<const std::string> error;

    bool ok() const { return error == nullptr; }
    static Cell of(Value v) { return Cell{std::move(v), nullptr}; }
    static Cell poisoned(std::string msg) { return Cell{Value(), std::make_shared<const std::string>(std::move(msg))}; }
    std::string str() const { return ok() ? value.str() : "error: " + *error; }

    friend bool operator==(const Cell& a, const Cell& b) {
        if (a.ok() != b.ok()) return false;
        return a.ok() ? a.value == b.value : *a.error == *b.error;
    }
};

struct Resolved {
    Instant instant = 0;
    std::string stream;
    Cell cell;
};

struct StepOutput {
    /// Ordered by instant, then declaration order.
    std::vector<Resolved> resolved;
    /// Set once, by the step where the return clause fires (or by finish).
    std::optional<Cell> verdict;
};

/// Counters shared by a monitor and everything it runs.
struct Stats {
    std::atomic<std::int64_t> nested_runs{0};
    std::atomic<std::int64_t> nested_events{0};
    std::atomic<std::int64_t> installs{0};
    std::atomic<std::int64_t> replayed_events{0};
    std::atomic<std::int64_t> instance_steps{0};
};

/// Runtime services of a monitor. Not part of its state: a thawed monitor
/// is reattached to an environment.
struct Environment {
    std::shared_ptr<const Retriever> retriever;
    /// When set, every consumed event is appended here (store "").
    std::shared_ptr<LogStore> own_log;
    std::shared_ptr<Stats> stats = std::make_shared<Stats>();
    /// Step over instances in parallel when at least parallel_min of them
    /// are updated at one instant.
    bool parallel = true;
    std::size_t parallel_min = 64;
};

/// Environment with an in-memory own log ("") and the given named stores.
Environment make_environment(std::map<std::string, std::shared_ptr<LogStore>> named = {},
                             std::shared_ptr<LogStore> own_log = std::make_shared<InMemoryStore>());

class MonitorState;

struct InstanceState;

/// Live state of one over node: the InstanceMap and its projection.
struct OverState {
    Value prev = Value::set({});
    std::map<Value, std::unique_ptr<InstanceState>> instances;
    ValueMap result;
    Value result_value = Value::map({});
    std::int64_t max_live = 0;

    OverState() = default;
    OverState(const OverState& other);
    OverState& operator=(const OverState& other);
    OverState(OverState&&) noexcept;
    OverState& operator=(OverState&&) noexcept;
    ~OverState();
};

struct Window {
    Instant base = 0;
    std::deque<Cell> cells;

    Instant next() const { return base + static_cast<Instant>(cells.size()); }
};

/// Resumable evaluation state of one monitor. Copying deep-copies every
/// instance.
class MonitorState {
public:
    MonitorState() = default;
    explicit MonitorState(ValidatedSpecPtr spec);

    const ValidatedSpecPtr& spec() const { return spec_; }
    Instant next_instant() const { return n_; }
    bool finished() const { return finished_; }
    const std::optional<Cell>& verdict() const { return verdict_; }
    const std::optional<Value>& param() const { return param_; }

    /// Largest number of cells held for any stream right now.
    std::size_t window_occupancy() const;

    // Internals, exposed for the evaluator and serialization.
    ValidatedSpecPtr spec_;
    Instant n_ = 0;
    bool finished_ = false;
    std::optional<Value> param_;
    std::vector<Window> windows_;
    std::vector<Instant> reported_;
    std::vector<OverState> overs_;
    Instant ret_next_ = 0;
    std::optional<Cell> verdict_;
    std::size_t peak_occupancy_ = 0;
};

struct InstanceState {
    MonitorState state;
    bool has_value = false;
    Value value;
};

struct OverStats {
    std::string name;
    std::string def;
    std::int64_t live = 0;
    std::int64_t max_live = 0;
};

std::vector<OverStats> over_stats(const MonitorState& state);

MonitorState start(ValidatedSpecPtr spec);
/// Requires ev.instant == next_instant(); throws Errc::InstantMismatch.
StepOutput step(MonitorState& state, const Event& ev, const Environment& env);
StepOutput finish(MonitorState& state, const Environment& env);

/// Instance of an over template at parameter p.
MonitorState start_instance(ValidatedSpecPtr tmpl, Value p);

/// Frozen copy of a monitor; thaw yields an independent state.
struct FrozenMonitor {
    std::string spec_hash;
    MonitorState state;
};

FrozenMonitor freeze(const MonitorState& state);
MonitorState thaw(const FrozenMonitor& frozen);

/// Versioned textual container: {"format", "version", "spec_hash", "state"}.
std::string serialize_frozen(const FrozenMonitor& frozen);
/// Throws Errc::VersionMismatch when the document was produced by another
/// format version or for a spec with a different hash.
FrozenMonitor deserialize_frozen(const std::string& text, const ValidatedSpecPtr& spec);

/// Output streams by name, one cell per instant.
using OutputStreams = std::map<std::string, std::vector<Cell>>;

struct RunResult {
    OutputStreams outputs;
    std::optional<Cell> verdict;
};

/// step over the whole trace, then finish; checks that no (instant, output)
/// is reported twice and that reports arrive in order.
RunResult run_online(const ValidatedSpecPtr& spec, const std::vector<Event>& trace, const Environment& env);

/// Executes a nested monitor over column inputs and returns its verdict,
/// stopping as soon as the return condition holds. Throws Errc::NoVerdict
/// on empty input and Errc::Evaluation on ragged inputs.
Value run_nested(const ValidatedSpecPtr& spec, const std::map<std::string, ValueList>& inputs,
                 const Environment& env);

/// Events for a nested run built from equal-length columns.
std::vector<Event> columns_to_events(const ValidatedSpec& spec, const std::map<std::string, ValueList>& inputs);

} // namespace srv
