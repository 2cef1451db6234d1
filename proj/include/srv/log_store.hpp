#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "srv/event.hpp"

namespace srv {

// Filters are conjunctive: a Record (or Map<Text,_>) whose fields name event
// bindings. A Set-valued clause means membership, anything else equality.
// Unit (or an empty record/map) accepts every event.

/// Throws Errc::Filter for filters that are not of the shape above.
void check_filter(const Value& filter);
bool filter_matches(const Value& filter, const Event& ev);

/// Filter document exchanged with adapters: {"field": v} for equality and
/// {"field": {"$in": [v, ...]}} for membership, values in wire encoding.
json filter_to_json(const Value& filter);
/// Compares at the JSON level against an event's "streams" object.
bool filter_matches_json(const json& filter, const json& streams);
void check_filter_json(const json& filter);

class LogStore {
public:
    virtual ~LogStore() = default;

    /// Requires ev.instant == size(); throws Errc::Integrity otherwise.
    virtual void append(const Event& ev) = 0;
    virtual Instant size() const = 0;
    /// Events with instants in [from, to) matching the filter, in order.
    /// Requires 0 <= from <= to <= size().
    virtual std::vector<Event> fetch(Instant from, Instant to, const Value& filter) const = 0;
};

class InMemoryStore : public LogStore {
public:
    void append(const Event& ev) override;
    Instant size() const override;
    std::vector<Event> fetch(Instant from, Instant to, const Value& filter) const override;

    const std::vector<Event>& events() const { return events_; }

private:
    std::vector<Event> events_;
};

/// Append-only file of wire-format lines plus a `<path>.idx` sidecar that
/// maps every kIndexStride-th instant to the byte offset of its line.
class FileBackedStore : public LogStore {
public:
    static constexpr Instant kIndexStride = 1024;

    /// Opens (creating if needed) the store. An empty schema decodes values
    /// untyped.
    explicit FileBackedStore(std::filesystem::path path, Schema schema = {});

    void append(const Event& ev) override;
    Instant size() const override;
    std::vector<Event> fetch(Instant from, Instant to, const Value& filter) const override;

    /// Raw lines of the matching events, exactly as stored.
    std::vector<std::string> fetch_lines(Instant from, Instant to, const json& filter) const;

    const std::filesystem::path& path() const { return path_; }
    static std::filesystem::path index_path(const std::filesystem::path& store);

private:
    void load_existing();

    std::filesystem::path path_;
    Schema schema_;
    Instant size_ = 0;
    std::uint64_t bytes_ = 0;
    std::vector<std::uint64_t> index_;
    mutable std::mutex mu_;
    std::ofstream out_;
    std::ofstream idx_out_;
};

/// Reads the index sidecar of a store file; empty if absent.
std::vector<std::uint64_t> read_store_index(const std::filesystem::path& store);

/// Scans a store file for lines with instants in [from, to) that match the
/// JSON filter, seeking through the index when present (and use_index).
/// Throws Errc::Integrity on malformed lines or non-dense instants.
std::vector<std::string> scan_store_lines(const std::filesystem::path& store, Instant from, Instant to,
                                          const json& filter, bool use_index = true);

} // namespace srv
