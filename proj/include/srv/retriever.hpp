#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "srv/log_store.hpp"

namespace srv {

struct FetchRequest {
    /// "" is the log of the monitor that issues the request.
    std::string store;
    Instant from = 0;
    /// Exclusive end; nullopt means the end of the store.
    std::optional<Instant> to;
    Value filter;
    /// Adapter command template ({store} {from} {to} {filter} {param});
    /// empty selects the retriever's own backend.
    std::string command;
    Value param;
    /// Types for decoding, when known.
    const Schema* schema = nullptr;
};

/// Source of past events for initializers and retrievals.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<Event> fetch(const FetchRequest& req) const = 0;
};

/// Serves requests from in-process stores.
class StoreRetriever : public Retriever {
public:
    void add(std::string name, std::shared_ptr<LogStore> store);
    std::vector<Event> fetch(const FetchRequest& req) const override;

private:
    std::map<std::string, std::shared_ptr<LogStore>, std::less<>> stores_;
};

/// Maps one store name to a store and delegates the rest.
class OverlayRetriever : public Retriever {
public:
    OverlayRetriever(std::string name, std::shared_ptr<LogStore> store, std::shared_ptr<const Retriever> fallback);
    std::vector<Event> fetch(const FetchRequest& req) const override;

private:
    std::string name_;
    std::shared_ptr<LogStore> store_;
    std::shared_ptr<const Retriever> fallback_;
};

/// Runs an external adapter process per request over file-backed stores:
/// `<command> --store <path> --from <n> --to <n> --filter <doc>`.
class AdapterRetriever : public Retriever {
public:
    AdapterRetriever(std::string command, std::map<std::string, std::filesystem::path> stores);
    std::vector<Event> fetch(const FetchRequest& req) const override;

private:
    std::string command_;
    std::map<std::string, std::filesystem::path> stores_;
};

/// Spawns argv (no shell), returns its standard output. Throws Errc::Adapter
/// on spawn failure or non-zero exit; output of a failed run is discarded.
std::string run_process(const std::vector<std::string>& argv);

/// Parses adapter output into events, checking instants lie in [from, to)
/// and increase strictly. Errors name the offending line.
std::vector<Event> parse_adapter_output(const std::string& out, Instant from, Instant to, const Schema* schema);

std::vector<Event> run_external_adapter(const std::string& command, const std::filesystem::path& store,
                                        Instant from, Instant to, const Value& filter, const Schema* schema,
                                        const Value& param = Value());

/// Splits on whitespace and substitutes {name} placeholders in every token.
std::vector<std::string> expand_command(const std::string& tmpl, const std::map<std::string, std::string>& vars);

} // namespace srv
