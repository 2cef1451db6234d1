#include "srv/log_store.hpp"

#include <algorithm>

namespace srv {

namespace {

[[noreturn]] void filter_error(const std::string& why) { throw Error(Errc::Filter, "malformed filter: " + why); }

template <typename F>
void for_each_clause(const Value& filter, F&& f) {
    switch (filter.kind()) {
    case ValueKind::Unit: return;
    case ValueKind::Record: {
        const auto& r = filter.as_record();
        for (std::size_t i = 0; i < r.names.size(); ++i) f(r.names[i], r.values[i]);
        return;
    }
    case ValueKind::Map:
        for (const auto& [k, v] : filter.as_map()) {
            if (k.kind() != ValueKind::Text) filter_error("map keys must be Text, got " + k.str());
            f(k.as_text(), v);
        }
        return;
    default: filter_error("expected a record or map, got " + filter.str());
    }
}

} // namespace

void check_filter(const Value& filter) {
    for_each_clause(filter, [](const std::string&, const Value&) {});
}

bool filter_matches(const Value& filter, const Event& ev) {
    bool ok = true;
    for_each_clause(filter, [&](const std::string& name, const Value& want) {
        if (!ok) return;
        auto it = ev.bindings.find(name);
        if (it == ev.bindings.end()) {
            ok = false;
        } else if (want.kind() == ValueKind::Set) {
            ok = want.as_set().count(it->second) > 0;
        } else {
            ok = it->second == want;
        }
    });
    return ok;
}

json filter_to_json(const Value& filter) {
    json out = json::object();
    for_each_clause(filter, [&](const std::string& name, const Value& want) {
        if (want.kind() == ValueKind::Set) {
            json in = json::array();
            for (const auto& e : want.as_set()) in.push_back(to_wire(e));
            out[name] = json{{"$in", std::move(in)}};
        } else {
            out[name] = to_wire(want);
        }
    });
    return out;
}

void check_filter_json(const json& filter) {
    if (!filter.is_object()) throw Error(Errc::Filter, "malformed filter: expected an object");
    for (const auto& [name, clause] : filter.items()) {
        if (clause.is_object()) {
            if (clause.size() != 1 || !clause.contains("$in") || !clause["$in"].is_array()) {
                throw Error(Errc::Filter, "malformed filter clause for '" + name + "'");
            }
        }
    }
}

bool filter_matches_json(const json& filter, const json& streams) {
    for (const auto& [name, clause] : filter.items()) {
        auto it = streams.find(name);
        if (it == streams.end()) return false;
        if (clause.is_object() && clause.contains("$in")) {
            const auto& opts = clause["$in"];
            if (std::find(opts.begin(), opts.end(), *it) == opts.end()) return false;
        } else if (!(*it == clause)) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------

void InMemoryStore::append(const Event& ev) {
    if (ev.instant != size()) {
        throw Error(Errc::Integrity, "append of instant " + std::to_string(ev.instant) + " to a store of size " +
                                         std::to_string(size()));
    }
    events_.push_back(ev);
}

Instant InMemoryStore::size() const { return static_cast<Instant>(events_.size()); }

namespace {

void check_range(Instant from, Instant to, Instant size) {
    if (from < 0 || from > to || to > size) {
        throw Error(Errc::Integrity, "fetch range [" + std::to_string(from) + ", " + std::to_string(to) +
                                         ") outside store of size " + std::to_string(size));
    }
}

} // namespace

std::vector<Event> InMemoryStore::fetch(Instant from, Instant to, const Value& filter) const {
    check_filter(filter);
    check_range(from, to, size());
    std::vector<Event> out;
    for (Instant i = from; i < to; ++i) {
        const Event& ev = events_[static_cast<std::size_t>(i)];
        if (filter_matches(filter, ev)) out.push_back(ev);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::filesystem::path FileBackedStore::index_path(const std::filesystem::path& store) {
    auto p = store;
    p += ".idx";
    return p;
}

std::vector<std::uint64_t> read_store_index(const std::filesystem::path& store) {
    std::vector<std::uint64_t> index;
    std::ifstream in(FileBackedStore::index_path(store));
    if (!in) return index;
    Instant inst = 0;
    std::uint64_t off = 0;
    while (in >> inst >> off) {
        if (inst != static_cast<Instant>(index.size()) * FileBackedStore::kIndexStride) {
            throw Error(Errc::Integrity, "index of " + store.string() + " is corrupt");
        }
        index.push_back(off);
    }
    return index;
}

std::vector<std::string> scan_store_lines(const std::filesystem::path& store, Instant from, Instant to,
                                          const json& filter, bool use_index) {
    std::vector<std::string> out;
    if (from >= to) return out;
    std::ifstream in(store, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open store " + store.string());
    Instant expect = 0;
    if (use_index) {
        auto index = read_store_index(store);
        if (!index.empty()) {
            std::size_t slot = std::min(static_cast<std::size_t>(from / FileBackedStore::kIndexStride), index.size() - 1);
            in.seekg(static_cast<std::streamoff>(index[slot]));
            expect = static_cast<Instant>(slot) * FileBackedStore::kIndexStride;
        }
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(Errc::Integrity, "corrupt line in " + store.string() + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("instant") || !j["instant"].is_number_integer() || !j.contains("streams") ||
            !j["streams"].is_object()) {
            throw Error(Errc::Integrity, "corrupt event in " + store.string());
        }
        Instant inst = j["instant"].get<Instant>();
        // Instants are dense from zero; anything else means a damaged file
        // or a stale index.
        if (inst != expect) {
            throw Error(Errc::Integrity, "store " + store.string() + ": found instant " + std::to_string(inst) +
                                             " where " + std::to_string(expect) + " was expected");
        }
        ++expect;
        if (inst < from) continue;
        if (inst >= to) break;
        if (filter_matches_json(filter, j["streams"])) out.push_back(line);
    }
    return out;
}

FileBackedStore::FileBackedStore(std::filesystem::path path, Schema schema)
    : path_(std::move(path)), schema_(std::move(schema)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    load_existing();
    out_.open(path_, std::ios::binary | std::ios::app);
    idx_out_.open(index_path(path_), std::ios::app);
    if (!out_ || !idx_out_) throw Error(Errc::Io, "cannot open store " + path_.string() + " for writing");
}

void FileBackedStore::load_existing() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    std::string line;
    std::uint64_t offset = 0;
    std::vector<std::uint64_t> index;
    while (std::getline(in, line)) {
        std::uint64_t start = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        Event ev = decode_event(line, nullptr);
        if (ev.instant != size_) {
            throw Error(Errc::Integrity, "store " + path_.string() + " has instant " + std::to_string(ev.instant) +
                                             " at position " + std::to_string(size_));
        }
        if (size_ % kIndexStride == 0) index.push_back(start);
        ++size_;
    }
    bytes_ = offset;
    index_ = std::move(index);
    // Rewrite the sidecar so that it always agrees with the data file.
    std::ofstream idx(index_path(path_), std::ios::trunc);
    for (std::size_t i = 0; i < index_.size(); ++i) {
        idx << static_cast<Instant>(i) * kIndexStride << ' ' << index_[i] << '\n';
    }
}

void FileBackedStore::append(const Event& ev) {
    std::lock_guard lock(mu_);
    if (ev.instant != size_) {
        throw Error(Errc::Integrity, "append of instant " + std::to_string(ev.instant) + " to a store of size " +
                                         std::to_string(size_));
    }
    std::string line = encode_event(ev);
    if (size_ % kIndexStride == 0) {
        index_.push_back(bytes_);
        idx_out_ << size_ << ' ' << bytes_ << '\n';
        idx_out_.flush();
    }
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw Error(Errc::Io, "write to " + path_.string() + " failed");
    bytes_ += line.size() + 1;
    ++size_;
}

Instant FileBackedStore::size() const {
    std::lock_guard lock(mu_);
    return size_;
}

std::vector<std::string> FileBackedStore::fetch_lines(Instant from, Instant to, const json& filter) const {
    check_filter_json(filter);
    check_range(from, to, size());
    return scan_store_lines(path_, from, to, filter);
}

std::vector<Event> FileBackedStore::fetch(Instant from, Instant to, const Value& filter) const {
    check_filter(filter);
    check_range(from, to, size());
    std::vector<Event> out;
    const Schema* schema = schema_.empty() ? nullptr : &schema_;
    for (const auto& line : scan_store_lines(path_, from, to, json::object())) {
        Event ev = decode_event(line, schema);
        if (filter_matches(filter, ev)) out.push_back(std::move(ev));
    }
    return out;
}

} // namespace srv
