#include "srv/retriever.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <climits>
#include <cstring>
#include <sstream>

extern char** environ;

namespace srv {

void StoreRetriever::add(std::string name, std::shared_ptr<LogStore> store) {
    stores_[std::move(name)] = std::move(store);
}

namespace {

std::vector<Event> fetch_from(const LogStore& store, const FetchRequest& req) {
    Instant size = store.size();
    Instant to = std::min(req.to.value_or(size), size);
    Instant from = std::clamp<Instant>(req.from, 0, std::max<Instant>(to, 0));
    if (to < 0) to = 0;
    return store.fetch(from, std::max(from, to), req.filter);
}

} // namespace

std::vector<Event> StoreRetriever::fetch(const FetchRequest& req) const {
    auto it = stores_.find(req.store);
    if (it == stores_.end()) {
        throw Error(Errc::Adapter, req.store.empty() ? "no log is attached to this monitor"
                                                     : "unknown log store '" + req.store + "'");
    }
    if (!req.command.empty()) {
        auto* file = dynamic_cast<const FileBackedStore*>(it->second.get());
        if (!file) throw Error(Errc::Adapter, "adapter command needs a file-backed store");
        Instant to = std::min(req.to.value_or(file->size()), file->size());
        return run_external_adapter(req.command, file->path(), std::max<Instant>(req.from, 0), to, req.filter,
                                    req.schema, req.param);
    }
    return fetch_from(*it->second, req);
}

OverlayRetriever::OverlayRetriever(std::string name, std::shared_ptr<LogStore> store,
                                   std::shared_ptr<const Retriever> fallback)
    : name_(std::move(name)), store_(std::move(store)), fallback_(std::move(fallback)) {}

std::vector<Event> OverlayRetriever::fetch(const FetchRequest& req) const {
    if (req.store == name_) return fetch_from(*store_, req);
    if (!fallback_) throw Error(Errc::Adapter, "unknown log store '" + req.store + "'");
    return fallback_->fetch(req);
}

AdapterRetriever::AdapterRetriever(std::string command, std::map<std::string, std::filesystem::path> stores)
    : command_(std::move(command)), stores_(std::move(stores)) {}

std::vector<Event> AdapterRetriever::fetch(const FetchRequest& req) const {
    auto it = stores_.find(req.store);
    if (it == stores_.end()) throw Error(Errc::Adapter, "unknown log store '" + req.store + "'");
    Instant to = req.to.value_or(LLONG_MAX);
    const std::string& cmd = req.command.empty() ? command_ : req.command;
    return run_external_adapter(cmd, it->second, std::max<Instant>(req.from, 0), to, req.filter, req.schema,
                                req.param);
}

std::vector<std::string> expand_command(const std::string& tmpl, const std::map<std::string, std::string>& vars) {
    std::vector<std::string> argv;
    std::istringstream in(tmpl);
    std::string tok;
    while (in >> tok) {
        std::string out;
        for (std::size_t i = 0; i < tok.size();) {
            if (tok[i] == '{') {
                auto close = tok.find('}', i);
                if (close != std::string::npos) {
                    auto it = vars.find(tok.substr(i + 1, close - i - 1));
                    if (it == vars.end()) {
                        throw Error(Errc::Adapter, "unknown placeholder " + tok.substr(i, close - i + 1) +
                                                       " in adapter command");
                    }
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
            out += tok[i++];
        }
        argv.push_back(std::move(out));
    }
    if (argv.empty()) throw Error(Errc::Adapter, "empty adapter command");
    return argv;
}

std::string run_process(const std::vector<std::string>& argv) {
    int fds[2];
    if (pipe(fds) != 0) throw Error(Errc::Adapter, std::string("pipe: ") + std::strerror(errno));
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addclose(&actions, fds[0]);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, fds[1]);

    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    pid_t pid = 0;
    int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(fds[1]);
    if (rc != 0) {
        close(fds[0]);
        throw Error(Errc::Adapter, "cannot start adapter '" + argv[0] + "': " + std::strerror(rc));
    }
    std::string out;
    char buf[65536];
    for (;;) {
        ssize_t got = read(fds[0], buf, sizeof buf);
        if (got < 0 && errno == EINTR) continue;
        if (got <= 0) break;
        out.append(buf, static_cast<std::size_t>(got));
    }
    close(fds[0]);
    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw Error(Errc::Adapter, std::string("waitpid: ") + std::strerror(errno));
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        std::string how = WIFEXITED(status) ? "exit status " + std::to_string(WEXITSTATUS(status)) : "a signal";
        throw Error(Errc::Adapter, "adapter '" + argv[0] + "' failed with " + how);
    }
    return out;
}

std::vector<Event> parse_adapter_output(const std::string& out, Instant from, Instant to, const Schema* schema) {
    std::vector<Event> events;
    std::istringstream in(out);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        Event ev;
        try {
            ev = decode_event(line, schema);
        } catch (const Error& e) {
            throw Error(Errc::Adapter, "adapter output line " + std::to_string(lineno) + ": " + e.what());
        }
        if (ev.instant < from || ev.instant >= to) {
            throw Error(Errc::Adapter, "adapter output line " + std::to_string(lineno) + ": instant " +
                                           std::to_string(ev.instant) + " outside the requested range");
        }
        if (!events.empty() && ev.instant <= events.back().instant) {
            throw Error(Errc::Adapter, "adapter output line " + std::to_string(lineno) + ": instants out of order");
        }
        events.push_back(std::move(ev));
    }
    return events;
}

std::vector<Event> run_external_adapter(const std::string& command, const std::filesystem::path& store,
                                        Instant from, Instant to, const Value& filter, const Schema* schema,
                                        const Value& param) {
    check_filter(filter);
    std::map<std::string, std::string> vars{{"store", store.string()},
                                            {"from", std::to_string(from)},
                                            {"to", std::to_string(to)},
                                            {"filter", filter_to_json(filter).dump()},
                                            {"param", to_wire(param).dump()}};
    auto argv = expand_command(command, vars);
    // A bare program name gets the standard argument list.
    if (command.find('{') == std::string::npos) {
        argv.insert(argv.end(), {"--store", vars["store"], "--from", vars["from"], "--to", vars["to"], "--filter",
                                 vars["filter"]});
    }
    return parse_adapter_output(run_process(argv), from, to, schema);
}

} // namespace srv
