#include "srv/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "srv/builtins.hpp"
#include "srv/ddos.hpp"
#include "srv/offline.hpp"
#include "srv/spec_json.hpp"

namespace srv::cli {

namespace fs = std::filesystem;

ValidatedSpecPtr resolve_spec(const std::string& name_or_path) {
    if (const Builtin* b = find_builtin(name_or_path)) return b->spec;
    std::error_code ec;
    if (!fs::is_regular_file(name_or_path, ec)) {
        std::string names;
        for (const auto& b : builtins()) names += (names.empty() ? "" : ", ") + b.name;
        throw Error(Errc::Usage, "'" + name_or_path + "' is neither a builtin spec (" + names + ") nor a file");
    }
    std::ifstream in(name_or_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(Errc::Parse, name_or_path + ": " + e.what());
    }
    return validate_or_throw(spec_from_json(doc), default_registry());
}

namespace {

// A nested monitor logs into a fresh store of its own, so its "" needs
// nothing from the caller; over instances share the root's.
void collect_stores(const ValidatedSpec& spec, bool nested, std::set<std::string>& out,
                    std::set<std::pair<const ValidatedSpec*, bool>>& seen) {
    if (!seen.insert({&spec, nested}).second) return;
    auto add = [&](const std::string& name) {
        if (!(nested && name.empty())) out.insert(name);
    };
    for (const auto& o : spec.overs()) {
        if (o.has_init) add(o.init_store);
        if (o.instance) collect_stores(*o.instance, nested, out, seen);
    }
    for (const auto& r : spec.retrieves()) add(r.store);
    for (const auto& n : spec.nested()) collect_stores(*n.spec, true, out, seen);
}

void find_schema(const ValidatedSpec& spec, const std::string& store, std::optional<Schema>& out,
                 std::set<const ValidatedSpec*>& seen) {
    if (out || !seen.insert(&spec).second) return;
    for (const auto& r : spec.retrieves()) {
        if (r.store == store && !r.schema.empty()) {
            out = r.schema;
            return;
        }
    }
    for (const auto& o : spec.overs()) {
        if (o.instance) find_schema(*o.instance, store, out, seen);
    }
    for (const auto& n : spec.nested()) find_schema(*n.spec, store, out, seen);
}

std::map<std::string, fs::path> parse_store_args(const std::vector<std::string>& args) {
    std::map<std::string, fs::path> out;
    for (const auto& a : args) {
        auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == a.size()) {
            throw Error(Errc::Usage, "--store expects name=path, got '" + a + "'");
        }
        out[a.substr(0, eq)] = a.substr(eq + 1);
    }
    return out;
}

json cell_json(const Resolved& r) {
    json j{{"instant", r.instant}, {"stream", r.stream}};
    if (r.cell.ok()) {
        j["value"] = to_wire(r.cell.value);
    } else {
        j["error"] = *r.cell.error;
    }
    return j;
}

bool is_ok_stream(const std::string& name) {
    return name.size() >= 3 && name.compare(name.size() - 3, 3, "_ok") == 0;
}

std::vector<Event> read_trace(std::istream& in, const Schema& schema) {
    std::vector<Event> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(decode_event(line, &schema));
        } catch (const Error& e) {
            throw Error(e.code(), "input line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::vector<Event> read_store_file(const fs::path& path, const std::optional<Schema>& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open store " + path.string());
    std::vector<Event> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(decode_event(line, schema ? &*schema : nullptr));
        } catch (const Error& e) {
            throw Error(e.code(), path.string() + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// Named stores from --store and the log directory; "" is left to the caller.
std::map<std::string, fs::path> locate_stores(const ValidatedSpec& spec, const RunConfig& cfg) {
    auto given = parse_store_args(cfg.stores);
    std::map<std::string, fs::path> found;
    for (const auto& name : required_stores(spec)) {
        if (name.empty()) {
            if (cfg.log_store.empty()) {
                throw Error(Errc::Usage, "specification '" + spec.source().name +
                                             "' is retroactive (it reads its own past events); pass --log-store <dir>");
            }
            continue;
        }
        if (auto it = given.find(name); it != given.end()) {
            found[name] = it->second;
        } else if (!cfg.log_store.empty() && fs::exists(fs::path(cfg.log_store) / (name + ".log"))) {
            found[name] = fs::path(cfg.log_store) / (name + ".log");
        } else {
            throw Error(Errc::Usage, "specification '" + spec.source().name + "' reads log store '" + name +
                                         "'; pass --store " + name + "=<path> or put " + name +
                                         ".log in the --log-store directory");
        }
        if (!fs::is_regular_file(found[name])) {
            throw Error(Errc::Usage, "log store '" + name + "' not found at " + found[name].string());
        }
    }
    return found;
}

struct RunTotals {
    std::int64_t events = 0;
    std::int64_t resolved = 0;
    std::int64_t violations = 0;
    std::int64_t errors = 0;
    std::optional<Resolved> first_violation;
    std::optional<Resolved> first_error;
    std::optional<Cell> verdict;
};

json resolved_ref(const std::optional<Resolved>& r) {
    if (!r) return nullptr;
    return cell_json(*r);
}

void write_report(const std::string& path, const RunConfig& cfg, const ValidatedSpecPtr& spec,
                  const MonitorState* st, const Environment* env, const RunTotals& t, int code,
                  const std::string& error) {
    if (path.empty()) return;
    json r{{"spec", spec ? spec->source().name : cfg.spec},
           {"events", t.events},
           {"resolved", t.resolved},
           {"violations", t.violations},
           {"first_violation", resolved_ref(t.first_violation)},
           {"errors", t.errors},
           {"first_error", resolved_ref(t.first_error)},
           {"exit", code}};
    if (!error.empty()) r["error"] = error;
    if (t.verdict) {
        r["verdict"] = t.verdict->ok() ? to_wire(t.verdict->value) : json{{"error", *t.verdict->error}};
    } else {
        r["verdict"] = nullptr;
    }
    if (st && st->spec()) {
        json overs = json::array();
        for (const auto& o : over_stats(*st)) {
            overs.push_back({{"name", o.name}, {"def", o.def}, {"live", o.live}, {"max_live", o.max_live}});
        }
        r["overs"] = overs;
    }
    if (env) {
        r["nested_runs"] = env->stats->nested_runs.load();
        r["nested_events"] = env->stats->nested_events.load();
        r["installs"] = env->stats->installs.load();
        r["replayed_events"] = env->stats->replayed_events.load();
        r["instance_steps"] = env->stats->instance_steps.load();
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write report " + path);
    out << r.dump(2) << '\n';
}

} // namespace

std::set<std::string> required_stores(const ValidatedSpec& spec) {
    std::set<std::string> out;
    std::set<std::pair<const ValidatedSpec*, bool>> seen;
    collect_stores(spec, false, out, seen);
    return out;
}

std::optional<Schema> store_schema(const ValidatedSpec& spec, const std::string& store) {
    std::optional<Schema> out;
    std::set<const ValidatedSpec*> seen;
    find_schema(spec, store, out, seen);
    return out;
}

bool is_violation(const Resolved& r) {
    return r.cell.ok() && r.cell.value.kind() == ValueKind::Bool && is_ok_stream(r.stream) && !r.cell.value.as_bool();
}

int cmd_run(const RunConfig& cfg, std::istream& in, std::ostream& out, std::ostream& err) {
    if (cfg.output != "verdicts" && cfg.output != "full") {
        err << "srv run: --output must be 'full' or 'verdicts'\n";
        return kEngineError;
    }
    ValidatedSpecPtr spec;
    std::optional<MonitorState> st;
    std::optional<Environment> env;
    RunTotals t;
    auto fail = [&](const std::string& msg) {
        err << "srv run: " << msg << '\n';
        try {
            write_report(cfg.report, cfg, spec, st ? &*st : nullptr, env ? &*env : nullptr, t, kEngineError, msg);
        } catch (const Error& e) {
            err << "srv run: " << e.what() << '\n';
        }
        return kEngineError;
    };

    std::ifstream file;
    std::istream* src = &in;
    try {
        spec = resolve_spec(cfg.spec);
        // Everything that can be diagnosed statically is, before any event
        // is consumed.
        if (!cfg.adapter.empty() && cfg.log_store.empty()) {
            throw Error(Errc::Usage, "--adapter serves files of a log store; pass --log-store <dir>");
        }
        auto named = locate_stores(*spec, cfg);
        if (cfg.input != "-") {
            file.open(cfg.input, std::ios::binary);
            if (!file) throw Error(Errc::Io, "cannot open input " + cfg.input);
            src = &file;
        }

        std::shared_ptr<LogStore> own;
        fs::path own_path;
        if (!cfg.log_store.empty()) {
            fs::create_directories(cfg.log_store);
            own_path = fs::path(cfg.log_store) / "events.log";
            fs::remove(own_path);
            fs::remove(FileBackedStore::index_path(own_path));
            own = std::make_shared<FileBackedStore>(own_path, spec->schema());
        }
        Environment e;
        e.own_log = own;
        if (cfg.adapter.empty()) {
            auto r = std::make_shared<StoreRetriever>();
            if (own) r->add("", own);
            for (const auto& [name, path] : named) {
                auto schema = store_schema(*spec, name);
                r->add(name, std::make_shared<FileBackedStore>(path, schema.value_or(Schema{})));
            }
            e.retriever = r;
        } else {
            std::map<std::string, fs::path> paths = named;
            paths[""] = own_path;
            e.retriever = std::make_shared<AdapterRetriever>(cfg.adapter, paths);
        }
        env = std::move(e);
        st = start(spec);
    } catch (const Error& e) {
        return fail(e.what());
    }

    auto emit = [&](const StepOutput& so) {
        for (const auto& r : so.resolved) {
            ++t.resolved;
            if (!r.cell.ok()) {
                ++t.errors;
                if (!t.first_error) t.first_error = r;
            } else if (is_violation(r)) {
                ++t.violations;
                if (!t.first_violation) t.first_violation = r;
            }
            if (cfg.output == "full" || !r.cell.ok() || (is_ok_stream(r.stream) && r.cell.value.kind() == ValueKind::Bool)) {
                out << cell_json(r).dump() << '\n';
            }
        }
        if (so.verdict && !t.verdict) {
            t.verdict = so.verdict;
            json v = so.verdict->ok() ? json{{"verdict", to_wire(so.verdict->value)}}
                                      : json{{"verdict_error", *so.verdict->error}};
            out << v.dump() << '\n';
        }
    };

    std::string line;
    int lineno = 0;
    try {
        while (std::getline(*src, line)) {
            ++lineno;
            if (line.empty()) continue;
            Event ev;
            try {
                ev = decode_event(line, &spec->schema());
                emit(step(*st, ev, *env));
            } catch (const Error& e) {
                throw Error(e.code(), "input line " + std::to_string(lineno) + ": " + e.what());
            }
            ++t.events;
        }
        if (t.events > 0 || !spec->return_cond()) emit(finish(*st, *env));
    } catch (const Error& e) {
        return fail(e.what());
    }

    int code = kOk;
    if (t.errors > 0 || (t.verdict && !t.verdict->ok())) {
        code = kEngineError;
    } else if (t.violations > 0 || (t.verdict && t.verdict->value.kind() == ValueKind::Bool && !t.verdict->value.as_bool())) {
        code = kViolation;
    }
    if (t.first_error) err << "srv run: evaluation error: " << cell_json(*t.first_error).dump() << '\n';
    try {
        write_report(cfg.report, cfg, spec, &*st, &*env, t, code, "");
    } catch (const Error& e) {
        err << "srv run: " << e.what() << '\n';
        return kEngineError;
    }
    return code;
}

std::optional<Divergence> first_divergence(const ValidatedSpec& spec, const RunResult& online,
                                           const RunResult& offline) {
    static const std::vector<Cell> none;
    auto column = [](const RunResult& r, const std::string& name) -> const std::vector<Cell>& {
        auto it = r.outputs.find(name);
        return it == r.outputs.end() ? none : it->second;
    };
    std::size_t len = 0;
    for (const auto& [name, cells] : online.outputs) len = std::max(len, cells.size());
    for (const auto& [name, cells] : offline.outputs) len = std::max(len, cells.size());
    for (std::size_t t = 0; t < len; ++t) {
        for (int id : spec.outputs()) {
            const std::string& name = spec.stream(id).name;
            const auto& a = column(online, name);
            const auto& b = column(offline, name);
            std::string sa = t < a.size() ? a[t].str() : "<missing>";
            std::string sb = t < b.size() ? b[t].str() : "<missing>";
            bool same = t < a.size() && t < b.size() && a[t] == b[t];
            if (!same) return Divergence{static_cast<Instant>(t), name, sa, sb};
        }
    }
    bool same = online.verdict.has_value() == offline.verdict.has_value() &&
                (!online.verdict || *online.verdict == *offline.verdict);
    if (!same) {
        return Divergence{static_cast<Instant>(len), "<verdict>", online.verdict ? online.verdict->str() : "<none>",
                          offline.verdict ? offline.verdict->str() : "<none>"};
    }
    return std::nullopt;
}

int cmd_oracle_check(const std::string& spec_name, const std::string& input, const std::vector<std::string>& stores,
                     std::istream& in, std::ostream& out, std::ostream& err) {
    try {
        auto spec = resolve_spec(spec_name);
        std::vector<Event> trace;
        if (input == "-") {
            trace = read_trace(in, spec->schema());
        } else {
            std::ifstream f(input, std::ios::binary);
            if (!f) throw Error(Errc::Io, "cannot open input " + input);
            trace = read_trace(f, spec->schema());
        }
        if (trace.empty()) {
            out << "ok: empty trace\n";
            return kOk;
        }
        auto given = parse_store_args(stores);
        std::map<std::string, std::vector<Event>> contents;
        for (const auto& name : required_stores(*spec)) {
            if (name.empty()) continue;
            auto it = given.find(name);
            if (it == given.end()) {
                throw Error(Errc::Usage, "specification reads log store '" + name + "'; pass --store " + name + "=<path>");
            }
            contents[name] = read_store_file(it->second, store_schema(*spec, name));
        }
        Scenario sc{trace, contents};
        RunResult online = run_online(spec, trace, scenario_environment(sc));
        RunResult offline = run_offline(spec, trace, scenario_environment(sc));
        if (auto d = first_divergence(*spec, online, offline)) {
            out << "diverged at instant " << d->instant << ", stream " << d->stream << ": online " << d->online
                << ", offline " << d->offline << '\n';
            return kViolation;
        }
        out << "ok: " << trace.size() << " instants, " << spec->outputs().size() << " outputs agree\n";
        return kOk;
    } catch (const Error& e) {
        err << "srv oracle-check: " << e.what() << '\n';
        return kEngineError;
    }
}

int cmd_gen_traffic(const std::string& profile, std::int64_t flows, std::uint64_t seed, const fs::path& out_path,
                    std::ostream& err) {
    try {
        auto traffic = ddos::generate_traffic(profile, flows, seed);
        ddos::write_events(out_path, ddos::flow_events(traffic.flows));
        fs::path truth = out_path;
        truth += ".truth.json";
        std::ofstream t(truth, std::ios::trunc);
        if (!t) throw Error(Errc::Io, "cannot write " + truth.string());
        t << ddos::truth_to_json(traffic.truth).dump(2) << '\n';
        return kOk;
    } catch (const Error& e) {
        err << "srv gen-traffic: " << e.what() << '\n';
        return kEngineError;
    }
}

int cmd_summarize(const fs::path& input, const fs::path& out_path, std::ostream& err) {
    try {
        ddos::write_events(out_path, ddos::summarize(ddos::read_events(input, &ddos::flow_schema())));
        return kOk;
    } catch (const Error& e) {
        err << "srv summarize: " << e.what() << '\n';
        return kEngineError;
    }
}

int main(int argc, char** argv) {
    CLI::App app{"Stream runtime verification engine"};
    app.require_subcommand(1);

    RunConfig cfg;
    auto* run = app.add_subcommand("run", "Monitor a trace online");
    run->add_option("--spec", cfg.spec, "Builtin name or spec file")->required();
    run->add_option("--input", cfg.input, "Trace file, - for standard input");
    run->add_option("--log-store", cfg.log_store, "Directory for the event log and named stores");
    run->add_option("--adapter", cfg.adapter, "External adapter command for retroactive fetches");
    run->add_option("--store", cfg.stores, "Named store as name=path");
    run->add_option("--output", cfg.output, "full or verdicts")->check(CLI::IsMember({"full", "verdicts"}));
    run->add_option("--report", cfg.report, "Write a JSON run report here");

    std::string o_spec, o_input = "-";
    std::vector<std::string> o_stores;
    auto* oracle = app.add_subcommand("oracle-check", "Compare online and offline evaluation");
    oracle->add_option("--spec", o_spec)->required();
    oracle->add_option("--input", o_input);
    oracle->add_option("--store", o_stores, "Named store as name=path");

    std::string profile, g_out;
    std::int64_t flows = 10000;
    std::uint64_t seed = 1;
    auto* gen = app.add_subcommand("gen-traffic", "Generate a synthetic flow trace");
    gen->add_option("--profile", profile)->required()->check(CLI::IsMember({"d1", "d2", "d3", "d4"}));
    gen->add_option("--flows", flows)->check(CLI::PositiveNumber);
    gen->add_option("--seed", seed);
    gen->add_option("--out", g_out)->required();

    std::string s_in, s_out;
    auto* sum = app.add_subcommand("summarize", "Per-batch attack markers of a flow trace");
    sum->add_option("--input", s_in)->required();
    sum->add_option("--out", s_out)->required();

    auto* list = app.add_subcommand("list", "List builtin specifications");
    std::string show_name;
    auto* show = app.add_subcommand("show-spec", "Print a specification document");
    show->add_option("name", show_name)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kEngineError;
    }

    if (*run) return cmd_run(cfg, std::cin, std::cout, std::cerr);
    if (*oracle) return cmd_oracle_check(o_spec, o_input, o_stores, std::cin, std::cout, std::cerr);
    if (*gen) return cmd_gen_traffic(profile, flows, seed, g_out, std::cerr);
    if (*sum) return cmd_summarize(s_in, s_out, std::cerr);
    if (*list) {
        for (const auto& b : builtins()) std::cout << b.name << "\t" << b.summary << '\n';
        return kOk;
    }
    if (*show) {
        try {
            std::cout << spec_to_json(resolve_spec(show_name)->source()).dump(2) << '\n';
            return kOk;
        } catch (const Error& e) {
            std::cerr << "srv show-spec: " << e.what() << '\n';
            return kEngineError;
        }
    }
    return kEngineError;
}

} // namespace srv::cli
