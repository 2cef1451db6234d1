#include "srv/engine.hpp"

#include <algorithm>
#include <stdexcept>

#include "srv/value_json.hpp"

namespace srv {

Environment make_environment(std::map<std::string, std::shared_ptr<LogStore>> named,
                             std::shared_ptr<LogStore> own_log) {
    Environment env;
    auto r = std::make_shared<StoreRetriever>();
    for (auto& [name, store] : named) r->add(name, store);
    if (own_log) r->add("", own_log);
    env.retriever = std::move(r);
    env.own_log = std::move(own_log);
    return env;
}

// ---------------------------------------------------------------------------
// OverState deep copies.

OverState::OverState(const OverState& other)
    : prev(other.prev), result(other.result), result_value(other.result_value), max_live(other.max_live) {
    for (const auto& [p, inst] : other.instances) instances.emplace(p, std::make_unique<InstanceState>(*inst));
}

OverState& OverState::operator=(const OverState& other) {
    if (this != &other) {
        OverState copy(other);
        *this = std::move(copy);
    }
    return *this;
}

OverState::OverState(OverState&&) noexcept = default;
OverState& OverState::operator=(OverState&&) noexcept = default;
OverState::~OverState() = default;

MonitorState::MonitorState(ValidatedSpecPtr spec) : spec_(std::move(spec)) {
    windows_.resize(spec_->streams().size());
    reported_.assign(spec_->outputs().size(), 0);
    overs_.resize(spec_->overs().size());
}

std::size_t MonitorState::window_occupancy() const {
    std::size_t m = 0;
    for (const auto& w : windows_) m = std::max(m, w.cells.size());
    return m;
}

std::vector<OverStats> over_stats(const MonitorState& state) {
    std::vector<OverStats> out;
    const auto& spec = *state.spec_;
    for (const auto& s : spec.streams()) {
        if (s.kind != StreamKind::Over) continue;
        const auto& os = state.overs_[static_cast<std::size_t>(s.over)];
        out.push_back({s.name, spec.overs()[static_cast<std::size_t>(s.over)].def,
                       static_cast<std::int64_t>(os.instances.size()), os.max_live});
    }
    return out;
}

MonitorState start(ValidatedSpecPtr spec) {
    if (!spec) throw Error(Errc::Usage, "start needs a validated specification");
    return MonitorState(std::move(spec));
}

MonitorState start_instance(ValidatedSpecPtr tmpl, Value p) {
    MonitorState st(std::move(tmpl));
    st.param_ = std::move(p);
    return st;
}

namespace {

// `check` is off for events the parent monitor already type-checked.
StepOutput step_impl(MonitorState& st, const Event& ev, const Environment& env, bool report, bool check = true);

class Evaluator {
public:
    Evaluator(MonitorState& st, const Environment& env) : st_(st), env_(env), spec_(*st.spec_) {}

    void advance() {
        for (int s : spec_.eval_order()) {
            Instant upto = st_.n_ - 1 - (st_.finished_ ? 0 : spec_.stream(s).need);
            if (upto >= st_.windows_[static_cast<std::size_t>(s)].next()) ensure(s, upto);
        }
    }

    void report(StepOutput& out, bool build) {
        const auto& outs = spec_.outputs();
        for (std::size_t i = 0; i < outs.size(); ++i) {
            const Window& w = st_.windows_[static_cast<std::size_t>(outs[i])];
            Instant& r = st_.reported_[i];
            if (build) {
                for (; r < w.next(); ++r) {
                    out.resolved.push_back({r, spec_.stream(outs[i]).name, w.cells[static_cast<std::size_t>(r - w.base)]});
                }
            } else {
                r = w.next();
            }
        }
        std::stable_sort(out.resolved.begin(), out.resolved.end(),
                         [](const Resolved& a, const Resolved& b) { return a.instant < b.instant; });
    }

    void check_return(StepOutput& out) {
        auto vs = spec_.return_value();
        auto cs = spec_.return_cond();
        if (!vs || !cs || st_.verdict_) return;
        const Window& vw = st_.windows_[static_cast<std::size_t>(*vs)];
        const Window& cw = st_.windows_[static_cast<std::size_t>(*cs)];
        Instant upto = std::min(vw.next(), cw.next());
        for (; st_.ret_next_ < upto; ++st_.ret_next_) {
            const Cell& c = cw.cells[static_cast<std::size_t>(st_.ret_next_ - cw.base)];
            if (!c.ok()) {
                st_.verdict_ = c;
                break;
            }
            if (c.value.as_bool()) {
                st_.verdict_ = vw.cells[static_cast<std::size_t>(st_.ret_next_ - vw.base)];
                break;
            }
        }
        if (!st_.verdict_ && st_.finished_) {
            if (st_.n_ == 0) {
                throw Error(Errc::NoVerdict, "nested monitor '" + spec_.source().name + "' ended without events");
            }
            st_.verdict_ = vw.cells.back();
        }
        if (st_.verdict_) out.verdict = st_.verdict_;
    }

    void evict() {
        Instant frontier = st_.n_;
        for (const auto& w : st_.windows_) frontier = std::min(frontier, w.next());
        if (spec_.return_cond() && !st_.verdict_) frontier = std::min(frontier, st_.ret_next_);
        frontier -= spec_.max_back();
        const std::size_t bound = static_cast<std::size_t>(spec_.max_back() + spec_.max_fwd() + 1);
        for (auto& w : st_.windows_) {
            while (w.base < frontier && !w.cells.empty()) {
                w.cells.pop_front();
                ++w.base;
            }
            st_.peak_occupancy_ = std::max(st_.peak_occupancy_, w.cells.size());
            if (w.cells.size() > bound) {
                throw std::logic_error("window of '" + spec_.source().name + "' exceeds maxBack + maxFwd + 1");
            }
        }
    }

private:
    const Cell& ensure(int s, Instant t) {
        Window& w = st_.windows_[static_cast<std::size_t>(s)];
        if (t < w.base) {
            throw std::logic_error("instant " + std::to_string(t) + " of '" + spec_.stream(s).name + "' was evicted");
        }
        while (w.next() <= t) {
            Instant u = w.next();
            if (spec_.stream(s).kind == StreamKind::Input || u >= st_.n_) {
                throw std::logic_error("'" + spec_.stream(s).name + "' at " + std::to_string(u) + " is not available");
            }
            Cell c = compute(s, u);
            w.cells.push_back(std::move(c));
        }
        return w.cells[static_cast<std::size_t>(t - w.base)];
    }

    Cell compute(int s, Instant t) {
        const StreamInfo& info = spec_.stream(s);
        if (info.kind == StreamKind::Over) return eval_over(info, t);
        std::vector<Value> binders;
        try {
            return Cell::of(eval(info.expr, t, binders));
        } catch (const Error& e) {
            return Cell::poisoned(e.what());
        }
    }

    const Value& load(int s, Instant t) {
        const Cell& c = ensure(s, t);
        if (!c.ok()) throw Error(Errc::Evaluation, *c.error);
        return c.value;
    }

    Value eval(const CExpr& e, Instant t, std::vector<Value>& binders) {
        switch (e.op) {
        case CExpr::Op::Const: return e.value;
        case CExpr::Op::Apply: {
            switch (e.fn->laziness) {
            case Laziness::IfThenElse:
                return eval(e.args[0], t, binders).as_bool() ? eval(e.args[1], t, binders)
                                                             : eval(e.args[2], t, binders);
            case Laziness::And:
                return Value::boolean(eval(e.args[0], t, binders).as_bool() && eval(e.args[1], t, binders).as_bool());
            case Laziness::Or:
                return Value::boolean(eval(e.args[0], t, binders).as_bool() || eval(e.args[1], t, binders).as_bool());
            case Laziness::Strict: break;
            }
            std::vector<Value> args;
            args.reserve(e.args.size());
            for (const auto& a : e.args) args.push_back(eval(a, t, binders));
            return e.fn->apply(args, *spec_.registry());
        }
        case CExpr::Op::Load: {
            if (e.offset == 0) return load(e.stream, t);
            Instant u = t + e.offset;
            if (u < 0 || (st_.finished_ && u >= st_.n_)) return eval(e.args[0], t, binders);
            return load(e.stream, u);
        }
        case CExpr::Op::Slice: {
            Instant end = t + e.offset;
            if (st_.finished_) end = std::min(end, st_.n_);
            ValueList out;
            for (Instant u = t; u < end; ++u) out.push_back(load(e.stream, u));
            return Value::list(std::move(out));
        }
        case CExpr::Op::RunSpec: {
            const auto& nested = *spec_.nested()[static_cast<std::size_t>(e.index)].spec;
            std::map<std::string, ValueList> cols;
            const auto& ins = nested.source().inputs;
            for (std::size_t i = 0; i < ins.size(); ++i) cols[ins[i].name] = eval(e.args[i], t, binders).as_list();
            return run_nested(spec_.nested()[static_cast<std::size_t>(e.index)].spec, cols, env_);
        }
        case CExpr::Op::Param:
            if (!st_.param_) throw Error(Errc::Evaluation, "instance parameter is not bound");
            return *st_.param_;
        case CExpr::Op::Binder: return binders.at(static_cast<std::size_t>(e.index));
        case CExpr::Op::SetFilter: {
            Value src = eval(e.args[0], t, binders);
            ValueSet out;
            for (const auto& x : src.as_set()) {
                binders.push_back(x);
                bool keep = eval(e.args[1], t, binders).as_bool();
                binders.pop_back();
                if (keep) out.insert(out.end(), x);
            }
            return Value::set(std::move(out));
        }
        case CExpr::Op::Retrieve: return retrieve(e, t, binders);
        }
        throw std::logic_error("unknown expression");
    }

    Value retrieve(const CExpr& e, Instant t, std::vector<Value>& binders) {
        const RetrieveInfo& info = spec_.retrieves()[static_cast<std::size_t>(e.index)];
        FetchRequest req;
        req.store = info.store;
        req.from = eval(e.args[0], t, binders).as_int();
        if (e.has_to) req.to = eval(e.args[1], t, binders).as_int();
        if (e.has_filter) req.filter = eval(e.args[2], t, binders);
        // A monitor never sees its own log beyond the current instant.
        if (info.store.empty()) req.to = std::min(req.to.value_or(t + 1), t + 1);
        req.schema = &info.schema;
        if (!env_.retriever) throw Error(Errc::Adapter, "no retriever configured");
        ValueList rows;
        for (const auto& ev : env_.retriever->fetch(req)) rows.push_back(project(ev, info.schema));
        return Value::list(std::move(rows));
    }

    static Value project(const Event& ev, const Schema& schema) {
        std::vector<std::pair<std::string, Value>> fields;
        fields.reserve(schema.size());
        for (const auto& [name, _] : schema) fields.emplace_back(name, ev.at(name));
        return Value::record(std::move(fields));
    }

    // ---- over nodes -------------------------------------------------------

    const Environment& instance_env() {
        if (!inst_env_) {
            inst_env_ = env_;
            inst_env_->own_log = nullptr;
        }
        return *inst_env_;
    }

    Event current_event(Instant t) {
        Event ev;
        for (int in : spec_.inputs()) ev.bindings.emplace(spec_.stream(in).name, load(in, t));
        return ev;
    }

    /// Steps one instance; returns an error message or "".
    std::string step_instance(const OverInfo& info, InstanceState& inst, Event ev, bool check) {
        ev.instant = inst.state.n_;
        try {
            step_impl(inst.state, ev, instance_env(), false, check);
        } catch (const Error& e) {
            return e.what();
        }
        if (env_.stats) env_.stats->instance_steps.fetch_add(1, std::memory_order_relaxed);
        const Window& w = inst.state.windows_[static_cast<std::size_t>(info.value_stream)];
        const Cell& c = w.cells.back();
        if (!c.ok()) return *c.error;
        inst.value = c.value;
        inst.has_value = true;
        return {};
    }

    std::unique_ptr<InstanceState> install(const OverInfo& info, const Value& p, Instant t) {
        auto inst = std::make_unique<InstanceState>();
        inst->state = start_instance(info.instance, p);
        if (!info.has_init) {
            if (env_.stats) env_.stats->installs.fetch_add(1, std::memory_order_relaxed);
            return inst;
        }
        std::vector<Value> binders{p};
        FetchRequest req;
        req.store = info.init_store;
        req.from = info.init_from ? eval(*info.init_from, t, binders).as_int() : 0;
        req.to = t;
        if (info.init_filter) req.filter = eval(*info.init_filter, t, binders);
        req.command = info.init_command;
        req.param = p;
        req.schema = &spec_.schema();
        if (!env_.retriever) throw Error(Errc::Adapter, "no retriever configured");
        std::vector<Event> past = env_.retriever->fetch(req);
        Instant last = -1;
        for (const auto& ev : past) {
            if (ev.instant < req.from || ev.instant >= t || ev.instant <= last) {
                throw Error(Errc::InstallIntegrity, "initializer of " + p.str() + " returned instant " +
                                                        std::to_string(ev.instant) + " out of order or range");
            }
            last = ev.instant;
        }
        for (const auto& ev : past) {
            Event local;
            for (const auto& [name, _] : spec_.schema()) {
                auto it = ev.bindings.find(name);
                if (it == ev.bindings.end()) {
                    throw Error(Errc::InstallIntegrity, "past event " + std::to_string(ev.instant) + " lacks '" +
                                                            name + "'");
                }
                local.bindings.emplace(name, it->second);
            }
            std::string err = step_instance(info, *inst, std::move(local), true);
            if (!err.empty()) throw Error(Errc::Evaluation, err);
        }
        if (env_.stats) {
            env_.stats->installs.fetch_add(1, std::memory_order_relaxed);
            env_.stats->replayed_events.fetch_add(static_cast<std::int64_t>(past.size()), std::memory_order_relaxed);
        }
        return inst;
    }

    Cell eval_over(const StreamInfo& sinfo, Instant t) {
        const OverInfo& info = spec_.overs()[static_cast<std::size_t>(sinfo.over)];
        OverState& os = st_.overs_[static_cast<std::size_t>(sinfo.over)];
        std::vector<Value> binders;
        std::string first_error;
        auto note = [&](const std::string& msg) {
            if (first_error.empty()) first_error = msg;
        };

        Value params;
        try {
            params = eval(info.params, t, binders);
            if (info.kind == OverKind::MOver) {
                params = params.is_some() ? Value::set(ValueSet{params.unwrap()}) : Value::set({});
            }
        } catch (const Error& e) {
            return Cell::poisoned(e.what());
        }
        const ValueSet& now = params.as_set();
        bool changed = false;

        if (params.identity() != os.prev.identity()) {
            // Both sides are sorted, so one merge pass finds the removed,
            // kept and fresh parameters.
            std::vector<Value> failed;
            auto it = os.instances.begin();
            for (const auto& p : now) {
                std::strong_ordering c = std::strong_ordering::less;
                while (it != os.instances.end() && (c = it->first <=> p) < 0) {
                    changed |= os.result.erase(it->first) > 0;
                    it = os.instances.erase(it);
                }
                if (it != os.instances.end() && c == 0) {
                    ++it;
                    continue;
                }
                try {
                    auto inst = install(info, p, t);
                    if (inst->has_value) {
                        os.result.insert_or_assign(p, inst->value);
                        changed = true;
                    }
                    os.instances.emplace_hint(it, p, std::move(inst));
                } catch (const Error& e) {
                    note("install of " + p.str() + ": " + e.what());
                    failed.push_back(p);
                }
            }
            while (it != os.instances.end()) {
                changed |= os.result.erase(it->first) > 0;
                it = os.instances.erase(it);
            }
            if (failed.empty()) {
                os.prev = params;
            } else {
                ValueSet kept = now;
                for (const auto& p : failed) kept.erase(p);
                os.prev = Value::set(std::move(kept));
            }
        }
        os.max_live = std::max(os.max_live, static_cast<std::int64_t>(os.instances.size()));

        std::vector<std::pair<const Value*, InstanceState*>> todo;
        try {
            if (info.kind == OverKind::When) {
                for (auto& [p, inst] : os.instances) {
                    binders.assign(1, p);
                    if (eval(*info.cond, t, binders).as_bool()) todo.emplace_back(&p, inst.get());
                }
            } else if (info.updating) {
                Value upd = eval(*info.updating, t, binders);
                for (const auto& p : upd.as_set()) {
                    auto it = os.instances.find(p);
                    if (it != os.instances.end()) todo.emplace_back(&it->first, it->second.get());
                }
            } else {
                for (auto& [p, inst] : os.instances) todo.emplace_back(&p, inst.get());
            }
        } catch (const Error& e) {
            note(e.what());
            todo.clear();
        }

        if (!todo.empty()) {
            Event ev = current_event(t);
            std::vector<std::string> errors(todo.size());
            instance_env();
            const bool par = env_.parallel && todo.size() >= env_.parallel_min;
            const long count = static_cast<long>(todo.size());
#pragma omp parallel for schedule(dynamic, 16) if (par)
            for (long i = 0; i < count; ++i) {
                errors[static_cast<std::size_t>(i)] = step_instance(info, *todo[static_cast<std::size_t>(i)].second, ev, false);
            }
            for (std::size_t i = 0; i < todo.size(); ++i) {
                const Value& p = *todo[i].first;
                if (!errors[i].empty()) {
                    note("instance " + p.str() + ": " + errors[i]);
                    continue;
                }
                const InstanceState& inst = *todo[i].second;
                auto it = os.result.find(p);
                if (it == os.result.end()) {
                    os.result.emplace(p, inst.value);
                    changed = true;
                } else if (!(it->second == inst.value)) {
                    it->second = inst.value;
                    changed = true;
                }
            }
        }
        if (changed) os.result_value = Value::map(os.result);
        if (!first_error.empty()) return Cell::poisoned(first_error);
        if (info.kind == OverKind::MOver) {
            return Cell::of(os.result.empty() ? Value::none() : Value::some(os.result.begin()->second));
        }
        return Cell::of(os.result_value);
    }

    MonitorState& st_;
    const Environment& env_;
    const ValidatedSpec& spec_;
    std::optional<Environment> inst_env_;
};

void check_bindings(const ValidatedSpec& spec, const Event& ev) {
    for (const auto& [name, type] : spec.schema()) {
        auto it = ev.bindings.find(name);
        if (it == ev.bindings.end()) {
            throw Error(Errc::Type, "event at instant " + std::to_string(ev.instant) + " lacks input '" + name + "'");
        }
        if (!conforms(it->second, type)) {
            throw Error(Errc::Type, "input '" + name + "' at instant " + std::to_string(ev.instant) + " is " +
                                        it->second.str() + ", not a " + type.str());
        }
    }
    if (ev.bindings.size() != spec.schema().size()) {
        for (const auto& [name, _] : ev.bindings) {
            bool declared = false;
            for (const auto& [d, t] : spec.schema()) declared = declared || d == name;
            if (!declared) {
                throw Error(Errc::Type, "event at instant " + std::to_string(ev.instant) + " binds undeclared '" +
                                            name + "'");
            }
        }
    }
}

StepOutput step_impl(MonitorState& st, const Event& ev, const Environment& env, bool report, bool check) {
    if (!st.spec_) throw Error(Errc::Usage, "monitor was not started");
    if (st.finished_) throw Error(Errc::Usage, "monitor already finished");
    if (ev.instant != st.n_) {
        throw Error(Errc::InstantMismatch, "expected instant " + std::to_string(st.n_) + ", got " +
                                               std::to_string(ev.instant));
    }
    const ValidatedSpec& spec = *st.spec_;
    if (check) check_bindings(spec, ev);
    if (env.own_log) env.own_log->append(ev);
    for (int in : spec.inputs()) {
        Window& w = st.windows_[static_cast<std::size_t>(in)];
        w.cells.push_back(Cell::of(ev.bindings.find(spec.stream(in).name)->second));
    }
    ++st.n_;
    StepOutput out;
    Evaluator e(st, env);
    e.advance();
    e.report(out, report);
    e.check_return(out);
    e.evict();
    return out;
}

} // namespace

StepOutput step(MonitorState& state, const Event& ev, const Environment& env) {
    return step_impl(state, ev, env, true);
}

StepOutput finish(MonitorState& st, const Environment& env) {
    if (!st.spec_) throw Error(Errc::Usage, "monitor was not started");
    if (st.finished_) throw Error(Errc::Usage, "monitor already finished");
    st.finished_ = true;
    StepOutput out;
    Evaluator e(st, env);
    e.advance();
    e.report(out, true);
    e.check_return(out);
    return out;
}

// ---------------------------------------------------------------------------

FrozenMonitor freeze(const MonitorState& state) { return FrozenMonitor{state.spec_ ? state.spec_->hash() : "", state}; }

MonitorState thaw(const FrozenMonitor& frozen) {
    if (frozen.state.spec_ && frozen.state.spec_->hash() != frozen.spec_hash) {
        throw Error(Errc::VersionMismatch, "frozen monitor belongs to another specification");
    }
    return frozen.state;
}

namespace {

constexpr const char* kFormat = "srv-frozen-monitor";
constexpr int kVersion = 1;

json cell_json(const Cell& c) { return c.ok() ? json{{"v", to_tagged(c.value)}} : json{{"e", *c.error}}; }

Cell cell_from(const json& j) {
    if (j.contains("e")) return Cell::poisoned(j["e"].get<std::string>());
    return Cell::of(from_tagged(j.at("v")));
}

json state_json(const MonitorState& st) {
    json j;
    j["n"] = st.n_;
    j["finished"] = st.finished_;
    j["param"] = st.param_ ? json{{"p", to_tagged(*st.param_)}} : json(nullptr);
    j["ret_next"] = st.ret_next_;
    j["verdict"] = st.verdict_ ? cell_json(*st.verdict_) : json(nullptr);
    j["reported"] = st.reported_;
    json windows = json::array();
    for (const auto& w : st.windows_) {
        json cells = json::array();
        for (const auto& c : w.cells) cells.push_back(cell_json(c));
        windows.push_back({{"base", w.base}, {"cells", std::move(cells)}});
    }
    j["windows"] = std::move(windows);
    json overs = json::array();
    for (const auto& os : st.overs_) {
        json insts = json::array();
        for (const auto& [p, inst] : os.instances) {
            insts.push_back({{"param", to_tagged(p)},
                             {"has_value", inst->has_value},
                             {"value", to_tagged(inst->value)},
                             {"state", state_json(inst->state)}});
        }
        overs.push_back({{"prev", to_tagged(os.prev)}, {"max_live", os.max_live}, {"instances", std::move(insts)}});
    }
    j["overs"] = std::move(overs);
    return j;
}

MonitorState state_from(const json& j, const ValidatedSpecPtr& spec) {
    MonitorState st(spec);
    st.n_ = j.at("n").get<Instant>();
    st.finished_ = j.at("finished").get<bool>();
    if (!j.at("param").is_null()) st.param_ = from_tagged(j["param"].at("p"));
    st.ret_next_ = j.at("ret_next").get<Instant>();
    if (!j.at("verdict").is_null()) st.verdict_ = cell_from(j["verdict"]);
    st.reported_ = j.at("reported").get<std::vector<Instant>>();
    const auto& windows = j.at("windows");
    if (windows.size() != st.windows_.size() || st.reported_.size() != spec->outputs().size()) {
        throw Error(Errc::VersionMismatch, "frozen state does not fit the specification");
    }
    for (std::size_t i = 0; i < windows.size(); ++i) {
        st.windows_[i].base = windows[i].at("base").get<Instant>();
        for (const auto& c : windows[i].at("cells")) st.windows_[i].cells.push_back(cell_from(c));
    }
    const auto& overs = j.at("overs");
    if (overs.size() != st.overs_.size()) throw Error(Errc::VersionMismatch, "frozen state does not fit the specification");
    for (std::size_t i = 0; i < overs.size(); ++i) {
        OverState& os = st.overs_[i];
        const OverInfo& info = spec->overs()[i];
        os.prev = from_tagged(overs[i].at("prev"));
        os.max_live = overs[i].at("max_live").get<std::int64_t>();
        for (const auto& ij : overs[i].at("instances")) {
            auto inst = std::make_unique<InstanceState>();
            Value p = from_tagged(ij.at("param"));
            inst->has_value = ij.at("has_value").get<bool>();
            inst->value = from_tagged(ij.at("value"));
            inst->state = state_from(ij.at("state"), info.instance);
            if (inst->has_value) os.result.emplace(p, inst->value);
            os.instances.emplace(std::move(p), std::move(inst));
        }
        os.result_value = Value::map(os.result);
    }
    return st;
}

} // namespace

std::string serialize_frozen(const FrozenMonitor& frozen) {
    json j{{"format", kFormat}, {"version", kVersion}, {"spec_hash", frozen.spec_hash}, {"state", state_json(frozen.state)}};
    return j.dump();
}

FrozenMonitor deserialize_frozen(const std::string& text, const ValidatedSpecPtr& spec) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::Parse, std::string("frozen monitor: ") + e.what());
    }
    if (j.value("format", std::string()) != kFormat || j.value("version", -1) != kVersion) {
        throw Error(Errc::VersionMismatch, "unsupported frozen monitor format");
    }
    std::string hash = j.value("spec_hash", std::string());
    if (hash != spec->hash()) {
        throw Error(Errc::VersionMismatch, "frozen monitor was made for specification " + hash + ", not " + spec->hash());
    }
    return FrozenMonitor{hash, state_from(j.at("state"), spec)};
}

// ---------------------------------------------------------------------------

RunResult run_online(const ValidatedSpecPtr& spec, const std::vector<Event>& trace, const Environment& env) {
    MonitorState st = start(spec);
    RunResult res;
    std::vector<std::vector<std::optional<Cell>>> cells(spec->outputs().size(),
                                                        std::vector<std::optional<Cell>>(trace.size()));
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < spec->outputs().size(); ++i) index[spec->stream(spec->outputs()[i]).name] = i;
    auto absorb = [&](const StepOutput& out) {
        for (const auto& r : out.resolved) {
            auto& slot = cells[index.at(r.stream)].at(static_cast<std::size_t>(r.instant));
            if (slot) throw std::logic_error("output '" + r.stream + "' reported twice at " + std::to_string(r.instant));
            slot = r.cell;
        }
        if (out.verdict && !res.verdict) res.verdict = out.verdict;
    };
    for (const auto& ev : trace) absorb(step(st, ev, env));
    absorb(finish(st, env));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        auto& stream = res.outputs[spec->stream(spec->outputs()[i]).name];
        for (std::size_t t = 0; t < cells[i].size(); ++t) {
            if (!cells[i][t]) throw std::logic_error("output never resolved");
            stream.push_back(*cells[i][t]);
        }
    }
    return res;
}

std::vector<Event> columns_to_events(const ValidatedSpec& spec, const std::map<std::string, ValueList>& inputs) {
    std::optional<std::size_t> len;
    for (const auto& [name, _] : spec.schema()) {
        auto it = inputs.find(name);
        if (it == inputs.end()) throw Error(Errc::Evaluation, "nested input '" + name + "' is missing");
        if (len && *len != it->second.size()) {
            throw Error(Errc::Evaluation, "nested monitor '" + spec.source().name + "' got inputs of different lengths");
        }
        len = it->second.size();
    }
    if (!len || *len == 0) {
        throw Error(Errc::NoVerdict, "nested monitor '" + spec.source().name + "' ended without events");
    }
    std::vector<Event> events(*len);
    for (std::size_t i = 0; i < *len; ++i) {
        events[i].instant = static_cast<Instant>(i);
        for (const auto& [name, _] : spec.schema()) events[i].bindings.emplace(name, inputs.find(name)->second[i]);
    }
    return events;
}

Value run_nested(const ValidatedSpecPtr& spec, const std::map<std::string, ValueList>& inputs,
                 const Environment& env) {
    std::vector<Event> events = columns_to_events(*spec, inputs);
    Environment child = env;
    auto log = std::make_shared<InMemoryStore>();
    child.own_log = log;
    child.retriever = std::make_shared<OverlayRetriever>("", log, env.retriever);
    if (env.stats) env.stats->nested_runs.fetch_add(1, std::memory_order_relaxed);
    MonitorState st = start(spec);
    for (const auto& ev : events) {
        step_impl(st, ev, child, false);
        if (env.stats) env.stats->nested_events.fetch_add(1, std::memory_order_relaxed);
        if (st.verdict_) break;
    }
    if (!st.verdict_) {
        st.finished_ = true;
        StepOutput out;
        Evaluator e(st, child);
        e.advance();
        e.check_return(out);
    }
    const Cell& v = *st.verdict_;
    if (!v.ok()) throw Error(Errc::Evaluation, *v.error);
    return v.value;
}

} // namespace srv
