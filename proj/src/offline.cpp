#include "srv/offline.hpp"

#include <stdexcept>

namespace srv {

namespace {

Environment with_own_log(const std::vector<Event>& trace, const Environment& env) {
    auto log = std::make_shared<InMemoryStore>();
    for (const auto& ev : trace) log->append(ev);
    Environment out = env;
    out.own_log = log;
    out.retriever = std::make_shared<OverlayRetriever>("", log, env.retriever);
    return out;
}

class Offline {
public:
    Offline(ValidatedSpecPtr spec, std::vector<Event> trace, Environment env, std::optional<Value> param)
        : spec_(std::move(spec)), trace_(std::move(trace)), env_(std::move(env)), param_(std::move(param)) {
        memo_.resize(spec_->streams().size());
        for (auto& m : memo_) m.resize(trace_.size());
        overs_.resize(spec_->overs().size());
    }

    Instant size() const { return static_cast<Instant>(trace_.size()); }

    const Cell& get(int s, Instant t) {
        auto& slot = memo_[static_cast<std::size_t>(s)].at(static_cast<std::size_t>(t));
        if (!slot) {
            const StreamInfo& info = spec_->stream(s);
            if (info.kind == StreamKind::Input) {
                slot = Cell::of(trace_[static_cast<std::size_t>(t)].at(info.name));
            } else if (info.kind == StreamKind::Over) {
                advance_over(s, t);
            } else {
                std::vector<Value> binders;
                try {
                    slot = Cell::of(eval(info.expr, t, binders));
                } catch (const Error& e) {
                    slot = Cell::poisoned(e.what());
                }
            }
        }
        return *slot;
    }

private:
    struct Inst {
        std::vector<Event> local;
        bool has_value = false;
        Value value;
    };

    struct Over {
        Instant done = 0;
        Value prev = Value::set({});
        std::map<Value, Inst> live;
        ValueMap result;
    };

    Value value_of(int s, Instant t) {
        const Cell& c = get(s, t);
        if (!c.ok()) throw Error(Errc::Evaluation, *c.error);
        return c.value;
    }

    Value eval(const CExpr& e, Instant t, std::vector<Value>& binders) {
        switch (e.op) {
        case CExpr::Op::Const: return e.value;
        case CExpr::Op::Apply: {
            if (e.fn->laziness == Laziness::IfThenElse) {
                return eval(e.args[eval(e.args[0], t, binders).as_bool() ? 1 : 2], t, binders);
            }
            if (e.fn->laziness == Laziness::And) {
                if (!eval(e.args[0], t, binders).as_bool()) return Value::boolean(false);
                return Value::boolean(eval(e.args[1], t, binders).as_bool());
            }
            if (e.fn->laziness == Laziness::Or) {
                if (eval(e.args[0], t, binders).as_bool()) return Value::boolean(true);
                return Value::boolean(eval(e.args[1], t, binders).as_bool());
            }
            std::vector<Value> args;
            for (const auto& a : e.args) args.push_back(eval(a, t, binders));
            return e.fn->apply(args, *spec_->registry());
        }
        case CExpr::Op::Load: {
            Instant u = t + e.offset;
            if (e.offset != 0 && (u < 0 || u >= size())) return eval(e.args[0], t, binders);
            return value_of(e.stream, u);
        }
        case CExpr::Op::Slice: {
            ValueList out;
            for (Instant u = t; u < std::min(size(), t + e.offset); ++u) out.push_back(value_of(e.stream, u));
            return Value::list(std::move(out));
        }
        case CExpr::Op::RunSpec: {
            const auto& nested = spec_->nested()[static_cast<std::size_t>(e.index)].spec;
            std::map<std::string, ValueList> cols;
            for (std::size_t i = 0; i < nested->source().inputs.size(); ++i) {
                cols[nested->source().inputs[i].name] = eval(e.args[i], t, binders).as_list();
            }
            return offline_verdict(nested, columns_to_events(*nested, cols), env_);
        }
        case CExpr::Op::Param:
            if (!param_) throw Error(Errc::Evaluation, "instance parameter is not bound");
            return *param_;
        case CExpr::Op::Binder: return binders.at(static_cast<std::size_t>(e.index));
        case CExpr::Op::SetFilter: {
            ValueSet out;
            for (const auto& x : eval(e.args[0], t, binders).as_set()) {
                binders.push_back(x);
                if (eval(e.args[1], t, binders).as_bool()) out.insert(x);
                binders.pop_back();
            }
            return Value::set(std::move(out));
        }
        case CExpr::Op::Retrieve: {
            const RetrieveInfo& info = spec_->retrieves()[static_cast<std::size_t>(e.index)];
            FetchRequest req;
            req.store = info.store;
            req.from = eval(e.args[0], t, binders).as_int();
            if (e.has_to) req.to = eval(e.args[1], t, binders).as_int();
            if (e.has_filter) req.filter = eval(e.args[2], t, binders);
            if (info.store.empty()) req.to = std::min(req.to.value_or(t + 1), t + 1);
            req.schema = &info.schema;
            if (!env_.retriever) throw Error(Errc::Adapter, "no retriever configured");
            ValueList rows;
            for (const auto& ev : env_.retriever->fetch(req)) {
                std::vector<std::pair<std::string, Value>> fields;
                for (const auto& [name, _] : info.schema) fields.emplace_back(name, ev.at(name));
                rows.push_back(Value::record(std::move(fields)));
            }
            return Value::list(std::move(rows));
        }
        }
        throw std::logic_error("unknown expression");
    }

    // Value of an instance over its whole local trace. Returns an error
    // message for the first poisoned value among instants [check_from, m).
    std::string run_instance(const OverInfo& info, const Value& p, Inst& inst, std::size_t check_from) {
        Environment ienv = env_;
        ienv.own_log = nullptr;
        Offline sub(info.instance, inst.local, ienv, p);
        for (std::size_t k = check_from; k < inst.local.size(); ++k) {
            const Cell& c = sub.get(info.value_stream, static_cast<Instant>(k));
            if (!c.ok()) return *c.error;
            inst.value = c.value;
            inst.has_value = true;
        }
        return {};
    }

    Inst install(const OverInfo& info, const Value& p, Instant t) {
        Inst inst;
        if (!info.has_init) return inst;
        std::vector<Value> binders{p};
        FetchRequest req;
        req.store = info.init_store;
        req.from = info.init_from ? eval(*info.init_from, t, binders).as_int() : 0;
        req.to = t;
        if (info.init_filter) req.filter = eval(*info.init_filter, t, binders);
        req.command = info.init_command;
        req.param = p;
        req.schema = &spec_->schema();
        if (!env_.retriever) throw Error(Errc::Adapter, "no retriever configured");
        Instant last = -1;
        for (const auto& ev : env_.retriever->fetch(req)) {
            if (ev.instant < req.from || ev.instant >= t || ev.instant <= last) {
                throw Error(Errc::InstallIntegrity, "initializer of " + p.str() + " returned instant " +
                                                        std::to_string(ev.instant) + " out of order or range");
            }
            last = ev.instant;
            Event local;
            local.instant = static_cast<Instant>(inst.local.size());
            for (const auto& [name, _] : spec_->schema()) {
                auto it = ev.bindings.find(name);
                if (it == ev.bindings.end()) {
                    throw Error(Errc::InstallIntegrity, "past event " + std::to_string(ev.instant) + " lacks '" +
                                                            name + "'");
                }
                local.bindings.emplace(name, it->second);
            }
            inst.local.push_back(std::move(local));
        }
        std::string err = run_instance(info, p, inst, 0);
        if (!err.empty()) throw Error(Errc::Evaluation, err);
        return inst;
    }

    void advance_over(int s, Instant t) {
        const StreamInfo& sinfo = spec_->stream(s);
        Over& o = overs_[static_cast<std::size_t>(sinfo.over)];
        while (o.done <= t) {
            Instant u = o.done;
            Cell c = over_step(spec_->overs()[static_cast<std::size_t>(sinfo.over)], o, u);
            memo_[static_cast<std::size_t>(s)][static_cast<std::size_t>(u)] = std::move(c);
            ++o.done;
        }
    }

    Cell over_step(const OverInfo& info, Over& o, Instant t) {
        std::vector<Value> binders;
        std::string first;
        auto note = [&](const std::string& m) {
            if (first.empty()) first = m;
        };
        Value params;
        try {
            params = eval(info.params, t, binders);
            if (info.kind == OverKind::MOver) {
                params = Value::set(params.is_some() ? ValueSet{params.unwrap()} : ValueSet{});
            }
        } catch (const Error& e) {
            return Cell::poisoned(e.what());
        }
        const ValueSet& now = params.as_set();
        if (!(params == o.prev)) {
            std::erase_if(o.live, [&](const auto& kv) { return !now.count(kv.first); });
            std::erase_if(o.result, [&](const auto& kv) { return !now.count(kv.first); });
            ValueSet kept;
            for (const auto& p : now) {
                if (o.live.count(p)) {
                    kept.insert(p);
                    continue;
                }
                try {
                    Inst inst = install(info, p, t);
                    if (inst.has_value) o.result[p] = inst.value;
                    o.live.emplace(p, std::move(inst));
                    kept.insert(p);
                } catch (const Error& e) {
                    note("install of " + p.str() + ": " + e.what());
                }
            }
            o.prev = Value::set(std::move(kept));
        }

        std::vector<Value> todo;
        try {
            for (const auto& [p, inst] : o.live) {
                bool go = true;
                if (info.kind == OverKind::When) {
                    binders.assign(1, p);
                    go = eval(*info.cond, t, binders).as_bool();
                }
                if (go) todo.push_back(p);
            }
            if (info.kind != OverKind::When && info.updating) {
                Value upd = eval(*info.updating, t, binders);
                std::erase_if(todo, [&](const Value& p) { return !upd.as_set().count(p); });
            }
        } catch (const Error& e) {
            note(e.what());
            todo.clear();
        }
        for (const auto& p : todo) {
            Inst& inst = o.live.at(p);
            Event local;
            local.instant = static_cast<Instant>(inst.local.size());
            for (int in : spec_->inputs()) local.bindings.emplace(spec_->stream(in).name, value_of(in, t));
            inst.local.push_back(std::move(local));
            std::string err = run_instance(info, p, inst, inst.local.size() - 1);
            if (!err.empty()) {
                note("instance " + p.str() + ": " + err);
                continue;
            }
            o.result[p] = inst.value;
        }
        if (!first.empty()) return Cell::poisoned(first);
        if (info.kind == OverKind::MOver) {
            return Cell::of(o.result.empty() ? Value::none() : Value::some(o.result.begin()->second));
        }
        return Cell::of(Value::map(o.result));
    }

    ValidatedSpecPtr spec_;
    std::vector<Event> trace_;
    Environment env_;
    std::optional<Value> param_;
    std::vector<std::vector<std::optional<Cell>>> memo_;
    std::vector<Over> overs_;
};

} // namespace

RunResult run_offline(const ValidatedSpecPtr& spec, const std::vector<Event>& trace, const Environment& env) {
    Offline off(spec, trace, with_own_log(trace, env), std::nullopt);
    RunResult res;
    for (Instant t = 0; t < off.size(); ++t) {
        for (int s : spec->eval_order()) off.get(s, t);
    }
    for (int o : spec->outputs()) {
        auto& cells = res.outputs[spec->stream(o).name];
        for (Instant t = 0; t < off.size(); ++t) cells.push_back(off.get(o, t));
    }
    if (spec->return_cond() && spec->return_value()) {
        for (Instant t = 0; t < off.size() && !res.verdict; ++t) {
            const Cell& c = off.get(*spec->return_cond(), t);
            if (!c.ok()) {
                res.verdict = c;
            } else if (c.value.as_bool()) {
                res.verdict = off.get(*spec->return_value(), t);
            }
        }
        if (!res.verdict) {
            if (off.size() == 0) {
                throw Error(Errc::NoVerdict, "nested monitor '" + spec->source().name + "' ended without events");
            }
            res.verdict = off.get(*spec->return_value(), off.size() - 1);
        }
    }
    return res;
}

Value offline_verdict(const ValidatedSpecPtr& spec, const std::vector<Event>& trace, const Environment& env) {
    if (trace.empty()) {
        throw Error(Errc::NoVerdict, "nested monitor '" + spec->source().name + "' ended without events");
    }
    Offline off(spec, trace, with_own_log(trace, env), std::nullopt);
    int cond = spec->return_cond().value();
    int value = spec->return_value().value();
    for (Instant t = 0; t < off.size(); ++t) {
        const Cell& c = off.get(cond, t);
        if (!c.ok()) throw Error(Errc::Evaluation, *c.error);
        if (c.value.as_bool() || t + 1 == off.size()) {
            const Cell& v = off.get(value, t);
            if (!v.ok()) throw Error(Errc::Evaluation, *v.error);
            return v.value;
        }
    }
    throw std::logic_error("unreachable");
}

} // namespace srv
