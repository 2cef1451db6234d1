#include "srv/validate.hpp"

#include <algorithm>
#include <climits>
#include <functional>
#include <map>
#include <set>

#include "srv/spec_json.hpp"

namespace srv {

const char* diag_name(DiagKind kind) {
    switch (kind) {
    case DiagKind::CyclicDependency: return "CyclicDependency";
    case DiagKind::TypeMismatch: return "TypeMismatch";
    case DiagKind::UndeclaredStream: return "UndeclaredStream";
    case DiagKind::IllFormedDefault: return "IllFormedDefault";
    case DiagKind::UnknownFunction: return "UnknownFunction";
    case DiagKind::ArityMismatch: return "ArityMismatch";
    case DiagKind::DuplicateStream: return "DuplicateStream";
    case DiagKind::UnboundedFuture: return "UnboundedFuture";
    case DiagKind::BadSlice: return "BadSlice";
    case DiagKind::BadReturnClause: return "BadReturnClause";
    case DiagKind::BadOver: return "BadOver";
    case DiagKind::BadRunSpec: return "BadRunSpec";
    case DiagKind::UnboundParameter: return "UnboundParameter";
    }
    return "?";
}

std::string Diagnostic::str() const {
    std::string s = diag_name(kind);
    if (!stream.empty()) s += " in '" + stream + "'";
    return s + ": " + message;
}

int ValidatedSpec::find_stream(std::string_view name) const {
    for (std::size_t i = 0; i < streams_.size(); ++i) {
        if (streams_[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::optional<Initializer> subst_init(const std::optional<Initializer>& init, const std::string& def_param,
                                      const std::string& param, const ExprPtr& repl) {
    if (!init) return init;
    // The initializer binds the parametric stream's own parameter.
    if (def_param == param) return init;
    Initializer out = *init;
    out.from = substitute(init->from, param, repl);
    out.filter = substitute(init->filter, param, repl);
    return out;
}

StreamRef subst_ref(const StreamRef& r, const std::string& param, const ExprPtr& repl) {
    return StreamRef{r.name, substitute(r.param, param, repl)};
}

std::string instance_name(const std::string& def, const std::string& param_text) {
    return def + "<" + param_text + ">";
}

const std::string kDynamicSuffix = std::string("<") + kInstanceParam + ">";

bool is_instance_param(const ExprPtr& e) {
    if (!e) return false;
    const auto* p = std::get_if<ParamNode>(&e->node);
    return p && p->name == kInstanceParam;
}

} // namespace

ExprPtr substitute(const ExprPtr& e, const std::string& param, const ExprPtr& repl) {
    if (!e) return e;
    return std::visit(
        overloaded{
            [&](const ConstNode&) { return e; },
            [&](const ApplyNode& n) {
                ApplyNode out{n.fn, {}};
                for (const auto& a : n.args) out.args.push_back(substitute(a, param, repl));
                return make_expr(std::move(out));
            },
            [&](const OffsetNode& n) {
                return make_expr(OffsetNode{subst_ref(n.stream, param, repl), n.offset,
                                            substitute(n.fallback, param, repl)});
            },
            [&](const NowNode& n) { return make_expr(NowNode{subst_ref(n.stream, param, repl)}); },
            [&](const SliceNode& n) { return make_expr(SliceNode{subst_ref(n.stream, param, repl), n.count}); },
            [&](const RunSpecNode& n) {
                RunSpecNode out{n.spec, {}};
                for (const auto& [name, x] : n.inputs) out.inputs.emplace_back(name, substitute(x, param, repl));
                return make_expr(std::move(out));
            },
            [&](const OverNode& n) {
                return make_expr(OverNode{n.stream, substitute(n.params, param, repl),
                                          substitute(n.updating, param, repl),
                                          subst_init(n.init, "", param, repl)});
            },
            [&](const MOverNode& n) {
                return make_expr(MOverNode{n.stream, substitute(n.param, param, repl),
                                           substitute(n.updating, param, repl),
                                           subst_init(n.init, "", param, repl)});
            },
            [&](const WhenNode& n) {
                ExprPtr cond = n.binder == param ? n.cond : substitute(n.cond, param, repl);
                return make_expr(WhenNode{n.stream, substitute(n.params, param, repl), n.binder, cond,
                                          subst_init(n.init, "", param, repl)});
            },
            [&](const ParamNode& n) { return n.name == param ? repl : e; },
            [&](const SetFilterNode& n) {
                ExprPtr pred = n.binder == param ? n.pred : substitute(n.pred, param, repl);
                return make_expr(SetFilterNode{substitute(n.source, param, repl), n.binder, pred});
            },
            [&](const RetrieveNode& n) {
                RetrieveNode out = n;
                out.from = substitute(n.from, param, repl);
                out.to = substitute(n.to, param, repl);
                out.filter = substitute(n.filter, param, repl);
                return make_expr(std::move(out));
            },
        },
        e->node);
}

class Compiler {
public:
    Compiler(const Specification& spec, std::shared_ptr<const FunctionRegistry> registry,
             std::optional<Type> instance_param, std::vector<std::string> template_stack)
        : spec_(spec), registry_(std::move(registry)), template_stack_(std::move(template_stack)) {
        out_ = std::make_shared<ValidatedSpec>();
        out_->source_ = spec;
        out_->registry_ = registry_;
        out_->instance_param_ = std::move(instance_param);
    }

    ValidationResult run();

private:
    struct Ctx {
        int stream = -1;
        std::vector<std::pair<std::string, Type>> binders;
        bool in_default = false;
    };

    struct Compiled {
        CExpr code;
        Type type;
    };

    void diag(DiagKind kind, const std::string& stream, std::string msg) {
        diags_.push_back({kind, stream, std::move(msg)});
    }

    const std::string& cur_name(const Ctx& ctx) const {
        static const std::string none;
        return ctx.stream >= 0 ? out_->streams_[static_cast<std::size_t>(ctx.stream)].name : none;
    }

    int add_stream(std::string name, StreamKind kind, Type type) {
        int id = static_cast<int>(out_->streams_.size());
        StreamInfo info;
        info.name = name;
        info.kind = kind;
        info.type = std::move(type);
        out_->streams_.push_back(std::move(info));
        ids_.emplace(std::move(name), id);
        return id;
    }

    void edge(const Ctx& ctx, int to, int weight) {
        if (ctx.stream < 0) return;
        if (weight < 0 && to != ctx.stream) max_back_ = std::max(max_back_, -weight);
        if (weight < 0 && to == ctx.stream &&
            out_->streams_[static_cast<std::size_t>(to)].kind != StreamKind::Over) {
            max_back_ = std::max(max_back_, -weight);
        }
        auto key = std::make_pair(ctx.stream, to);
        auto it = edges_.find(key);
        if (it == edges_.end()) {
            edges_.emplace(key, weight);
        } else {
            it->second = std::max(it->second, weight);
        }
    }

    const ParametricStreamDef* find_def(const std::string& name) const {
        for (const auto& d : spec_.parametric) {
            if (d.name == name) return &d;
        }
        return nullptr;
    }

    void expect(const Ctx& ctx, const Type& got, const Type& want, const std::string& what) {
        Substitution s;
        if (!s.unify(got, want)) {
            diag(DiagKind::TypeMismatch, cur_name(ctx), what + ": expected " + want.str() + ", got " + got.str());
        }
    }

    int resolve(const StreamRef& ref, const Ctx& ctx);
    Compiled compile(const ExprPtr& e, Ctx& ctx);
    Compiled compile_apply(const ApplyNode& n, Ctx& ctx);
    Compiled compile_over(const std::string& def_name, OverKind kind, const ExprPtr& params,
                          const ExprPtr& updating, const std::string& binder, const ExprPtr& cond,
                          const std::optional<Initializer>& init, const Ctx& ctx);
    Compiled compile_runspec(const RunSpecNode& n, Ctx& ctx);
    Compiled compile_retrieve(const RetrieveNode& n, Ctx& ctx);
    Specification build_template(const ParametricStreamDef& def);
    void analyze();

    const Specification& spec_;
    std::shared_ptr<const FunctionRegistry> registry_;
    std::vector<std::string> template_stack_;
    std::shared_ptr<ValidatedSpec> out_;
    std::vector<Diagnostic> diags_;
    std::map<std::string, int, std::less<>> ids_;
    std::map<std::pair<int, int>, int> edges_;
    // Static instances whose bodies still need compiling.
    std::vector<std::pair<int, ExprPtr>> pending_;
    TypeVarSupply vars_;
    int over_counter_ = 0;
    int max_back_ = 0;
};

int Compiler::resolve(const StreamRef& ref, const Ctx& ctx) {
    if (ctx.in_default) {
        diag(DiagKind::IllFormedDefault, cur_name(ctx), "default refers to stream '" + ref.name + "'");
        return -1;
    }
    if (!ref.param) {
        auto it = ids_.find(ref.name);
        if (it != ids_.end()) return it->second;
        if (find_def(ref.name)) {
            diag(DiagKind::UnboundParameter, cur_name(ctx), "parametric stream '" + ref.name + "' used without a parameter");
        } else {
            diag(DiagKind::UndeclaredStream, cur_name(ctx), "'" + ref.name + "' is not declared");
        }
        return -1;
    }
    if (is_instance_param(ref.param)) {
        auto it = ids_.find(ref.name + kDynamicSuffix);
        if (it != ids_.end()) return it->second;
        diag(DiagKind::UnboundParameter, cur_name(ctx),
             "'" + ref.name + "' is instantiated with the instance parameter outside an over");
        return -1;
    }
    const auto* c = std::get_if<ConstNode>(&ref.param->node);
    if (!c) {
        diag(DiagKind::UnboundParameter, cur_name(ctx),
             "'" + ref.name + "' must be instantiated with a constant or the enclosing over parameter");
        return -1;
    }
    const ParametricStreamDef* def = find_def(ref.name);
    if (!def) {
        diag(DiagKind::UndeclaredStream, cur_name(ctx), "parametric stream '" + ref.name + "' is not declared");
        return -1;
    }
    if (!conforms(c->value, def->param_type)) {
        diag(DiagKind::TypeMismatch, cur_name(ctx),
             "parameter " + c->value.str() + " of '" + def->name + "' is not a " + def->param_type.str());
        return -1;
    }
    std::string name = instance_name(def->name, c->value.str());
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    int id = add_stream(name, StreamKind::Internal, def->value_type);
    pending_.emplace_back(id, substitute(def->body, def->param, ref.param));
    return id;
}

Compiler::Compiled Compiler::compile_apply(const ApplyNode& n, Ctx& ctx) {
    CExpr code;
    code.op = CExpr::Op::Apply;
    std::vector<Type> arg_types;
    for (const auto& a : n.args) {
        auto c = compile(a, ctx);
        code.args.push_back(std::move(c.code));
        arg_types.push_back(std::move(c.type));
    }
    const FuncDef* f = registry_->find(n.fn);
    if (!f) {
        diag(DiagKind::UnknownFunction, cur_name(ctx), "function '" + n.fn + "' is not registered");
        return {std::move(code), vars_.fresh()};
    }
    code.fn = f;
    const auto& sig = f->signature;
    if (!sig.variadic && n.args.size() != sig.params.size()) {
        diag(DiagKind::ArityMismatch, cur_name(ctx),
             "'" + n.fn + "' takes " + std::to_string(sig.params.size()) + " arguments, got " +
                 std::to_string(n.args.size()));
        return {std::move(code), vars_.fresh()};
    }
    if (f->type_rule) {
        std::vector<const Value*> consts;
        for (const auto& a : code.args) consts.push_back(a.op == CExpr::Op::Const ? &a.value : nullptr);
        try {
            return {std::move(code), f->type_rule(arg_types, consts, vars_)};
        } catch (const Error& e) {
            diag(DiagKind::TypeMismatch, cur_name(ctx), "'" + n.fn + "': " + e.what());
            return {std::move(code), vars_.fresh()};
        }
    }
    std::vector<Type> sig_types = sig.params;
    sig_types.push_back(sig.result);
    sig_types = vars_.instantiate(sig_types);
    Substitution s;
    for (std::size_t i = 0; i < arg_types.size(); ++i) {
        const Type& want = sig.variadic ? sig_types.front() : sig_types[i];
        if (!s.unify(arg_types[i], want)) {
            diag(DiagKind::TypeMismatch, cur_name(ctx),
                 "argument " + std::to_string(i + 1) + " of '" + n.fn + "': expected " + s.apply(want).str() +
                     ", got " + s.apply(arg_types[i]).str());
            return {std::move(code), vars_.fresh()};
        }
    }
    return {std::move(code), s.apply(sig_types.back())};
}

Compiler::Compiled Compiler::compile(const ExprPtr& e, Ctx& ctx) {
    if (!e) {
        diag(DiagKind::TypeMismatch, cur_name(ctx), "missing expression");
        return {CExpr{}, vars_.fresh()};
    }
    auto nested_forbidden = [&](const char* what) -> std::optional<Compiled> {
        if (!ctx.in_default) return std::nullopt;
        diag(DiagKind::IllFormedDefault, cur_name(ctx), std::string("default contains ") + what);
        return Compiled{CExpr{}, vars_.fresh()};
    };
    return std::visit(
        overloaded{
            [&](const ConstNode& n) -> Compiled {
                CExpr c;
                c.value = n.value;
                return {std::move(c), type_of(n.value, vars_)};
            },
            [&](const ApplyNode& n) -> Compiled { return compile_apply(n, ctx); },
            [&](const OffsetNode& n) -> Compiled {
                int id = resolve(n.stream, ctx);
                CExpr c;
                c.op = CExpr::Op::Load;
                c.stream = id;
                c.offset = n.offset;
                Ctx dctx;
                dctx.stream = ctx.stream;
                dctx.in_default = true;
                auto d = compile(n.fallback, dctx);
                if (id < 0) return {std::move(c), vars_.fresh()};
                const Type& t = out_->streams_[static_cast<std::size_t>(id)].type;
                expect(ctx, d.type, t, "default of " + n.stream.name + "[" + std::to_string(n.offset) + "]");
                if (n.offset != 0) c.args.push_back(std::move(d.code));
                edge(ctx, id, n.offset);
                return {std::move(c), t};
            },
            [&](const NowNode& n) -> Compiled {
                int id = resolve(n.stream, ctx);
                CExpr c;
                c.op = CExpr::Op::Load;
                c.stream = id;
                if (id < 0) return {std::move(c), vars_.fresh()};
                edge(ctx, id, 0);
                return {std::move(c), out_->streams_[static_cast<std::size_t>(id)].type};
            },
            [&](const SliceNode& n) -> Compiled {
                int id = resolve(n.stream, ctx);
                CExpr c;
                c.op = CExpr::Op::Slice;
                c.stream = id;
                c.offset = n.count;
                if (n.count < 1) diag(DiagKind::BadSlice, cur_name(ctx), "slice length must be at least 1");
                if (id < 0) return {std::move(c), vars_.fresh()};
                edge(ctx, id, std::max(0, n.count - 1));
                return {std::move(c), Type::list(out_->streams_[static_cast<std::size_t>(id)].type)};
            },
            [&](const RunSpecNode& n) -> Compiled {
                if (auto f = nested_forbidden("a nested monitor")) return *f;
                return compile_runspec(n, ctx);
            },
            [&](const OverNode& n) -> Compiled {
                if (auto f = nested_forbidden("an over")) return *f;
                return compile_over(n.stream, OverKind::Over, n.params, n.updating, "", nullptr, n.init, ctx);
            },
            [&](const MOverNode& n) -> Compiled {
                if (auto f = nested_forbidden("an mover")) return *f;
                return compile_over(n.stream, OverKind::MOver, n.param, n.updating, "", nullptr, n.init, ctx);
            },
            [&](const WhenNode& n) -> Compiled {
                if (auto f = nested_forbidden("a when")) return *f;
                return compile_over(n.stream, OverKind::When, n.params, nullptr, n.binder, n.cond, n.init, ctx);
            },
            [&](const ParamNode& n) -> Compiled {
                for (std::size_t i = ctx.binders.size(); i-- > 0;) {
                    if (ctx.binders[i].first == n.name) {
                        CExpr c;
                        c.op = CExpr::Op::Binder;
                        c.index = static_cast<int>(i);
                        return {std::move(c), ctx.binders[i].second};
                    }
                }
                if (n.name == kInstanceParam && out_->instance_param_) {
                    CExpr c;
                    c.op = CExpr::Op::Param;
                    return {std::move(c), *out_->instance_param_};
                }
                diag(DiagKind::UnboundParameter, cur_name(ctx), "parameter '" + n.name + "' is not bound here");
                return {CExpr{}, vars_.fresh()};
            },
            [&](const SetFilterNode& n) -> Compiled {
                auto src = compile(n.source, ctx);
                Type elem = vars_.fresh();
                expect(ctx, src.type, Type::set(elem), "filter source");
                Substitution s;
                s.unify(src.type, Type::set(elem));
                elem = s.apply(elem);
                ctx.binders.emplace_back(n.binder, elem);
                auto pred = compile(n.pred, ctx);
                ctx.binders.pop_back();
                expect(ctx, pred.type, Type::boolean(), "filter predicate");
                CExpr c;
                c.op = CExpr::Op::SetFilter;
                c.index = static_cast<int>(ctx.binders.size());
                c.args.push_back(std::move(src.code));
                c.args.push_back(std::move(pred.code));
                return {std::move(c), Type::set(elem)};
            },
            [&](const RetrieveNode& n) -> Compiled {
                if (auto f = nested_forbidden("a retrieval")) return *f;
                return compile_retrieve(n, ctx);
            },
        },
        e->node);
}

Compiler::Compiled Compiler::compile_runspec(const RunSpecNode& n, Ctx& ctx) {
    CExpr c;
    c.op = CExpr::Op::RunSpec;
    if (!n.spec) {
        diag(DiagKind::BadRunSpec, cur_name(ctx), "missing nested specification");
        return {std::move(c), vars_.fresh()};
    }
    auto res = validate(*n.spec, registry_);
    if (!res.ok()) {
        for (const auto& d : res.diagnostics) {
            diag(DiagKind::BadRunSpec, cur_name(ctx), "nested '" + n.spec->name + "': " + d.str());
        }
        return {std::move(c), vars_.fresh()};
    }
    if (!res.spec->return_value()) {
        diag(DiagKind::BadRunSpec, cur_name(ctx), "nested '" + n.spec->name + "' has no return clause");
        return {std::move(c), vars_.fresh()};
    }
    const auto& nested = *res.spec;
    for (const auto& [name, _] : n.inputs) {
        bool known = false;
        for (const auto& in : n.spec->inputs) known = known || in.name == name;
        if (!known) diag(DiagKind::BadRunSpec, cur_name(ctx), "nested '" + n.spec->name + "' has no input '" + name + "'");
    }
    for (const auto& in : n.spec->inputs) {
        auto it = std::find_if(n.inputs.begin(), n.inputs.end(), [&](const auto& p) { return p.first == in.name; });
        if (it == n.inputs.end()) {
            diag(DiagKind::BadRunSpec, cur_name(ctx), "nested input '" + in.name + "' is not supplied");
            c.args.emplace_back();
            continue;
        }
        auto x = compile(it->second, ctx);
        expect(ctx, x.type, Type::list(in.type), "nested input '" + in.name + "'");
        c.args.push_back(std::move(x.code));
    }
    c.index = static_cast<int>(out_->nested_.size());
    out_->nested_.push_back({res.spec});
    return {std::move(c), nested.stream(*nested.return_value()).type};
}

Compiler::Compiled Compiler::compile_retrieve(const RetrieveNode& n, Ctx& ctx) {
    CExpr c;
    c.op = CExpr::Op::Retrieve;
    auto from = compile(n.from, ctx);
    expect(ctx, from.type, Type::integer(), "retrieve from");
    c.args.push_back(std::move(from.code));
    if (n.to) {
        auto to = compile(n.to, ctx);
        expect(ctx, to.type, Type::integer(), "retrieve to");
        c.args.push_back(std::move(to.code));
        c.has_to = true;
    } else {
        c.args.emplace_back();
    }
    if (n.filter) {
        auto f = compile(n.filter, ctx);
        c.args.push_back(std::move(f.code));
        c.has_filter = true;
    } else {
        c.args.emplace_back();
    }
    Schema schema = n.schema;
    if (schema.empty() && n.store.empty()) {
        for (const auto& in : spec_.inputs) schema.emplace_back(in.name, in.type);
    }
    c.index = static_cast<int>(out_->retrieves_.size());
    out_->retrieves_.push_back({n.store, schema});
    return {std::move(c), Type::list(schema_record_type(schema))};
}

Specification Compiler::build_template(const ParametricStreamDef& def) {
    Specification t;
    t.name = spec_.name + "/" + def.name;
    t.inputs = spec_.inputs;
    t.parametric = spec_.parametric;
    const ExprPtr self = make_expr(ParamNode{kInstanceParam});

    std::set<std::string> outputs_added;
    std::set<std::string> defs_added;
    std::set<std::string> defs_scanned;
    std::vector<const ParametricStreamDef*> dyn_work{&def};
    std::vector<ExprPtr> scan_work;
    defs_added.insert(def.name);

    std::function<void(const ExprPtr&)> scan = [&](const ExprPtr& e) {
        if (!e) return;
        auto ref = [&](const StreamRef& r) {
            scan(r.param);
            if (!r.param) {
                if (outputs_added.count(r.name)) return;
                for (const auto& o : spec_.outputs) {
                    if (o.name == r.name) {
                        outputs_added.insert(r.name);
                        t.outputs.push_back(o);
                        scan(o.expr);
                    }
                }
            } else if (is_instance_param(r.param)) {
                const ParametricStreamDef* d = find_def(r.name);
                if (d && defs_added.insert(d->name).second) dyn_work.push_back(d);
            }
        };
        auto over_def = [&](const std::string& name) {
            const ParametricStreamDef* d = find_def(name);
            if (!d || !defs_scanned.insert(d->name).second) return;
            // Root outputs the nested template will look for.
            scan(substitute(d->body, d->param, make_expr(ConstNode{Value()})));
        };
        std::visit(overloaded{
                       [&](const ConstNode&) {},
                       [&](const ApplyNode& n) {
                           for (const auto& a : n.args) scan(a);
                       },
                       [&](const OffsetNode& n) {
                           ref(n.stream);
                           scan(n.fallback);
                       },
                       [&](const NowNode& n) { ref(n.stream); },
                       [&](const SliceNode& n) { ref(n.stream); },
                       [&](const RunSpecNode& n) {
                           for (const auto& [_, x] : n.inputs) scan(x);
                       },
                       [&](const OverNode& n) {
                           over_def(n.stream);
                           scan(n.params);
                           scan(n.updating);
                           if (n.init) {
                               scan(n.init->from);
                               scan(n.init->filter);
                           }
                       },
                       [&](const MOverNode& n) {
                           over_def(n.stream);
                           scan(n.param);
                           scan(n.updating);
                           if (n.init) {
                               scan(n.init->from);
                               scan(n.init->filter);
                           }
                       },
                       [&](const WhenNode& n) {
                           over_def(n.stream);
                           scan(n.params);
                           scan(n.cond);
                           if (n.init) {
                               scan(n.init->from);
                               scan(n.init->filter);
                           }
                       },
                       [&](const ParamNode&) {},
                       [&](const SetFilterNode& n) {
                           scan(n.source);
                           scan(n.pred);
                       },
                       [&](const RetrieveNode& n) {
                           scan(n.from);
                           scan(n.to);
                           scan(n.filter);
                       },
                   },
                   e->node);
    };

    while (!dyn_work.empty()) {
        const ParametricStreamDef* d = dyn_work.back();
        dyn_work.pop_back();
        ExprPtr body = substitute(d->body, d->param, self);
        t.outputs.push_back({d->name + kDynamicSuffix, d->value_type, body});
        scan(body);
    }
    return t;
}

Compiler::Compiled Compiler::compile_over(const std::string& def_name, OverKind kind, const ExprPtr& params,
                                          const ExprPtr& updating, const std::string& binder, const ExprPtr& cond,
                                          const std::optional<Initializer>& init, const Ctx& outer) {
    const ParametricStreamDef* def = find_def(def_name);
    CExpr load;
    load.op = CExpr::Op::Load;
    if (!def) {
        diag(DiagKind::UndeclaredStream, cur_name(outer), "over refers to unknown parametric stream '" + def_name + "'");
        return {std::move(load), vars_.fresh()};
    }
    if (std::find(template_stack_.begin(), template_stack_.end(), def_name) != template_stack_.end()) {
        diag(DiagKind::BadOver, cur_name(outer), "over of '" + def_name + "' inside its own instances");
        return {std::move(load), vars_.fresh()};
    }
    Type result_type = kind == OverKind::MOver ? Type::optional(def->value_type)
                                               : Type::map(def->param_type, def->value_type);
    std::string name = "over#" + std::to_string(over_counter_++) + ":" + def_name;
    int id = add_stream(name, StreamKind::Over, result_type);
    Ctx ctx;
    ctx.stream = id;

    OverInfo info;
    info.kind = kind;
    info.def = def_name;
    info.param_type = def->param_type;
    info.value_type = def->value_type;
    auto p = compile(params, ctx);
    expect(ctx, p.type, kind == OverKind::MOver ? Type::optional(def->param_type) : Type::set(def->param_type),
           "over parameters");
    info.params = std::move(p.code);
    if (updating) {
        auto u = compile(updating, ctx);
        expect(ctx, u.type, Type::set(def->param_type), "updating set");
        info.updating = std::move(u.code);
    }
    if (kind == OverKind::When) {
        ctx.binders.emplace_back(binder, def->param_type);
        auto c = compile(cond, ctx);
        ctx.binders.pop_back();
        expect(ctx, c.type, Type::boolean(), "when condition");
        info.cond = std::move(c.code);
    }
    if (init) {
        info.has_init = true;
        info.init_store = init->store;
        info.init_command = init->command;
        ctx.binders.emplace_back(def->param, def->param_type);
        if (init->from) {
            auto f = compile(init->from, ctx);
            expect(ctx, f.type, Type::integer(), "initializer start");
            info.init_from = std::move(f.code);
        }
        if (init->filter) info.init_filter = compile(init->filter, ctx).code;
        ctx.binders.pop_back();
    }

    auto stack = template_stack_;
    stack.push_back(def_name);
    Specification tspec = build_template(*def);
    Compiler sub(tspec, registry_, def->param_type, stack);
    auto res = sub.run();
    if (!res.ok()) {
        for (const auto& d : res.diagnostics) diag(d.kind, name, "instance of '" + def_name + "': " + d.str());
    } else if (res.spec->max_fwd() > 0) {
        diag(DiagKind::BadOver, name, "instances of '" + def_name + "' would need look-ahead");
    } else {
        info.instance = res.spec;
        info.value_stream = res.spec->find_stream(def_name + kDynamicSuffix);
    }
    // Instances consume the current event and their own previous state.
    for (int in : out_->inputs_) edge(ctx, in, 0);
    edge(ctx, id, -1);

    out_->streams_[static_cast<std::size_t>(id)].over = static_cast<int>(out_->overs_.size());
    out_->overs_.push_back(std::move(info));
    load.stream = id;
    edge(outer, id, 0);
    return {std::move(load), result_type};
}

void Compiler::analyze() {
    const int n = static_cast<int>(out_->streams_.size());
    constexpr int kNone = INT_MIN / 4;
    // Longest-path closure; a cycle of non-negative weight makes the
    // specification ill-formed (zero: cyclic, positive: unbounded future).
    std::vector<std::vector<int>> d(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), kNone));
    for (const auto& [key, w] : edges_) {
        if (key.first == key.second && key.first >= 0 &&
            out_->streams_[static_cast<std::size_t>(key.first)].kind == StreamKind::Over && w == -1) {
            continue;
        }
        auto& cell = d[static_cast<std::size_t>(key.first)][static_cast<std::size_t>(key.second)];
        cell = std::max(cell, w);
    }
    out_->max_back_ = max_back_;
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < n; ++i) {
            int ik = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
            if (ik == kNone) continue;
            for (int j = 0; j < n; ++j) {
                int kj = d[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
                if (kj == kNone) continue;
                auto& ij = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                int w = std::clamp(ik + kj, kNone, INT_MAX / 4);
                if (w > ij) ij = w;
            }
        }
    }
    bool cyclic = false;
    for (int i = 0; i < n; ++i) {
        int w = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
        if (w == kNone || w < 0) continue;
        cyclic = true;
        const auto& name = out_->streams_[static_cast<std::size_t>(i)].name;
        if (w > 0) {
            diag(DiagKind::UnboundedFuture, name, "'" + name + "' depends on its own future");
            continue;
        }
        // Name the members of the zero-weight cycle through i.
        std::string cycle;
        for (int j = 0; j < n; ++j) {
            int a = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            int b = d[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            if (a != kNone && b != kNone && a + b == 0) {
                if (!cycle.empty()) cycle += " -> ";
                cycle += out_->streams_[static_cast<std::size_t>(j)].name;
            }
        }
        diag(DiagKind::CyclicDependency, name, "cycle " + cycle);
    }
    if (cyclic) return;

    for (int i = 0; i < n; ++i) {
        int need = 0;
        for (int j = 0; j < n; ++j) {
            int w = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            if (w != kNone) need = std::max(need, w);
        }
        out_->streams_[static_cast<std::size_t>(i)].need = need;
        out_->max_fwd_ = std::max(out_->max_fwd_, need);
    }

    // Evaluation order: dependencies at non-negative offsets first.
    std::vector<int> indeg(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<int>> users(static_cast<std::size_t>(n));
    for (const auto& [key, w] : edges_) {
        if (w < 0 || key.first == key.second) continue;
        ++indeg[static_cast<std::size_t>(key.first)];
        users[static_cast<std::size_t>(key.second)].push_back(key.first);
    }
    std::vector<int> ready;
    for (int i = n; i-- > 0;) {
        if (indeg[static_cast<std::size_t>(i)] == 0) ready.push_back(i);
    }
    while (!ready.empty()) {
        int s = ready.back();
        ready.pop_back();
        out_->order_.push_back(s);
        for (int u : users[static_cast<std::size_t>(s)]) {
            if (--indeg[static_cast<std::size_t>(u)] == 0) ready.push_back(u);
        }
    }
}

ValidationResult Compiler::run() {
    std::set<std::string> seen;
    auto declare = [&](const std::string& name) {
        if (!seen.insert(name).second) diag(DiagKind::DuplicateStream, name, "'" + name + "' is declared twice");
    };
    for (const auto& in : spec_.inputs) declare(in.name);
    for (const auto& out : spec_.outputs) declare(out.name);
    for (const auto& def : spec_.parametric) declare(def.name);

    for (const auto& in : spec_.inputs) {
        if (ids_.count(in.name)) continue;
        out_->inputs_.push_back(add_stream(in.name, StreamKind::Input, in.type));
        out_->schema_.emplace_back(in.name, in.type);
    }
    for (const auto& o : spec_.outputs) {
        if (ids_.count(o.name)) continue;
        out_->outputs_.push_back(add_stream(o.name, StreamKind::Output, o.type));
    }
    for (std::size_t i = 0; i < spec_.outputs.size() && i < out_->outputs_.size(); ++i) {
        int id = out_->outputs_[i];
        Ctx ctx;
        ctx.stream = id;
        auto c = compile(spec_.outputs[i].expr, ctx);
        expect(ctx, c.type, spec_.outputs[i].type, "definition of '" + spec_.outputs[i].name + "'");
        out_->streams_[static_cast<std::size_t>(id)].expr = std::move(c.code);
    }
    while (!pending_.empty()) {
        auto [id, body] = pending_.back();
        pending_.pop_back();
        Ctx ctx;
        ctx.stream = id;
        auto c = compile(body, ctx);
        const Type want = out_->streams_[static_cast<std::size_t>(id)].type;
        expect(ctx, c.type, want, "body of '" + out_->streams_[static_cast<std::size_t>(id)].name + "'");
        out_->streams_[static_cast<std::size_t>(id)].expr = std::move(c.code);
    }
    // Over aux streams are compiled in compile_over; inputs need nothing.

    if (spec_.returns) {
        int v = out_->find_stream(spec_.returns->value);
        int c = out_->find_stream(spec_.returns->cond);
        if (v < 0) diag(DiagKind::BadReturnClause, spec_.returns->value, "return value stream is not declared");
        if (c < 0) {
            diag(DiagKind::BadReturnClause, spec_.returns->cond, "return condition stream is not declared");
        } else if (!(out_->streams_[static_cast<std::size_t>(c)].type == Type::boolean())) {
            diag(DiagKind::BadReturnClause, spec_.returns->cond, "return condition must be Bool");
        }
        if (v >= 0) out_->ret_value_ = v;
        if (c >= 0) out_->ret_cond_ = c;
    }

    if (diags_.empty()) analyze();
    if (!diags_.empty()) return {nullptr, std::move(diags_)};
    out_->hash_ = spec_hash(spec_);
    return {out_, {}};
}

ValidationResult validate(const Specification& spec, std::shared_ptr<const FunctionRegistry> registry) {
    Compiler c(spec, std::move(registry), std::nullopt, {});
    return c.run();
}

ValidatedSpecPtr validate_or_throw(const Specification& spec, std::shared_ptr<const FunctionRegistry> registry) {
    auto res = validate(spec, std::move(registry));
    if (res.ok()) return res.spec;
    std::string msg = "specification '" + spec.name + "' is invalid:";
    for (const auto& d : res.diagnostics) msg += "\n  " + d.str();
    throw Error(Errc::Validation, msg);
}

ValidatedSpecPtr validate(const ValidatedSpecPtr& spec) { return spec; }

namespace {

ExprPtr desugar_expr(const ExprPtr& e);

std::optional<Initializer> desugar_init(const std::optional<Initializer>& init) {
    if (!init) return init;
    Initializer out = *init;
    out.from = desugar_expr(init->from);
    out.filter = desugar_expr(init->filter);
    return out;
}

StreamRef desugar_ref(const StreamRef& r) { return {r.name, desugar_expr(r.param)}; }

ExprPtr desugar_expr(const ExprPtr& e) {
    if (!e) return e;
    return std::visit(
        overloaded{
            [&](const ConstNode&) { return e; },
            [&](const ApplyNode& n) {
                ApplyNode out{n.fn, {}};
                for (const auto& a : n.args) out.args.push_back(desugar_expr(a));
                return make_expr(std::move(out));
            },
            [&](const OffsetNode& n) {
                return make_expr(OffsetNode{desugar_ref(n.stream), n.offset, desugar_expr(n.fallback)});
            },
            [&](const NowNode& n) { return make_expr(NowNode{desugar_ref(n.stream)}); },
            [&](const SliceNode& n) { return make_expr(SliceNode{desugar_ref(n.stream), n.count}); },
            [&](const RunSpecNode& n) {
                RunSpecNode out{std::make_shared<const Specification>(desugar_spec(*n.spec)), {}};
                for (const auto& [name, x] : n.inputs) out.inputs.emplace_back(name, desugar_expr(x));
                return make_expr(std::move(out));
            },
            [&](const OverNode& n) {
                return make_expr(OverNode{n.stream, desugar_expr(n.params), desugar_expr(n.updating),
                                          desugar_init(n.init)});
            },
            [&](const MOverNode& n) {
                ExprPtr params = make_expr(ApplyNode{"maybeToSet", {desugar_expr(n.param)}});
                ExprPtr over = make_expr(OverNode{n.stream, params, desugar_expr(n.updating), desugar_init(n.init)});
                return make_expr(ApplyNode{"onlyValue", {over}});
            },
            [&](const WhenNode& n) {
                ExprPtr params = desugar_expr(n.params);
                ExprPtr upd = make_expr(SetFilterNode{params, n.binder, desugar_expr(n.cond)});
                return make_expr(OverNode{n.stream, params, upd, desugar_init(n.init)});
            },
            [&](const ParamNode&) { return e; },
            [&](const SetFilterNode& n) {
                return make_expr(SetFilterNode{desugar_expr(n.source), n.binder, desugar_expr(n.pred)});
            },
            [&](const RetrieveNode& n) {
                RetrieveNode out = n;
                out.from = desugar_expr(n.from);
                out.to = desugar_expr(n.to);
                out.filter = desugar_expr(n.filter);
                return make_expr(std::move(out));
            },
        },
        e->node);
}

} // namespace

Specification desugar_spec(const Specification& spec) {
    Specification out = spec;
    for (auto& o : out.outputs) o.expr = desugar_expr(o.expr);
    for (auto& d : out.parametric) d.body = desugar_expr(d.body);
    return out;
}

ValidatedSpecPtr desugar(const ValidatedSpecPtr& spec) {
    return validate_or_throw(desugar_spec(spec->source()), spec->registry());
}

} // namespace srv
