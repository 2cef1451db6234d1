#include "srv/functions.hpp"

#include <algorithm>
#include <cmath>

namespace srv {

std::string Signature::str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) s += ", ";
        s += params[i].str();
    }
    if (variadic) s += "...";
    return s + ") -> " + result.str();
}

const FuncDef& FunctionRegistry::register_function(FuncDef def) {
    auto it = defs_.find(def.name);
    if (it != defs_.end()) {
        if (!(it->second->signature == def.signature)) {
            throw Error(Errc::Registration, "function '" + def.name + "' already registered as " +
                                                it->second->signature.str() + ", not " +
                                                def.signature.str());
        }
        return *it->second;
    }
    auto name = def.name;
    auto [pos, _] = defs_.emplace(std::move(name), std::make_unique<const FuncDef>(std::move(def)));
    return *pos->second;
}

const FuncDef* FunctionRegistry::find(std::string_view name) const {
    auto it = defs_.find(name);
    return it == defs_.end() ? nullptr : it->second.get();
}

const FuncDef& FunctionRegistry::get(std::string_view name) const {
    if (const FuncDef* f = find(name)) return *f;
    throw Error(Errc::Evaluation, "unknown function '" + std::string(name) + "'");
}

Value FunctionRegistry::call(std::string_view name, std::span<const Value> args) const {
    const FuncDef& f = get(name);
    if (!f.signature.variadic && args.size() != f.arity()) {
        throw Error(Errc::Evaluation, "function '" + f.name + "' expects " +
                                          std::to_string(f.arity()) + " arguments");
    }
    if (f.laziness != Laziness::Strict) {
        // Strict fallback for lazy connectives called through the registry.
        switch (f.laziness) {
        case Laziness::IfThenElse: return args[0].as_bool() ? args[1] : args[2];
        case Laziness::And: return Value::boolean(args[0].as_bool() && args[1].as_bool());
        case Laziness::Or: return Value::boolean(args[0].as_bool() || args[1].as_bool());
        default: break;
        }
    }
    return f.apply(args, *this);
}

std::vector<std::string> FunctionRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : defs_) out.push_back(name);
    return out;
}

namespace {

Type a() { return Type::var("a"); }
Type b() { return Type::var("b"); }
Type k() { return Type::var("k"); }
Type v() { return Type::var("v"); }
Type num() { return Type::var("n", true); }

FuncDef fn(std::string name, std::vector<Type> params, Type result, ApplyFn apply) {
    FuncDef d;
    d.name = std::move(name);
    d.signature.params = std::move(params);
    d.signature.result = std::move(result);
    d.apply = std::move(apply);
    return d;
}

[[noreturn]] void eval_fail(const std::string& msg) { throw Error(Errc::Evaluation, msg); }

template <typename IntOp, typename FloatOp>
ApplyFn numeric(const char* name, IntOp iop, FloatOp fop) {
    return [=](std::span<const Value> xs, const FunctionRegistry&) -> Value {
        const Value& x = xs[0];
        const Value& y = xs[1];
        if (x.kind() == ValueKind::Int && y.kind() == ValueKind::Int) {
            return Value::integer(iop(x.as_int(), y.as_int()));
        }
        if (x.kind() == ValueKind::Float && y.kind() == ValueKind::Float) {
            return Value::real(fop(x.as_float(), y.as_float()));
        }
        throw Error(Errc::Type, std::string("'") + name + "' needs two Ints or two Floats, got " +
                                    x.str() + " and " + y.str());
    };
}

Value checked_set_insert(const Value& x, const Value& set) {
    const auto& s = set.as_set();
    if (s.count(x)) return set;
    ValueSet copy = s;
    copy.insert(x);
    return Value::set(std::move(copy));
}

Type require_record_field(const Type& rec, const Value* name, TypeVarSupply& vars) {
    if (!name || name->kind() != ValueKind::Text) return vars.fresh();
    if (rec.is_var()) return vars.fresh();
    if (rec.kind() != Type::Kind::Record) {
        throw Error(Errc::Type, "field access on non-record type " + rec.str());
    }
    const Type* f = rec.field(name->as_text());
    if (!f) throw Error(Errc::Type, "record type " + rec.str() + " has no field '" + name->as_text() + "'");
    return *f;
}

} // namespace

std::vector<FuncDef> builtin_library() {
    std::vector<FuncDef> lib;
    const Type B = Type::boolean();
    const Type I = Type::integer();
    const Type F = Type::real();
    const Type T = Type::text();

    // Boolean connectives.
    lib.push_back(fn("not", {B}, B, [](auto xs, auto&) { return Value::boolean(!xs[0].as_bool()); }));
    {
        auto d = fn("and", {B, B}, B, [](auto xs, auto&) {
            return Value::boolean(xs[0].as_bool() && xs[1].as_bool());
        });
        d.laziness = Laziness::And;
        lib.push_back(std::move(d));
    }
    {
        auto d = fn("or", {B, B}, B, [](auto xs, auto&) {
            return Value::boolean(xs[0].as_bool() || xs[1].as_bool());
        });
        d.laziness = Laziness::Or;
        lib.push_back(std::move(d));
    }
    lib.push_back(fn("implies", {B, B}, B, [](auto xs, auto&) {
        return Value::boolean(!xs[0].as_bool() || xs[1].as_bool());
    }));
    {
        auto d = fn("ite", {B, a(), a()}, a(),
                    [](auto xs, auto&) { return xs[0].as_bool() ? xs[1] : xs[2]; });
        d.laziness = Laziness::IfThenElse;
        lib.push_back(std::move(d));
    }

    // Comparisons use the total value order.
    lib.push_back(fn("==", {a(), a()}, B, [](auto xs, auto&) { return Value::boolean(xs[0] == xs[1]); }));
    lib.push_back(fn("!=", {a(), a()}, B, [](auto xs, auto&) { return Value::boolean(xs[0] != xs[1]); }));
    lib.push_back(fn("<", {a(), a()}, B, [](auto xs, auto&) { return Value::boolean(xs[0] < xs[1]); }));
    lib.push_back(fn("<=", {a(), a()}, B, [](auto xs, auto&) { return Value::boolean(xs[0] <= xs[1]); }));
    lib.push_back(fn(">", {a(), a()}, B, [](auto xs, auto&) { return Value::boolean(xs[0] > xs[1]); }));
    lib.push_back(fn(">=", {a(), a()}, B, [](auto xs, auto&) { return Value::boolean(xs[0] >= xs[1]); }));
    lib.push_back(fn("min", {a(), a()}, a(), [](auto xs, auto&) { return std::min(xs[0], xs[1]); }));
    lib.push_back(fn("max", {a(), a()}, a(), [](auto xs, auto&) { return std::max(xs[0], xs[1]); }));

    // Arithmetic.
    lib.push_back(fn("+", {num(), num()}, num(),
                     numeric("+", [](std::int64_t x, std::int64_t y) { return x + y; },
                             [](double x, double y) { return x + y; })));
    lib.push_back(fn("-", {num(), num()}, num(),
                     numeric("-", [](std::int64_t x, std::int64_t y) { return x - y; },
                             [](double x, double y) { return x - y; })));
    lib.push_back(fn("*", {num(), num()}, num(),
                     numeric("*", [](std::int64_t x, std::int64_t y) { return x * y; },
                             [](double x, double y) { return x * y; })));
    lib.push_back(fn("/", {num(), num()}, num(),
                     numeric("/",
                             [](std::int64_t x, std::int64_t y) {
                                 if (y == 0) eval_fail("integer division by zero");
                                 return x / y;
                             },
                             [](double x, double y) { return x / y; })));
    lib.push_back(fn("mod", {I, I}, I, [](auto xs, auto&) {
        if (xs[1].as_int() == 0) eval_fail("modulo by zero");
        return Value::integer(xs[0].as_int() % xs[1].as_int());
    }));
    lib.push_back(fn("neg", {num()}, num(), [](auto xs, auto&) {
        return xs[0].kind() == ValueKind::Int ? Value::integer(-xs[0].as_int())
                                              : Value::real(-xs[0].as_float());
    }));
    lib.push_back(fn("abs", {num()}, num(), [](auto xs, auto&) {
        return xs[0].kind() == ValueKind::Int ? Value::integer(std::abs(xs[0].as_int()))
                                              : Value::real(std::fabs(xs[0].as_float()));
    }));
    lib.push_back(fn("toFloat", {I}, F, [](auto xs, auto&) {
        return Value::real(static_cast<double>(xs[0].as_int()));
    }));
    lib.push_back(fn("truncate", {F}, I, [](auto xs, auto&) {
        return Value::integer(static_cast<std::int64_t>(xs[0].as_float()));
    }));

    // Maps.
    lib.push_back(fn("insertWith", {T, k(), v(), Type::map(k(), v())}, Type::map(k(), v()),
                     [](std::span<const Value> xs, const FunctionRegistry& reg) {
                         const auto& m = xs[3].as_map();
                         ValueMap copy = m;
                         auto it = copy.find(xs[1]);
                         if (it == copy.end()) {
                             copy.emplace(xs[1], xs[2]);
                         } else {
                             const Value args[2] = {xs[2], it->second};
                             it->second = reg.call(xs[0].as_text(), args);
                         }
                         return Value::map(std::move(copy));
                     }));
    auto elems = [](std::span<const Value> xs, const FunctionRegistry&) {
        ValueList out;
        out.reserve(xs[0].as_map().size());
        for (const auto& [_, e] : xs[0].as_map()) out.push_back(e);
        return Value::list(std::move(out));
    };
    lib.push_back(fn("elems", {Type::map(k(), v())}, Type::list(v()), elems));
    lib.push_back(fn("values", {Type::map(k(), v())}, Type::list(v()), elems));
    lib.push_back(fn("keys", {Type::map(k(), v())}, Type::set(k()), [](auto xs, auto&) {
        ValueSet out;
        for (const auto& [key, _] : xs[0].as_map()) out.insert(out.end(), key);
        return Value::set(std::move(out));
    }));
    lib.push_back(fn("!", {Type::map(k(), v()), k()}, v(), [](auto xs, auto&) {
        const auto& m = xs[0].as_map();
        auto it = m.find(xs[1]);
        if (it == m.end()) eval_fail("map lookup: key " + xs[1].str() + " not present");
        return it->second;
    }));
    lib.push_back(fn("hasKey", {k(), Type::map(k(), v())}, B, [](auto xs, auto&) {
        return Value::boolean(xs[1].as_map().count(xs[0]) > 0);
    }));
    lib.push_back(fn("findWithDefault", {v(), k(), Type::map(k(), v())}, v(), [](auto xs, auto&) {
        const auto& m = xs[2].as_map();
        auto it = m.find(xs[1]);
        return it == m.end() ? xs[0] : it->second;
    }));
    lib.push_back(fn("mapInsert", {k(), v(), Type::map(k(), v())}, Type::map(k(), v()),
                     [](auto xs, auto&) {
                         ValueMap copy = xs[2].as_map();
                         copy.insert_or_assign(xs[0], xs[1]);
                         return Value::map(std::move(copy));
                     }));
    lib.push_back(fn("mapDelete", {k(), Type::map(k(), v())}, Type::map(k(), v()), [](auto xs, auto&) {
        if (!xs[1].as_map().count(xs[0])) return xs[1];
        ValueMap copy = xs[1].as_map();
        copy.erase(xs[0]);
        return Value::map(std::move(copy));
    }));
    lib.push_back(fn("onlyValue", {Type::map(k(), v())}, Type::optional(v()), [](auto xs, auto&) {
        const auto& m = xs[0].as_map();
        return m.empty() ? Value::none() : Value::some(m.begin()->second);
    }));

    // Sets.
    lib.push_back(fn("insert", {a(), Type::set(a())}, Type::set(a()),
                     [](auto xs, auto&) { return checked_set_insert(xs[0], xs[1]); }));
    lib.push_back(fn("delete", {a(), Type::set(a())}, Type::set(a()), [](auto xs, auto&) {
        if (!xs[1].as_set().count(xs[0])) return xs[1];
        ValueSet copy = xs[1].as_set();
        copy.erase(xs[0]);
        return Value::set(std::move(copy));
    }));
    lib.push_back(fn("member", {a(), Type::set(a())}, B, [](auto xs, auto&) {
        return Value::boolean(xs[1].as_set().count(xs[0]) > 0);
    }));
    lib.push_back(fn("union", {Type::set(a()), Type::set(a())}, Type::set(a()), [](auto xs, auto&) {
        if (xs[1].as_set().empty()) return xs[0];
        if (xs[0].as_set().empty()) return xs[1];
        ValueSet copy = xs[0].as_set();
        copy.insert(xs[1].as_set().begin(), xs[1].as_set().end());
        return Value::set(std::move(copy));
    }));
    lib.push_back(fn("difference", {Type::set(a()), Type::set(a())}, Type::set(a()), [](auto xs, auto&) {
        ValueSet out;
        std::set_difference(xs[0].as_set().begin(), xs[0].as_set().end(), xs[1].as_set().begin(),
                            xs[1].as_set().end(), std::inserter(out, out.end()));
        return Value::set(std::move(out));
    }));
    lib.push_back(fn("singleton", {a()}, Type::set(a()),
                     [](auto xs, auto&) { return Value::set(ValueSet{xs[0]}); }));
    lib.push_back(fn("setToList", {Type::set(a())}, Type::list(a()), [](auto xs, auto&) {
        return Value::list(ValueList(xs[0].as_set().begin(), xs[0].as_set().end()));
    }));
    lib.push_back(fn("listToSet", {Type::list(a())}, Type::set(a()), [](auto xs, auto&) {
        return Value::set(ValueSet(xs[0].as_list().begin(), xs[0].as_list().end()));
    }));
    {
        auto d = fn("size", {a()}, I, [](auto xs, auto&) -> Value {
            const Value& x = xs[0];
            switch (x.kind()) {
            case ValueKind::Set: return Value::integer(static_cast<std::int64_t>(x.as_set().size()));
            case ValueKind::Map: return Value::integer(static_cast<std::int64_t>(x.as_map().size()));
            case ValueKind::List: return Value::integer(static_cast<std::int64_t>(x.as_list().size()));
            case ValueKind::Text: return Value::integer(static_cast<std::int64_t>(x.as_text().size()));
            default: throw Error(Errc::Type, "size of " + std::string(kind_name(x.kind())));
            }
        });
        d.type_rule = [](std::span<const Type> ts, auto, TypeVarSupply&) {
            switch (ts[0].kind()) {
            case Type::Kind::Set:
            case Type::Kind::Map:
            case Type::Kind::List:
            case Type::Kind::Text:
            case Type::Kind::Var: return Type::integer();
            default: throw Error(Errc::Type, "size of " + ts[0].str());
            }
        };
        lib.push_back(std::move(d));
    }

    // Lists.
    lib.push_back(fn("maximum", {Type::list(a())}, a(), [](auto xs, auto&) {
        const auto& l = xs[0].as_list();
        if (l.empty()) eval_fail("maximum of empty list");
        return *std::max_element(l.begin(), l.end());
    }));
    lib.push_back(fn("minimum", {Type::list(a())}, a(), [](auto xs, auto&) {
        const auto& l = xs[0].as_list();
        if (l.empty()) eval_fail("minimum of empty list");
        return *std::min_element(l.begin(), l.end());
    }));
    lib.push_back(fn("sum", {Type::list(num())}, num(), [](std::span<const Value> xs, const FunctionRegistry&) {
        const auto& l = xs[0].as_list();
        if (l.empty()) return Value::integer(0);
        if (l.front().kind() == ValueKind::Float) {
            double s = 0;
            for (const auto& e : l) s += e.as_float();
            return Value::real(s);
        }
        std::int64_t s = 0;
        for (const auto& e : l) s += e.as_int();
        return Value::integer(s);
    }));
    lib.push_back(fn("length", {Type::list(a())}, I, [](auto xs, auto&) {
        return Value::integer(static_cast<std::int64_t>(xs[0].as_list().size()));
    }));
    lib.push_back(fn("elem", {a(), Type::list(a())}, B, [](auto xs, auto&) {
        const auto& l = xs[1].as_list();
        return Value::boolean(std::find(l.begin(), l.end(), xs[0]) != l.end());
    }));
    lib.push_back(fn("at", {Type::list(a()), I}, a(), [](auto xs, auto&) {
        const auto& l = xs[0].as_list();
        auto i = xs[1].as_int();
        if (i < 0 || static_cast<std::size_t>(i) >= l.size()) {
            eval_fail("list index " + std::to_string(i) + " out of range");
        }
        return l[static_cast<std::size_t>(i)];
    }));
    {
        FuncDef d = fn("list", {a()}, Type::list(a()), [](auto xs, auto&) {
            return Value::list(ValueList(xs.begin(), xs.end()));
        });
        d.signature.variadic = true;
        lib.push_back(std::move(d));
    }
    {
        FuncDef d = fn("column", {Type::list(a()), T}, Type::list(b()), [](auto xs, auto&) {
            ValueList out;
            const auto& rows = xs[0].as_list();
            out.reserve(rows.size());
            for (const auto& row : rows) out.push_back(row.field(xs[1].as_text()));
            return Value::list(std::move(out));
        });
        d.type_rule = [](std::span<const Type> ts, std::span<const Value* const> cs, TypeVarSupply& vars) {
            if (ts[0].is_var()) return Type::list(vars.fresh());
            if (ts[0].kind() != Type::Kind::List) throw Error(Errc::Type, "column of " + ts[0].str());
            if (ts[1].kind() != Type::Kind::Text && !ts[1].is_var()) {
                throw Error(Errc::Type, "column name must be Text");
            }
            return Type::list(require_record_field(ts[0].elem(), cs[1], vars));
        };
        lib.push_back(std::move(d));
    }

    // Optionals.
    lib.push_back(fn("just", {a()}, Type::optional(a()), [](auto xs, auto&) { return Value::some(xs[0]); }));
    lib.push_back(fn("isJust", {Type::optional(a())}, B, [](auto xs, auto&) { return Value::boolean(xs[0].is_some()); }));
    lib.push_back(fn("isNothing", {Type::optional(a())}, B, [](auto xs, auto&) { return Value::boolean(!xs[0].is_some()); }));
    lib.push_back(fn("fromJust", {Type::optional(a())}, a(), [](auto xs, auto&) { return xs[0].unwrap(); }));
    lib.push_back(fn("fromMaybe", {a(), Type::optional(a())}, a(), [](auto xs, auto&) {
        return xs[1].is_some() ? xs[1].unwrap() : xs[0];
    }));
    lib.push_back(fn("maybeToSet", {Type::optional(a())}, Type::set(a()), [](auto xs, auto&) {
        return xs[0].is_some() ? Value::set(ValueSet{xs[0].unwrap()}) : Value::set({});
    }));

    // Records.
    {
        FuncDef d = fn("field", {a(), T}, b(), [](auto xs, auto&) { return xs[0].field(xs[1].as_text()); });
        d.type_rule = [](std::span<const Type> ts, std::span<const Value* const> cs, TypeVarSupply& vars) {
            return require_record_field(ts[0], cs[1], vars);
        };
        lib.push_back(std::move(d));
    }
    {
        // record("name1", v1, "name2", v2, ...)
        FuncDef d = fn("record", {}, a(), [](std::span<const Value> xs, const FunctionRegistry&) {
            if (xs.size() % 2 != 0) eval_fail("record needs name/value pairs");
            std::vector<std::pair<std::string, Value>> fields;
            for (std::size_t i = 0; i < xs.size(); i += 2) fields.emplace_back(xs[i].as_text(), xs[i + 1]);
            return Value::record(std::move(fields));
        });
        d.signature.variadic = true;
        d.type_rule = [](std::span<const Type> ts, std::span<const Value* const> cs, TypeVarSupply&) {
            if (ts.size() % 2 != 0) throw Error(Errc::Type, "record needs name/value pairs");
            std::vector<std::pair<std::string, Type>> fields;
            for (std::size_t i = 0; i < ts.size(); i += 2) {
                if (!cs[i] || cs[i]->kind() != ValueKind::Text) {
                    throw Error(Errc::Type, "record field names must be Text literals");
                }
                fields.emplace_back(cs[i]->as_text(), ts[i + 1]);
            }
            return Type::record(std::move(fields));
        };
        lib.push_back(std::move(d));
    }

    // Text.
    lib.push_back(fn("concat", {T, T}, T, [](auto xs, auto&) { return Value::text(xs[0].as_text() + xs[1].as_text()); }));
    lib.push_back(fn("show", {a()}, T, [](auto xs, auto&) { return Value::text(xs[0].str()); }));

    return lib;
}

std::shared_ptr<FunctionRegistry> make_builtin_registry() {
    auto reg = std::make_shared<FunctionRegistry>();
    for (auto& def : builtin_library()) reg->register_function(std::move(def));
    return reg;
}

} // namespace srv
