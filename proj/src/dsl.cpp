#include "srv/dsl.hpp"

namespace srv::dsl {

namespace {

std::vector<ExprPtr> ptrs(const std::vector<E>& es) {
    std::vector<ExprPtr> out;
    out.reserve(es.size());
    for (const auto& e : es) out.push_back(e.ptr());
    return out;
}

E binary(const char* fn, E a, E b) { return call(fn, {std::move(a), std::move(b)}); }

} // namespace

E lit(Value v) { return make_expr(ConstNode{std::move(v)}); }
E lit(bool b) { return lit(Value::boolean(b)); }
E lit(int i) { return lit(Value::integer(i)); }
E lit(std::int64_t i) { return lit(Value::integer(i)); }
E lit(double d) { return lit(Value::real(d)); }
E lit(const char* s) { return lit(Value::text(s)); }
E lit(std::string s) { return lit(Value::text(std::move(s))); }

E call(std::string fn, std::vector<E> args) { return make_expr(ApplyNode{std::move(fn), ptrs(args)}); }

E ite(E c, E then, E otherwise) { return call("ite", {std::move(c), std::move(then), std::move(otherwise)}); }

E now(std::string stream) { return make_expr(NowNode{StreamRef{std::move(stream), nullptr}}); }

E now(std::string stream, E param) {
    return make_expr(NowNode{StreamRef{std::move(stream), param.ptr()}});
}

E at(std::string stream, int offset, E fallback) {
    return make_expr(OffsetNode{StreamRef{std::move(stream), nullptr}, offset, fallback.ptr()});
}

E at(std::string stream, E param, int offset, E fallback) {
    return make_expr(OffsetNode{StreamRef{std::move(stream), param.ptr()}, offset, fallback.ptr()});
}

E slice(std::string stream, int count) {
    return make_expr(SliceNode{StreamRef{std::move(stream), nullptr}, count});
}

E param(std::string name) { return make_expr(ParamNode{std::move(name)}); }

E over(std::string stream, E params, E updating, std::optional<Initializer> init) {
    return make_expr(OverNode{std::move(stream), params.ptr(), updating.ptr(), std::move(init)});
}

E mover(std::string stream, E param, E updating, std::optional<Initializer> init) {
    return make_expr(MOverNode{std::move(stream), param.ptr(), updating.ptr(), std::move(init)});
}

E when(std::string stream, E params, std::string binder, E cond, std::optional<Initializer> init) {
    return make_expr(WhenNode{std::move(stream), params.ptr(), std::move(binder), cond.ptr(), std::move(init)});
}

E set_filter(E source, std::string binder, E pred) {
    return make_expr(SetFilterNode{source.ptr(), std::move(binder), pred.ptr()});
}

E run_spec(SpecPtr spec, std::vector<std::pair<std::string, E>> inputs) {
    RunSpecNode node{std::move(spec), {}};
    for (auto& [name, e] : inputs) node.inputs.emplace_back(std::move(name), e.ptr());
    return make_expr(std::move(node));
}

E retrieve(std::string store, std::vector<std::pair<std::string, Type>> schema, E from, E to, E filter) {
    return make_expr(RetrieveNode{std::move(store), std::move(schema), from.ptr(), to.ptr(), filter.ptr()});
}

Initializer init(std::string store, E from, E filter, std::string command) {
    return Initializer{std::move(store), from.ptr(), filter.ptr(), std::move(command)};
}

E operator+(E a, E b) { return binary("+", std::move(a), std::move(b)); }
E operator-(E a, E b) { return binary("-", std::move(a), std::move(b)); }
E operator*(E a, E b) { return binary("*", std::move(a), std::move(b)); }
E operator/(E a, E b) { return binary("/", std::move(a), std::move(b)); }
E operator<(E a, E b) { return binary("<", std::move(a), std::move(b)); }
E operator<=(E a, E b) { return binary("<=", std::move(a), std::move(b)); }
E operator>(E a, E b) { return binary(">", std::move(a), std::move(b)); }
E operator>=(E a, E b) { return binary(">=", std::move(a), std::move(b)); }
E operator==(E a, E b) { return binary("==", std::move(a), std::move(b)); }
E operator!=(E a, E b) { return binary("!=", std::move(a), std::move(b)); }
E operator&&(E a, E b) { return binary("and", std::move(a), std::move(b)); }
E operator||(E a, E b) { return binary("or", std::move(a), std::move(b)); }
E operator!(E a) { return call("not", {std::move(a)}); }

SpecBuilder::SpecBuilder(std::string name) { spec_.name = std::move(name); }

SpecBuilder& SpecBuilder::input(std::string name, Type type) {
    spec_.inputs.push_back({std::move(name), std::move(type)});
    return *this;
}

SpecBuilder& SpecBuilder::output(std::string name, Type type, E expr) {
    spec_.outputs.push_back({std::move(name), std::move(type), expr.ptr()});
    return *this;
}

SpecBuilder& SpecBuilder::parametric(std::string name, std::string param, Type param_type,
                                     Type value_type, E body) {
    spec_.parametric.push_back(
        {std::move(name), std::move(param), std::move(param_type), std::move(value_type), body.ptr()});
    return *this;
}

SpecBuilder& SpecBuilder::returns(std::string value, std::string cond) {
    spec_.returns = ReturnClause{std::move(value), std::move(cond)};
    return *this;
}

SpecPtr SpecBuilder::build() const { return std::make_shared<const Specification>(spec_); }

} // namespace srv::dsl
