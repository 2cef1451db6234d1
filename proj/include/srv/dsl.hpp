#pragma once

#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "srv/spec.hpp"

// Embedded construction API for specifications. Operators build Apply nodes
// over the builtin symbols, so `now("altitude") < lit(100.0)` is the
// expression altitude[now] < 100.0.
namespace srv::dsl {

class E {
public:
    E() = default;
    E(ExprPtr p) : ptr_(std::move(p)) {}

    const ExprPtr& ptr() const { return ptr_; }
    operator ExprPtr() const { return ptr_; }
    explicit operator bool() const { return static_cast<bool>(ptr_); }

private:
    ExprPtr ptr_;
};

E lit(Value v);
E lit(bool b);
E lit(int i);
E lit(std::int64_t i);
E lit(double d);
E lit(const char* s);
E lit(std::string s);

E call(std::string fn, std::vector<E> args);
E ite(E c, E then, E otherwise);

E now(std::string stream);
E now(std::string stream, E param);
E at(std::string stream, int offset, E fallback);
E at(std::string stream, E param, int offset, E fallback);
E slice(std::string stream, int count);
E param(std::string name);

E over(std::string stream, E params, E updating = {}, std::optional<Initializer> init = {});
E mover(std::string stream, E param, E updating = {}, std::optional<Initializer> init = {});
E when(std::string stream, E params, std::string binder, E cond, std::optional<Initializer> init = {});
E set_filter(E source, std::string binder, E pred);
E run_spec(SpecPtr spec, std::vector<std::pair<std::string, E>> inputs);
E retrieve(std::string store, std::vector<std::pair<std::string, Type>> schema, E from, E to = {},
           E filter = {});

Initializer init(std::string store, E from = {}, E filter = {}, std::string command = {});

E operator+(E a, E b);
E operator-(E a, E b);
E operator*(E a, E b);
E operator/(E a, E b);
E operator<(E a, E b);
E operator<=(E a, E b);
E operator>(E a, E b);
E operator>=(E a, E b);
E operator==(E a, E b);
E operator!=(E a, E b);
E operator&&(E a, E b);
E operator||(E a, E b);
E operator!(E a);

/// Incremental builder for a Specification.
class SpecBuilder {
public:
    explicit SpecBuilder(std::string name);

    SpecBuilder& input(std::string name, Type type);
    SpecBuilder& output(std::string name, Type type, E expr);
    SpecBuilder& parametric(std::string name, std::string param, Type param_type, Type value_type,
                            E body);
    SpecBuilder& returns(std::string value, std::string cond);

    Specification spec() const { return spec_; }
    SpecPtr build() const;

private:
    Specification spec_;
};

} // namespace srv::dsl
