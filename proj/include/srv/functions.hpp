#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srv/type.hpp"
#include "srv/value.hpp"

namespace srv {

class FunctionRegistry;

struct Signature {
    std::vector<Type> params;
    Type result;
    /// Accepts any number of arguments; params then holds the single
    /// element type shared by all of them (or is empty with a custom typer).
    bool variadic = false;

    std::string str() const;
    friend bool operator==(const Signature&, const Signature&) = default;
};

/// Evaluation function of an interpreted symbol. The registry is passed so
/// that higher-order builtins (insertWith) can resolve their combiner.
using ApplyFn = std::function<Value(std::span<const Value>, const FunctionRegistry&)>;

/// Optional custom result-type rule for symbols whose result depends on
/// constant arguments (record field access, record construction). Receives
/// argument types and, per argument, the constant value when the argument
/// is a literal. Throws Error(Errc::Type) on mismatch.
using TypeRule =
    std::function<Type(std::span<const Type>, std::span<const Value* const>, TypeVarSupply&)>;

enum class Laziness { Strict, IfThenElse, And, Or };

struct FuncDef {
    std::string name;
    Signature signature;
    ApplyFn apply;
    TypeRule type_rule;
    Laziness laziness = Laziness::Strict;

    std::size_t arity() const { return signature.params.size(); }
};

/// Registered interpreted signatures. Built once, then read-only.
class FunctionRegistry {
public:
    /// Registering the same name twice is allowed only with an identical
    /// signature (the later definition is ignored).
    const FuncDef& register_function(FuncDef def);

    const FuncDef* find(std::string_view name) const;
    const FuncDef& get(std::string_view name) const;
    Value call(std::string_view name, std::span<const Value> args) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, std::unique_ptr<const FuncDef>, std::less<>> defs_;
};

/// Boolean connectives, arithmetic and comparisons, if-then-else, map, set,
/// list, optional and record operations.
std::vector<FuncDef> builtin_library();

/// Registry holding builtin_library().
std::shared_ptr<FunctionRegistry> make_builtin_registry();

} // namespace srv
