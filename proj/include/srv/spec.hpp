#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "srv/type.hpp"
#include "srv/value.hpp"

namespace srv {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;
struct Specification;
using SpecPtr = std::shared_ptr<const Specification>;

/// Name the parametric stream bodies use for their parameter after they are
/// assembled into a dynamic instance.
inline constexpr const char* kInstanceParam = "@param";

/// Reference to a stream. `param` is null for plain streams; for a
/// parametric stream it is a constant (static instantiation) or a Param
/// node naming the enclosing binder.
struct StreamRef {
    std::string name;
    ExprPtr param;
};

/// How an over instance recovers its past. Retrieval is addressed by store
/// name ("" is the log of the monitor owning the over node), covers root
/// instants [from, now) and applies a conjunctive filter.
struct Initializer {
    std::string store;
    /// Int; defaults to 0.
    ExprPtr from;
    /// Record (or Map<Text,_>) of field requirements; the parameter is bound
    /// while it is evaluated. Null means no filter.
    ExprPtr filter;
    /// Adapter command template with {param} {from} {to} {filter}
    /// placeholders; empty selects the configured retriever backend.
    std::string command;
};

struct ConstNode {
    Value value;
};

struct ApplyNode {
    std::string fn;
    std::vector<ExprPtr> args;
};

/// s[k|d]
struct OffsetNode {
    StreamRef stream;
    int offset = 0;
    ExprPtr fallback;
};

/// s[now]
struct NowNode {
    StreamRef stream;
};

/// s[:n], the next n values starting at the current instant.
struct SliceNode {
    StreamRef stream;
    int count = 1;
};

struct RunSpecNode {
    SpecPtr spec;
    std::vector<std::pair<std::string, ExprPtr>> inputs;
};

struct OverNode {
    std::string stream;
    ExprPtr params;
    ExprPtr updating;
    std::optional<Initializer> init;
};

/// Single optional parameter; yields Optional<S>.
struct MOverNode {
    std::string stream;
    ExprPtr param;
    ExprPtr updating;
    std::optional<Initializer> init;
};

/// Over whose update set is {p in params[now] | cond(p)}.
struct WhenNode {
    std::string stream;
    ExprPtr params;
    std::string binder;
    ExprPtr cond;
    std::optional<Initializer> init;
};

struct ParamNode {
    std::string name;
};

/// {binder in source | pred}
struct SetFilterNode {
    ExprPtr source;
    std::string binder;
    ExprPtr pred;
};

/// Past events of a log store as List<Record<...>> (one record per event).
/// `to` null means the end of the store.
struct RetrieveNode {
    std::string store;
    std::vector<std::pair<std::string, Type>> schema;
    ExprPtr from;
    ExprPtr to;
    ExprPtr filter;
};

struct Expr {
    using Node = std::variant<ConstNode, ApplyNode, OffsetNode, NowNode, SliceNode, RunSpecNode,
                              OverNode, MOverNode, WhenNode, ParamNode, SetFilterNode, RetrieveNode>;
    Node node;
};

struct StreamDecl {
    std::string name;
    Type type;
};

struct OutputDecl {
    std::string name;
    Type type;
    ExprPtr expr;
};

struct ParametricStreamDef {
    std::string name;
    std::string param;
    Type param_type;
    Type value_type;
    ExprPtr body;
};

struct ReturnClause {
    std::string value;
    std::string cond;
};

/// The triple <I, O, E> plus parametric definitions and an optional return
/// clause for use as a nested monitor.
struct Specification {
    std::string name;
    std::vector<StreamDecl> inputs;
    std::vector<OutputDecl> outputs;
    std::vector<ParametricStreamDef> parametric;
    std::optional<ReturnClause> returns;
};

template <typename T>
ExprPtr make_expr(T node) {
    return std::make_shared<const Expr>(Expr{Expr::Node(std::move(node))});
}

} // namespace srv
