#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "srv/event.hpp"
#include "srv/functions.hpp"
#include "srv/spec.hpp"

namespace srv {

class ValidatedSpec;
using ValidatedSpecPtr = std::shared_ptr<const ValidatedSpec>;

/// Compiled expression: stream references resolved to indices, functions to
/// registry entries.
struct CExpr {
    enum class Op {
        Const,
        Apply,
        Load,      // stream at offset, children[0] is the default when offset != 0
        Slice,     // next `count` values of stream
        RunSpec,   // nested monitor `index`, children are its input lists
        Param,     // the instance parameter of a dynamic template
        Binder,    // bound variable `index` (set filters, initializer expressions)
        SetFilter, // children[0] source, children[1] predicate over binder `index`
        Retrieve,  // retrieval `index`; children: from, to, filter (to/filter may be absent)
    };
    Op op = Op::Const;
    Value value;
    const FuncDef* fn = nullptr;
    int stream = -1;
    int offset = 0;
    int index = -1;
    bool has_to = false;
    bool has_filter = false;
    std::vector<CExpr> args;
};

enum class StreamKind { Input, Output, Internal, Over };

struct StreamInfo {
    std::string name;
    StreamKind kind = StreamKind::Output;
    Type type;
    CExpr expr;
    /// Instants of look-ahead needed before a value at t can be computed.
    int need = 0;
    /// Index into ValidatedSpec::overs for kind Over.
    int over = -1;
};

enum class OverKind { Over, MOver, When };

struct OverInfo {
    OverKind kind = OverKind::Over;
    std::string def;
    /// Set of parameters (Over, When) or Optional parameter (MOver).
    CExpr params;
    std::optional<CExpr> updating;
    /// When: predicate over binder 0.
    std::optional<CExpr> cond;
    bool has_init = false;
    std::string init_store;
    std::string init_command;
    /// Evaluated with the parameter as binder 0.
    std::optional<CExpr> init_from;
    std::optional<CExpr> init_filter;
    ValidatedSpecPtr instance;
    int value_stream = -1;
    Type param_type;
    Type value_type;
};

struct NestedInfo {
    ValidatedSpecPtr spec;
};

struct RetrieveInfo {
    std::string store;
    Schema schema;
};

enum class DiagKind {
    CyclicDependency,
    TypeMismatch,
    UndeclaredStream,
    IllFormedDefault,
    UnknownFunction,
    ArityMismatch,
    DuplicateStream,
    UnboundedFuture,
    BadSlice,
    BadReturnClause,
    BadOver,
    BadRunSpec,
    UnboundParameter,
};

const char* diag_name(DiagKind kind);

struct Diagnostic {
    DiagKind kind;
    std::string stream;
    std::string message;

    std::string str() const;
};

/// Validated, compiled specification. Immutable and shareable.
class ValidatedSpec {
public:
    const Specification& source() const { return source_; }
    const std::string& hash() const { return hash_; }
    const std::vector<StreamInfo>& streams() const { return streams_; }
    const StreamInfo& stream(int id) const { return streams_.at(static_cast<std::size_t>(id)); }
    int find_stream(std::string_view name) const;

    /// Input stream ids in declaration order.
    const std::vector<int>& inputs() const { return inputs_; }
    /// Declared output stream ids in declaration order.
    const std::vector<int>& outputs() const { return outputs_; }
    const Schema& schema() const { return schema_; }

    /// Streams in an order where offset-0 dependencies come first.
    const std::vector<int>& eval_order() const { return order_; }

    const std::vector<OverInfo>& overs() const { return overs_; }
    const std::vector<NestedInfo>& nested() const { return nested_; }
    const std::vector<RetrieveInfo>& retrieves() const { return retrieves_; }

    int max_back() const { return max_back_; }
    int max_fwd() const { return max_fwd_; }

    std::optional<int> return_value() const { return ret_value_; }
    std::optional<int> return_cond() const { return ret_cond_; }

    /// Type of the instance parameter for dynamic templates.
    const std::optional<Type>& instance_param() const { return instance_param_; }

    const std::shared_ptr<const FunctionRegistry>& registry() const { return registry_; }

private:
    friend class Compiler;

    Specification source_;
    std::string hash_;
    std::vector<StreamInfo> streams_;
    std::vector<int> inputs_;
    std::vector<int> outputs_;
    Schema schema_;
    std::vector<int> order_;
    std::vector<OverInfo> overs_;
    std::vector<NestedInfo> nested_;
    std::vector<RetrieveInfo> retrieves_;
    int max_back_ = 0;
    int max_fwd_ = 0;
    std::optional<int> ret_value_;
    std::optional<int> ret_cond_;
    std::optional<Type> instance_param_;
    std::shared_ptr<const FunctionRegistry> registry_;
};

struct ValidationResult {
    ValidatedSpecPtr spec;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return spec != nullptr; }
};

ValidationResult validate(const Specification& spec, std::shared_ptr<const FunctionRegistry> registry);

/// Returns the spec when valid; throws Errc::Validation listing every
/// diagnostic otherwise.
ValidatedSpecPtr validate_or_throw(const Specification& spec, std::shared_ptr<const FunctionRegistry> registry);

/// Validating an already validated spec returns it unchanged.
ValidatedSpecPtr validate(const ValidatedSpecPtr& spec);

/// Rewrites every MOver into onlyValue(over(maybeToSet(param))) and every
/// When into an Over whose update set filters the live parameters.
Specification desugar_spec(const Specification& spec);
ValidatedSpecPtr desugar(const ValidatedSpecPtr& spec);

/// Replaces the parameter symbol `param` by `replacement` throughout `e`,
/// including parametric stream references whose parameter is that symbol.
/// Used both for static instantiation (replacement is a constant) and for
/// building dynamic instance templates.
ExprPtr substitute(const ExprPtr& e, const std::string& param, const ExprPtr& replacement);

} // namespace srv
