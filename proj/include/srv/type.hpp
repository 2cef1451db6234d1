#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "srv/value.hpp"

namespace srv {

/// Static type of a stream or expression.
///
/// Textual form: Unit, Bool, Int, Float, Text, Optional<T>, Set<T>,
/// Map<K,V>, List<T>, Record<a:T,b:U>. Type variables are written 'a, and
/// numeric type variables (Int or Float only) are written #a.
class Type {
public:
    enum class Kind { Unit, Bool, Int, Float, Text, Optional, Set, Map, List, Record, Var };

    Type() = default;

    static Type unit() { return Type(Kind::Unit); }
    static Type boolean() { return Type(Kind::Bool); }
    static Type integer() { return Type(Kind::Int); }
    static Type real() { return Type(Kind::Float); }
    static Type text() { return Type(Kind::Text); }
    static Type optional(Type t);
    static Type set(Type t);
    static Type map(Type key, Type value);
    static Type list(Type t);
    /// Fields are sorted by name, matching record values.
    static Type record(std::vector<std::pair<std::string, Type>> fields);
    static Type var(std::string name, bool numeric = false);

    static Type parse(std::string_view text);

    Kind kind() const noexcept { return kind_; }
    bool is_var() const noexcept { return kind_ == Kind::Var; }
    bool numeric() const noexcept { return numeric_; }
    const std::string& var_name() const noexcept { return name_; }

    const Type& elem() const { return args_.at(0); }
    const Type& key() const { return args_.at(0); }
    const Type& value() const { return args_.at(1); }
    const std::vector<Type>& args() const noexcept { return args_; }
    const std::vector<std::string>& field_names() const noexcept { return fields_; }
    const Type* field(std::string_view name) const;

    bool has_vars() const;
    std::string str() const;

    friend bool operator==(const Type&, const Type&) = default;

private:
    explicit Type(Kind k) : kind_(k) {}

    Kind kind_ = Kind::Unit;
    std::vector<Type> args_;
    std::vector<std::string> fields_;
    std::string name_;
    bool numeric_ = false;
};

/// Mapping from type variables to types, built by unification.
class Substitution {
public:
    bool unify(const Type& a, const Type& b);
    Type apply(const Type& t) const;

private:
    bool bind(const Type& var, const Type& t);
    bool occurs(const std::string& name, const Type& t) const;

    std::map<std::string, Type> bindings_;
};

/// Supplies globally fresh type variable names within one checking session.
class TypeVarSupply {
public:
    Type fresh(bool numeric = false);
    /// Renames every variable of t to a fresh one (consistently).
    Type instantiate(const Type& t);
    /// Same, with one renaming shared by all of ts.
    std::vector<Type> instantiate(const std::vector<Type>& ts);

private:
    Type rename(const Type& t, std::map<std::string, Type>& renames);
    int next_ = 0;
};

/// Most specific type describing v; empty containers and empty optionals get
/// fresh variables for their element types.
Type type_of(const Value& v, TypeVarSupply& vars);

/// Whether v inhabits t. Variables accept any value.
bool conforms(const Value& v, const Type& t);

} // namespace srv
