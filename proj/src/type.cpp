#include "srv/type.hpp"

#include <algorithm>
#include <cctype>

namespace srv {

Type Type::optional(Type t) {
    Type r(Kind::Optional);
    r.args_.push_back(std::move(t));
    return r;
}

Type Type::set(Type t) {
    Type r(Kind::Set);
    r.args_.push_back(std::move(t));
    return r;
}

Type Type::map(Type key, Type value) {
    Type r(Kind::Map);
    r.args_.push_back(std::move(key));
    r.args_.push_back(std::move(value));
    return r;
}

Type Type::list(Type t) {
    Type r(Kind::List);
    r.args_.push_back(std::move(t));
    return r;
}

Type Type::record(std::vector<std::pair<std::string, Type>> fields) {
    std::sort(fields.begin(), fields.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    Type r(Kind::Record);
    for (auto& [name, type] : fields) {
        if (!r.fields_.empty() && r.fields_.back() == name) {
            throw Error(Errc::Type, "duplicate record field '" + name + "' in type");
        }
        r.fields_.push_back(std::move(name));
        r.args_.push_back(std::move(type));
    }
    return r;
}

Type Type::var(std::string name, bool numeric) {
    Type r(Kind::Var);
    r.name_ = std::move(name);
    r.numeric_ = numeric;
    return r;
}

const Type* Type::field(std::string_view name) const {
    if (kind_ != Kind::Record) return nullptr;
    auto it = std::lower_bound(fields_.begin(), fields_.end(), name);
    if (it == fields_.end() || *it != name) return nullptr;
    return &args_[static_cast<std::size_t>(it - fields_.begin())];
}

bool Type::has_vars() const {
    if (kind_ == Kind::Var) return true;
    return std::any_of(args_.begin(), args_.end(), [](const Type& t) { return t.has_vars(); });
}

std::string Type::str() const {
    switch (kind_) {
    case Kind::Unit: return "Unit";
    case Kind::Bool: return "Bool";
    case Kind::Int: return "Int";
    case Kind::Float: return "Float";
    case Kind::Text: return "Text";
    case Kind::Optional: return "Optional<" + args_[0].str() + ">";
    case Kind::Set: return "Set<" + args_[0].str() + ">";
    case Kind::List: return "List<" + args_[0].str() + ">";
    case Kind::Map: return "Map<" + args_[0].str() + "," + args_[1].str() + ">";
    case Kind::Record: {
        std::string s = "Record<";
        for (std::size_t i = 0; i < fields_.size(); ++i) {
            if (i) s += ',';
            s += fields_[i] + ":" + args_[i].str();
        }
        return s + ">";
    }
    case Kind::Var: return (numeric_ ? "#" : "'") + name_;
    }
    return "?";
}

namespace {

class TypeParser {
public:
    explicit TypeParser(std::string_view text) : text_(text) {}

    Type parse_all() {
        Type t = parse();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing characters");
        return t;
    }

private:
    [[noreturn]] void fail(const std::string& why) {
        throw Error(Errc::Parse, "bad type '" + std::string(text_) + "': " + why);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::string ident() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        if (start == pos_) fail("expected identifier");
        return std::string(text_.substr(start, pos_ - start));
    }

    Type parse() {
        skip_ws();
        if (accept('\'')) return Type::var(ident());
        if (accept('#')) return Type::var(ident(), true);
        std::string name = ident();
        if (name == "Unit") return Type::unit();
        if (name == "Bool") return Type::boolean();
        if (name == "Int") return Type::integer();
        if (name == "Float") return Type::real();
        if (name == "Text") return Type::text();
        if (name == "Optional" || name == "Set" || name == "List") {
            expect('<');
            Type inner = parse();
            expect('>');
            if (name == "Optional") return Type::optional(std::move(inner));
            if (name == "Set") return Type::set(std::move(inner));
            return Type::list(std::move(inner));
        }
        if (name == "Map") {
            expect('<');
            Type k = parse();
            expect(',');
            Type v = parse();
            expect('>');
            return Type::map(std::move(k), std::move(v));
        }
        if (name == "Record") {
            expect('<');
            std::vector<std::pair<std::string, Type>> fields;
            if (!accept('>')) {
                do {
                    std::string field = ident();
                    expect(':');
                    fields.emplace_back(std::move(field), parse());
                } while (accept(','));
                expect('>');
            }
            return Type::record(std::move(fields));
        }
        fail("unknown type name '" + name + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace

Type Type::parse(std::string_view text) { return TypeParser(text).parse_all(); }

bool Substitution::occurs(const std::string& name, const Type& t) const {
    Type r = apply(t);
    if (r.is_var()) return r.var_name() == name;
    return std::any_of(r.args().begin(), r.args().end(),
                       [&](const Type& a) { return occurs(name, a); });
}

bool Substitution::bind(const Type& var, const Type& t) {
    if (t.is_var() && t.var_name() == var.var_name()) return true;
    if (var.numeric()) {
        if (t.is_var()) {
            if (!t.numeric()) {
                // Narrow the other variable to numeric.
                bindings_[t.var_name()] = var;
                return true;
            }
        } else if (t.kind() != Type::Kind::Int && t.kind() != Type::Kind::Float) {
            return false;
        }
    }
    if (occurs(var.var_name(), t)) return false;
    bindings_[var.var_name()] = t;
    return true;
}

bool Substitution::unify(const Type& a0, const Type& b0) {
    Type a = apply(a0);
    Type b = apply(b0);
    if (a.is_var()) return bind(a, b);
    if (b.is_var()) return bind(b, a);
    if (a.kind() != b.kind()) return false;
    if (a.kind() == Type::Kind::Record && a.field_names() != b.field_names()) return false;
    if (a.args().size() != b.args().size()) return false;
    for (std::size_t i = 0; i < a.args().size(); ++i) {
        if (!unify(a.args()[i], b.args()[i])) return false;
    }
    return true;
}

Type Substitution::apply(const Type& t) const {
    if (t.is_var()) {
        auto it = bindings_.find(t.var_name());
        if (it == bindings_.end()) return t;
        return apply(it->second);
    }
    if (t.args().empty()) return t;
    switch (t.kind()) {
    case Type::Kind::Optional: return Type::optional(apply(t.elem()));
    case Type::Kind::Set: return Type::set(apply(t.elem()));
    case Type::Kind::List: return Type::list(apply(t.elem()));
    case Type::Kind::Map: return Type::map(apply(t.key()), apply(t.value()));
    case Type::Kind::Record: {
        std::vector<std::pair<std::string, Type>> fields;
        for (std::size_t i = 0; i < t.args().size(); ++i) {
            fields.emplace_back(t.field_names()[i], apply(t.args()[i]));
        }
        return Type::record(std::move(fields));
    }
    default: return t;
    }
}

Type TypeVarSupply::fresh(bool numeric) { return Type::var("t" + std::to_string(next_++), numeric); }

Type TypeVarSupply::rename(const Type& t, std::map<std::string, Type>& renames) {
    if (t.is_var()) {
        auto it = renames.find(t.var_name());
        if (it != renames.end()) return it->second;
        Type f = fresh(t.numeric());
        renames.emplace(t.var_name(), f);
        return f;
    }
    switch (t.kind()) {
    case Type::Kind::Optional: return Type::optional(rename(t.elem(), renames));
    case Type::Kind::Set: return Type::set(rename(t.elem(), renames));
    case Type::Kind::List: return Type::list(rename(t.elem(), renames));
    case Type::Kind::Map: return Type::map(rename(t.key(), renames), rename(t.value(), renames));
    case Type::Kind::Record: {
        std::vector<std::pair<std::string, Type>> fields;
        for (std::size_t i = 0; i < t.args().size(); ++i) {
            fields.emplace_back(t.field_names()[i], rename(t.args()[i], renames));
        }
        return Type::record(std::move(fields));
    }
    default: return t;
    }
}

Type TypeVarSupply::instantiate(const Type& t) {
    std::map<std::string, Type> renames;
    return rename(t, renames);
}

std::vector<Type> TypeVarSupply::instantiate(const std::vector<Type>& ts) {
    std::map<std::string, Type> renames;
    std::vector<Type> out;
    out.reserve(ts.size());
    for (const auto& t : ts) out.push_back(rename(t, renames));
    return out;
}

Type type_of(const Value& v, TypeVarSupply& vars) {
    switch (v.kind()) {
    case ValueKind::Unit: return Type::unit();
    case ValueKind::Bool: return Type::boolean();
    case ValueKind::Int: return Type::integer();
    case ValueKind::Float: return Type::real();
    case ValueKind::Text: return Type::text();
    case ValueKind::Optional:
        return Type::optional(v.is_some() ? type_of(v.unwrap(), vars) : vars.fresh());
    case ValueKind::Set:
        return Type::set(v.as_set().empty() ? vars.fresh() : type_of(*v.as_set().begin(), vars));
    case ValueKind::List:
        return Type::list(v.as_list().empty() ? vars.fresh() : type_of(v.as_list().front(), vars));
    case ValueKind::Map:
        if (v.as_map().empty()) return Type::map(vars.fresh(), vars.fresh());
        return Type::map(type_of(v.as_map().begin()->first, vars),
                         type_of(v.as_map().begin()->second, vars));
    case ValueKind::Record: {
        const auto& rec = v.as_record();
        std::vector<std::pair<std::string, Type>> fields;
        for (std::size_t i = 0; i < rec.names.size(); ++i) {
            fields.emplace_back(rec.names[i], type_of(rec.values[i], vars));
        }
        return Type::record(std::move(fields));
    }
    }
    return Type::unit();
}

bool conforms(const Value& v, const Type& t) {
    switch (t.kind()) {
    case Type::Kind::Var:
        return !t.numeric() || v.kind() == ValueKind::Int || v.kind() == ValueKind::Float;
    case Type::Kind::Unit: return v.kind() == ValueKind::Unit;
    case Type::Kind::Bool: return v.kind() == ValueKind::Bool;
    case Type::Kind::Int: return v.kind() == ValueKind::Int;
    case Type::Kind::Float: return v.kind() == ValueKind::Float;
    case Type::Kind::Text: return v.kind() == ValueKind::Text;
    case Type::Kind::Optional:
        return v.kind() == ValueKind::Optional && (!v.is_some() || conforms(v.unwrap(), t.elem()));
    case Type::Kind::Set:
        if (v.kind() != ValueKind::Set) return false;
        return std::all_of(v.as_set().begin(), v.as_set().end(),
                           [&](const Value& e) { return conforms(e, t.elem()); });
    case Type::Kind::List:
        if (v.kind() != ValueKind::List) return false;
        return std::all_of(v.as_list().begin(), v.as_list().end(),
                           [&](const Value& e) { return conforms(e, t.elem()); });
    case Type::Kind::Map:
        if (v.kind() != ValueKind::Map) return false;
        return std::all_of(v.as_map().begin(), v.as_map().end(), [&](const auto& kv) {
            return conforms(kv.first, t.key()) && conforms(kv.second, t.value());
        });
    case Type::Kind::Record: {
        if (v.kind() != ValueKind::Record) return false;
        const auto& rec = v.as_record();
        if (rec.names != t.field_names()) return false;
        for (std::size_t i = 0; i < rec.values.size(); ++i) {
            if (!conforms(rec.values[i], t.args()[i])) return false;
        }
        return true;
    }
    }
    return false;
}

} // namespace srv
