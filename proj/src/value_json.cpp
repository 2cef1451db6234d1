#include "srv/value_json.hpp"

#include <bit>
#include <cmath>

namespace srv {

json to_tagged(const Value& v) {
    switch (v.kind()) {
    case ValueKind::Unit: return json{{"unit", true}};
    case ValueKind::Bool: return v.as_bool();
    case ValueKind::Int: return v.as_int();
    case ValueKind::Float: {
        double d = v.as_float();
        if (std::isfinite(d)) return d;
        return json{{"float_bits", std::bit_cast<std::uint64_t>(d)}};
    }
    case ValueKind::Text: return v.as_text();
    case ValueKind::Optional:
        if (v.is_some()) return json{{"some", to_tagged(v.unwrap())}};
        return json{{"none", true}};
    case ValueKind::Set: {
        json arr = json::array();
        for (const auto& e : v.as_set()) arr.push_back(to_tagged(e));
        return json{{"set", std::move(arr)}};
    }
    case ValueKind::List: {
        json arr = json::array();
        for (const auto& e : v.as_list()) arr.push_back(to_tagged(e));
        return arr;
    }
    case ValueKind::Map: {
        json arr = json::array();
        for (const auto& [key, e] : v.as_map()) arr.push_back(json::array({to_tagged(key), to_tagged(e)}));
        return json{{"map", std::move(arr)}};
    }
    case ValueKind::Record: {
        json obj = json::object();
        const auto& rec = v.as_record();
        for (std::size_t i = 0; i < rec.names.size(); ++i) obj[rec.names[i]] = to_tagged(rec.values[i]);
        return json{{"record", std::move(obj)}};
    }
    }
    return nullptr;
}

namespace {

[[noreturn]] void parse_fail(const std::string& why, const json& j) {
    std::string text = j.dump();
    if (text.size() > 80) text = text.substr(0, 77) + "...";
    throw Error(Errc::Parse, why + ": " + text);
}

} // namespace

Value from_tagged(const json& j) {
    switch (j.type()) {
    case json::value_t::boolean: return Value::boolean(j.get<bool>());
    case json::value_t::number_integer: return Value::integer(j.get<std::int64_t>());
    case json::value_t::number_unsigned: return Value::integer(static_cast<std::int64_t>(j.get<std::uint64_t>()));
    case json::value_t::number_float: return Value::real(j.get<double>());
    case json::value_t::string: return Value::text(j.get<std::string>());
    case json::value_t::array: {
        ValueList out;
        out.reserve(j.size());
        for (const auto& e : j) out.push_back(from_tagged(e));
        return Value::list(std::move(out));
    }
    case json::value_t::object: {
        if (j.size() != 1) parse_fail("tagged value must have exactly one key", j);
        const auto& [tag, body] = *j.items().begin();
        if (tag == "unit") return Value::unit();
        if (tag == "none") return Value::none();
        if (tag == "some") return Value::some(from_tagged(body));
        if (tag == "float_bits") return Value::real(std::bit_cast<double>(body.get<std::uint64_t>()));
        if (tag == "set") {
            ValueSet out;
            for (const auto& e : body) out.insert(from_tagged(e));
            return Value::set(std::move(out));
        }
        if (tag == "map") {
            ValueMap out;
            for (const auto& e : body) {
                if (!e.is_array() || e.size() != 2) parse_fail("map entries must be [key, value]", e);
                out.insert_or_assign(from_tagged(e[0]), from_tagged(e[1]));
            }
            return Value::map(std::move(out));
        }
        if (tag == "record") {
            std::vector<std::pair<std::string, Value>> fields;
            for (const auto& [name, e] : body.items()) fields.emplace_back(name, from_tagged(e));
            return Value::record(std::move(fields));
        }
        parse_fail("unknown value tag '" + tag + "'", j);
    }
    default: parse_fail("cannot decode value", j);
    }
}

json to_wire(const Value& v) {
    switch (v.kind()) {
    case ValueKind::Unit: return nullptr;
    case ValueKind::Bool: return v.as_bool();
    case ValueKind::Int: return v.as_int();
    case ValueKind::Float: return v.as_float();
    case ValueKind::Text: return v.as_text();
    case ValueKind::Optional: return v.is_some() ? to_wire(v.unwrap()) : json(nullptr);
    case ValueKind::Set: {
        json arr = json::array();
        for (const auto& e : v.as_set()) arr.push_back(to_wire(e));
        return arr;
    }
    case ValueKind::List: {
        json arr = json::array();
        for (const auto& e : v.as_list()) arr.push_back(to_wire(e));
        return arr;
    }
    case ValueKind::Map: {
        const auto& m = v.as_map();
        bool text_keys = !m.empty() && m.begin()->first.kind() == ValueKind::Text;
        if (m.empty() || text_keys) {
            json obj = json::object();
            for (const auto& [key, e] : m) obj[key.as_text()] = to_wire(e);
            return obj;
        }
        json arr = json::array();
        for (const auto& [key, e] : m) arr.push_back(json::array({to_wire(key), to_wire(e)}));
        return arr;
    }
    case ValueKind::Record: {
        json obj = json::object();
        const auto& rec = v.as_record();
        for (std::size_t i = 0; i < rec.names.size(); ++i) obj[rec.names[i]] = to_wire(rec.values[i]);
        return obj;
    }
    }
    return nullptr;
}

Value from_wire(const json& j, const Type& t) {
    switch (t.kind()) {
    case Type::Kind::Var: return from_wire_untyped(j);
    case Type::Kind::Unit:
        if (!j.is_null()) parse_fail("expected null for Unit", j);
        return Value::unit();
    case Type::Kind::Bool:
        if (!j.is_boolean()) parse_fail("expected Bool", j);
        return Value::boolean(j.get<bool>());
    case Type::Kind::Int:
        if (!j.is_number_integer()) parse_fail("expected Int", j);
        return Value::integer(j.get<std::int64_t>());
    case Type::Kind::Float:
        if (!j.is_number()) parse_fail("expected Float", j);
        return Value::real(j.get<double>());
    case Type::Kind::Text:
        if (!j.is_string()) parse_fail("expected Text", j);
        return Value::text(j.get<std::string>());
    case Type::Kind::Optional:
        if (j.is_null()) return Value::none();
        return Value::some(from_wire(j, t.elem()));
    case Type::Kind::Set: {
        if (!j.is_array()) parse_fail("expected array for Set", j);
        ValueSet out;
        for (const auto& e : j) out.insert(from_wire(e, t.elem()));
        return Value::set(std::move(out));
    }
    case Type::Kind::List: {
        if (!j.is_array()) parse_fail("expected array for List", j);
        ValueList out;
        out.reserve(j.size());
        for (const auto& e : j) out.push_back(from_wire(e, t.elem()));
        return Value::list(std::move(out));
    }
    case Type::Kind::Map: {
        ValueMap out;
        if (j.is_object()) {
            for (const auto& [key, e] : j.items()) {
                out.insert_or_assign(from_wire(json(key), t.key()), from_wire(e, t.value()));
            }
        } else if (j.is_array()) {
            for (const auto& e : j) {
                if (!e.is_array() || e.size() != 2) parse_fail("map entries must be [key, value]", e);
                out.insert_or_assign(from_wire(e[0], t.key()), from_wire(e[1], t.value()));
            }
        } else {
            parse_fail("expected object or array for Map", j);
        }
        return Value::map(std::move(out));
    }
    case Type::Kind::Record: {
        if (!j.is_object()) parse_fail("expected object for Record", j);
        if (j.size() != t.field_names().size()) parse_fail("record field count mismatch", j);
        std::vector<std::pair<std::string, Value>> fields;
        for (std::size_t i = 0; i < t.field_names().size(); ++i) {
            const auto& name = t.field_names()[i];
            auto it = j.find(name);
            if (it == j.end()) parse_fail("missing record field '" + name + "'", j);
            fields.emplace_back(name, from_wire(*it, t.args()[i]));
        }
        return Value::record(std::move(fields));
    }
    }
    parse_fail("unsupported type", j);
}

Value from_wire_untyped(const json& j) {
    switch (j.type()) {
    case json::value_t::null: return Value::none();
    case json::value_t::boolean: return Value::boolean(j.get<bool>());
    case json::value_t::number_integer: return Value::integer(j.get<std::int64_t>());
    case json::value_t::number_unsigned: return Value::integer(static_cast<std::int64_t>(j.get<std::uint64_t>()));
    case json::value_t::number_float: return Value::real(j.get<double>());
    case json::value_t::string: return Value::text(j.get<std::string>());
    case json::value_t::array: {
        ValueList out;
        for (const auto& e : j) out.push_back(from_wire_untyped(e));
        return Value::list(std::move(out));
    }
    case json::value_t::object: {
        ValueMap out;
        for (const auto& [key, e] : j.items()) out.emplace(Value::text(key), from_wire_untyped(e));
        return Value::map(std::move(out));
    }
    default: parse_fail("cannot decode wire value", j);
    }
}

} // namespace srv
