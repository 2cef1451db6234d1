#include "srv/event.hpp"

namespace srv {

const Value& Event::at(std::string_view stream) const {
    auto it = bindings.find(stream);
    if (it == bindings.end()) {
        throw Error(Errc::Type, "event at instant " + std::to_string(instant) + " has no binding for '" +
                                    std::string(stream) + "'");
    }
    return it->second;
}

json event_to_json(const Event& ev) {
    json streams = json::object();
    for (const auto& [name, v] : ev.bindings) streams[name] = to_wire(v);
    return json{{"instant", ev.instant}, {"streams", std::move(streams)}};
}

std::string encode_event(const Event& ev) { return event_to_json(ev).dump(); }

Event event_from_json(const json& j, const Schema* schema) {
    if (!j.is_object()) throw Error(Errc::Parse, "event must be an object");
    auto inst = j.find("instant");
    auto streams = j.find("streams");
    if (inst == j.end() || !inst->is_number_integer()) {
        throw Error(Errc::Parse, "event needs an integer 'instant'");
    }
    if (streams == j.end() || !streams->is_object()) {
        throw Error(Errc::Parse, "event needs a 'streams' object");
    }
    Event ev;
    ev.instant = inst->get<Instant>();
    if (schema) {
        for (const auto& [name, type] : *schema) {
            auto it = streams->find(name);
            if (it == streams->end()) {
                throw Error(Errc::Parse, "event at instant " + std::to_string(ev.instant) +
                                             " misses input '" + name + "'");
            }
            ev.bindings.emplace(name, from_wire(*it, type));
        }
        if (streams->size() != schema->size()) {
            for (const auto& [name, _] : streams->items()) {
                bool declared = false;
                for (const auto& [decl, t] : *schema) declared = declared || decl == name;
                if (!declared) {
                    throw Error(Errc::Parse, "event at instant " + std::to_string(ev.instant) +
                                                 " binds undeclared input '" + name + "'");
                }
            }
        }
    } else {
        for (const auto& [name, v] : streams->items()) ev.bindings.emplace(name, from_wire_untyped(v));
    }
    return ev;
}

Event decode_event(std::string_view line, const Schema* schema) {
    json j;
    try {
        j = json::parse(line.begin(), line.end());
    } catch (const json::parse_error& e) {
        throw Error(Errc::Parse, std::string("malformed event line: ") + e.what());
    }
    return event_from_json(j, schema);
}

Value event_record(const Event& ev) {
    std::vector<std::pair<std::string, Value>> fields(ev.bindings.begin(), ev.bindings.end());
    return Value::record(std::move(fields));
}

Type schema_record_type(const Schema& schema) {
    return Type::record(std::vector<std::pair<std::string, Type>>(schema.begin(), schema.end()));
}

} // namespace srv
