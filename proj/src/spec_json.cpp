#include "srv/spec_json.hpp"

#include <cstdio>

namespace srv {

namespace {

[[noreturn]] void bad(const std::string& why) { throw Error(Errc::Parse, "specification document: " + why); }

const json& need(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) bad(std::string("missing '") + key + "' in " + j.dump().substr(0, 60));
    return *it;
}

json ref_fields(json obj, const StreamRef& ref) {
    obj["stream"] = ref.name;
    if (ref.param) obj["param"] = expr_to_json(ref.param);
    return obj;
}

StreamRef ref_from(const json& j) {
    StreamRef ref{need(j, "stream").get<std::string>(), nullptr};
    if (auto it = j.find("param"); it != j.end()) ref.param = expr_from_json(*it);
    return ref;
}

json init_to_json(const Initializer& init) {
    json j = json::object();
    j["store"] = init.store;
    if (init.from) j["from"] = expr_to_json(init.from);
    if (init.filter) j["filter"] = expr_to_json(init.filter);
    if (!init.command.empty()) j["command"] = init.command;
    return j;
}

std::optional<Initializer> init_from(const json& j) {
    auto it = j.find("init");
    if (it == j.end()) return std::nullopt;
    Initializer init;
    init.store = it->value("store", std::string());
    if (auto f = it->find("from"); f != it->end()) init.from = expr_from_json(*f);
    if (auto f = it->find("filter"); f != it->end()) init.filter = expr_from_json(*f);
    init.command = it->value("command", std::string());
    return init;
}

ExprPtr optional_expr(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : expr_from_json(*it);
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

} // namespace

json expr_to_json(const ExprPtr& e) {
    if (!e) return nullptr;
    return std::visit(
        overloaded{
            [](const ConstNode& n) { return json{{"op", "const"}, {"value", to_tagged(n.value)}}; },
            [](const ApplyNode& n) {
                json args = json::array();
                for (const auto& a : n.args) args.push_back(expr_to_json(a));
                return json{{"op", "apply"}, {"fn", n.fn}, {"args", std::move(args)}};
            },
            [](const OffsetNode& n) {
                return ref_fields(json{{"op", "offset"}, {"k", n.offset}, {"default", expr_to_json(n.fallback)}},
                                  n.stream);
            },
            [](const NowNode& n) { return ref_fields(json{{"op", "now"}}, n.stream); },
            [](const SliceNode& n) { return ref_fields(json{{"op", "slice"}, {"n", n.count}}, n.stream); },
            [](const RunSpecNode& n) {
                json inputs = json::object();
                for (const auto& [name, x] : n.inputs) inputs[name] = expr_to_json(x);
                return json{{"op", "runspec"}, {"spec", spec_to_json(*n.spec)}, {"inputs", std::move(inputs)}};
            },
            [](const OverNode& n) {
                json j{{"op", "over"}, {"stream", n.stream}, {"params", expr_to_json(n.params)}};
                if (n.updating) j["updating"] = expr_to_json(n.updating);
                if (n.init) j["init"] = init_to_json(*n.init);
                return j;
            },
            [](const MOverNode& n) {
                json j{{"op", "mover"}, {"stream", n.stream}, {"param", expr_to_json(n.param)}};
                if (n.updating) j["updating"] = expr_to_json(n.updating);
                if (n.init) j["init"] = init_to_json(*n.init);
                return j;
            },
            [](const WhenNode& n) {
                json j{{"op", "when"},
                       {"stream", n.stream},
                       {"params", expr_to_json(n.params)},
                       {"binder", n.binder},
                       {"cond", expr_to_json(n.cond)}};
                if (n.init) j["init"] = init_to_json(*n.init);
                return j;
            },
            [](const ParamNode& n) { return json{{"op", "param"}, {"name", n.name}}; },
            [](const SetFilterNode& n) {
                return json{{"op", "filter"},
                            {"source", expr_to_json(n.source)},
                            {"binder", n.binder},
                            {"pred", expr_to_json(n.pred)}};
            },
            [](const RetrieveNode& n) {
                json schema = json::array();
                for (const auto& [name, t] : n.schema) schema.push_back(json::array({name, t.str()}));
                json j{{"op", "retrieve"}, {"store", n.store}, {"schema", std::move(schema)},
                       {"from", expr_to_json(n.from)}};
                if (n.to) j["to"] = expr_to_json(n.to);
                if (n.filter) j["filter"] = expr_to_json(n.filter);
                return j;
            },
        },
        e->node);
}

ExprPtr expr_from_json(const json& j) {
    if (!j.is_object()) bad("expression must be an object");
    const std::string op = need(j, "op").get<std::string>();
    if (op == "const") return make_expr(ConstNode{from_tagged(need(j, "value"))});
    if (op == "apply") {
        ApplyNode n{need(j, "fn").get<std::string>(), {}};
        for (const auto& a : need(j, "args")) n.args.push_back(expr_from_json(a));
        return make_expr(std::move(n));
    }
    if (op == "offset") {
        return make_expr(OffsetNode{ref_from(j), need(j, "k").get<int>(), expr_from_json(need(j, "default"))});
    }
    if (op == "now") return make_expr(NowNode{ref_from(j)});
    if (op == "slice") return make_expr(SliceNode{ref_from(j), need(j, "n").get<int>()});
    if (op == "runspec") {
        RunSpecNode n{std::make_shared<const Specification>(spec_from_json(need(j, "spec"))), {}};
        for (const auto& [name, x] : need(j, "inputs").items()) n.inputs.emplace_back(name, expr_from_json(x));
        return make_expr(std::move(n));
    }
    if (op == "over") {
        return make_expr(OverNode{need(j, "stream").get<std::string>(), expr_from_json(need(j, "params")),
                                  optional_expr(j, "updating"), init_from(j)});
    }
    if (op == "mover") {
        return make_expr(MOverNode{need(j, "stream").get<std::string>(), expr_from_json(need(j, "param")),
                                   optional_expr(j, "updating"), init_from(j)});
    }
    if (op == "when") {
        return make_expr(WhenNode{need(j, "stream").get<std::string>(), expr_from_json(need(j, "params")),
                                  need(j, "binder").get<std::string>(), expr_from_json(need(j, "cond")),
                                  init_from(j)});
    }
    if (op == "param") return make_expr(ParamNode{need(j, "name").get<std::string>()});
    if (op == "filter") {
        return make_expr(SetFilterNode{expr_from_json(need(j, "source")), need(j, "binder").get<std::string>(),
                                       expr_from_json(need(j, "pred"))});
    }
    if (op == "retrieve") {
        RetrieveNode n;
        n.store = need(j, "store").get<std::string>();
        for (const auto& f : need(j, "schema")) {
            n.schema.emplace_back(f.at(0).get<std::string>(), Type::parse(f.at(1).get<std::string>()));
        }
        n.from = expr_from_json(need(j, "from"));
        n.to = optional_expr(j, "to");
        n.filter = optional_expr(j, "filter");
        return make_expr(std::move(n));
    }
    bad("unknown op '" + op + "'");
}

json spec_to_json(const Specification& spec) {
    json j;
    j["name"] = spec.name;
    j["inputs"] = json::array();
    for (const auto& in : spec.inputs) j["inputs"].push_back({{"name", in.name}, {"type", in.type.str()}});
    j["outputs"] = json::array();
    for (const auto& out : spec.outputs) {
        j["outputs"].push_back({{"name", out.name}, {"type", out.type.str()}, {"expr", expr_to_json(out.expr)}});
    }
    j["parametric"] = json::array();
    for (const auto& def : spec.parametric) {
        j["parametric"].push_back({{"name", def.name},
                                   {"param", def.param},
                                   {"param_type", def.param_type.str()},
                                   {"value_type", def.value_type.str()},
                                   {"body", expr_to_json(def.body)}});
    }
    if (spec.returns) j["returns"] = {{"value", spec.returns->value}, {"cond", spec.returns->cond}};
    return j;
}

Specification spec_from_json(const json& j) {
    if (!j.is_object()) bad("specification must be an object");
    Specification spec;
    spec.name = j.value("name", std::string());
    for (const auto& in : need(j, "inputs")) {
        spec.inputs.push_back({need(in, "name").get<std::string>(), Type::parse(need(in, "type").get<std::string>())});
    }
    for (const auto& out : need(j, "outputs")) {
        spec.outputs.push_back({need(out, "name").get<std::string>(),
                                Type::parse(need(out, "type").get<std::string>()),
                                expr_from_json(need(out, "expr"))});
    }
    if (auto it = j.find("parametric"); it != j.end()) {
        for (const auto& def : *it) {
            spec.parametric.push_back({need(def, "name").get<std::string>(), need(def, "param").get<std::string>(),
                                       Type::parse(need(def, "param_type").get<std::string>()),
                                       Type::parse(need(def, "value_type").get<std::string>()),
                                       expr_from_json(need(def, "body"))});
        }
    }
    if (auto it = j.find("returns"); it != j.end()) {
        spec.returns = ReturnClause{need(*it, "value").get<std::string>(), need(*it, "cond").get<std::string>()};
    }
    return spec;
}

std::string canonical_spec_text(const Specification& spec) { return spec_to_json(spec).dump(); }

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string spec_hash(const Specification& spec) { return fnv1a_hex(canonical_spec_text(spec)); }

} // namespace srv
