#include "srv/ddos.hpp"
#include "srv/dsl.hpp"

namespace srv::ddos {

using namespace srv::dsl;

namespace {

Type addr_info_type() {
    return Type::record({{"bits", Type::integer()}, {"end", Type::real()}, {"packets", Type::integer()},
                         {"start", Type::real()}});
}

Type key_type() { return Type::record({{"dst", Type::text()}, {"file", Type::text()}}); }

FuncDef def(std::string name, std::vector<Type> params, Type result, ApplyFn apply) {
    FuncDef d;
    d.name = std::move(name);
    d.signature = Signature{std::move(params), std::move(result), false};
    d.apply = std::move(apply);
    return d;
}

MarkerKind parse_kind(const std::string& s) {
    if (s == "pps") return MarkerKind::PacketsPerSecond;
    if (s == "bps") return MarkerKind::BitsPerSecond;
    throw Error(Errc::Evaluation, "unknown marker kind '" + s + "'");
}

} // namespace

void register_functions(FunctionRegistry& registry) {
    registry.register_function(
        def("mergeAddrInfo", {addr_info_type(), addr_info_type()}, addr_info_type(), [](auto xs, auto&) {
            const Value& a = xs[0];
            const Value& b = xs[1];
            return Value::record({{"bits", Value::integer(a.field("bits").as_int() + b.field("bits").as_int())},
                                  {"end", Value::real(std::max(a.field("end").as_float(), b.field("end").as_float()))},
                                  {"packets",
                                   Value::integer(a.field("packets").as_int() + b.field("packets").as_int())},
                                  {"start",
                                   Value::real(std::min(a.field("start").as_float(), b.field("start").as_float()))}});
        }));
    registry.register_function(
        def("markerRate", {Type::text(), addr_info_type()}, Type::real(), [](auto xs, auto&) {
            const Value& info = xs[1];
            return Value::real(marker_rate(parse_kind(xs[0].as_text()), info.field("packets").as_int(),
                                           info.field("bits").as_int(), info.field("start").as_float(),
                                           info.field("end").as_float()));
        }));
    registry.register_function(def("maxDestAddress", {Type::text(), Type::map(Type::text(), Type::integer()), Type::text()},
                                   Type::text(), [](auto xs, auto&) {
                                       const auto& hist = xs[1].as_map();
                                       const Value& cur = xs[0];
                                       const Value& prev = xs[2];
                                       if (prev.as_text().empty()) return cur;
                                       auto c = hist.find(cur);
                                       auto p = hist.find(prev);
                                       std::int64_t nc = c == hist.end() ? 0 : c->second.as_int();
                                       std::int64_t np = p == hist.end() ? 0 : p->second.as_int();
                                       return nc > np ? cur : prev;
                                   }));
    registry.register_function(def("justs", {Type::list(Type::optional(Type::var("a")))},
                                   Type::map(Type::integer(), Type::var("a")), [](auto xs, auto&) {
                                       ValueMap out;
                                       const auto& l = xs[0].as_list();
                                       for (std::size_t i = 0; i < l.size(); ++i) {
                                           if (l[i].is_some()) out.emplace(Value::integer(static_cast<std::int64_t>(i)), l[i].unwrap());
                                       }
                                       return Value::map(std::move(out));
                                   }));
}

std::shared_ptr<FunctionRegistry> make_registry() {
    auto r = make_builtin_registry();
    register_functions(*r);
    return r;
}

std::string entropy_stream(int id) { return "srcSet" + std::to_string(id); }

namespace {

std::string sfx(const std::string& base, int id) { return base + std::to_string(id); }

E empty_map() { return lit(Value::map({})); }
E empty_set() { return lit(Value::set({})); }
E nothing() { return lit(Value::none()); }

E key_of(E file, E dst) { return call("record", {lit("dst"), std::move(dst), lit("file"), std::move(file)}); }

E matches_expr(const AttackSpec& atk) {
    E out;
    for (const auto& [field, v] : atk.clauses) {
        E c = now(field) == lit(v);
        out = out ? (out && c) : c;
    }
    return out ? out : lit(true);
}

// Record filter: the given leading fields followed by the attack clauses.
E filter_expr(std::vector<std::pair<std::string, E>> lead, const AttackSpec& atk) {
    std::vector<E> args;
    for (auto& [name, e] : lead) {
        args.push_back(lit(name));
        args.push_back(std::move(e));
    }
    for (const auto& [name, v] : atk.clauses) {
        args.push_back(lit(name));
        args.push_back(lit(v));
    }
    return call("record", std::move(args));
}

void inputs(SpecBuilder& b, const Schema& schema) {
    for (const auto& [name, type] : schema) b.input(name, type);
}

void batch_streams(SpecBuilder& b) {
    b.output("counter", Type::integer(), at("counter", -1, lit(-1)) + lit(1));
    b.output("newBatch", Type::boolean(), now("file_id") != at("file_id", -1, lit("")));
    b.output("batchStart", Type::integer(), ite(now("newBatch"), now("counter"), at("batchStart", -1, lit(0))));
    b.output("key", key_type(), key_of(now("file_id"), now("dstAddr")));
}

// Volume tracking shared by every flow monitor: per-destination info and
// access counts over the attack's flows, the most accessed destination and
// its marker rate. Everything resets when a new batch starts.
void volume_streams(SpecBuilder& b, const AttackSpec& atk) {
    const int id = atk.id;
    const auto info = sfx("addrInfo", id), hist = sfx("attackHist", id), max = sfx("maxDest", id);
    b.output(sfx("match", id), Type::boolean(), matches_expr(atk));
    E flow_info = call("record", {lit("bits"), now("bytes") * lit(8), lit("end"), now("endTime"), lit("packets"),
                                  now("packets"), lit("start"), now("startTime")});
    E info_base = ite(now("newBatch"), empty_map(), at(info, -1, empty_map()));
    b.output(info, Type::map(Type::text(), addr_info_type()),
             ite(now(sfx("match", id)), call("insertWith", {lit("mergeAddrInfo"), now("dstAddr"), flow_info, info_base}),
                 info_base));
    E hist_base = ite(now("newBatch"), empty_map(), at(hist, -1, empty_map()));
    b.output(hist, Type::map(Type::text(), Type::integer()),
             ite(now(sfx("match", id)), call("insertWith", {lit("+"), now("dstAddr"), lit(1), hist_base}), hist_base));
    E prev_max = ite(now("newBatch"), lit(""), at(max, -1, lit("")));
    b.output(max, Type::text(),
             ite(now(sfx("match", id)), call("maxDestAddress", {now("dstAddr"), now(hist), prev_max}), prev_max));
    b.output(sfx("rate", id), Type::real(),
             ite(now(max) == lit(""), lit(0.0),
                 call("markerRate", {lit(marker_name(atk.marker)), call("!", {now(info), now(max)})})));
}

void src_set_def(SpecBuilder& b, const AttackSpec& atk) {
    const auto name = entropy_stream(atk.id);
    b.parametric(name, "p", key_type(), Type::set(Type::text()),
                 call("insert", {now("srcAddr"), at(name, param("p"), -1, empty_set())}));
}

// Retroactive entropy: the source set of the most accessed destination is
// only built once its rate passes t0, from the batch's past matching flows.
void retro_entropy(SpecBuilder& b, const AttackSpec& atk) {
    const int id = atk.id;
    src_set_def(b, atk);
    b.output(sfx("suspect", id), Type::optional(key_type()),
             ite(now(sfx("rate", id)) > lit(atk.t0), call("just", {key_of(now("file_id"), now(sfx("maxDest", id)))}),
                 nothing()));
    E upd = ite(now(sfx("match", id)) && now("dstAddr") == now(sfx("maxDest", id)), call("singleton", {now("key")}),
                empty_set());
    E filter = filter_expr({{"file_id", call("field", {param("p"), lit("file")})},
                            {"dstAddr", call("field", {param("p"), lit("dst")})}},
                           atk);
    b.output(sfx("sources", id), Type::optional(Type::set(Type::text())),
             mover(entropy_stream(id), now(sfx("suspect", id)), upd, init("", now("batchStart"), filter)));
    b.output(sfx("entropy", id), Type::integer(),
             ite(call("isJust", {now(sfx("sources", id))}), call("size", {call("fromJust", {now(sfx("sources", id))})}),
                 lit(0)));
}

void detection_streams(SpecBuilder& b, const AttackSpec& atk) {
    const int id = atk.id;
    b.output(sfx("detect", id), Type::optional(Type::text()),
             ite(now(sfx("rate", id)) > lit(atk.t0) && now(sfx("entropy", id)) > lit(atk.t1),
                 call("just", {now(sfx("maxDest", id))}), nothing()));
    E prev = at(sfx("first", id), -1, nothing());
    b.output(sfx("first", id), Type::optional(Type::text()),
             ite(!now("newBatch") && call("isJust", {prev}), prev, now(sfx("detect", id))));
}

void verdict_streams(SpecBuilder& b, const std::vector<AttackSpec>& list, const std::string& per_attack) {
    std::vector<E> items;
    for (const auto& atk : list) items.push_back(now(sfx(per_attack, atk.id)));
    b.output("detections", Type::map(Type::integer(), Type::text()), call("justs", {call("list", items)}));
    b.output("attack_ok", Type::boolean(), call("size", {now("detections")}) == lit(0));
}

ValidatedSpecPtr finish(const SpecBuilder& b) { return validate_or_throw(b.spec(), make_registry()); }

} // namespace

ValidatedSpecPtr build_s1(const std::vector<AttackSpec>& list) {
    SpecBuilder b("ddos-s1");
    inputs(b, flow_schema());
    batch_streams(b);
    b.output("dests", Type::set(key_type()),
             call("insert", {now("key"), ite(now("newBatch"), empty_set(), at("dests", -1, empty_set()))}));
    for (const auto& atk : list) {
        const int id = atk.id;
        volume_streams(b, atk);
        src_set_def(b, atk);
        b.output(sfx("sources", id), Type::map(key_type(), Type::set(Type::text())),
                 over(entropy_stream(id), now("dests"),
                      ite(now(sfx("match", id)), call("singleton", {now("key")}), empty_set())));
        b.output(sfx("entropy", id), Type::integer(),
                 call("size", {call("findWithDefault", {empty_set(), key_of(now("file_id"), now(sfx("maxDest", id))),
                                                        now(sfx("sources", id))})}));
        detection_streams(b, atk);
    }
    verdict_streams(b, list, "first");
    return finish(b);
}

ValidatedSpecPtr build_s2(const std::vector<AttackSpec>& list) {
    SpecBuilder b("ddos-s2");
    inputs(b, flow_schema());
    batch_streams(b);
    for (const auto& atk : list) {
        volume_streams(b, atk);
        retro_entropy(b, atk);
        detection_streams(b, atk);
    }
    verdict_streams(b, list, "first");
    return finish(b);
}

SpecPtr flow_analyzer(const AttackSpec& atk) {
    SpecBuilder b("flowAnalyzer" + std::to_string(atk.id));
    inputs(b, flow_schema());
    batch_streams(b);
    volume_streams(b, atk);
    retro_entropy(b, atk);
    detection_streams(b, atk);
    b.output("found", Type::boolean(), call("isJust", {now(sfx("detect", atk.id))}));
    b.returns(sfx("detect", atk.id), "found");
    return b.build();
}

ValidatedSpecPtr build_s3(const std::vector<AttackSpec>& list) {
    SpecBuilder b("ddos-s3");
    inputs(b, summary_schema());
    for (const auto& atk : list) {
        const int id = atk.id;
        E over_t0 = call("at", {now("markers"), lit(id)}) > lit(atk.t0);
        E rows = retrieve(kFlowStore, flow_schema(), lit(0), {}, filter_expr({{"file_id", now("file_id")}}, atk));
        b.output(sfx("flows", id), Type::list(schema_record_type(flow_schema())),
                 ite(over_t0, rows, lit(Value::list({}))));
        std::vector<std::pair<std::string, E>> columns;
        for (const auto& [name, _] : flow_schema()) {
            columns.emplace_back(name, call("column", {now(sfx("flows", id)), lit(name)}));
        }
        b.output(sfx("verdict", id), Type::optional(Type::text()),
                 ite(over_t0, run_spec(flow_analyzer(atk), columns), nothing()));
    }
    verdict_streams(b, list, "verdict");
    return finish(b);
}

} // namespace srv::ddos
