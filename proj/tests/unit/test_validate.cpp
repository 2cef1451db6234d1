#include <doctest.h>

#include "../support.hpp"
#include "srv/dsl.hpp"
#include "srv/spec_json.hpp"

using namespace srv;
using namespace srv::dsl;

namespace {

std::vector<DiagKind> kinds(const Specification& s) {
    std::vector<DiagKind> out;
    for (const auto& d : validate(s, default_registry()).diagnostics) out.push_back(d.kind);
    return out;
}

bool has(const std::vector<DiagKind>& ks, DiagKind k) { return std::find(ks.begin(), ks.end(), k) != ks.end(); }

} // namespace

TEST_CASE("altitude validates without look-back or look-ahead") {
    auto v = test::checked(examples::altitude());
    CHECK(v->max_back() == 0);
    CHECK(v->max_fwd() == 0);
    CHECK(v->outputs().size() == 1);
}

TEST_CASE("self reference at offset zero is a cycle") {
    SpecBuilder b("loop");
    b.input("x", Type::integer());
    b.output("y", Type::integer(), now("y") + lit(1));
    auto ks = kinds(b.spec());
    REQUIRE(ks.size() == 1);
    CHECK(ks[0] == DiagKind::CyclicDependency);

    SpecBuilder ok("prev");
    ok.input("x", Type::integer());
    ok.output("y", Type::integer(), at("y", -1, lit(0)) + lit(1));
    CHECK(kinds(ok.spec()).empty());
}

TEST_CASE("a 50-slice looks 49 instants ahead") {
    auto v = test::checked(examples::crossspec());
    CHECK(v->max_fwd() == 49);
    CHECK(v->max_back() == 0);
    MonitorState st = start(v);
    CHECK(st.next_instant() == 0);
}

TEST_CASE("diagnostics name the offending stream") {
    SpecBuilder b("bad");
    b.input("x", Type::integer());
    b.output("a", Type::integer(), now("nope"));
    b.output("b", Type::boolean(), now("x") + lit(1));
    b.output("c", Type::integer(), at("x", -1, lit("zero")));
    b.output("d", Type::integer(), call("frobnicate", {now("x")}));
    b.output("e", Type::integer(), call("not", {now("x"), now("x")}));
    auto res = validate(b.spec(), default_registry());
    CHECK_FALSE(res.ok());
    auto ks = kinds(b.spec());
    CHECK(has(ks, DiagKind::UndeclaredStream));
    CHECK(has(ks, DiagKind::TypeMismatch));
    CHECK(has(ks, DiagKind::UnknownFunction));
    CHECK(has(ks, DiagKind::ArityMismatch));
    bool named = false;
    for (const auto& d : res.diagnostics) named = named || d.stream == "a";
    CHECK(named);
    CHECK_THROWS_AS(validate_or_throw(b.spec(), default_registry()), Error);
}

TEST_CASE("duplicate names and bad return clauses are rejected") {
    SpecBuilder b("dup");
    b.input("x", Type::integer());
    b.output("x", Type::integer(), lit(1));
    CHECK(has(kinds(b.spec()), DiagKind::DuplicateStream));

    SpecBuilder r("ret");
    r.input("x", Type::integer());
    r.output("v", Type::integer(), now("x"));
    r.returns("v", "v");
    CHECK(has(kinds(r.spec()), DiagKind::BadReturnClause));
}

TEST_CASE("validating a validated spec is the identity") {
    for (const auto& b : builtins()) {
        CHECK(validate(b.spec) == b.spec);
    }
}

TEST_CASE("specification documents round-trip") {
    for (const auto& b : builtins()) {
        json doc = spec_to_json(b.spec->source());
        Specification back = spec_from_json(json::parse(doc.dump()));
        CHECK(spec_hash(back) == b.spec->hash());
        CHECK(validate_or_throw(back, default_registry())->hash() == b.spec->hash());
    }
}

TEST_CASE("property: desugaring preserves outputs") {
    for (const char* name : {"dyn-altitude", "dyn-altitude-fwd", "openfiles-when", "ddos-s2"}) {
        const Builtin* b = find_builtin(name);
        REQUIRE(b);
        auto plain = desugar(b->spec);
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            Scenario sc = b->random(seed, 120);
            auto a = run_offline(b->spec, sc.trace, scenario_environment(sc));
            auto d = run_offline(plain, sc.trace, scenario_environment(sc));
            for (const auto& [stream, cells] : a.outputs) {
                CHECK_MESSAGE(d.outputs[stream] == cells, name << " seed " << seed << " stream " << stream);
            }
        }
    }
}

TEST_CASE("property: maxBack + maxFwd + 1 events resolve instant maxBack") {
    for (const auto& b : builtins()) {
        int need = b.spec->max_back() + b.spec->max_fwd() + 1;
        for (std::uint64_t seed = 1; seed <= 30; ++seed) {
            Scenario sc = b.random(seed, static_cast<std::size_t>(need) + 40);
            if (sc.trace.size() < static_cast<std::size_t>(need)) continue;
            Environment env = scenario_environment(sc);
            MonitorState st = start(b.spec);
            std::set<std::string> resolved;
            for (int i = 0; i < need; ++i) {
                for (const auto& r : step(st, sc.trace[static_cast<std::size_t>(i)], env).resolved) {
                    if (r.instant == b.spec->max_back()) resolved.insert(r.stream);
                }
            }
            CHECK_MESSAGE(resolved.size() == b.spec->outputs().size(), b.name);
            break;
        }
    }
}
