#include <doctest.h>

#include <random>

#include "../support.hpp"
#include "srv/functions.hpp"
#include "srv/type.hpp"
#include "srv/value_json.hpp"

using namespace srv;

namespace {

Value ints(std::initializer_list<std::int64_t> xs) {
    ValueList l;
    for (auto x : xs) l.push_back(Value::integer(x));
    return Value::list(l);
}

Value tmap(std::initializer_list<std::pair<const char*, std::int64_t>> kv) {
    ValueMap m;
    for (const auto& [k, v] : kv) m[Value::text(k)] = Value::integer(v);
    return Value::map(m);
}

} // namespace

TEST_CASE("builtin functions on small arguments") {
    auto reg = default_registry();
    CHECK(reg->call("not", std::vector{Value::boolean(true)}) == Value::boolean(false));
    CHECK(reg->call("insertWith", std::vector{Value::text("+"), Value::text("k"), Value::integer(2), tmap({{"k", 3}})}) ==
          tmap({{"k", 5}}));
    CHECK(reg->call("insertWith", std::vector{Value::text("+"), Value::text("j"), Value::integer(2), tmap({{"k", 3}})}) ==
          tmap({{"j", 2}, {"k", 3}}));
    CHECK(reg->call("maximum", std::vector{ints({4, 1, 9})}) == Value::integer(9));
    CHECK(reg->call("elems", std::vector{tmap({{"a", 1}, {"b", 2}})}) == ints({1, 2}));
    CHECK(reg->call("size", std::vector{Value::set({})}) == Value::integer(0));
    CHECK(reg->call("!", std::vector{tmap({{"x", 7}}), Value::text("x")}) == Value::integer(7));
}

TEST_CASE("combiner sees the new value first") {
    auto reg = default_registry();
    // "-" is not commutative: insertWith(f, k, new, m) stores f(new, old).
    CHECK(reg->call("insertWith", std::vector{Value::text("-"), Value::text("k"), Value::integer(10), tmap({{"k", 3}})}) ==
          tmap({{"k", 7}}));
}

TEST_CASE("registering a name twice needs the same signature") {
    FunctionRegistry reg;
    FuncDef f{"twice", Signature{{Type::integer()}, Type::integer()},
              [](std::span<const Value> a, const FunctionRegistry&) { return Value::integer(a[0].as_int() * 2); },
              {}, Laziness::Strict};
    reg.register_function(f);
    reg.register_function(f);
    FuncDef g = f;
    g.signature.result = Type::boolean();
    CHECK_THROWS_AS(reg.register_function(g), Error);
    CHECK(reg.call("twice", std::vector{Value::integer(4)}) == Value::integer(8));
}

TEST_CASE("property: functions are referentially transparent") {
    auto reg = default_registry();
    std::mt19937_64 rng(11);
    auto r = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    for (int round = 0; round < 200; ++round) {
        ValueSet s;
        ValueMap m;
        ValueList l;
        for (int i = r(0, 6); i > 0; --i) {
            s.insert(Value::integer(r(0, 9)));
            m[Value::integer(r(0, 9))] = Value::integer(r(-5, 5));
            l.push_back(Value::integer(r(-20, 20)));
        }
        Value k = Value::integer(r(0, 9));
        std::vector<std::pair<const char*, std::vector<Value>>> calls{
            {"insert", {k, Value::set(s)}},
            {"delete", {k, Value::set(s)}},
            {"member", {k, Value::set(s)}},
            {"union", {Value::set(s), Value::set({k})}},
            {"insertWith", {Value::text("+"), k, Value::integer(1), Value::map(m)}},
            {"findWithDefault", {Value::integer(0), k, Value::map(m)}},
            {"elems", {Value::map(m)}},
            {"keys", {Value::map(m)}},
            {"sum", {Value::list(l)}},
            {"length", {Value::list(l)}},
        };
        for (const auto& [fn, args] : calls) {
            Value a = reg->call(fn, args);
            Value b = reg->call(fn, args);
            CHECK(a == b);
            CHECK(to_wire(a).dump() == to_wire(b).dump());
        }
    }
}

TEST_CASE("property: equal containers serialize identically") {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 100; ++round) {
        std::vector<std::int64_t> keys;
        for (int i = 0; i < 8; ++i) keys.push_back(static_cast<std::int64_t>(rng() % 20));
        ValueSet a, b;
        ValueMap ma, mb;
        for (auto k : keys) {
            a.insert(Value::integer(k));
            ma[Value::integer(k)] = Value::text(std::to_string(k));
        }
        std::shuffle(keys.begin(), keys.end(), rng);
        for (auto k : keys) {
            b.insert(Value::integer(k));
            mb[Value::integer(k)] = Value::text(std::to_string(k));
        }
        CHECK(to_wire(Value::set(a)).dump() == to_wire(Value::set(b)).dump());
        CHECK(to_tagged(Value::map(ma)).dump() == to_tagged(Value::map(mb)).dump());
    }
}

TEST_CASE("records keep fields sorted") {
    Value r1 = Value::record({{"b", Value::integer(1)}, {"a", Value::integer(2)}});
    Value r2 = Value::record({{"a", Value::integer(2)}, {"b", Value::integer(1)}});
    CHECK(r1 == r2);
    CHECK(to_wire(r1).dump() == R"({"a":2,"b":1})");
}

TEST_CASE("wire values decode against their type") {
    Type t = Type::map(Type::text(), Type::set(Type::integer()));
    Value v = Value::map({{Value::text("x"), Value::set({Value::integer(1), Value::integer(3)})}});
    CHECK(from_wire(to_wire(v), t) == v);
    CHECK(from_tagged(to_tagged(v)) == v);
    CHECK_THROWS_AS(from_wire(json("nope"), Type::integer()), Error);
}
