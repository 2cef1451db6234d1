// Serial against OpenMP stepping of over instances: every instance is
// updated at every instant.

#include <benchmark/benchmark.h>

#include "srv/builtins.hpp"
#include "srv/dsl.hpp"

using namespace srv;
using namespace srv::dsl;

namespace {

ValidatedSpecPtr wide_spec() {
    SpecBuilder b("wide");
    b.input("ps", Type::set(Type::integer()));
    b.input("x", Type::integer());
    E prev = at("acc", param("p"), -1, lit(0));
    b.parametric("acc", "p", Type::integer(), Type::integer(),
                 ite(call("mod", {now("x") + param("p"), lit(7)}) == lit(0), prev - now("x"), prev + now("x") * param("p")));
    b.output("m", Type::map(Type::integer(), Type::integer()), over("acc", now("ps")));
    return validate_or_throw(*b.build(), default_registry());
}

std::vector<Event> wide_trace(std::int64_t params, std::size_t length) {
    ValueSet ps;
    for (std::int64_t p = 0; p < params; ++p) ps.insert(Value::integer(p));
    Value set = Value::set(ps);
    std::vector<Event> out;
    for (std::size_t i = 0; i < length; ++i) {
        Event e;
        e.instant = static_cast<Instant>(i);
        e.bindings.emplace("ps", set);
        e.bindings.emplace("x", Value::integer(static_cast<std::int64_t>(i % 13)));
        out.push_back(std::move(e));
    }
    return out;
}

void run(benchmark::State& state, bool parallel) {
    auto spec = wide_spec();
    auto trace = wide_trace(state.range(0), 50);
    for (auto _ : state) {
        Environment env = make_environment();
        env.parallel = parallel;
        env.parallel_min = 1;
        MonitorState st = start(spec);
        for (const auto& ev : trace) benchmark::DoNotOptimize(step(st, ev, env));
        benchmark::DoNotOptimize(finish(st, env));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<std::int64_t>(trace.size()));
}

void BM_OverSerial(benchmark::State& state) { run(state, false); }
void BM_OverParallel(benchmark::State& state) { run(state, true); }

} // namespace

BENCHMARK(BM_OverSerial)->Arg(64)->Arg(512)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_OverParallel)->Arg(64)->Arg(512)->Arg(4096)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
