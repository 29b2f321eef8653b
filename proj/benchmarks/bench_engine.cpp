#include "wdsguard/orchestrator.hpp"
#include "wdsguard/text_format.hpp"

#include <benchmark/benchmark.h>

using namespace wdsguard;

namespace {

constexpr double kH = 3600.0;

struct Town {
    Network net = parse_native(read_file(WDSGUARD_FIXTURE_DIR "/synthetic_town.net"));
    PerceivedTimeline timeline = parse_timeline(read_file(WDSGUARD_FIXTURE_DIR "/town_timeline.txt")).timeline;
    EmergencyConfig config = parse_config(read_file(WDSGUARD_FIXTURE_DIR "/default_run.cfg"));
};

const Town& town()
{
    static const Town t;
    return t;
}

void BM_SnapshotSolve(benchmark::State& state)
{
    const auto& net = town().net;
    std::vector<double> demands;
    for (const auto& j : net.junctions()) {
        demands.push_back(j.base_demand_lps);
    }
    std::vector<double> levels;
    for (const auto& t : net.tanks()) {
        levels.push_back(t.init_level_m);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(solve_snapshot(net, demands, {}, levels));
    }
}
BENCHMARK(BM_SnapshotSolve);

void BM_ProtocolEvaluation(benchmark::State& state)
{
    const auto& t = town();
    EpochFitness fit(t.net, t.config.simulation_settings(), t.config.shape(), t.config.actions, 1);
    fit.begin_epoch(8 * kH, t.timeline.perceived_at(8 * kH), {});
    const auto in = t.net.intermediate_nodes();
    std::size_t k = 0;
    for (auto _ : state) {
        // rotate so the memo never answers
        std::vector<std::size_t> p;
        for (std::size_t s = 0; s < 6; ++s) {
            p.push_back(in[(k + s * 3) % in.size()]);
        }
        ++k;
        const std::vector<std::vector<std::size_t>> batch{p};
        benchmark::DoNotOptimize(fit.evaluate(batch));
        if (k % in.size() == 0) {
            fit.begin_epoch(8 * kH, t.timeline.perceived_at(8 * kH), {});
        }
    }
}
BENCHMARK(BM_ProtocolEvaluation)->Unit(benchmark::kMillisecond);

void BM_Generation(benchmark::State& state)
{
    const auto& t = town();
    auto ga = t.config.ga;
    ga.population = static_cast<std::size_t>(state.range(0));
    EpochFitness fit(t.net, t.config.simulation_settings(), t.config.shape(), t.config.actions, 1);
    fit.begin_epoch(8 * kH, t.timeline.perceived_at(8 * kH), {});
    DynamicNsga2 opt(t.net, t.config.shape(), ga);
    opt.initialize(fit);
    for (auto _ : state) {
        opt.step(fit);
    }
}
BENCHMARK(BM_Generation)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
