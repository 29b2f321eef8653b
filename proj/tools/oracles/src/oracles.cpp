#include "wdsguard/oracles.hpp"

#include "wdsguard/fixtures.hpp"
#include "wdsguard/hydraulics.hpp"
#include "wdsguard/orchestrator.hpp"
#include "wdsguard/quality.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace wdsguard::oracle {

double hazen_williams_head_loss_m(double flow_lps, double length_m, double diameter_mm, double c)
{
    const double q = flow_lps / 1000.0;
    const double d = diameter_mm / 1000.0;
    return 10.67 * length_m * std::pow(q, 1.852) / (std::pow(c, 1.852) * std::pow(d, 4.87));
}

double plug_flow_travel_s(double length_m, double diameter_mm, double flow_lps)
{
    const double d = diameter_mm / 1000.0;
    const double v = (flow_lps / 1000.0) / (std::numbers::pi * d * d / 4.0);
    return length_m / v;
}

double constant_concentration_utim_g(double persons, double daily_volume_l, double conc_mgl)
{
    return persons * daily_volume_l * conc_mgl / 1000.0;
}

DoseTrace toxic_dose_trace(const std::vector<double>& times_s, const std::vector<double>& conc_mgl, double volume_l,
                           double td_mg, double delay_s)
{
    DoseTrace out;
    double stop_at = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < times_s.size(); ++k) {
        if (times_s[k] >= stop_at) {
            out.drank.push_back(false);
            continue;
        }
        out.drank.push_back(true);
        out.ingested_mg += volume_l * conc_mgl[k];
        if (out.ingested_mg >= td_mg && std::isinf(stop_at)) {
            stop_at = times_s[k] + delay_s;
        }
    }
    return out;
}

namespace {

// std::hypot per slot, summed in slot order, so results are comparable bit for bit.
double pair_distance(const Genome& a, const Genome& b)
{
    double d = 0.0;
    for (std::size_t k = 0; k < a.slots.size(); ++k) {
        d += std::hypot(a.slots[k].x - b.slots[k].x, a.slots[k].y - b.slots[k].y);
    }
    return d;
}

bool dominates_ref(const Objectives& a, const Objectives& b)
{
    const bool no_worse = a.utim <= b.utim && a.diversity >= b.diversity;
    const bool better = a.utim < b.utim || a.diversity > b.diversity;
    return no_worse && better;
}

Genome random_genome(std::mt19937_64& gen, std::size_t slots, bool coarse)
{
    // coarse coordinates produce exact ties, which stress the min / tie handling
    std::uniform_real_distribution<double> u(0.0, 3000.0);
    std::uniform_int_distribution<int> grid(0, 5);
    Genome g;
    for (std::size_t k = 0; k < slots; ++k) {
        if (coarse) {
            g.slots.push_back({grid(gen) * 500.0, grid(gen) * 500.0});
        } else {
            g.slots.push_back({u(gen), u(gen)});
        }
    }
    return g;
}

} // namespace

std::vector<double> diversity_bruteforce(const std::vector<Genome>& genomes, const std::vector<double>& utims,
                                         DiversityMetric metric)
{
    const std::size_t n = genomes.size();
    std::vector<double> out(n, 0.0);
    if (metric == DiversityMetric::DBS) {
        const auto best = static_cast<std::size_t>(std::min_element(utims.begin(), utims.end()) - utims.begin());
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = pair_distance(genomes[i], genomes[best]);
        }
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (metric == DiversityMetric::DNN) {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    m = std::min(m, pair_distance(genomes[i], genomes[j]));
                }
            }
            out[i] = n > 1 ? m : 0.0;
        } else {
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                sum += j == i ? 0.0 : pair_distance(genomes[i], genomes[j]);
            }
            out[i] = sum / static_cast<double>(n);
        }
    }
    return out;
}

std::vector<int> ranks_bruteforce(const std::vector<Objectives>& objs)
{
    std::vector<int> rank(objs.size(), -1);
    std::size_t left = objs.size();
    for (int r = 0; left > 0; ++r) {
        std::vector<std::size_t> peel;
        for (std::size_t i = 0; i < objs.size(); ++i) {
            if (rank[i] != -1) {
                continue;
            }
            bool dominated = false;
            for (std::size_t j = 0; j < objs.size() && !dominated; ++j) {
                dominated = rank[j] == -1 && dominates_ref(objs[j], objs[i]);
            }
            if (!dominated) {
                peel.push_back(i);
            }
        }
        for (auto i : peel) {
            rank[i] = r;
        }
        left -= peel.size();
    }
    return rank;
}

std::vector<Check> diversity_battery(std::size_t trials, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::vector<Check> out;
    for (auto metric : {DiversityMetric::DNN, DiversityMetric::ADS, DiversityMetric::DBS}) {
        std::size_t failures = 0;
        std::string first;
        for (std::size_t t = 0; t < trials; ++t) {
            const std::size_t n = 2 + gen() % 40;
            const std::size_t slots = 1 + gen() % 6;
            const bool coarse = t % 3 == 0;
            std::vector<Genome> genomes;
            std::vector<double> utims;
            for (std::size_t i = 0; i < n; ++i) {
                genomes.push_back(random_genome(gen, slots, coarse));
                utims.push_back(static_cast<double>(gen() % 20));
            }
            const auto got = diversity_values(genomes, utims, metric);
            const auto want = diversity_bruteforce(genomes, utims, metric);
            if (got != want) {
                ++failures;
                if (first.empty()) {
                    first = fmt::format("first mismatch in trial {}", t);
                }
            }
        }
        out.push_back({fmt::format("diversity {} vs pairwise brute force", to_string(metric)), failures == 0,
                       fmt::format("{} / {} trials equal{}{}", trials - failures, trials, first.empty() ? "" : "; ",
                                   first)});
    }
    return out;
}

std::vector<Check> sorting_battery(std::size_t trials, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::size_t failures = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 1 + gen() % 60;
        std::vector<Objectives> objs;
        for (std::size_t i = 0; i < n; ++i) {
            // small integer grids give many duplicates and ties
            if (t % 2 == 0) {
                objs.push_back({static_cast<double>(gen() % 8), static_cast<double>(gen() % 8)});
            } else {
                std::uniform_real_distribution<double> u(0.0, 1.0);
                objs.push_back({u(gen), u(gen)});
            }
        }
        std::vector<int> ranks;
        const auto fronts = fast_non_dominated_sort(objs, &ranks);
        const auto want = ranks_bruteforce(objs);
        bool ok = ranks == want;
        std::size_t covered = 0;
        for (std::size_t f = 0; f < fronts.size() && ok; ++f) {
            covered += fronts[f].size();
            for (auto i : fronts[f]) {
                ok = ok && want[i] == static_cast<int>(f);
            }
        }
        ok = ok && covered == n;
        failures += ok ? 0 : 1;
    }
    return {{"non-dominated sort vs O(N^2) peeling", failures == 0,
             fmt::format("{} / {} trials equal", trials - failures, trials)}};
}

namespace {

class FixedEpoch : public FitnessOracle {
public:
    explicit FixedEpoch(EpochFitness& f) : f_(&f) {}
    std::vector<double> evaluate(std::span<const std::vector<std::size_t>> protocols) override
    {
        return f_->evaluate(protocols);
    }

private:
    EpochFitness* f_;
};

} // namespace

ToySearchResult toy_exhaustive_search(std::size_t seeds, std::size_t generations, std::size_t population)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto net = toy_network();
    const ProtocolShape shape{1, 0};
    SimulationSettings settings;
    const ContaminationScenario scenario{"R1", 2.0, 1.0, 0.0, 12.0 * kSecondsPerHour};
    const double t_now = 6.0 * kSecondsPerHour;

    EpochFitness fitness(net, settings, shape, ActionSettings{}, 1);
    fitness.begin_epoch(t_now, scenario, {});

    ToySearchResult out;
    out.optimum_utim_g = std::numeric_limits<double>::infinity();
    for (auto node : net.intermediate_nodes()) {
        // each candidate simulated from scratch, bypassing the epoch prefix and memo
        EmergencySimulator sim(net, settings);
        const std::vector<std::size_t> flush{node};
        const auto actions = protocol_actions(flush, {}, t_now, ActionSettings{});
        const double u = sim.projected_utim(sim.initial_state(), &scenario, actions);
        out.candidate_utims_g.push_back(u);
        if (u < out.optimum_utim_g) {
            out.optimum_utim_g = u;
            out.optimum_node = node;
        }
    }
    for (std::size_t s = 1; s <= seeds; ++s) {
        GASettings ga;
        ga.population = population;
        ga.seed = s;
        DynamicNsga2 opt(net, shape, ga);
        FixedEpoch oracle(fitness);
        opt.initialize(oracle);
        for (std::size_t g = 0; g < generations; ++g) {
            opt.step(oracle);
        }
        const auto node = opt.incumbent().nodes.front();
        out.incumbent_nodes.push_back(node);
        out.matches += node == out.optimum_node ? 1 : 0;
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

std::vector<Check> closed_form_battery()
{
    std::vector<Check> out;
    const auto pipe = one_pipe_network();
    const auto& j = pipe.junctions().front();
    const auto& p = pipe.pipes().front();
    const double h0 = pipe.reservoirs().front().head_m;

    {
        const std::vector<double> demands{j.base_demand_lps};
        const auto st = solve_snapshot(pipe, demands, {}, {});
        const double want = hazen_williams_head_loss_m(j.base_demand_lps, p.length_m, p.diameter_mm, p.roughness);
        const double got = h0 - st.head_m[0];
        const double rel = std::abs(got - want) / want;
        out.push_back({"single-pipe Hazen-Williams head drop", rel <= 1e-3,
                       fmt::format("drop {:.6f} m vs closed form {:.6f} m, rel {:.2e}", got, want, rel)});
        out.push_back({"single-pipe continuity residual", st.max_continuity_residual_lps <= 1e-6,
                       fmt::format("{:.2e} L/s", st.max_continuity_residual_lps)});
    }
    {
        const double step = 300.0;
        const double horizon = 6.0 * kSecondsPerHour;
        const auto traj = run_extended_period(pipe, pattern_demands(pipe), {}, {horizon, kSecondsPerHour});
        const std::vector<SourceSpec> src{{"R1", Species::Contaminant, 1.0, 0.0, horizon}};
        const auto field = run_tracer(pipe, traj, src, step, horizon);
        double arrival = std::numeric_limits<double>::infinity();
        for (double t = step; t <= horizon; t += step) {
            if (field.at(Species::Contaminant, 0, t) > 0.0) {
                arrival = t;
                break;
            }
        }
        const double want = plug_flow_travel_s(p.length_m, p.diameter_mm, j.base_demand_lps);
        out.push_back({"plug-flow front arrival", std::abs(arrival - want) <= step,
                       fmt::format("first nonzero at {} s, L/v = {:.1f} s", arrival, want)});
    }
    {
        ExposureParams params;
        std::vector<ConsumerCohort> cohorts(1);
        cohorts[0].size = 1000.0;
        ExposureLedger ledger;
        const std::vector<double> c{1.0};
        const std::vector<double> dye{0.0};
        for (const auto& e : ingestion_schedule(params, 24.0 * kSecondsPerHour)) {
            step_cohorts(cohorts, c, dye, e, params, {true, true}, ledger);
        }
        const double want = constant_concentration_utim_g(1000.0, params.daily_volume_l, 1.0);
        const double rel = std::abs(ledger.tim_g - want) / want;
        out.push_back({"constant-concentration cohort UTIM", rel <= 1e-9,
                       fmt::format("{:.12f} g vs {:.12f} g", ledger.tim_g, want)});
    }
    {
        ExposureParams params;
        params.reaction_delay_s = 3.0 * kSecondsPerHour; // stop lands exactly on the 15:00 event
        const std::vector<double> conc{5.0, 10.0, 10.0, 10.0, 10.0};
        std::vector<ConsumerCohort> cohorts(1);
        cohorts[0].size = 1.0;
        ExposureLedger ledger;
        const auto events = ingestion_schedule(params, 24.0 * kSecondsPerHour);
        std::vector<double> times;
        for (std::size_t k = 0; k < events.size(); ++k) {
            const std::vector<double> c{conc[k]};
            const std::vector<double> dye{0.0};
            step_cohorts(cohorts, c, dye, events[k], params, {true, true}, ledger);
            times.push_back(events[k].time_s);
        }
        const auto want = toxic_dose_trace(times, conc, params.volume_per_event_l(), params.toxic_dose_mg,
                                           params.reaction_delay_s);
        std::vector<bool> drank(times.size(), false);
        for (const auto& e : ledger.entries) {
            for (std::size_t k = 0; k < times.size(); ++k) {
                drank[k] = drank[k] || times[k] == e.time_s;
            }
        }
        const bool ok = drank == want.drank && cohorts[0].ingested_mg == want.ingested_mg;
        std::string pattern;
        for (bool b : want.drank) {
            pattern += b ? 'D' : '-';
        }
        out.push_back({"toxic-dose cutoff event sequence", ok,
                       fmt::format("expected {} with {} mg, engine {} mg", pattern, want.ingested_mg,
                                   cohorts[0].ingested_mg)});
    }
    return out;
}

std::vector<Check> run_all()
{
    auto out = closed_form_battery();
    for (auto& c : diversity_battery(1000, 11)) {
        out.push_back(std::move(c));
    }
    for (auto& c : sorting_battery(1000, 12)) {
        out.push_back(std::move(c));
    }
    const auto toy = toy_exhaustive_search(10, 30);
    out.push_back({"toy exhaustive search vs optimizer", toy.matches >= 9,
                   fmt::format("{} / 10 seeds found the optimum in 30 generations ({:.1f} s)", toy.matches,
                               toy.seconds)});
    return out;
}

} // namespace wdsguard::oracle
