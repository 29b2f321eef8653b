#include "wdsguard/simulation.hpp"

#include "wdsguard/text_format.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace wdsguard {

namespace {

constexpr double kTimeEps = 1e-6;

bool same_emitters(const std::vector<ActiveEmitter>& a, const std::vector<ActiveEmitter>& b)
{
    return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](const ActiveEmitter& x, const ActiveEmitter& y) {
        return x.node == y.node && x.coefficient_si == y.coefficient_si;
    });
}

// Emitters open at t; coincident hydrants at one node add their coefficients.
std::vector<ActiveEmitter> active_emitters(std::span<const ResponseAction> actions, double t)
{
    std::vector<ActiveEmitter> out;
    for (const auto& a : actions) {
        if (a.kind == ActionKind::Flush && a.start_s <= t + kTimeEps && t + kTimeEps < a.start_s + a.duration_s) {
            out.push_back({a.node, emitter_coefficient_si(a.magnitude)});
        }
    }
    std::sort(out.begin(), out.end(), [](const ActiveEmitter& x, const ActiveEmitter& y) { return x.node < y.node; });
    std::vector<ActiveEmitter> merged;
    for (const auto& e : out) {
        if (!merged.empty() && merged.back().node == e.node) {
            merged.back().coefficient_si += e.coefficient_si;
        } else {
            merged.push_back(e);
        }
    }
    return merged;
}

double next_multiple(double t, double step)
{
    return (std::floor(t / step + kTimeEps) + 1.0) * step;
}

} // namespace

std::string_view to_string(ActionKind k)
{
    return k == ActionKind::Flush ? "flush" : "dye";
}

std::vector<ResponseAction> protocol_actions(std::span<const std::size_t> flush_nodes,
                                             std::span<const std::size_t> dye_nodes, double t,
                                             const ActionSettings& settings)
{
    std::vector<ResponseAction> out;
    for (auto n : flush_nodes) {
        out.push_back({ActionKind::Flush, n, t, settings.flush_duration_s, settings.hydrant_coefficient_gpm_psi});
    }
    for (auto n : dye_nodes) {
        out.push_back({ActionKind::Dye, n, t, settings.dye_duration_s, settings.dye_mass_kg});
    }
    return out;
}

std::vector<SourceSpec> simulation_sources(const Network& net, const ContaminationScenario* scenario,
                                           std::span<const ResponseAction> actions)
{
    std::vector<SourceSpec> out;
    if (scenario != nullptr && scenario->load_kg > 0.0) {
        out.push_back({scenario->node, Species::Contaminant, scenario->load_kg, scenario->start_s, scenario->duration_s});
    }
    for (const auto& a : actions) {
        if (a.kind == ActionKind::Dye && a.magnitude > 0.0) {
            out.push_back({net.node_id(a.node), Species::Dye, a.magnitude, a.start_s, a.duration_s});
        }
    }
    return out;
}

EmergencySimulator::EmergencySimulator(const Network& net, SimulationSettings settings)
    : net_(&net), settings_(std::move(settings)), solver_(net, settings_.solver), transport_(net)
{
    settings_.exposure.validate();
    if (!(settings_.quality_step_s > 0.0) || !(settings_.hydraulic_step_s > 0.0) || !(settings_.horizon_s > 0.0)) {
        throw ValidationError("simulation", "time steps and horizon must be positive");
    }
    events_ = ingestion_schedule(settings_.exposure, settings_.horizon_s);
}

SimulationState EmergencySimulator::initial_state() const
{
    const Network& net = *net_;
    SimulationState st;
    for (const auto& t : net.tanks()) {
        st.tank_levels_m.push_back(t.init_level_m);
        st.tank_flags.push_back(TankFlag::Normal);
    }
    st.demands_lps.assign(net.junction_count(), 0.0);
    st.transport = transport_.initial_state(st.tank_levels_m);
    st.cohorts = make_cohorts(net);
    st.cohort_of_junction.assign(net.junction_count(), -1);
    for (std::size_t i = 0; i < st.cohorts.size(); ++i) {
        st.cohort_of_junction[st.cohorts[i].node] = static_cast<long>(i);
    }
    st.ledger.keep_entries = false;
    return st;
}

double EmergencySimulator::exposure_end_s() const
{
    return events_.empty() ? 0.0 : events_.back().time_s;
}

void EmergencySimulator::advance(SimulationState& st, double until_s, const ContaminationScenario* scenario,
                                 std::span<const ResponseAction> actions, const StepObserver& observer)
{
    const Network& net = *net_;
    const auto& cfg = settings_;
    until_s = std::min(until_s, cfg.horizon_s);
    if (st.time_s >= until_s - kTimeEps) {
        return;
    }
    const auto resolved = resolve_sources(net, simulation_sources(net, scenario, actions));
    const double demand_scale = scenario != nullptr ? scenario->demand_multiplier : 1.0;
    if (st.has_hydraulics) {
        transport_.set_hydraulics(st.hydraulics);
    }

    while (st.time_s < until_s - kTimeEps) {
        const double t = st.time_s;
        bool need_solve = !st.has_hydraulics;

        const auto hour = static_cast<long>(std::floor(t / cfg.hydraulic_step_s + kTimeEps));
        const bool on_tick = std::abs(t - static_cast<double>(hour) * cfg.hydraulic_step_s) < kTimeEps;
        if ((on_tick || st.demand_hour < 0) && st.demand_hour != hour) {
            settle_cohorts(st.cohorts, t);
            const auto pattern_hour = static_cast<std::size_t>(hour);
            for (std::size_t j = 0; j < net.junction_count(); ++j) {
                double q = net.junctions()[j].base_demand_lps * net.pattern_multiplier(j, pattern_hour) * demand_scale;
                const long c = st.cohort_of_junction[j];
                if (cfg.demand_feedback && c >= 0) {
                    q *= demand_multiplier(st.cohorts[static_cast<std::size_t>(c)], t, net);
                }
                st.demands_lps[j] = q;
            }
            st.demand_hour = hour;
            need_solve = true;
        }
        auto emitters = active_emitters(actions, t);
        if (!same_emitters(emitters, st.emitters)) {
            need_solve = true;
        }
        if (need_solve) {
            if (st.has_hydraulics) {
                advance_tank_levels(net, st.hydraulics, t - st.hydraulics.time_s, st.tank_levels_m, st.tank_flags);
            }
            try {
                st.hydraulics = solver_.solve_snapshot(st.demands_lps, emitters, st.tank_levels_m, t,
                                                       st.has_hydraulics ? &st.hydraulics : nullptr);
            } catch (const SimulationError& e) {
                throw SimulationError(fmt::format("hydraulics at {}: {}", format_clock(t), e.what()));
            }
            st.hydraulics.tank_flags = st.tank_flags;
            st.emitters = std::move(emitters);
            st.has_hydraulics = true;
            ++st.hydraulic_solves;
            transport_.set_hydraulics(st.hydraulics);
        }

        double next = std::min({until_s, next_multiple(t, cfg.quality_step_s), next_multiple(t, cfg.hydraulic_step_s)});
        for (const auto& a : actions) {
            if (a.kind != ActionKind::Flush) {
                continue;
            }
            for (double edge : {a.start_s, a.start_s + a.duration_s}) {
                if (edge > t + kTimeEps && edge < next) {
                    next = edge;
                }
            }
        }
        const double dt = next - t;
        transport_.step(st.transport, t, dt, resolved);
        st.time_s = next;

        const auto contaminant = std::span<const double>(st.transport.node_conc[0]);
        const auto dye = std::span<const double>(st.transport.node_conc[1]);
        while (st.next_event < events_.size() && events_[st.next_event].time_s <= next + kTimeEps) {
            step_cohorts(st.cohorts, contaminant, dye, events_[st.next_event], cfg.exposure, cfg.rules, st.ledger);
            ++st.next_event;
        }
        if (observer) {
            observer(st, dt);
        }
    }
}

double EmergencySimulator::projected_utim(const SimulationState& prefix, const ContaminationScenario* scenario,
                                          std::span<const ResponseAction> actions)
{
    if (prefix.next_event >= events_.size()) {
        return prefix.tim_g();
    }
    SimulationState st = prefix;
    advance(st, exposure_end_s(), scenario, actions);
    return st.tim_g();
}

SimulationState EmergencySimulator::projected_state(const SimulationState& prefix,
                                                    const ContaminationScenario* scenario,
                                                    std::span<const ResponseAction> actions)
{
    SimulationState st = prefix;
    advance(st, exposure_end_s(), scenario, actions);
    return st;
}

std::vector<double> ingested_by_node(const Network& net, const SimulationState& state)
{
    std::vector<double> out(net.junction_count(), 0.0);
    for (const auto& c : state.cohorts) {
        out[c.node] += c.size * c.ingested_mg / 1000.0;
    }
    return out;
}

} // namespace wdsguard
