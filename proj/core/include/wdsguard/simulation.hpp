#pragma once

#include "wdsguard/exposure.hpp"
#include "wdsguard/hydraulics.hpp"
#include "wdsguard/quality.hpp"
#include "wdsguard/scenario.hpp"

#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace wdsguard {

enum class ActionKind { Flush, Dye };
std::string_view to_string(ActionKind k);

/// A scheduled response action at a node: an open hydrant (emitter) or a dye injection.
struct ResponseAction {
    ActionKind kind = ActionKind::Flush;
    std::size_t node = 0;
    double start_s = 0.0;
    double duration_s = 0.0;
    double magnitude = 0.0; // emitter coefficient (gpm/psi^0.5) or dye mass (kg)
    friend bool operator==(const ResponseAction&, const ResponseAction&) = default;
};

struct ActionSettings {
    double flush_duration_s = 5.0 * kSecondsPerHour;
    double hydrant_coefficient_gpm_psi = kHydrantCoefficientGpmPsi;
    double dye_mass_kg = 100.0;
    double dye_duration_s = kSecondsPerHour;
};

/// Actions for a protocol executed at `t`: one hydrant per flush node, one injector per dye node.
std::vector<ResponseAction> protocol_actions(std::span<const std::size_t> flush_nodes,
                                             std::span<const std::size_t> dye_nodes, double t,
                                             const ActionSettings& settings);

struct SimulationSettings {
    ExposureParams exposure;
    ReactionRules rules;
    /// Stopped cohorts draw their class's retained fraction of demand from the next hourly tick.
    bool demand_feedback = true;
    double quality_step_s = 300.0;
    double hydraulic_step_s = kSecondsPerHour;
    double horizon_s = 24.0 * kSecondsPerHour;
    SolverOptions solver;
};

/// Complete, copyable state of one emergency simulation at `time_s`.
struct SimulationState {
    double time_s = 0.0;
    bool has_hydraulics = false;
    HydraulicState hydraulics;            // snapshot governing the current interval
    std::vector<ActiveEmitter> emitters;  // emitter set of that snapshot
    std::vector<double> tank_levels_m;    // at hydraulics.time_s
    std::vector<TankFlag> tank_flags;
    long demand_hour = -1;                // hourly tick the demands were last set at
    std::vector<double> demands_lps;      // per junction
    TransportState transport;
    std::vector<ConsumerCohort> cohorts;
    std::vector<long> cohort_of_junction; // -1 when unpopulated
    ExposureLedger ledger;
    std::size_t next_event = 0;
    std::size_t hydraulic_solves = 0;

    [[nodiscard]] double tim_g() const noexcept { return ledger.tim_g; }
};

/// Hour-by-hour coupled simulation: steady hydraulics at every hourly tick and action start/end,
/// tracer transport at the quality step, ingestion events, and demand feedback from alerted
/// consumers. Holds a hydraulic solver, so use one instance per thread.
class EmergencySimulator {
public:
    using StepObserver = std::function<void(const SimulationState&, double dt)>;

    EmergencySimulator(const Network& net, SimulationSettings settings);

    [[nodiscard]] SimulationState initial_state() const;

    /// Advances `state` to `until_s` under the given scenario (may be null: no contamination) and
    /// actions. The observer sees the state after every transport step.
    void advance(SimulationState& state, double until_s, const ContaminationScenario* scenario,
                 std::span<const ResponseAction> actions, const StepObserver& observer = {});

    /// Time after which exposure can no longer change (last ingestion event in the horizon).
    [[nodiscard]] double exposure_end_s() const;

    /// Continues a copy of `prefix` until exposure ends and returns the UTIM (g).
    double projected_utim(const SimulationState& prefix, const ContaminationScenario* scenario,
                          std::span<const ResponseAction> actions);

    /// Continues a copy of `prefix` until exposure ends and returns the final state.
    SimulationState projected_state(const SimulationState& prefix, const ContaminationScenario* scenario,
                                    std::span<const ResponseAction> actions);

    [[nodiscard]] const Network& network() const noexcept { return *net_; }
    [[nodiscard]] const SimulationSettings& settings() const noexcept { return settings_; }

private:
    const Network* net_;
    SimulationSettings settings_;
    std::vector<IngestionEvent> events_;
    HydraulicSolver solver_;
    TracerTransport transport_;
};

/// Sources implied by a scenario and the dye actions.
std::vector<SourceSpec> simulation_sources(const Network& net, const ContaminationScenario* scenario,
                                           std::span<const ResponseAction> actions);

/// Projected ultimate ingested mass per junction (g), from a finished state.
std::vector<double> ingested_by_node(const Network& net, const SimulationState& state);

} // namespace wdsguard
