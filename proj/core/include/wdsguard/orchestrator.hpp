#pragma once

#include "wdsguard/optimizer.hpp"
#include "wdsguard/scenario.hpp"
#include "wdsguard/simulation.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wdsguard {

enum class ClockMode { Budget, Wall };
enum class Strategy { Flush, Dye, Both };
std::string_view to_string(ClockMode m);
std::string_view to_string(Strategy s);
std::optional<Strategy> strategy_from_string(std::string_view s);

struct FactorFlags {
    bool scenario_updates = true;
    bool execution_feedback = true;
    bool consumer_reactions = true;
    friend bool operator==(const FactorFlags&, const FactorFlags&) = default;
};

struct EmergencyConfig {
    double response_delay_s = 6.0 * kSecondsPerHour;
    double horizon_s = 24.0 * kSecondsPerHour;
    double report_until_s = 18.0 * kSecondsPerHour;
    std::vector<double> execution_times_s{9.0 * kSecondsPerHour, 12.0 * kSecondsPerHour};
    ClockMode clock = ClockMode::Budget;
    std::size_t generations_per_hour = 25;
    double wall_speedup = 120.0; // simulated seconds per wall-clock second
    double quality_step_s = 300.0;
    double impact_time_s = 18.0 * kSecondsPerHour;
    std::size_t threads = 1;
    Strategy strategy = Strategy::Both;
    std::size_t slots_per_action = 3;
    FactorFlags flags;
    GASettings ga;
    ExposureParams exposure;
    ActionSettings actions;

    [[nodiscard]] ProtocolShape shape() const;
    [[nodiscard]] SimulationSettings simulation_settings() const;
    void validate() const;
};

/// Sectioned key = value text: [RUN], [GA], [EXPOSURE], [ACTIONS]. Unknown keys are errors.
EmergencyConfig parse_config(std::string_view text);
std::string serialize_config(const EmergencyConfig& config);

/// A protocol as applied: snapped nodes per slot, flush slots first.
struct ExecutedProtocol {
    double time_s = 0.0;
    std::vector<std::size_t> flush_nodes;
    std::vector<std::size_t> dye_nodes;
    std::size_t epoch = 0;
};

/// Appends the actions of `protocol` to `history` (literal superposition, no de-duplication).
void execute_protocol(std::vector<ResponseAction>& history, const ExecutedProtocol& protocol,
                      const ActionSettings& settings);

/// Fitness of protocols for one environment epoch. Holds the simulation prefix at t_now and
/// memoizes results by snapped node tuple.
class EpochFitness : public FitnessOracle {
public:
    EpochFitness(const Network& net, const SimulationSettings& settings, ProtocolShape shape,
                 const ActionSettings& actions, std::size_t threads);

    /// Starts a new epoch: recomputes the prefix from t = 0 and clears the memo.
    void begin_epoch(double t_now, const ContaminationScenario& perceived, std::vector<ResponseAction> executed);

    std::vector<double> evaluate(std::span<const std::vector<std::size_t>> protocols) override;

    /// UTIM with the perceived scenario and no actions at all.
    [[nodiscard]] double no_response_utim() const noexcept { return no_response_; }

    /// Projected final state for a protocol (impact maps).
    SimulationState projected_state(const std::vector<std::size_t>& protocol);

    [[nodiscard]] std::size_t evaluations() const noexcept { return evaluations_; }
    [[nodiscard]] std::size_t memo_hits() const noexcept { return memo_hits_; }
    [[nodiscard]] const SimulationState& prefix() const noexcept { return prefix_; }

private:
    std::vector<ResponseAction> actions_for(const std::vector<std::size_t>& protocol) const;

    const Network* net_;
    ProtocolShape shape_;
    ActionSettings action_settings_;
    std::vector<std::unique_ptr<EmergencySimulator>> sims_; // one per worker
    double t_now_ = 0.0;
    ContaminationScenario perceived_;
    std::vector<ResponseAction> executed_;
    SimulationState prefix_;
    double no_response_ = 0.0;
    std::map<std::vector<std::size_t>, double> memo_;
    std::size_t evaluations_ = 0;
    std::size_t memo_hits_ = 0;
};

struct UtimSample {
    double sim_time_s = 0.0;
    double incumbent_utim_g = 0.0;
    double no_response_utim_g = 0.0;
    std::size_t generation = 0;
    std::size_t epoch = 0;
    friend bool operator==(const UtimSample&, const UtimSample&) = default;
};

struct RunEvent {
    std::size_t seq = 0;
    double sim_time_s = 0.0;
    std::string kind; // start, epoch, scenario_update, execution, sample, warning, finish
    std::string payload; // JSON object text
};

struct EpochRecord {
    std::size_t index = 0;
    double start_s = 0.0;
    ContaminationScenario perceived;
    std::vector<std::size_t> incumbent_nodes; // incumbent at the end of the epoch
    double incumbent_utim_g = 0.0;
    double no_response_utim_g = 0.0;
};

struct ImpactMap {
    double time_s = 0.0;
    std::vector<std::pair<std::string, double>> ingested_g; // per populated junction
};

/// Operator command queued for the next epoch boundary (or an explicit time).
struct PendingCommand {
    enum class Kind { ScenarioUpdate, Execute } kind = Kind::Execute;
    std::optional<double> at_s;
    ContaminationScenario scenario;                      // ScenarioUpdate
    std::optional<std::vector<std::size_t>> protocol;    // Execute; incumbent when empty
};

/// The emergency loop as a steppable object, shared by batch runs and live sessions.
class EmergencyRun {
public:
    EmergencyRun(const Network& net, PerceivedTimeline timeline, EmergencyConfig config);

    /// Queues timeline updates and configured executions according to the factor flags.
    void schedule_from_config();

    /// Epoch 0 and generation 0.
    void start();
    [[nodiscard]] bool started() const noexcept { return started_; }
    [[nodiscard]] bool finished() const noexcept { return finished_; }

    /// Sim time the next generation will be sampled at (budget clock), or +inf when finished.
    [[nodiscard]] double next_generation_time() const;

    /// Runs one generation, applying any boundary at or before its sample time first.
    void step_generation();

    /// Budget mode: runs generations while their sample time is strictly below `until_s`.
    void advance_until(double until_s);
    void run_to_end();

    /// Wall mode: sample time follows the scaled wall clock from the moment of start().
    void set_wall_clock(std::function<double()> seconds_since_start);

    /// Queued commands; validated immediately, applied at the next boundary (or at `at_s`).
    void queue(PendingCommand command);

    [[nodiscard]] double sim_time() const noexcept { return sim_time_; }
    [[nodiscard]] double response_start() const noexcept { return response_start_; }
    [[nodiscard]] const std::vector<UtimSample>& series() const noexcept { return series_; }
    [[nodiscard]] const std::vector<RunEvent>& events() const noexcept { return events_; }
    [[nodiscard]] const std::vector<EpochRecord>& epochs() const noexcept { return epochs_; }
    [[nodiscard]] const std::vector<ExecutedProtocol>& executions() const noexcept { return executed_protocols_; }
    [[nodiscard]] const PerceivedTimeline& applied_timeline() const noexcept { return applied_; }
    [[nodiscard]] const ContaminationScenario& perceived() const noexcept { return perceived_; }
    [[nodiscard]] const DynamicNsga2& optimizer() const { return *ga_; }
    [[nodiscard]] const EmergencyConfig& config() const noexcept { return config_; }
    [[nodiscard]] const Network& network() const noexcept { return *net_; }
    [[nodiscard]] const std::optional<ImpactMap>& impact_map() const noexcept { return impact_; }

    /// Projected ingestion per junction for the current incumbent.
    ImpactMap current_impact();
    [[nodiscard]] std::size_t current_epoch() const noexcept { return epochs_.empty() ? 0 : epochs_.size() - 1; }
    [[nodiscard]] double no_response_utim() const noexcept { return fitness_.no_response_utim(); }

private:
    [[nodiscard]] double next_boundary_after(double t) const;
    void begin_epoch(double t);
    void record_sample();
    void apply_due_commands(double b);
    void finish();
    void emit(std::string kind, std::string payload);

    const Network* net_;
    PerceivedTimeline timeline_;
    EmergencyConfig config_;
    PerceivedTimeline applied_;
    ContaminationScenario perceived_;
    EpochFitness fitness_;
    std::unique_ptr<DynamicNsga2> ga_;
    std::vector<ResponseAction> history_;
    std::vector<ExecutedProtocol> executed_protocols_;
    std::vector<PendingCommand> pending_;
    std::vector<UtimSample> series_;
    std::vector<RunEvent> events_;
    std::vector<EpochRecord> epochs_;
    std::optional<ImpactMap> impact_;
    std::function<double()> wall_clock_;
    double response_start_ = 0.0;
    double sim_time_ = 0.0;
    double epoch_start_ = 0.0;
    std::size_t generation_ = 0;
    bool started_ = false;
    bool finished_ = false;
};

struct RunResult {
    std::vector<UtimSample> series;
    std::vector<RunEvent> events;
    std::vector<EpochRecord> epochs;
    std::vector<ExecutedProtocol> executions;
    std::optional<ImpactMap> impact;
};

/// Full batch run.
RunResult run_emergency(const Network& net, const PerceivedTimeline& timeline, const EmergencyConfig& config);

/// Trapezoidal integral of (no-response - incumbent) over [t0, t1], gram-hours.
double confined_area(std::span<const UtimSample> series, double t0_s, double t1_s);

// --- outputs -------------------------------------------------------------------------------

std::string utim_series_csv(std::span<const UtimSample> series, double report_until_s);
std::string events_csv(std::span<const RunEvent> events);
std::string protocols_csv(const Network& net, std::span<const EpochRecord> epochs, ProtocolShape shape);
std::string impact_map_csv(const ImpactMap& map);

/// Writes the four CSV files into `dir` (created if missing).
void write_run_outputs(const std::string& dir, const Network& net, const RunResult& result,
                       const EmergencyConfig& config);

} // namespace wdsguard
