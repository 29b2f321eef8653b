#pragma once

#include "wdsguard/hydraulics.hpp"
#include "wdsguard/netmodel.hpp"

#include <array>
#include <deque>
#include <span>
#include <string>
#include <vector>

namespace wdsguard {

enum class Species : std::size_t { Contaminant = 0, Dye = 1 };
inline constexpr std::size_t kSpeciesCount = 2;

std::string_view to_string(Species s);

struct SourceSpec {
    std::string node;
    Species species = Species::Contaminant;
    double mass_kg = 0.0;
    double start_s = 0.0;
    double duration_s = 0.0;
    [[nodiscard]] double mass_rate_mg_per_s() const { return mass_kg * 1e6 / duration_s; }
};

/// A source with its node resolved to an index.
struct ResolvedSource {
    std::size_t node = 0;
    Species species = Species::Contaminant;
    double rate_mg_per_s = 0.0;
    double start_s = 0.0;
    double end_s = 0.0;

    /// Mass injected over [t0, t1), mg.
    [[nodiscard]] double mass_between(double t0, double t1) const;
};

std::vector<ResolvedSource> resolve_sources(const Network& net, std::span<const SourceSpec> sources);

struct Segment {
    double volume_l = 0.0;
    double conc_mgl = 0.0;
};

/// Cumulative mass accounting of one species, mg.
struct MassAccount {
    double injected_mg = 0.0;
    double consumed_mg = 0.0;  // delivered to demand
    double flushed_mg = 0.0;   // discharged through emitters
    double returned_mg = 0.0;  // carried into reservoirs
};

/// Full transport state: pipe segment lists (ordered from link_from to link_to), tank
/// contents, and mass held at nodes without outflow. Copyable, so a simulation prefix can be
/// cached and resumed.
struct TransportState {
    std::array<std::vector<std::deque<Segment>>, kSpeciesCount> segments;
    std::array<std::vector<double>, kSpeciesCount> tank_mass_mg;
    std::array<std::vector<double>, kSpeciesCount> held_mg;      // per node
    std::array<std::vector<double>, kSpeciesCount> node_conc;    // per node, outflow concentration of the last step
    std::array<std::vector<double>, kSpeciesCount> delivered_mg; // per node, mass delivered to demand
    std::array<MassAccount, kSpeciesCount> account;
    std::vector<double> tank_volume_l;
    std::vector<std::string> warnings;

    [[nodiscard]] double resident_mg(Species s) const;
};

/// Lagrangian plug-flow transport with complete mixing at junctions and tanks. Nodes are mixed
/// in flow order each step, so water can traverse several short links within one step.
class TracerTransport {
public:
    explicit TracerTransport(const Network& net, double merge_tolerance_mgl = 1e-9);

    /// Pipes start clean; tank volumes follow the given levels.
    [[nodiscard]] TransportState initial_state(std::span<const double> tank_levels_m) const;

    /// Prepares the flow ordering for a hydraulic snapshot. Must be called whenever flows change.
    void set_hydraulics(const HydraulicState& snapshot);

    /// Advances one step [t0, t0 + dt).
    void step(TransportState& state, double t0, double dt, std::span<const ResolvedSource> sources) const;

private:
    const Network* net_;
    double merge_tolerance_;
    const HydraulicState* hyd_ = nullptr;
    std::vector<std::size_t> order_;          // junctions in flow order
    std::vector<std::vector<std::size_t>> out_links_; // per node, links carrying water away
    std::vector<std::vector<std::size_t>> in_links_;
    std::vector<double> link_flow_lps_;       // absolute flow per link (0 below the noise floor)
    std::vector<char> forward_;               // flow from link_from to link_to
    std::vector<double> pipe_volume_l_;
};

/// Per-species concentration series at quality-step resolution.
struct TracerField {
    double quality_step_s = 0.0;
    /// conc[species][k][node]: mean concentration of the water leaving `node` during step k,
    /// i.e. over [k dt, (k + 1) dt).
    std::array<std::vector<std::vector<double>>, kSpeciesCount> conc;
    TransportState final_state;

    /// Concentration at the instant `t` (end of the step ending at t); 0 at t = 0.
    [[nodiscard]] double at(Species s, std::size_t node, double t) const;
};

/// Transport of both species over a hydraulic trajectory (one snapshot per hydraulic step;
/// snapshot k covers [t_k, t_{k+1}), the last one runs to `horizon_s`).
TracerField run_tracer(const Network& net, std::span<const HydraulicState> trajectory,
                       std::span<const SourceSpec> sources, double quality_step_s, double horizon_s);

struct BalanceReport {
    double injected_kg = 0.0;
    double consumed_kg = 0.0;
    double flushed_kg = 0.0;
    double returned_kg = 0.0;
    double resident_kg = 0.0;
    [[nodiscard]] double accounted_kg() const { return consumed_kg + flushed_kg + returned_kg + resident_kg; }
    [[nodiscard]] double relative_error() const;
};

/// Audits a tracer run by re-integrating the recorded concentration series against the
/// hydraulic outflows, independently of the transport's internal counters.
BalanceReport mass_balance(const Network& net, const TracerField& field, std::span<const HydraulicState> trajectory,
                           std::span<const SourceSpec> sources, Species species);

} // namespace wdsguard
