#pragma once

#include "wdsguard/netmodel.hpp"

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdsguard {

/// Q [m3/s] per sqrt(gpm coefficient): 1 gpm = 6.30902e-5 m3/s, 1 psi = 0.703070 m of water.
inline constexpr double kGpmToCubicMetres = 6.30902e-5;
inline constexpr double kMetresPerPsi = 0.703070;
inline constexpr double kHydrantCoefficientGpmPsi = 166.5;

/// Converts an emitter coefficient in gpm/psi^0.5 to m3/s per m^0.5.
double emitter_coefficient_si(double gpm_per_sqrt_psi);

/// Hazen-Williams resistance r in h = r Q^1.852 (SI: Q m3/s, h m).
double hazen_williams_resistance(double length_m, double diameter_mm, double roughness);
inline constexpr double kHazenWilliamsExponent = 1.852;

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EmitterSpec {
    std::string node;
    double coefficient_gpm_psi = kHydrantCoefficientGpmPsi;
    double start_s = 0.0;
    double end_s = 0.0;
};

/// An emitter open during a snapshot: node index and SI coefficient.
struct ActiveEmitter {
    std::size_t node = 0;
    double coefficient_si = 0.0;
};

enum class TankFlag { Normal, Full, Empty };

struct HydraulicState {
    double time_s = 0.0;
    std::vector<double> head_m;       // per node
    std::vector<double> demand_lps;   // per node; delivered demand (junctions only)
    std::vector<double> emitter_lps;  // per node; emitter discharge
    std::vector<double> flow_lps;     // per link, positive from link_from to link_to
    std::vector<double> tank_level_m; // per tank, level at `time_s`
    std::vector<TankFlag> tank_flags;

    int iterations = 0;
    double max_continuity_residual_lps = 0.0;
    double relative_flow_change = 0.0;
    std::vector<std::size_t> negative_pressure_nodes;

    [[nodiscard]] double pressure_m(const Network& net, std::size_t node) const
    {
        return head_m[node] - net.node_elevation(node);
    }
};

struct SolverOptions {
    int max_iterations = 200;
    double relative_flow_tolerance = 1e-4; // max |dQ| / max |Q|
    double continuity_tolerance_lps = 1e-6;
};

/// Demand-driven global-gradient (Todini) solver with Hazen-Williams pipes, fitted pump curves
/// and square-root emitters. Holds the factorization structure of one network, so keep one
/// instance per thread.
class HydraulicSolver {
public:
    explicit HydraulicSolver(const Network& net, SolverOptions options = {});
    ~HydraulicSolver();
    HydraulicSolver(HydraulicSolver&&) noexcept;
    HydraulicSolver& operator=(HydraulicSolver&&) noexcept;
    HydraulicSolver(const HydraulicSolver&) = delete;
    HydraulicSolver& operator=(const HydraulicSolver&) = delete;

    /// Solves one steady state. `demands_lps` is per junction; `tank_levels_m` per tank.
    /// `warm_start` (same network) seeds the flows. Throws SimulationError on non-convergence.
    HydraulicState solve_snapshot(std::span<const double> demands_lps, std::span<const ActiveEmitter> emitters,
                                  std::span<const double> tank_levels_m, double time_s,
                                  const HydraulicState* warm_start = nullptr);

    [[nodiscard]] const Network& network() const noexcept { return *net_; }

private:
    struct Impl;
    const Network* net_;
    std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper around a temporary solver.
HydraulicState solve_snapshot(const Network& net, std::span<const double> demands_lps,
                              std::span<const ActiveEmitter> emitters, std::span<const double> tank_levels_m);

/// Per-hour, per-junction demands (L/s).
using DemandTrajectory = std::vector<std::vector<double>>;

/// Base demand x hourly pattern multiplier x `scale` for every hour of the horizon.
DemandTrajectory pattern_demands(const Network& net, std::size_t hours = kHoursPerDay, double scale = 1.0);

struct ExtendedPeriodOptions {
    double horizon_s = 24.0 * kSecondsPerHour;
    double step_s = kSecondsPerHour;
};

/// Explicit-Euler tank integration between steady snapshots. Returns one snapshot per step,
/// the first at t = 0. Tank levels are clamped to [min, max] and flagged.
std::vector<HydraulicState> run_extended_period(const Network& net, const DemandTrajectory& demands,
                                                std::span<const EmitterSpec> emitters,
                                                const ExtendedPeriodOptions& options = {});

/// Integrates tank levels over `dt_s` using the snapshot's link flows; clamps and flags.
void advance_tank_levels(const Network& net, const HydraulicState& snapshot, double dt_s,
                         std::vector<double>& levels_m, std::vector<TankFlag>& flags);

} // namespace wdsguard
