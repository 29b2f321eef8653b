#include "wdsguard/hydraulics.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace wdsguard {

namespace {

constexpr double kMinGradient = 1e-3;       // m per m3/s; below this links are linearized
constexpr double kClosedConductance = 1e-8; // 1/CBIG for closed pumps
constexpr std::size_t kNoUnknown = std::numeric_limits<std::size_t>::max();

} // namespace

double emitter_coefficient_si(double gpm_per_sqrt_psi)
{
    return gpm_per_sqrt_psi * kGpmToCubicMetres / std::sqrt(kMetresPerPsi);
}

double hazen_williams_resistance(double length_m, double diameter_mm, double roughness)
{
    const double d = diameter_mm / 1000.0;
    return 10.667 * length_m / (std::pow(roughness, kHazenWilliamsExponent) * std::pow(d, 4.871));
}

struct HydraulicSolver::Impl {
    std::size_t junctions = 0;
    std::vector<std::size_t> unknown_of_node; // node -> row, or kNoUnknown for fixed heads
    std::vector<double> resistance;           // per pipe
    Eigen::SparseMatrix<double> matrix;
    std::vector<Eigen::Index> diag_pos;
    std::vector<Eigen::Index> offdiag_pos; // per link (both ends unknown), kNoUnknown otherwise
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    bool analyzed = false;
    SolverOptions options;
};

HydraulicSolver::HydraulicSolver(const Network& net, SolverOptions options)
    : net_(&net), impl_(std::make_unique<Impl>())
{
    auto& im = *impl_;
    im.options = options;
    im.junctions = net.junction_count();
    im.unknown_of_node.assign(net.node_count(), kNoUnknown);
    for (std::size_t j = 0; j < im.junctions; ++j) {
        im.unknown_of_node[j] = j;
    }
    for (const auto& p : net.pipes()) {
        im.resistance.push_back(hazen_williams_resistance(p.length_m, p.diameter_mm, p.roughness));
    }

    const auto n = static_cast<Eigen::Index>(im.junctions);
    std::vector<Eigen::Triplet<double>> triplets;
    for (Eigen::Index i = 0; i < n; ++i) {
        triplets.emplace_back(i, i, 1.0);
    }
    for (std::size_t l = 0; l < net.link_count(); ++l) {
        const auto a = im.unknown_of_node[net.link_from(l)];
        const auto b = im.unknown_of_node[net.link_to(l)];
        if (a != kNoUnknown && b != kNoUnknown) {
            triplets.emplace_back(static_cast<Eigen::Index>(std::max(a, b)), static_cast<Eigen::Index>(std::min(a, b)), 1.0);
        }
    }
    im.matrix.resize(n, n);
    im.matrix.setFromTriplets(triplets.begin(), triplets.end());
    im.matrix.makeCompressed();

    auto position = [&](Eigen::Index row, Eigen::Index col) {
        const auto* outer = im.matrix.outerIndexPtr();
        const auto* inner = im.matrix.innerIndexPtr();
        const auto* first = inner + outer[col];
        const auto* last = inner + outer[col + 1];
        const auto* it = std::lower_bound(first, last, static_cast<int>(row));
        return static_cast<Eigen::Index>(it - inner);
    };
    im.diag_pos.resize(im.junctions);
    for (Eigen::Index i = 0; i < n; ++i) {
        im.diag_pos[static_cast<std::size_t>(i)] = position(i, i);
    }
    im.offdiag_pos.assign(net.link_count(), static_cast<Eigen::Index>(-1));
    for (std::size_t l = 0; l < net.link_count(); ++l) {
        const auto a = im.unknown_of_node[net.link_from(l)];
        const auto b = im.unknown_of_node[net.link_to(l)];
        if (a != kNoUnknown && b != kNoUnknown) {
            im.offdiag_pos[l] = position(static_cast<Eigen::Index>(std::max(a, b)), static_cast<Eigen::Index>(std::min(a, b)));
        }
    }
}

HydraulicSolver::~HydraulicSolver() = default;
HydraulicSolver::HydraulicSolver(HydraulicSolver&&) noexcept = default;
HydraulicSolver& HydraulicSolver::operator=(HydraulicSolver&&) noexcept = default;

HydraulicState HydraulicSolver::solve_snapshot(std::span<const double> demands_lps,
                                               std::span<const ActiveEmitter> emitters,
                                               std::span<const double> tank_levels_m, double time_s,
                                               const HydraulicState* warm_start)
{
    const Network& net = *net_;
    auto& im = *impl_;
    const SolverOptions& options = impl_->options;
    const std::size_t nj = im.junctions;
    const std::size_t nn = net.node_count();
    const std::size_t nl = net.link_count();
    const std::size_t npipes = net.pipes().size();

    if (demands_lps.size() != nj) {
        throw std::invalid_argument("demand vector must have one entry per junction");
    }
    if (tank_levels_m.size() != net.tanks().size()) {
        throw std::invalid_argument("tank level vector must have one entry per tank");
    }

    HydraulicState st;
    st.time_s = time_s;
    st.head_m.assign(nn, 0.0);
    st.demand_lps.assign(nn, 0.0);
    st.emitter_lps.assign(nn, 0.0);
    st.flow_lps.assign(nl, 0.0);
    st.tank_level_m.assign(tank_levels_m.begin(), tank_levels_m.end());
    st.tank_flags.assign(net.tanks().size(), TankFlag::Normal);

    // fixed heads
    for (std::size_t r = 0; r < net.reservoirs().size(); ++r) {
        st.head_m[net.reservoir_node(r)] = net.reservoirs()[r].head_m;
    }
    for (std::size_t t = 0; t < net.tanks().size(); ++t) {
        st.head_m[net.tank_node(t)] = net.tanks()[t].elevation_m + tank_levels_m[t];
    }

    std::vector<double> demand(nj); // m3/s
    for (std::size_t j = 0; j < nj; ++j) {
        if (!(demands_lps[j] >= 0.0)) {
            throw std::invalid_argument("demands must be non-negative");
        }
        demand[j] = demands_lps[j] / 1000.0;
    }

    // initial flows (m3/s)
    std::vector<double> q(nl);
    std::vector<char> pump_closed(net.pumps().size(), 0);
    const bool warm = warm_start != nullptr && warm_start->flow_lps.size() == nl;
    for (std::size_t l = 0; l < nl; ++l) {
        if (warm) {
            q[l] = warm_start->flow_lps[l] / 1000.0;
        } else if (l < npipes) {
            const double d = net.pipes()[l].diameter_mm / 1000.0;
            q[l] = std::numbers::pi * d * d / 4.0 * 0.3;
        } else {
            q[l] = net.pumps()[l - npipes].curve[1].flow_lps / 1000.0;
        }
    }
    std::vector<double> eq(emitters.size());
    std::vector<char> emitter_closed(emitters.size(), 0);
    for (std::size_t e = 0; e < emitters.size(); ++e) {
        const auto node = emitters[e].node;
        if (net.node_kind(node) != NodeKind::Junction) {
            throw std::invalid_argument(fmt::format("emitter at non-junction node {}", net.node_id(node)));
        }
        double p0 = 30.0;
        if (warm && warm_start->head_m.size() == nn) {
            p0 = std::max(warm_start->head_m[node] - net.node_elevation(node), 1.0);
        }
        eq[e] = emitters[e].coefficient_si * std::sqrt(p0);
    }

    std::vector<double> p_coef(nl), y_coef(nl), pe(emitters.size()), ye(emitters.size());
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(nj));
    Eigen::VectorXd heads(static_cast<Eigen::Index>(nj));
    double* values = im.matrix.valuePtr();

    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        std::fill(values, values + im.matrix.nonZeros(), 0.0);
        for (std::size_t j = 0; j < nj; ++j) {
            rhs[static_cast<Eigen::Index>(j)] = -demand[j];
        }

        for (std::size_t l = 0; l < nl; ++l) {
            double grad = 0.0;
            double loss = 0.0;
            bool closed = false;
            if (l < npipes) {
                const double r = im.resistance[l];
                const double aq = std::abs(q[l]);
                grad = kHazenWilliamsExponent * r * std::pow(aq, kHazenWilliamsExponent - 1.0);
                if (grad < kMinGradient) {
                    grad = kMinGradient;
                    loss = grad * q[l];
                } else {
                    loss = grad * q[l] / kHazenWilliamsExponent;
                }
            } else {
                const auto& law = net.pump_law(l - npipes);
                closed = pump_closed[l - npipes] != 0;
                const double qq = std::max(q[l], 1e-8);
                grad = std::max(law.exponent * law.resistance * std::pow(qq, law.exponent - 1.0), kMinGradient);
                loss = law.resistance * std::pow(qq, law.exponent) - law.shutoff_head_m;
            }
            if (closed) {
                p_coef[l] = kClosedConductance;
                y_coef[l] = q[l];
            } else {
                p_coef[l] = 1.0 / grad;
                y_coef[l] = loss / grad;
            }

            const auto from = net.link_from(l);
            const auto to = net.link_to(l);
            const auto a = im.unknown_of_node[from];
            const auto b = im.unknown_of_node[to];
            const double pl = p_coef[l];
            const double through = q[l] - y_coef[l];
            if (a != kNoUnknown) {
                values[im.diag_pos[a]] += pl;
                rhs[static_cast<Eigen::Index>(a)] -= through;
                if (b == kNoUnknown) {
                    rhs[static_cast<Eigen::Index>(a)] += pl * st.head_m[to];
                }
            }
            if (b != kNoUnknown) {
                values[im.diag_pos[b]] += pl;
                rhs[static_cast<Eigen::Index>(b)] += through;
                if (a == kNoUnknown) {
                    rhs[static_cast<Eigen::Index>(b)] += pl * st.head_m[from];
                }
            }
            if (a != kNoUnknown && b != kNoUnknown) {
                values[im.offdiag_pos[l]] -= pl;
            }
        }

        for (std::size_t e = 0; e < emitters.size(); ++e) {
            if (emitter_closed[e]) {
                pe[e] = 0.0;
                ye[e] = 0.0;
                continue;
            }
            const double c2 = emitters[e].coefficient_si * emitters[e].coefficient_si;
            const double aq = std::abs(eq[e]);
            double grad = 2.0 * aq / c2;
            double loss = aq * eq[e] / c2;
            if (grad < kMinGradient) {
                grad = kMinGradient;
                loss = grad * eq[e];
            }
            pe[e] = 1.0 / grad;
            ye[e] = loss / grad;
            const auto node = emitters[e].node;
            const auto row = static_cast<Eigen::Index>(node);
            values[im.diag_pos[node]] += pe[e];
            rhs[row] += -(eq[e] - ye[e]) + pe[e] * net.node_elevation(node);
        }

        if (nj > 0) {
            if (!im.analyzed) {
                im.ldlt.analyzePattern(im.matrix);
                im.analyzed = true;
            }
            im.ldlt.factorize(im.matrix);
            if (im.ldlt.info() != Eigen::Success) {
                throw SimulationError(fmt::format("t={}s: singular head matrix (a demand node is cut off from every "
                                                  "fixed-head source)",
                                                  time_s));
            }
            heads = im.ldlt.solve(rhs);
            // one step of iterative refinement keeps continuity residuals near round-off
            const Eigen::VectorXd residual = rhs - im.matrix.selfadjointView<Eigen::Lower>() * heads;
            heads += im.ldlt.solve(residual);
            for (std::size_t j = 0; j < nj; ++j) {
                st.head_m[j] = heads[static_cast<Eigen::Index>(j)];
            }
        }

        double max_change = 0.0;
        double max_flow = 0.0;
        bool status_changed = false;
        for (std::size_t l = 0; l < nl; ++l) {
            const double dh = st.head_m[net.link_from(l)] - st.head_m[net.link_to(l)];
            const double next = q[l] - y_coef[l] + p_coef[l] * dh;
            max_change = std::max(max_change, std::abs(next - q[l]));
            max_flow = std::max(max_flow, std::abs(next));
            q[l] = next;
            if (l >= npipes) {
                const auto k = l - npipes;
                const double gain = -dh;
                if (!pump_closed[k] && q[l] < 0.0) {
                    pump_closed[k] = 1;
                    status_changed = true;
                } else if (pump_closed[k] && gain < net.pump_law(k).shutoff_head_m) {
                    pump_closed[k] = 0;
                    q[l] = net.pumps()[k].curve[1].flow_lps / 1000.0;
                    status_changed = true;
                }
            }
        }
        for (std::size_t e = 0; e < emitters.size(); ++e) {
            const auto node = emitters[e].node;
            const double pressure = st.head_m[node] - net.node_elevation(node);
            if (emitter_closed[e]) {
                if (pressure > 0.0) {
                    emitter_closed[e] = 0;
                    eq[e] = emitters[e].coefficient_si * std::sqrt(pressure);
                    status_changed = true;
                }
                continue;
            }
            const double next = eq[e] - ye[e] + pe[e] * pressure;
            max_change = std::max(max_change, std::abs(next - eq[e]));
            max_flow = std::max(max_flow, std::abs(next));
            eq[e] = next;
            if (eq[e] < 0.0 || pressure <= 0.0) {
                emitter_closed[e] = 1;
                eq[e] = 0.0;
                status_changed = true;
            }
        }

        // continuity with the updated flows
        std::vector<double> balance(nn, 0.0);
        for (std::size_t l = 0; l < nl; ++l) {
            balance[net.link_from(l)] -= q[l];
            balance[net.link_to(l)] += q[l];
        }
        for (std::size_t e = 0; e < emitters.size(); ++e) {
            balance[emitters[e].node] -= eq[e];
        }
        double max_residual = 0.0;
        for (std::size_t j = 0; j < nj; ++j) {
            max_residual = std::max(max_residual, std::abs(balance[j] - demand[j]));
        }

        st.iterations = iter;
        st.relative_flow_change = max_flow > 0.0 ? max_change / max_flow : max_change;
        st.max_continuity_residual_lps = max_residual * 1000.0;
        if (!status_changed && st.relative_flow_change <= options.relative_flow_tolerance &&
            st.max_continuity_residual_lps <= options.continuity_tolerance_lps) {
            break;
        }
        if (iter == options.max_iterations) {
            throw SimulationError(fmt::format("t={}s: hydraulics did not converge after {} iterations "
                                              "(relative flow change {:.3g}, continuity residual {:.3g} L/s)",
                                              time_s, iter, st.relative_flow_change, st.max_continuity_residual_lps));
        }
    }

    for (std::size_t l = 0; l < nl; ++l) {
        st.flow_lps[l] = q[l] * 1000.0;
    }
    for (std::size_t j = 0; j < nj; ++j) {
        st.demand_lps[j] = demands_lps[j];
        if (st.head_m[j] < net.node_elevation(j)) {
            st.negative_pressure_nodes.push_back(j);
        }
    }
    for (std::size_t e = 0; e < emitters.size(); ++e) {
        st.emitter_lps[emitters[e].node] += eq[e] * 1000.0;
    }
    return st;
}

HydraulicState solve_snapshot(const Network& net, std::span<const double> demands_lps,
                              std::span<const ActiveEmitter> emitters, std::span<const double> tank_levels_m)
{
    HydraulicSolver solver(net);
    return solver.solve_snapshot(demands_lps, emitters, tank_levels_m, 0.0);
}

DemandTrajectory pattern_demands(const Network& net, std::size_t hours, double scale)
{
    DemandTrajectory out(hours, std::vector<double>(net.junction_count(), 0.0));
    for (std::size_t h = 0; h < hours; ++h) {
        for (std::size_t j = 0; j < net.junction_count(); ++j) {
            out[h][j] = net.junctions()[j].base_demand_lps * net.pattern_multiplier(j, h) * scale;
        }
    }
    return out;
}

void advance_tank_levels(const Network& net, const HydraulicState& snapshot, double dt_s,
                         std::vector<double>& levels_m, std::vector<TankFlag>& flags)
{
    std::vector<double> inflow(net.tanks().size(), 0.0);
    const auto first_tank = net.tank_node(0);
    for (std::size_t l = 0; l < net.link_count(); ++l) {
        const auto from = net.link_from(l);
        const auto to = net.link_to(l);
        if (net.node_kind(to) == NodeKind::Tank) {
            inflow[to - first_tank] += snapshot.flow_lps[l];
        }
        if (net.node_kind(from) == NodeKind::Tank) {
            inflow[from - first_tank] -= snapshot.flow_lps[l];
        }
    }
    flags.assign(net.tanks().size(), TankFlag::Normal);
    for (std::size_t t = 0; t < net.tanks().size(); ++t) {
        const auto& tank = net.tanks()[t];
        levels_m[t] += inflow[t] / 1000.0 * dt_s / tank.area_m2();
        if (levels_m[t] > tank.max_level_m) {
            levels_m[t] = tank.max_level_m;
            flags[t] = TankFlag::Full;
        } else if (levels_m[t] < tank.min_level_m) {
            levels_m[t] = tank.min_level_m;
            flags[t] = TankFlag::Empty;
        }
    }
}

std::vector<HydraulicState> run_extended_period(const Network& net, const DemandTrajectory& demands,
                                                std::span<const EmitterSpec> emitters,
                                                const ExtendedPeriodOptions& options)
{
    const auto steps = static_cast<std::size_t>(std::llround(options.horizon_s / options.step_s));
    if (demands.size() * kSecondsPerHour < options.horizon_s) {
        throw std::invalid_argument("demand trajectory does not cover the horizon");
    }
    std::vector<std::pair<std::size_t, double>> resolved;
    for (const auto& e : emitters) {
        resolved.emplace_back(net.require_node(e.node), emitter_coefficient_si(e.coefficient_gpm_psi));
    }

    HydraulicSolver solver(net);
    std::vector<double> levels;
    for (const auto& t : net.tanks()) {
        levels.push_back(t.init_level_m);
    }
    std::vector<TankFlag> flags(net.tanks().size(), TankFlag::Normal);

    std::vector<HydraulicState> out;
    out.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * options.step_s;
        const auto hour = static_cast<std::size_t>(t / kSecondsPerHour);
        std::vector<ActiveEmitter> active;
        for (std::size_t e = 0; e < emitters.size(); ++e) {
            if (t >= emitters[e].start_s && t < emitters[e].end_s) {
                active.push_back({resolved[e].first, resolved[e].second});
            }
        }
        try {
            auto st = solver.solve_snapshot(demands[hour], active, levels, t, out.empty() ? nullptr : &out.back());
            st.tank_flags = flags;
            advance_tank_levels(net, st, options.step_s, levels, flags);
            out.push_back(std::move(st));
        } catch (const SimulationError& err) {
            throw SimulationError(fmt::format("extended period at {:.0f} s: {}", t, err.what()));
        }
    }
    return out;
}

} // namespace wdsguard
