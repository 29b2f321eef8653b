#include "wdsguard/quality.hpp"

#include "wdsguard/text_format.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace wdsguard {

namespace {

constexpr double kFlowFloorLps = 1e-9;
constexpr double kVolumeFloorL = 1e-12;

std::size_t idx(Species s)
{
    return static_cast<std::size_t>(s);
}

} // namespace

std::string_view to_string(Species s)
{
    return s == Species::Contaminant ? "contaminant" : "dye";
}

double ResolvedSource::mass_between(double t0, double t1) const
{
    const double lo = std::max(t0, start_s);
    const double hi = std::min(t1, end_s);
    return hi > lo ? rate_mg_per_s * (hi - lo) : 0.0;
}

std::vector<ResolvedSource> resolve_sources(const Network& net, std::span<const SourceSpec> sources)
{
    std::vector<ResolvedSource> out;
    out.reserve(sources.size());
    for (const auto& s : sources) {
        if (!(s.mass_kg > 0.0) || !(s.duration_s > 0.0)) {
            throw ValidationError(s.node, "source mass and duration must be positive");
        }
        out.push_back({net.require_node(s.node), s.species, s.mass_rate_mg_per_s(), s.start_s, s.start_s + s.duration_s});
    }
    return out;
}

double TransportState::resident_mg(Species s) const
{
    const auto k = idx(s);
    double total = 0.0;
    for (const auto& pipe : segments[k]) {
        for (const auto& seg : pipe) {
            total += seg.volume_l * seg.conc_mgl;
        }
    }
    for (double m : tank_mass_mg[k]) {
        total += m;
    }
    for (double m : held_mg[k]) {
        total += m;
    }
    return total;
}

TracerTransport::TracerTransport(const Network& net, double merge_tolerance_mgl)
    : net_(&net), merge_tolerance_(merge_tolerance_mgl)
{
    pipe_volume_l_.assign(net.link_count(), 0.0);
    for (std::size_t l = 0; l < net.pipes().size(); ++l) {
        pipe_volume_l_[l] = net.pipes()[l].volume_l();
    }
    out_links_.resize(net.node_count());
    in_links_.resize(net.node_count());
    link_flow_lps_.assign(net.link_count(), 0.0);
    forward_.assign(net.link_count(), 1);
}

TransportState TracerTransport::initial_state(std::span<const double> tank_levels_m) const
{
    const Network& net = *net_;
    TransportState st;
    for (std::size_t k = 0; k < kSpeciesCount; ++k) {
        st.segments[k].resize(net.link_count());
        for (std::size_t l = 0; l < net.pipes().size(); ++l) {
            st.segments[k][l].push_back({pipe_volume_l_[l], 0.0});
        }
        st.tank_mass_mg[k].assign(net.tanks().size(), 0.0);
        st.held_mg[k].assign(net.node_count(), 0.0);
        st.node_conc[k].assign(net.node_count(), 0.0);
        st.delivered_mg[k].assign(net.node_count(), 0.0);
    }
    for (std::size_t t = 0; t < net.tanks().size(); ++t) {
        st.tank_volume_l.push_back(net.tanks()[t].area_m2() * tank_levels_m[t] * 1000.0);
    }
    return st;
}

void TracerTransport::set_hydraulics(const HydraulicState& snapshot)
{
    const Network& net = *net_;
    hyd_ = &snapshot;
    for (auto& v : out_links_) {
        v.clear();
    }
    for (auto& v : in_links_) {
        v.clear();
    }
    std::vector<std::size_t> indegree(net.node_count(), 0);
    for (std::size_t l = 0; l < net.link_count(); ++l) {
        const double q = snapshot.flow_lps[l];
        if (std::abs(q) <= kFlowFloorLps) {
            link_flow_lps_[l] = 0.0;
            continue;
        }
        link_flow_lps_[l] = std::abs(q);
        forward_[l] = q > 0.0 ? 1 : 0;
        const auto up = forward_[l] ? net.link_from(l) : net.link_to(l);
        const auto down = forward_[l] ? net.link_to(l) : net.link_from(l);
        out_links_[up].push_back(l);
        in_links_[down].push_back(l);
        if (net.node_kind(up) == NodeKind::Junction) {
            ++indegree[down];
        }
    }

    // Kahn ordering of junctions; reservoirs and tanks are boundaries processed first
    order_.clear();
    std::vector<std::size_t> ready;
    for (std::size_t j = 0; j < net.junction_count(); ++j) {
        if (indegree[j] == 0) {
            ready.push_back(j);
        }
    }
    std::size_t head = 0;
    while (head < ready.size()) {
        const auto u = ready[head++];
        order_.push_back(u);
        for (auto l : out_links_[u]) {
            const auto down = forward_[l] ? net.link_to(l) : net.link_from(l);
            if (net.node_kind(down) == NodeKind::Junction && --indegree[down] == 0) {
                ready.push_back(down);
            }
        }
    }
    if (order_.size() != net.junction_count()) {
        throw SimulationError(fmt::format("t={}s: circulating flow path (through a pump) cannot be ordered for transport",
                                          snapshot.time_s));
    }
}

void TracerTransport::step(TransportState& st, double t0, double dt, std::span<const ResolvedSource> sources) const
{
    const Network& net = *net_;
    if (hyd_ == nullptr) {
        throw std::logic_error("TracerTransport::step before set_hydraulics");
    }
    const HydraulicState& hyd = *hyd_;
    const std::size_t nn = net.node_count();
    const std::size_t first_tank = net.tank_node(0);
    const double t1 = t0 + dt;

    for (std::size_t s = 0; s < kSpeciesCount; ++s) {
        auto& account = st.account[s];
        auto& held = st.held_mg[s];
        auto& conc = st.node_conc[s];
        auto& segs = st.segments[s];

        std::vector<double> in_mass(nn, 0.0);
        std::vector<double> src_mass(nn, 0.0);
        for (const auto& src : sources) {
            if (idx(src.species) != s) {
                continue;
            }
            const double m = src.mass_between(t0, t1);
            src_mass[src.node] += m;
            account.injected_mg += m;
        }

        // Moves `v` litres at concentration `c` into link l's inlet and returns the mass released
        // at its outlet into the downstream node.
        auto transport_link = [&](std::size_t l, double c) {
            const double v = link_flow_lps_[l] * dt;
            auto& dq = segs[l];
            const bool fwd = forward_[l] != 0;
            Segment* inlet = dq.empty() ? nullptr : (fwd ? &dq.front() : &dq.back());
            if (inlet != nullptr && std::abs(inlet->conc_mgl - c) <= merge_tolerance_) {
                const double total = inlet->volume_l + v;
                inlet->conc_mgl = (inlet->conc_mgl * inlet->volume_l + c * v) / total;
                inlet->volume_l = total;
            } else if (fwd) {
                dq.push_front({v, c});
            } else {
                dq.push_back({v, c});
            }

            double remaining = v;
            double released = 0.0;
            const double sliver = kVolumeFloorL + 1e-12 * pipe_volume_l_[l];
            while (remaining > 0.0 && !dq.empty()) {
                Segment& out = fwd ? dq.back() : dq.front();
                if (out.volume_l <= remaining + sliver) {
                    released += out.volume_l * out.conc_mgl;
                    remaining -= out.volume_l;
                    if (fwd) {
                        dq.pop_back();
                    } else {
                        dq.pop_front();
                    }
                } else {
                    released += remaining * out.conc_mgl;
                    out.volume_l -= remaining;
                    remaining = 0.0;
                }
            }
            const auto down = fwd ? net.link_to(l) : net.link_from(l);
            in_mass[down] += released;
        };

        // boundaries: reservoirs carry only injected mass, tanks release at their mixed concentration
        for (std::size_t r = 0; r < net.reservoirs().size(); ++r) {
            const auto u = net.reservoir_node(r);
            double v_out = 0.0;
            for (auto l : out_links_[u]) {
                v_out += link_flow_lps_[l] * dt;
            }
            const double m = src_mass[u] + held[u];
            if (v_out > kVolumeFloorL) {
                const double c = m / v_out;
                held[u] = 0.0;
                conc[u] = c;
                for (auto l : out_links_[u]) {
                    transport_link(l, c);
                }
            } else {
                held[u] = m;
                if (src_mass[u] > 0.0) {
                    st.warnings.push_back(fmt::format("t={}s: source at {} has no outflow; mass held at node", t0,
                                                      net.node_id(u)));
                }
            }
        }
        std::vector<double> tank_out_mass(net.tanks().size(), 0.0);
        for (std::size_t t = 0; t < net.tanks().size(); ++t) {
            const auto u = net.tank_node(t);
            const double vol = st.tank_volume_l[t];
            const double c = vol > kVolumeFloorL ? st.tank_mass_mg[s][t] / vol : 0.0;
            conc[u] = c;
            for (auto l : out_links_[u]) {
                const double v = link_flow_lps_[l] * dt;
                tank_out_mass[t] += std::min(c * v, st.tank_mass_mg[s][t] - tank_out_mass[t]);
                transport_link(l, c);
            }
        }

        for (auto u : order_) {
            const double demand_v = hyd.demand_lps[u] * dt;
            const double emitter_v = hyd.emitter_lps[u] * dt;
            double v_out = demand_v + emitter_v;
            for (auto l : out_links_[u]) {
                v_out += link_flow_lps_[l] * dt;
            }
            const double m = in_mass[u] + held[u] + src_mass[u];
            if (v_out <= kVolumeFloorL) {
                held[u] = m;
                if (src_mass[u] > 0.0) {
                    st.warnings.push_back(fmt::format("t={}s: source at {} has no outflow; mass held at node", t0,
                                                      net.node_id(u)));
                }
                continue;
            }
            held[u] = 0.0;
            const double c = m / v_out;
            conc[u] = c;
            const double to_demand = c * demand_v;
            account.consumed_mg += to_demand;
            st.delivered_mg[s][u] += to_demand;
            account.flushed_mg += c * emitter_v;
            for (auto l : out_links_[u]) {
                transport_link(l, c);
            }
        }

        for (std::size_t r = 0; r < net.reservoirs().size(); ++r) {
            const auto u = net.reservoir_node(r);
            account.returned_mg += in_mass[u];
        }
        for (std::size_t t = 0; t < net.tanks().size(); ++t) {
            const auto u = first_tank + t;
            st.tank_mass_mg[s][t] += in_mass[u] + src_mass[u] - tank_out_mass[t];
            st.tank_mass_mg[s][t] = std::max(st.tank_mass_mg[s][t], 0.0);
        }
    }

    // tank water volumes follow the link flows
    for (std::size_t t = 0; t < net.tanks().size(); ++t) {
        const auto u = first_tank + t;
        double net_in = 0.0;
        for (auto l : in_links_[u]) {
            net_in += link_flow_lps_[l] * dt;
        }
        for (auto l : out_links_[u]) {
            net_in -= link_flow_lps_[l] * dt;
        }
        st.tank_volume_l[t] = std::max(st.tank_volume_l[t] + net_in, 0.0);
    }
}

// --- batch run -----------------------------------------------------------------------------

double TracerField::at(Species s, std::size_t node, double t) const
{
    const auto& series = conc[idx(s)];
    const double steps = t / quality_step_s;
    const auto k = static_cast<long>(std::ceil(steps - 1e-9)) - 1;
    if (k < 0 || series.empty()) {
        return 0.0;
    }
    const auto i = std::min(static_cast<std::size_t>(k), series.size() - 1);
    return series[i][node];
}

TracerField run_tracer(const Network& net, std::span<const HydraulicState> trajectory,
                       std::span<const SourceSpec> sources, double quality_step_s, double horizon_s)
{
    if (trajectory.empty()) {
        throw std::invalid_argument("run_tracer needs at least one hydraulic snapshot");
    }
    if (!(quality_step_s > 0.0)) {
        throw std::invalid_argument("quality step must be positive");
    }
    for (std::size_t k = 1; k < trajectory.size(); ++k) {
        const double gap = trajectory[k].time_s - trajectory[k - 1].time_s;
        const double ratio = gap / quality_step_s;
        if (std::abs(ratio - std::round(ratio)) > 1e-9) {
            throw std::invalid_argument("quality step must divide the hydraulic step");
        }
    }
    const auto resolved = resolve_sources(net, sources);

    TracerTransport transport(net);
    TracerField field;
    field.quality_step_s = quality_step_s;
    field.final_state = transport.initial_state(trajectory.front().tank_level_m);
    auto& st = field.final_state;

    const auto steps = static_cast<std::size_t>(std::llround(horizon_s / quality_step_s));
    std::size_t current = 0;
    transport.set_hydraulics(trajectory[0]);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t0 = static_cast<double>(k) * quality_step_s;
        while (current + 1 < trajectory.size() && trajectory[current + 1].time_s <= t0 + 1e-9) {
            ++current;
            transport.set_hydraulics(trajectory[current]);
        }
        transport.step(st, t0, quality_step_s, resolved);
        for (std::size_t s = 0; s < kSpeciesCount; ++s) {
            field.conc[s].push_back(st.node_conc[s]);
        }
    }
    return field;
}

double BalanceReport::relative_error() const
{
    const double scale = std::max(std::abs(injected_kg), 1e-300);
    if (injected_kg == 0.0) {
        return std::abs(accounted_kg());
    }
    return std::abs(accounted_kg() - injected_kg) / scale;
}

BalanceReport mass_balance(const Network& net, const TracerField& field, std::span<const HydraulicState> trajectory,
                           std::span<const SourceSpec> sources, Species species)
{
    BalanceReport report;
    const double dt = field.quality_step_s;
    const auto& series = field.conc[idx(species)];
    const double horizon = dt * static_cast<double>(series.size());

    for (const auto& src : resolve_sources(net, sources)) {
        if (src.species == species) {
            report.injected_kg += src.mass_between(0.0, horizon) * 1e-6;
        }
    }

    std::size_t current = 0;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const double t0 = static_cast<double>(k) * dt;
        while (current + 1 < trajectory.size() && trajectory[current + 1].time_s <= t0 + 1e-9) {
            ++current;
        }
        const auto& hyd = trajectory[current];
        for (std::size_t j = 0; j < net.junction_count(); ++j) {
            report.consumed_kg += hyd.demand_lps[j] * dt * series[k][j] * 1e-6;
            report.flushed_kg += hyd.emitter_lps[j] * dt * series[k][j] * 1e-6;
        }
    }
    report.returned_kg = field.final_state.account[idx(species)].returned_mg * 1e-6;
    report.resident_kg = field.final_state.resident_mg(species) * 1e-6;
    return report;
}

} // namespace wdsguard
