#include "wdsguard/netmodel.hpp"

#include "wdsguard/text_format.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <set>

namespace wdsguard {

std::string_view to_string(ConsumerClass c)
{
    switch (c) {
    case ConsumerClass::ResidentialLow:
        return "residential-low";
    case ConsumerClass::ResidentialMedium:
        return "residential-medium";
    case ConsumerClass::ResidentialHigh:
        return "residential-high";
    case ConsumerClass::Commercial:
        return "commercial";
    case ConsumerClass::Industrial:
        return "industrial";
    }
    return "unknown";
}

std::optional<ConsumerClass> consumer_class_from_string(std::string_view tag)
{
    for (auto c : kAllConsumerClasses) {
        if (to_string(c) == tag) {
            return c;
        }
    }
    return std::nullopt;
}

double default_retained_fraction(ConsumerClass c)
{
    switch (c) {
    case ConsumerClass::ResidentialLow:
        return 0.60;
    case ConsumerClass::ResidentialMedium:
        return 0.51;
    case ConsumerClass::ResidentialHigh:
        return 0.43;
    case ConsumerClass::Commercial:
        return 1.0;
    case ConsumerClass::Industrial:
        return 0.96;
    }
    return 1.0;
}

double Tank::area_m2() const
{
    return std::numbers::pi * diameter_m * diameter_m / 4.0;
}

double Pipe::volume_l() const
{
    const double d = diameter_mm / 1000.0;
    return std::numbers::pi * d * d / 4.0 * length_m * 1000.0;
}

PumpLaw fit_pump_curve(const std::array<PumpCurvePoint, 3>& curve)
{
    const double h0 = curve[0].head_m;
    const double q1 = curve[1].flow_lps / 1000.0;
    const double q2 = curve[2].flow_lps / 1000.0;
    const double drop1 = h0 - curve[1].head_m;
    const double drop2 = h0 - curve[2].head_m;
    PumpLaw law;
    law.shutoff_head_m = h0;
    law.exponent = std::log(drop2 / drop1) / std::log(q2 / q1);
    law.resistance = drop1 / std::pow(q1, law.exponent);
    return law;
}

// --- Network -------------------------------------------------------------------------------

namespace {

void require_positive(double v, const std::string& id, std::string_view what)
{
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError(id, fmt::format("{} must be strictly positive (got {})", what, v));
    }
}

} // namespace

Network Network::build(NetworkSpec spec)
{
    Network net;
    net.spec_ = std::move(spec);
    const auto& s = net.spec_;

    if (s.reservoirs.empty() && s.tanks.empty()) {
        throw ValidationError("network", "needs at least one reservoir or tank");
    }

    std::map<std::string, const Pattern*, std::less<>> patterns;
    for (const auto& p : s.patterns) {
        if (p.multipliers.size() != kHoursPerDay) {
            throw ValidationError(p.id, fmt::format("pattern must have 24 multipliers, has {}", p.multipliers.size()));
        }
        for (double m : p.multipliers) {
            if (!(m >= 0.0) || !std::isfinite(m)) {
                throw ValidationError(p.id, "pattern multipliers must be non-negative");
            }
        }
        if (!patterns.emplace(p.id, &p).second) {
            throw ValidationError(p.id, "duplicate pattern id");
        }
    }

    auto add_node = [&](const std::string& id) {
        if (id.empty()) {
            throw ValidationError("network", "empty node id");
        }
        if (!net.node_lookup_.emplace(id, net.node_lookup_.size()).second) {
            throw ValidationError(id, "duplicate node id");
        }
    };

    for (const auto& j : s.junctions) {
        add_node(j.id);
        if (!(j.base_demand_lps >= 0.0)) {
            throw ValidationError(j.id, "base demand must be non-negative");
        }
        if (!(j.population >= 0.0)) {
            throw ValidationError(j.id, "population must be non-negative");
        }
        if (j.intermediate && j.base_demand_lps != 0.0) {
            throw ValidationError(j.id, "intermediate node must have zero base demand");
        }
        std::size_t pattern = kNoPattern;
        if (!j.pattern.empty()) {
            auto it = patterns.find(j.pattern);
            if (it == patterns.end()) {
                throw ValidationError(j.pattern, fmt::format("pattern referenced by junction {} is not defined", j.id));
            }
            pattern = static_cast<std::size_t>(it->second - s.patterns.data());
        }
        net.junction_pattern_.push_back(pattern);
    }
    for (const auto& r : s.reservoirs) {
        add_node(r.id);
    }
    for (const auto& t : s.tanks) {
        add_node(t.id);
        require_positive(t.diameter_m, t.id, "tank diameter");
        if (!(t.min_level_m >= 0.0 && t.min_level_m <= t.init_level_m && t.init_level_m <= t.max_level_m)) {
            throw ValidationError(t.id, "tank levels must satisfy 0 <= min <= initial <= max");
        }
    }

    std::set<std::string, std::less<>> link_ids;
    auto resolve_ends = [&](const std::string& id, const std::string& from, const std::string& to) {
        if (!link_ids.insert(id).second) {
            throw ValidationError(id, "duplicate link id");
        }
        auto a = net.node_lookup_.find(from);
        if (a == net.node_lookup_.end()) {
            throw ValidationError(from, fmt::format("endpoint of link {} does not exist", id));
        }
        auto b = net.node_lookup_.find(to);
        if (b == net.node_lookup_.end()) {
            throw ValidationError(to, fmt::format("endpoint of link {} does not exist", id));
        }
        if (a->second == b->second) {
            throw ValidationError(id, "link connects a node to itself");
        }
        net.link_ends_.emplace_back(a->second, b->second);
    };

    for (const auto& p : s.pipes) {
        resolve_ends(p.id, p.from, p.to);
        require_positive(p.length_m, p.id, "pipe length");
        require_positive(p.diameter_mm, p.id, "pipe diameter");
        require_positive(p.roughness, p.id, "pipe roughness");
    }
    for (const auto& p : s.pumps) {
        resolve_ends(p.id, p.from, p.to);
        const auto& c = p.curve;
        if (c[0].flow_lps != 0.0 || !(c[1].flow_lps > 0.0) || !(c[2].flow_lps > c[1].flow_lps) ||
            !(c[0].head_m > c[1].head_m) || !(c[1].head_m > c[2].head_m)) {
            throw ValidationError(p.id, "pump curve needs points (0,h0),(q1,h1),(q2,h2) with rising flow and falling head");
        }
        net.pump_laws_.push_back(fit_pump_curve(c));
    }

    for (const auto& [cls, fraction] : s.retained_fraction) {
        if (!(fraction > 0.0 && fraction <= 1.0)) {
            throw ValidationError(std::string(to_string(cls)), "retained demand fraction must lie in (0, 1]");
        }
    }

    // adjacency (CSR)
    const std::size_t n = net.node_count();
    std::vector<std::size_t> degree(n, 0);
    for (const auto& [a, b] : net.link_ends_) {
        ++degree[a];
        ++degree[b];
    }
    net.adjacency_offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        net.adjacency_offsets_[i + 1] = net.adjacency_offsets_[i] + degree[i];
    }
    net.adjacency_.assign(net.adjacency_offsets_.back(), 0);
    std::vector<std::size_t> fill(net.adjacency_offsets_.begin(), net.adjacency_offsets_.end() - 1);
    for (std::size_t l = 0; l < net.link_ends_.size(); ++l) {
        net.adjacency_[fill[net.link_ends_[l].first]++] = l;
        net.adjacency_[fill[net.link_ends_[l].second]++] = l;
    }

    // connectivity
    if (n > 0) {
        std::vector<char> seen(n, 0);
        std::queue<std::size_t> frontier;
        frontier.push(0);
        seen[0] = 1;
        std::size_t visited = 1;
        while (!frontier.empty()) {
            const auto u = frontier.front();
            frontier.pop();
            for (auto l : net.incident_links(u)) {
                const auto v = net.link_ends_[l].first == u ? net.link_ends_[l].second : net.link_ends_[l].first;
                if (!seen[v]) {
                    seen[v] = 1;
                    ++visited;
                    frontier.push(v);
                }
            }
        }
        if (visited != n) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!seen[i]) {
                    throw ValidationError(net.node_id(i), "node is disconnected from the rest of the network");
                }
            }
        }
    }

    net.intermediate_flag_.assign(n, 0);
    for (std::size_t j = 0; j < s.junctions.size(); ++j) {
        if (s.junctions[j].intermediate) {
            net.intermediate_.push_back(j);
            net.intermediate_flag_[j] = 1;
        }
    }
    std::sort(net.intermediate_.begin(), net.intermediate_.end(),
              [&](std::size_t a, std::size_t b) { return s.junctions[a].id < s.junctions[b].id; });

    if (n > 0) {
        Coordinate lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
        Coordinate hi{-lo.x, -lo.y};
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = net.node_coordinate(i);
            lo.x = std::min(lo.x, c.x);
            lo.y = std::min(lo.y, c.y);
            hi.x = std::max(hi.x, c.x);
            hi.y = std::max(hi.y, c.y);
        }
        net.bounds_ = {lo, hi};
    }
    return net;
}

std::size_t Network::node_count() const noexcept
{
    return spec_.junctions.size() + spec_.reservoirs.size() + spec_.tanks.size();
}

std::size_t Network::link_count() const noexcept
{
    return spec_.pipes.size() + spec_.pumps.size();
}

std::optional<std::size_t> Network::node_index(std::string_view id) const
{
    auto it = node_lookup_.find(std::string(id));
    if (it == node_lookup_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t Network::require_node(std::string_view id) const
{
    auto idx = node_index(id);
    if (!idx) {
        throw ValidationError(std::string(id), "unknown node");
    }
    return *idx;
}

const std::string& Network::node_id(std::size_t node) const
{
    const auto nj = spec_.junctions.size();
    const auto nr = spec_.reservoirs.size();
    if (node < nj) {
        return spec_.junctions[node].id;
    }
    if (node < nj + nr) {
        return spec_.reservoirs[node - nj].id;
    }
    return spec_.tanks[node - nj - nr].id;
}

NodeKind Network::node_kind(std::size_t node) const
{
    const auto nj = spec_.junctions.size();
    if (node < nj) {
        return NodeKind::Junction;
    }
    if (node < nj + spec_.reservoirs.size()) {
        return NodeKind::Reservoir;
    }
    return NodeKind::Tank;
}

Coordinate Network::node_coordinate(std::size_t node) const
{
    const auto nj = spec_.junctions.size();
    const auto nr = spec_.reservoirs.size();
    if (node < nj) {
        return spec_.junctions[node].at;
    }
    if (node < nj + nr) {
        return spec_.reservoirs[node - nj].at;
    }
    return spec_.tanks[node - nj - nr].at;
}

double Network::node_elevation(std::size_t node) const
{
    const auto nj = spec_.junctions.size();
    const auto nr = spec_.reservoirs.size();
    if (node < nj) {
        return spec_.junctions[node].elevation_m;
    }
    if (node < nj + nr) {
        return spec_.reservoirs[node - nj].head_m;
    }
    return spec_.tanks[node - nj - nr].elevation_m;
}

const std::string& Network::link_id(std::size_t link) const
{
    if (link < spec_.pipes.size()) {
        return spec_.pipes[link].id;
    }
    return spec_.pumps[link - spec_.pipes.size()].id;
}

std::span<const std::size_t> Network::incident_links(std::size_t node) const
{
    return {adjacency_.data() + adjacency_offsets_[node], adjacency_offsets_[node + 1] - adjacency_offsets_[node]};
}

bool Network::is_intermediate(std::size_t node) const
{
    return node < intermediate_flag_.size() && intermediate_flag_[node] != 0;
}

double Network::pattern_multiplier(std::size_t junction, std::size_t hour) const
{
    const std::size_t p = junction_pattern_[junction];
    return p == kNoPattern ? 1.0 : spec_.patterns[p].multipliers[hour % kHoursPerDay];
}

double Network::retained_fraction(ConsumerClass c) const
{
    if (auto it = spec_.retained_fraction.find(c); it != spec_.retained_fraction.end()) {
        return it->second;
    }
    return default_retained_fraction(c);
}

double Network::total_population() const
{
    double total = 0.0;
    for (const auto& j : spec_.junctions) {
        total += j.population;
    }
    return total;
}

// --- spatial index -------------------------------------------------------------------------

IntermediateNodeIndex::IntermediateNodeIndex(const Network& net) : net_(&net)
{
    const auto nodes = net.intermediate_nodes();
    if (nodes.empty()) {
        return;
    }
    Coordinate lo = net.node_coordinate(nodes.front());
    Coordinate hi = lo;
    for (auto n : nodes) {
        const auto c = net.node_coordinate(n);
        lo.x = std::min(lo.x, c.x);
        lo.y = std::min(lo.y, c.y);
        hi.x = std::max(hi.x, c.x);
        hi.y = std::max(hi.y, c.y);
    }
    const double w = std::max(hi.x - lo.x, 1e-9);
    const double h = std::max(hi.y - lo.y, 1e-9);
    cell_ = std::max(std::sqrt(w * h / static_cast<double>(nodes.size())), 1e-6);
    origin_ = lo;
    cols_ = static_cast<std::size_t>(w / cell_) + 1;
    rows_ = static_cast<std::size_t>(h / cell_) + 1;
    cells_.assign(cols_ * rows_, {});
    for (auto n : nodes) {
        const auto c = net.node_coordinate(n);
        const auto cx = std::min(static_cast<std::size_t>((c.x - lo.x) / cell_), cols_ - 1);
        const auto cy = std::min(static_cast<std::size_t>((c.y - lo.y) / cell_), rows_ - 1);
        cells_[cy * cols_ + cx].push_back(n);
    }
}

std::size_t IntermediateNodeIndex::nearest(Coordinate p) const
{
    const auto& junctions = net_->junctions();
    const auto clamp_cell = [](double v, std::size_t count) {
        if (!(v > 0.0)) {
            return std::ptrdiff_t{0};
        }
        return static_cast<std::ptrdiff_t>(std::min(static_cast<double>(count - 1), std::floor(v)));
    };
    const auto cx = clamp_cell((p.x - origin_.x) / cell_, cols_);
    const auto cy = clamp_cell((p.y - origin_.y) / cell_, rows_);

    std::size_t best = std::numeric_limits<std::size_t>::max();
    double best_d2 = std::numeric_limits<double>::infinity();
    const auto max_ring = static_cast<std::ptrdiff_t>(std::max(cols_, rows_));
    for (std::ptrdiff_t ring = 0; ring <= max_ring; ++ring) {
        for (std::ptrdiff_t y = cy - ring; y <= cy + ring; ++y) {
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(rows_)) {
                continue;
            }
            for (std::ptrdiff_t x = cx - ring; x <= cx + ring; ++x) {
                if (x < 0 || x >= static_cast<std::ptrdiff_t>(cols_)) {
                    continue;
                }
                if (std::max(std::abs(x - cx), std::abs(y - cy)) != ring) {
                    continue;
                }
                for (auto n : cells_[static_cast<std::size_t>(y) * cols_ + static_cast<std::size_t>(x)]) {
                    const auto c = junctions[n].at;
                    const double d2 = (c.x - p.x) * (c.x - p.x) + (c.y - p.y) * (c.y - p.y);
                    if (d2 < best_d2 || (d2 == best_d2 && junctions[n].id < junctions[best].id)) {
                        best_d2 = d2;
                        best = n;
                    }
                }
            }
        }
        if (best != std::numeric_limits<std::size_t>::max()) {
            // distance from p to the outside of the explored block of cells
            const double left = p.x - (origin_.x + static_cast<double>(cx - ring) * cell_);
            const double right = origin_.x + static_cast<double>(cx + ring + 1) * cell_ - p.x;
            const double bottom = p.y - (origin_.y + static_cast<double>(cy - ring) * cell_);
            const double top = origin_.y + static_cast<double>(cy + ring + 1) * cell_ - p.y;
            const double margin = std::min({left, right, bottom, top});
            if (margin > 0.0 && best_d2 < margin * margin) {
                break;
            }
        }
    }
    return best;
}

std::string nearest_intermediate_node(Coordinate p, const Network& net)
{
    return net.node_id(IntermediateNodeIndex(net).nearest(p));
}

} // namespace wdsguard
