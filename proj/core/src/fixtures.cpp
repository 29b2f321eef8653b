#include "wdsguard/fixtures.hpp"

#include "wdsguard/random.hpp"
#include "wdsguard/text_format.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wdsguard {

FixtureManifest describe_network(std::string_view fixture_id, const Network& net, std::uint64_t seed)
{
    FixtureManifest m;
    m.fixture_id = std::string(fixture_id);
    m.seed = seed;
    m.junctions = net.junction_count();
    m.reservoirs = net.reservoirs().size();
    m.tanks = net.tanks().size();
    m.pipes = net.pipes().size();
    m.pumps = net.pumps().size();
    m.intermediate_nodes = net.intermediate_nodes().size();
    m.patterns = net.spec().patterns.size();
    m.population = net.total_population();
    return m;
}

std::string manifest_to_json(const FixtureManifest& m)
{
    nlohmann::ordered_json j;
    j["fixture_id"] = m.fixture_id;
    j["seed"] = m.seed;
    j["counts"] = {{"junctions", m.junctions},   {"reservoirs", m.reservoirs},
                   {"tanks", m.tanks},           {"pipes", m.pipes},
                   {"pumps", m.pumps},           {"intermediate_nodes", m.intermediate_nodes},
                   {"patterns", m.patterns}};
    j["population"] = m.population;
    auto expected = nlohmann::ordered_json::array();
    for (const auto& e : m.expected) {
        expected.push_back({{"name", e.name}, {"value", e.value}, {"provenance", e.provenance}});
    }
    j["expected"] = expected;
    return j.dump(2) + "\n";
}

FixtureManifest manifest_from_json(std::string_view text)
{
    const auto j = nlohmann::json::parse(text);
    FixtureManifest m;
    m.fixture_id = j.at("fixture_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& c = j.at("counts");
    m.junctions = c.at("junctions").get<std::size_t>();
    m.reservoirs = c.at("reservoirs").get<std::size_t>();
    m.tanks = c.at("tanks").get<std::size_t>();
    m.pipes = c.at("pipes").get<std::size_t>();
    m.pumps = c.at("pumps").get<std::size_t>();
    m.intermediate_nodes = c.at("intermediate_nodes").get<std::size_t>();
    m.patterns = c.at("patterns").get<std::size_t>();
    m.population = j.at("population").get<double>();
    for (const auto& e : j.at("expected")) {
        m.expected.push_back({e.at("name").get<std::string>(), e.at("value").get<double>(),
                              e.at("provenance").get<std::string>()});
    }
    return m;
}

namespace {

constexpr int kGrid = 10;
constexpr double kSpacing = 300.0;

double round1(double v)
{
    return std::round(v * 10.0) / 10.0;
}

std::vector<double> normalized(std::vector<double> v)
{
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (auto& x : v) {
        x = std::round(x / mean * 1e4) / 1e4;
    }
    return v;
}

double distance(Coordinate a, Coordinate b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

bool connected_without(const std::vector<std::pair<int, int>>& edges, const std::vector<char>& removed, int nodes)
{
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(nodes));
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (!removed[e]) {
            adj[static_cast<std::size_t>(edges[e].first)].push_back(edges[e].second);
            adj[static_cast<std::size_t>(edges[e].second)].push_back(edges[e].first);
        }
    }
    std::vector<char> seen(static_cast<std::size_t>(nodes), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                ++count;
                stack.push_back(v);
            }
        }
    }
    return count == nodes;
}

} // namespace

GeneratedFixture generate_synthetic_town(std::uint64_t seed)
{
    Rng rng(seed);
    NetworkSpec spec;
    spec.title = fmt::format("Synthetic town, generator seed {}", seed);

    spec.patterns.push_back({"RES", normalized({0.45, 0.38, 0.34, 0.33, 0.38, 0.62, 1.10, 1.55, 1.45, 1.20, 1.05, 1.00,
                                                1.02, 0.98, 0.92, 0.95, 1.10, 1.45, 1.70, 1.62, 1.38, 1.10, 0.82, 0.58})});
    spec.patterns.push_back({"COM", normalized({0.25, 0.22, 0.20, 0.20, 0.22, 0.30, 0.55, 0.95, 1.45, 1.70, 1.80, 1.85,
                                                1.80, 1.75, 1.70, 1.60, 1.45, 1.10, 0.75, 0.55, 0.45, 0.38, 0.32, 0.28})});
    spec.patterns.push_back({"IND", normalized({0.92, 0.92, 0.92, 0.92, 0.95, 0.98, 1.05, 1.08, 1.08, 1.08, 1.06, 1.05,
                                                1.04, 1.06, 1.06, 1.05, 1.02, 0.98, 0.96, 0.96, 0.94, 0.93, 0.92, 0.92})});

    constexpr int n = kGrid * kGrid;
    std::vector<char> intermediate(n, 0);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        std::swap(order[static_cast<std::size_t>(i)], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    }
    for (int i = 0; i < 20; ++i) {
        intermediate[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
    }

    std::vector<std::string> names(n);
    for (int r = 0; r < kGrid; ++r) {
        for (int c = 0; c < kGrid; ++c) {
            const int k = r * kGrid + c;
            Junction j;
            j.id = fmt::format("{}{:02d}{:02d}", intermediate[k] ? "IN" : "J", r + 1, c + 1);
            names[static_cast<std::size_t>(k)] = j.id;
            j.at = {round1(c * kSpacing + rng.uniform(-40.0, 40.0)), round1(r * kSpacing + rng.uniform(-40.0, 40.0))};
            j.elevation_m = round1(15.0 + 10.0 * r / (kGrid - 1) + 5.0 * std::sin(c / 3.0) + rng.uniform(-1.0, 1.0));
            j.intermediate = intermediate[k] != 0;
            if (!j.intermediate) {
                const double centre = std::hypot(r - 4.5, c - 4.5);
                if (r <= 2 && c <= 2) {
                    j.consumer_class = ConsumerClass::Industrial;
                    j.pattern = "IND";
                    j.population = 15.0;
                    j.base_demand_lps = round1(rng.uniform(1.0, 1.4) * 100.0) / 100.0;
                } else if (r >= 4 && r <= 5 && c >= 4 && c <= 6) {
                    j.consumer_class = ConsumerClass::Commercial;
                    j.pattern = "COM";
                    j.population = 25.0;
                    j.base_demand_lps = round1(rng.uniform(0.7, 0.9) * 100.0) / 100.0;
                } else {
                    double mean = 60.0;
                    j.consumer_class = ConsumerClass::ResidentialLow;
                    if (centre <= 3.0) {
                        j.consumer_class = ConsumerClass::ResidentialHigh;
                        mean = 130.0;
                    } else if (centre <= 5.0) {
                        j.consumer_class = ConsumerClass::ResidentialMedium;
                        mean = 95.0;
                    }
                    j.pattern = "RES";
                    j.population = std::round(mean * rng.uniform(0.8, 1.2));
                    j.base_demand_lps = std::round(j.population * 300.0 / 86400.0 * 1e4) / 1e4;
                }
            }
            spec.junctions.push_back(j);
        }
    }

    const Coordinate mid_east{round1((kGrid - 1) * kSpacing + 450.0), round1(4.5 * kSpacing)};
    const Coordinate mid_west{-600.0, round1(4.5 * kSpacing)};
    spec.reservoirs.push_back({"EastWTP", mid_east, 85.0});
    spec.reservoirs.push_back({"WestWTP", mid_west, 20.0});
    spec.tanks.push_back({"TankNorth", {round1(4.5 * kSpacing), round1((kGrid - 1) * kSpacing + 400.0)}, 75.0, 25.0,
                          1.0, 8.0, 16.0});
    spec.tanks.push_back({"TankSouth", {round1(4.5 * kSpacing), -400.0}, 74.0, 25.0, 1.0, 9.0, 16.0});

    std::vector<std::pair<int, int>> edges;
    std::vector<char> trunk;
    for (int r = 0; r < kGrid; ++r) {
        for (int c = 0; c < kGrid; ++c) {
            const int k = r * kGrid + c;
            if (c + 1 < kGrid) {
                edges.emplace_back(k, k + 1);
                trunk.push_back(r == 4 || r == 5 ? 1 : 0);
            }
            if (r + 1 < kGrid) {
                edges.emplace_back(k, k + kGrid);
                trunk.push_back(c == 4 || c == 5 ? 1 : 0);
            }
        }
    }
    std::vector<char> removed(edges.size(), 0);
    std::size_t to_remove = 25;
    while (to_remove > 0) {
        const auto e = rng.below(edges.size());
        if (removed[e] || trunk[e]) {
            continue;
        }
        removed[e] = 1;
        if (connected_without(edges, removed, n)) {
            --to_remove;
        } else {
            removed[e] = 0;
        }
    }

    int pipe_no = 0;
    auto add_pipe = [&](const std::string& from, Coordinate a, const std::string& to, Coordinate b, double dia) {
        Pipe p;
        p.id = fmt::format("P{:03d}", ++pipe_no);
        p.from = from;
        p.to = to;
        p.length_m = std::max(round1(distance(a, b)), 1.0);
        p.diameter_mm = dia;
        p.roughness = std::round(rng.uniform(100.0, 140.0));
        spec.pipes.push_back(p);
    };
    for (std::size_t e = 0; e < edges.size(); ++e) {
        if (removed[e]) {
            continue;
        }
        const auto a = static_cast<std::size_t>(edges[e].first);
        const auto b = static_cast<std::size_t>(edges[e].second);
        const int ra = edges[e].first / kGrid;
        const int ca = edges[e].first % kGrid;
        const int rb = edges[e].second / kGrid;
        const int cb = edges[e].second % kGrid;
        double dia = rng.chance(0.5) ? 150.0 : 200.0;
        if (trunk[e]) {
            dia = 300.0;
        } else if ((ra == 0 && rb == 0) || (ra == kGrid - 1 && rb == kGrid - 1) || (ca == 0 && cb == 0) ||
                   (ca == kGrid - 1 && cb == kGrid - 1)) {
            dia = 250.0;
        }
        add_pipe(names[a], spec.junctions[a].at, names[b], spec.junctions[b].at, dia);
    }
    const auto node_at = [&](int r, int c) { return static_cast<std::size_t>(r * kGrid + c); };
    add_pipe("EastWTP", mid_east, names[node_at(4, kGrid - 1)], spec.junctions[node_at(4, kGrid - 1)].at, 400.0);
    add_pipe("TankNorth", spec.tanks[0].at, names[node_at(kGrid - 1, 4)], spec.junctions[node_at(kGrid - 1, 4)].at,
             300.0);
    add_pipe("TankSouth", spec.tanks[1].at, names[node_at(0, 5)], spec.junctions[node_at(0, 5)].at, 300.0);

    Pump pump;
    pump.id = "PU01";
    pump.from = "WestWTP";
    pump.to = names[node_at(5, 0)];
    pump.curve = {PumpCurvePoint{0.0, 70.0}, PumpCurvePoint{25.0, 62.0}, PumpCurvePoint{50.0, 45.0}};
    spec.pumps.push_back(pump);

    GeneratedFixture out{Network::build(std::move(spec)), {}};
    out.manifest = describe_network("synthetic_town", out.network, seed);
    return out;
}

Network one_pipe_network()
{
    NetworkSpec spec;
    spec.title = "Single pipe from a fixed-head reservoir to one demand junction.\n"
                 "Velocity 0.1 m/s at the base demand; travel time 10000 s.";
    Junction j;
    j.id = "J1";
    j.at = {1000.0, 0.0};
    j.base_demand_lps = 0.1 * std::acos(-1.0) * 0.15 * 0.15 * 1000.0;
    j.population = 100.0;
    spec.junctions.push_back(j);
    spec.reservoirs.push_back({"R1", {0.0, 0.0}, 100.0});
    spec.pipes.push_back({"P1", "R1", "J1", 1000.0, 300.0, 130.0});
    return Network::build(std::move(spec));
}

Network toy_network()
{
    NetworkSpec spec;
    spec.title = "Toy grid: six demand junctions, six intermediate nodes.";
    constexpr int rows = 3;
    constexpr int cols = 4;
    std::vector<std::string> names;
    int demand_no = 0;
    int inter_no = 0;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Junction j;
            j.intermediate = (r + c) % 2 == 1;
            j.id = j.intermediate ? fmt::format("IN{:02d}", ++inter_no) : fmt::format("J{:02d}", ++demand_no);
            j.at = {c * 200.0, r * 200.0};
            j.elevation_m = 10.0;
            if (!j.intermediate) {
                j.population = 40.0 + 20.0 * demand_no;
                j.base_demand_lps = 1.0 + 0.25 * demand_no;
            }
            names.push_back(j.id);
            spec.junctions.push_back(j);
        }
    }
    spec.reservoirs.push_back({"R1", {-200.0, 0.0}, 60.0});
    int pipe_no = 0;
    auto add = [&](const std::string& a, const std::string& b, double len, double dia) {
        spec.pipes.push_back({fmt::format("P{:02d}", ++pipe_no), a, b, len, dia, 120.0});
    };
    add("R1", names[0], 200.0, 250.0);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const auto k = static_cast<std::size_t>(r * cols + c);
            if (c + 1 < cols) {
                add(names[k], names[k + 1], 200.0, r == 0 ? 200.0 : 150.0);
            }
            if (r + 1 < rows) {
                add(names[k], names[k + cols], 200.0, c == 0 ? 200.0 : 100.0);
            }
        }
    }
    return Network::build(std::move(spec));
}

} // namespace wdsguard
