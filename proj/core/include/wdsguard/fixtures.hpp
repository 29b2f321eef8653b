#pragma once

#include "wdsguard/netmodel.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace wdsguard {

struct ManifestValue {
    std::string name;
    double value = 0.0;
    std::string provenance; // "derived", "trivial", ...
    friend bool operator==(const ManifestValue&, const ManifestValue&) = default;
};

struct FixtureManifest {
    std::string fixture_id;
    std::uint64_t seed = 0;
    std::size_t junctions = 0;
    std::size_t reservoirs = 0;
    std::size_t tanks = 0;
    std::size_t pipes = 0;
    std::size_t pumps = 0;
    std::size_t intermediate_nodes = 0;
    std::size_t patterns = 0;
    double population = 0.0;
    std::vector<ManifestValue> expected;
    friend bool operator==(const FixtureManifest&, const FixtureManifest&) = default;
};

/// Counts and population of a network, with no expected values.
FixtureManifest describe_network(std::string_view fixture_id, const Network& net, std::uint64_t seed = 0);

std::string manifest_to_json(const FixtureManifest& m);
FixtureManifest manifest_from_json(std::string_view text);

struct GeneratedFixture {
    Network network;
    FixtureManifest manifest;
};

/// A jittered-grid town: ~100 junctions of which 20 are zero-demand intermediate nodes, an
/// eastern treatment plant (reservoir) and a western one behind a pump, two balancing tanks,
/// residential / commercial / industrial diurnal patterns, ~7000 inhabitants.
GeneratedFixture generate_synthetic_town(std::uint64_t seed);

/// Reservoir, one 1000 m / 300 mm / C=130 pipe, one junction drawing 0.1 m/s.
Network one_pipe_network();

/// Small looped network with exactly six intermediate nodes, for exhaustive-search checks.
Network toy_network();

} // namespace wdsguard
