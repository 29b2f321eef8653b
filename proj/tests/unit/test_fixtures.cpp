#include "wdsguard/fixtures.hpp"
#include "wdsguard/text_format.hpp"

#include <gtest/gtest.h>

using namespace wdsguard;

namespace {

std::string fixture(const char* name)
{
    return read_file(std::string(WDSGUARD_FIXTURE_DIR) + "/" + name);
}

} // namespace

TEST(Fixtures, SeedOneManifestIsGolden)
{
    const auto fx = generate_synthetic_town(1);
    const auto& m = fx.manifest;
    EXPECT_EQ(m.fixture_id, "synthetic_town");
    EXPECT_EQ(m.seed, 1u);
    EXPECT_EQ(m.junctions, 100u);
    EXPECT_EQ(m.reservoirs, 2u);
    EXPECT_EQ(m.tanks, 2u);
    EXPECT_EQ(m.pipes, 158u);
    EXPECT_EQ(m.pumps, 1u);
    EXPECT_EQ(m.intermediate_nodes, 20u);
    EXPECT_EQ(m.patterns, 3u);
    EXPECT_DOUBLE_EQ(m.population, 6960.0);
    EXPECT_EQ(manifest_from_json(fixture("synthetic_town.manifest.json")), m);
}

TEST(Fixtures, BundledFilesMatchTheGenerators)
{
    const auto fx = generate_synthetic_town(1);
    EXPECT_EQ(fixture("synthetic_town.net"), serialize_native(fx.network));
    EXPECT_EQ(parse_native(fixture("synthetic_town.net")), fx.network);
    EXPECT_EQ(parse_native(fixture("one_pipe.net")), one_pipe_network());
    EXPECT_EQ(parse_native(fixture("toy.net")), toy_network());
}

TEST(Fixtures, GenerationIsDeterministicPerSeed)
{
    EXPECT_EQ(generate_synthetic_town(4).network, generate_synthetic_town(4).network);
    EXPECT_NE(generate_synthetic_town(4).network, generate_synthetic_town(5).network);
    for (std::uint64_t seed : {2u, 3u, 9u}) {
        const auto fx = generate_synthetic_town(seed);
        EXPECT_EQ(fx.network.intermediate_nodes().size(), 20u) << seed;
        EXPECT_EQ(fx.manifest, describe_network("synthetic_town", fx.network, seed));
    }
}

TEST(Fixtures, TownHasThreeDiurnalPatterns)
{
    const auto net = parse_native(fixture("synthetic_town.net"));
    ASSERT_EQ(net.spec().patterns.size(), 3u);
    for (const auto& p : net.spec().patterns) {
        EXPECT_EQ(p.multipliers.size(), 24u);
    }
}

TEST(Fixtures, OnePipeIsTheOracleNetwork)
{
    const auto net = one_pipe_network();
    ASSERT_EQ(net.pipes().size(), 1u);
    EXPECT_DOUBLE_EQ(net.pipes()[0].length_m, 1000.0);
    EXPECT_DOUBLE_EQ(net.pipes()[0].diameter_mm, 300.0);
    EXPECT_DOUBLE_EQ(net.pipes()[0].roughness, 130.0);
    const double area = 3.141592653589793 * 0.15 * 0.15;
    EXPECT_NEAR(net.junctions()[0].base_demand_lps / 1000.0 / area, 0.1, 1e-12);
}

TEST(Fixtures, ToyHasSixCandidates)
{
    EXPECT_EQ(toy_network().intermediate_nodes().size(), 6u);
}

TEST(Fixtures, ManifestJsonRoundTrip)
{
    auto m = generate_synthetic_town(1).manifest;
    m.expected.push_back({"tim_g", 12.5, "derived"});
    EXPECT_EQ(manifest_from_json(manifest_to_json(m)), m);
    EXPECT_THROW(manifest_from_json("{"), std::exception);
}
