#include "wdsguard/fixtures.hpp"
#include "wdsguard/netmodel.hpp"
#include "wdsguard/text_format.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace wdsguard;

namespace {

std::string fixture(const char* name)
{
    return read_file(std::string(WDSGUARD_FIXTURE_DIR) + "/" + name);
}

const char* kMinimal = R"(
[NODES]
J1 J 100 0 0 1.5 - residential-low 10
[RESERVOIRS]
R1 0 0 50
[PIPES]
P1 R1 J1 100 200 120
)";

// A star of intermediate nodes around a demand node; used for tie-break checks.
Network star_network()
{
    NetworkSpec s;
    s.reservoirs.push_back({"R1", {0.0, 0.0}, 50.0});
    Junction hub{"J1", {0.0, 0.0}, 0.0, 1.0, "", ConsumerClass::ResidentialLow, 5.0, false};
    s.junctions.push_back(hub);
    const std::vector<std::pair<std::string, Coordinate>> inter{
        {"IN10", {-100.0, 0.0}}, {"IN02", {100.0, 0.0}}, {"IN07", {0.0, 250.0}}, {"IN01", {500.0, 500.0}}};
    int k = 0;
    for (const auto& [id, at] : inter) {
        Junction j{id, at, 0.0, 0.0, "", ConsumerClass::ResidentialLow, 0.0, true};
        s.junctions.push_back(j);
        s.pipes.push_back({"P" + std::to_string(++k), "J1", id, 100.0, 150.0, 120.0});
    }
    s.pipes.push_back({"P0", "R1", "J1", 100.0, 200.0, 120.0});
    return Network::build(s);
}

} // namespace

TEST(NetModel, MinimalDocument)
{
    const auto net = parse_native(kMinimal);
    EXPECT_EQ(net.node_count(), 2u);
    EXPECT_EQ(net.link_count(), 1u);
    EXPECT_EQ(net.node_kind(*net.node_index("R1")), NodeKind::Reservoir);
    EXPECT_DOUBLE_EQ(net.total_population(), 10.0);
    EXPECT_TRUE(net.intermediate_nodes().empty());
}

TEST(NetModel, UndefinedPatternNamesThePattern)
{
    const std::string doc = std::string(kMinimal) + "\n";
    auto text = doc;
    text.replace(text.find(" - "), 3, " P9 ");
    try {
        parse_native(text);
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.entity(), "P9");
    }
}

TEST(NetModel, SyntaxErrorCarriesLine)
{
    try {
        parse_native("[PIPES]\nP1 R1 J1 100 abc 120\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(NetModel, InvariantsAreEnforced)
{
    auto bad = [](const std::string& from, const std::string& to) {
        std::string t = kMinimal;
        t.replace(t.find(from), from.size(), to);
        return t;
    };
    EXPECT_THROW(parse_native(bad("P1 R1 J1", "P1 R1 J9")), ValidationError);          // dangling endpoint
    EXPECT_THROW(parse_native(bad("100 200 120", "100 0 120")), ValidationError);      // zero diameter
    EXPECT_THROW(parse_native(bad("J1 J 100 0 0 1.5", "J1 I 100 0 0 1.5")), ValidationError); // intermediate with demand
    // disconnected component
    EXPECT_THROW(parse_native(std::string(kMinimal) + "[NODES]\nJ2 J 0 0 0 1 - residential-low 1\n"), ValidationError);
}

TEST(NetModel, NativeRoundTripOnEveryFixture)
{
    for (const auto* name : {"one_pipe.net", "synthetic_town.net", "toy.net"}) {
        const auto net = parse_native(fixture(name));
        EXPECT_EQ(parse_native(serialize_native(net)), net) << name;
    }
}

TEST(NetModel, TownCountsMatchManifest)
{
    const auto net = parse_native(fixture("synthetic_town.net"));
    const auto m = manifest_from_json(fixture("synthetic_town.manifest.json"));
    EXPECT_EQ(net.junction_count(), m.junctions);
    EXPECT_EQ(net.reservoirs().size(), m.reservoirs);
    EXPECT_EQ(net.tanks().size(), m.tanks);
    EXPECT_EQ(net.pipes().size(), m.pipes);
    EXPECT_EQ(net.pumps().size(), m.pumps);
    EXPECT_EQ(net.intermediate_nodes().size(), m.intermediate_nodes);
    EXPECT_DOUBLE_EQ(net.total_population(), m.population);
}

TEST(NetModel, RetainedFractions)
{
    EXPECT_DOUBLE_EQ(default_retained_fraction(ConsumerClass::ResidentialLow), 0.60);
    EXPECT_DOUBLE_EQ(default_retained_fraction(ConsumerClass::ResidentialMedium), 0.51);
    EXPECT_DOUBLE_EQ(default_retained_fraction(ConsumerClass::ResidentialHigh), 0.43);
    EXPECT_DOUBLE_EQ(default_retained_fraction(ConsumerClass::Industrial), 0.96);
    const auto net = parse_native(std::string(kMinimal) + "[CLASSES]\nindustrial 0.9\n");
    EXPECT_DOUBLE_EQ(net.retained_fraction(ConsumerClass::Industrial), 0.9);
    EXPECT_THROW(parse_native(std::string(kMinimal) + "[CLASSES]\nindustrial 1.5\n"), ValidationError);
}

// --- INP ----------------------------------------------------------------------------------

TEST(InpImport, LpsJunctionDemandIsIdentity)
{
    const auto r = parse_inp_subset(R"(
[JUNCTIONS]
 J1 100 1
[RESERVOIRS]
 R1 150
[PIPES]
 P1 R1 J1 100 200 120 0 Open
[OPTIONS]
 Units LPS
)");
    EXPECT_DOUBLE_EQ(r.network.junctions()[0].base_demand_lps, 1.0);
    EXPECT_DOUBLE_EQ(r.network.junctions()[0].elevation_m, 100.0);
}

TEST(InpImport, GpmDemandConversion)
{
    const auto r = parse_inp_subset(R"(
[OPTIONS]
 Units GPM
[JUNCTIONS]
 J1 100 15.85
[RESERVOIRS]
 R1 150
[PIPES]
 P1 R1 J1 100 8 120 0 Open
)");
    // 15.85 gpm x 6.30902e-5 m3/s per gpm
    EXPECT_NEAR(r.network.junctions()[0].base_demand_lps, 0.999979670, 1e-9);
    EXPECT_NEAR(r.network.junctions()[0].elevation_m, 30.48, 1e-12);
    EXPECT_NEAR(r.network.pipes()[0].diameter_mm, 203.2, 1e-12);
}

TEST(InpImport, UnsupportedSectionsAreErrorsOrWarnings)
{
    const std::string base = "[JUNCTIONS]\n J1 0 1\n[RESERVOIRS]\n R1 50\n[PIPES]\n P1 R1 J1 100 200 120 0 Open\n";
    try {
        parse_inp_subset(base + "[VALVES]\n V1 J1 R1 100 PRV 10 0\n");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.entity(), "VALVES");
    }
    const auto r = parse_inp_subset(base + "[LABELS]\n 1 2 \"x\"\n[TAGS]\n");
    EXPECT_GE(r.warnings.size(), 1u);
    try {
        parse_inp_subset(base + "[OPTIONS]\n Units CFS\n");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.entity(), "OPTIONS");
    }
}

TEST(InpImport, MatchesEquivalentNativeFixture)
{
    const auto inp = parse_inp_subset(fixture("one_pipe.inp")).network;
    // INP carries no population; the native equivalent states population 0.
    auto native_text = fixture("one_pipe.net");
    native_text.replace(native_text.find("residential-medium 100"), 22, "residential-medium 0");
    const auto native = parse_native(native_text);
    EXPECT_EQ(inp.spec().junctions, native.spec().junctions);
    EXPECT_EQ(inp.spec().reservoirs, native.spec().reservoirs);
    EXPECT_EQ(inp.spec().pipes, native.spec().pipes);
}

// --- snapping -----------------------------------------------------------------------------

TEST(Snapping, ExactCoordinatesAndTieBreak)
{
    const auto net = star_network();
    EXPECT_EQ(nearest_intermediate_node({0.0, 250.0}, net), "IN07");
    // equidistant from IN02 (100, 0) and IN10 (-100, 0)
    EXPECT_EQ(nearest_intermediate_node({0.0, 0.0}, net), "IN02");
    EXPECT_EQ(nearest_intermediate_node({0.0, -40.0}, net), "IN02");
}

TEST(Snapping, IdempotentOnEveryIntermediateNode)
{
    const auto net = parse_native(fixture("synthetic_town.net"));
    for (auto n : net.intermediate_nodes()) {
        EXPECT_EQ(nearest_intermediate_node(net.node_coordinate(n), net), net.node_id(n));
    }
}

TEST(Snapping, MatchesLinearScanOnRandomPoints)
{
    const auto net = parse_native(fixture("synthetic_town.net"));
    const IntermediateNodeIndex index(net);
    const auto box = net.bounds();
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> ux(box.min.x - 300.0, box.max.x + 300.0);
    std::uniform_real_distribution<double> uy(box.min.y - 300.0, box.max.y + 300.0);
    for (int trial = 0; trial < 5000; ++trial) {
        const Coordinate p{ux(gen), uy(gen)};
        std::size_t best = net.intermediate_nodes()[0];
        double best_d = std::hypot(p.x - net.node_coordinate(best).x, p.y - net.node_coordinate(best).y);
        for (auto n : net.intermediate_nodes()) {
            const double d = std::hypot(p.x - net.node_coordinate(n).x, p.y - net.node_coordinate(n).y);
            if (d < best_d || (d == best_d && net.node_id(n) < net.node_id(best))) {
                best = n;
                best_d = d;
            }
        }
        ASSERT_EQ(index.nearest(p), best) << p.x << "," << p.y;
    }
}
