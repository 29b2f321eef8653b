// Reference values computed once by the independent oracles (and by hand) and frozen here.
// The engine is checked against these numbers, not against itself.

#include "wdsguard/hydraulics.hpp"
#include "wdsguard/netmodel.hpp"
#include "wdsguard/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace wdsguard;

namespace frozen {
constexpr double kHeadDrop50Lps = 1.7784975387195543; // m, 1000 m / 300 mm / C=130
constexpr double kGpmDemandLps = 0.99997967;          // 15.85 gpm
constexpr double kHydrantAt49_2m = 87.8738005095507;  // L/s
constexpr double kOnePipeTravelS = 10000.0;
constexpr double kCohortUtimG = 0.93;
constexpr double kTankDropPerHour = 0.36; // m, 10 L/s out of 100 m2
} // namespace frozen

TEST(Frozen, OraclesReproduceFrozenValues)
{
    EXPECT_NEAR(oracle::hazen_williams_head_loss_m(50.0, 1000.0, 300.0, 130.0), frozen::kHeadDrop50Lps, 1e-12);
    EXPECT_NEAR(oracle::plug_flow_travel_s(1000.0, 300.0, 7.068583470577034), frozen::kOnePipeTravelS, 1e-9);
    EXPECT_NEAR(oracle::constant_concentration_utim_g(1000.0, 0.93, 1.0), frozen::kCohortUtimG, 1e-15);
}

TEST(Frozen, EngineHeadDrop)
{
    NetworkSpec s;
    s.reservoirs.push_back({"R1", {0, 0}, 100.0});
    s.junctions.push_back({"J1", {1000, 0}, 0.0, 50.0, "", ConsumerClass::ResidentialMedium, 0.0, false});
    s.pipes.push_back({"P1", "R1", "J1", 1000.0, 300.0, 130.0});
    const auto net = Network::build(s);
    const std::vector<double> d{50.0};
    const auto st = solve_snapshot(net, d, {}, {});
    EXPECT_LE(std::abs((100.0 - st.head_m[0]) - frozen::kHeadDrop50Lps) / frozen::kHeadDrop50Lps, 1e-3);
}

TEST(Frozen, EngineUnitConversions)
{
    const auto r = parse_inp_subset("[OPTIONS]\n Units GPM\n[JUNCTIONS]\n J1 0 15.85\n[RESERVOIRS]\n R1 100\n"
                                    "[PIPES]\n P1 R1 J1 100 8 120 0 Open\n");
    EXPECT_NEAR(r.network.junctions()[0].base_demand_lps, frozen::kGpmDemandLps, 1e-12);
    EXPECT_NEAR(emitter_coefficient_si(kHydrantCoefficientGpmPsi) * std::sqrt(49.2) * 1000.0, frozen::kHydrantAt49_2m,
                1e-9);
}

TEST(Frozen, EngineTankDrop)
{
    NetworkSpec s;
    s.tanks.push_back({"T1", {0, 0}, 50.0, 2.0 * std::sqrt(100.0 / 3.141592653589793), 0.0, 5.0, 10.0});
    s.junctions.push_back({"J1", {100, 0}, 0.0, 10.0, "", ConsumerClass::ResidentialMedium, 0.0, false});
    s.pipes.push_back({"P1", "T1", "J1", 100.0, 200.0, 130.0});
    const auto net = Network::build(s);
    const std::vector<double> d{10.0};
    const std::vector<double> levels{5.0};
    const auto st = solve_snapshot(net, d, {}, levels);
    auto lv = levels;
    std::vector<TankFlag> flags;
    advance_tank_levels(net, st, 3600.0, lv, flags);
    EXPECT_NEAR(levels[0] - lv[0], frozen::kTankDropPerHour, 1e-9);
}

TEST(Frozen, ClosedFormBatteryPasses)
{
    for (const auto& c : oracle::closed_form_battery()) {
        EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
    }
}
