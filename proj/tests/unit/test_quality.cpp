#include "wdsguard/fixtures.hpp"
#include "wdsguard/oracles.hpp"
#include "wdsguard/quality.hpp"
#include "wdsguard/text_format.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace wdsguard;

namespace {

std::string fixture(const char* name)
{
    return read_file(std::string(WDSGUARD_FIXTURE_DIR) + "/" + name);
}

constexpr double kDay = 24.0 * kSecondsPerHour;

struct Hyd {
    Network net;
    std::vector<HydraulicState> traj;
};

Hyd hydraulics_of(const char* name, std::span<const EmitterSpec> emitters = {})
{
    auto net = parse_native(fixture(name));
    auto traj = run_extended_period(net, pattern_demands(net), emitters);
    return {std::move(net), std::move(traj)};
}

void expect_balanced(const Hyd& r, const TracerField& field, std::span<const SourceSpec> sources, Species s)
{
    const auto rep = mass_balance(r.net, field, r.traj, sources, s);
    EXPECT_LE(rep.relative_error(), 1e-6) << "injected " << rep.injected_kg << " accounted " << rep.accounted_kg();
}

} // namespace

TEST(Quality, NoSourcesMeansZeroEverywhere)
{
    const auto r = hydraulics_of("synthetic_town.net");
    const auto field = run_tracer(r.net, r.traj, {}, 300.0, kDay);
    for (const auto& species : field.conc) {
        for (const auto& row : species) {
            for (double c : row) {
                ASSERT_EQ(c, 0.0);
            }
        }
    }
    const auto rep = mass_balance(r.net, field, r.traj, {}, Species::Contaminant);
    EXPECT_EQ(rep.injected_kg, 0.0);
    EXPECT_EQ(rep.accounted_kg(), 0.0);
}

TEST(Quality, PlugFlowFrontArrival)
{
    const auto r = hydraulics_of("one_pipe.net");
    const std::vector<SourceSpec> src{{"R1", Species::Contaminant, 1.0, 0.0, kDay}};
    const auto field = run_tracer(r.net, r.traj, src, 300.0, kDay);
    const double travel = oracle::plug_flow_travel_s(1000.0, 300.0, r.net.junctions()[0].base_demand_lps);
    ASSERT_NEAR(travel, 10000.0, 1e-6);
    double arrival = -1.0;
    for (double t = 300.0; t <= kDay; t += 300.0) {
        if (field.at(Species::Contaminant, 0, t) > 0.0) {
            arrival = t;
            break;
        }
    }
    EXPECT_LE(std::abs(arrival - travel), 300.0);
    // inlet concentration = mass rate / flow
    const double inlet = 1e6 / kDay / r.net.junctions()[0].base_demand_lps;
    EXPECT_NEAR(field.at(Species::Contaminant, 0, 12.0 * kSecondsPerHour), inlet, 1e-9 * inlet);
}

TEST(Quality, HeldMassAtNodeWithoutOutflow)
{
    auto spec = parse_native(fixture("one_pipe.net")).spec();
    spec.junctions[0].base_demand_lps = 0.0;
    Hyd run{Network::build(spec), {}};
    run.traj = run_extended_period(run.net, pattern_demands(run.net), {});
    const std::vector<SourceSpec> src{{"J1", Species::Contaminant, 2.0, 3600.0, 7200.0}};
    const auto field = run_tracer(run.net, run.traj, src, 300.0, kDay);
    const auto rep = mass_balance(run.net, field, run.traj, src, Species::Contaminant);
    EXPECT_NEAR(rep.resident_kg, 2.0, 1e-9);
    EXPECT_NEAR(rep.consumed_kg, 0.0, 1e-12);
    EXPECT_FALSE(field.final_state.warnings.empty());
}

TEST(Quality, MassBalanceOnEveryFixture)
{
    {
        const auto r = hydraulics_of("one_pipe.net");
        const std::vector<SourceSpec> src{{"R1", Species::Contaminant, 3.0, 1800.0, 5 * 3600.0}};
        expect_balanced(r, run_tracer(r.net, r.traj, src, 300.0, kDay), src, Species::Contaminant);
    }
    {
        const auto r = hydraulics_of("toy.net");
        const auto& net = r.net;
        const std::vector<SourceSpec> src{{net.node_id(net.intermediate_nodes()[0]), Species::Contaminant, 2.0, 0.0, 12 * 3600.0},
                                          {net.node_id(net.intermediate_nodes()[3]), Species::Dye, 5.0, 6 * 3600.0, 3600.0}};
        const auto field = run_tracer(net, r.traj, src, 300.0, kDay);
        expect_balanced(r, field, src, Species::Contaminant);
        expect_balanced(r, field, src, Species::Dye);
    }
}

TEST(Quality, MassBalanceTownWithHydrants)
{
    const auto base = parse_native(fixture("synthetic_town.net"));
    std::vector<EmitterSpec> em;
    for (std::size_t k : {2u, 9u, 15u}) {
        em.push_back({base.node_id(base.intermediate_nodes()[k]), kHydrantCoefficientGpmPsi, 9 * 3600.0, 14 * 3600.0});
    }
    const auto r = hydraulics_of("synthetic_town.net", em);
    const std::vector<SourceSpec> src{{"EastWTP", Species::Contaminant, 250.0, 0.0, 5 * 3600.0},
                                      {"IN0709", Species::Dye, 100.0, 9 * 3600.0, 3600.0}};
    const auto field = run_tracer(r.net, r.traj, src, 300.0, kDay);
    expect_balanced(r, field, src, Species::Contaminant);
    expect_balanced(r, field, src, Species::Dye);
    const auto rep = mass_balance(r.net, field, r.traj, src, Species::Contaminant);
    EXPECT_NEAR(rep.injected_kg, 250.0, 1e-9);
    EXPECT_GT(rep.flushed_kg, 0.0);
}

TEST(Quality, LinearInSourceStrength)
{
    const auto r = hydraulics_of("synthetic_town.net");
    const std::vector<SourceSpec> one{{"IN0709", Species::Contaminant, 40.0, 0.0, 4 * 3600.0}};
    const std::vector<SourceSpec> two{{"IN0709", Species::Contaminant, 80.0, 0.0, 4 * 3600.0}};
    const auto a = run_tracer(r.net, r.traj, one, 300.0, kDay);
    const auto b = run_tracer(r.net, r.traj, two, 300.0, kDay);
    const auto& ca = a.conc[0];
    const auto& cb = b.conc[0];
    ASSERT_EQ(ca.size(), cb.size());
    for (std::size_t k = 0; k < ca.size(); ++k) {
        for (std::size_t n = 0; n < ca[k].size(); ++n) {
            ASSERT_NEAR(cb[k][n], 2.0 * ca[k][n], 1e-9 * std::max(1.0, cb[k][n]));
        }
    }
}

TEST(Quality, SpeciesAreIndependent)
{
    const auto r = hydraulics_of("synthetic_town.net");
    const std::vector<SourceSpec> alone{{"IN0709", Species::Contaminant, 40.0, 0.0, 4 * 3600.0}};
    auto both = alone;
    both.push_back({"IN0405", Species::Dye, 100.0, 9 * 3600.0, 3600.0});
    const auto a = run_tracer(r.net, r.traj, alone, 300.0, kDay);
    const auto b = run_tracer(r.net, r.traj, both, 300.0, kDay);
    EXPECT_EQ(a.conc[0], b.conc[0]);
    for (const auto& row : a.conc[1]) {
        for (double c : row) {
            ASSERT_EQ(c, 0.0);
        }
    }
}

TEST(Quality, ConcentrationsNonNegativeAndSegmentsFillPipes)
{
    const auto r = hydraulics_of("synthetic_town.net");
    const std::vector<SourceSpec> src{{"EastWTP", Species::Contaminant, 250.0, 0.0, 5 * 3600.0}};
    const auto field = run_tracer(r.net, r.traj, src, 300.0, kDay);
    for (const auto& row : field.conc[0]) {
        for (double c : row) {
            ASSERT_GE(c, 0.0);
        }
    }
    for (std::size_t p = 0; p < r.net.pipes().size(); ++p) {
        double v = 0.0;
        for (const auto& seg : field.final_state.segments[0][p]) {
            v += seg.volume_l;
        }
        const double want = r.net.pipes()[p].volume_l();
        EXPECT_NEAR(v, want, 1e-9 * want) << r.net.pipes()[p].id;
    }
}

TEST(Quality, HalvingTheStepBarelyChangesTheSeries)
{
    const auto r = hydraulics_of("one_pipe.net");
    const std::vector<SourceSpec> src{{"R1", Species::Contaminant, 1.0, 0.0, 12 * 3600.0}};
    const auto coarse = run_tracer(r.net, r.traj, src, 300.0, kDay);
    const auto fine = run_tracer(r.net, r.traj, src, 150.0, kDay);
    double diff = 0.0;
    double norm = 0.0;
    for (double t = 300.0; t <= kDay; t += 300.0) {
        const double c = coarse.at(Species::Contaminant, 0, t);
        diff += std::abs(c - fine.at(Species::Contaminant, 0, t));
        norm += std::abs(c);
    }
    ASSERT_GT(norm, 0.0);
    EXPECT_LE(diff / norm, 0.01);
}

TEST(Quality, TracerFieldAtIsEndOfStep)
{
    const auto r = hydraulics_of("one_pipe.net");
    const std::vector<SourceSpec> src{{"R1", Species::Contaminant, 1.0, 0.0, kDay}};
    const auto field = run_tracer(r.net, r.traj, src, 300.0, kDay);
    EXPECT_EQ(field.at(Species::Contaminant, 0, 0.0), 0.0);
    EXPECT_EQ(field.at(Species::Contaminant, 0, 36000.0), field.conc[0][119][0]);
}
