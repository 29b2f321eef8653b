#include "wdsguard/simulation.hpp"
#include "wdsguard/text_format.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace wdsguard;

namespace {

constexpr double kH = 3600.0;

std::string fixture(const char* name)
{
    return read_file(std::string(WDSGUARD_FIXTURE_DIR) + "/" + name);
}

struct Town {
    Network net = parse_native(fixture("synthetic_town.net"));
    ContaminationScenario scenario{"IN0709", 33.0, 1.0, 0.0, 5 * kH};

    std::vector<std::size_t> hydrants(std::initializer_list<std::size_t> picks) const
    {
        std::vector<std::size_t> out;
        for (auto k : picks) {
            out.push_back(net.intermediate_nodes()[k]);
        }
        return out;
    }
};

void expect_conserved(const SimulationState& st)
{
    for (std::size_t s = 0; s < kSpeciesCount; ++s) {
        const auto& acc = st.transport.account[s];
        const double accounted =
            acc.consumed_mg + acc.flushed_mg + acc.returned_mg + st.transport.resident_mg(static_cast<Species>(s));
        EXPECT_LE(std::abs(accounted - acc.injected_mg), 1e-6 * std::max(1.0, acc.injected_mg)) << "species " << s;
    }
}

} // namespace

TEST(Simulation, ResumingAPrefixEqualsAFreshRun)
{
    Town town;
    EmergencySimulator sim(town.net, {});
    const auto actions = protocol_actions(town.hydrants({1, 7}), town.hydrants({12}), 9 * kH, {});

    auto fresh = sim.initial_state();
    sim.advance(fresh, sim.exposure_end_s(), &town.scenario, actions);

    auto prefix = sim.initial_state();
    sim.advance(prefix, 9 * kH, &town.scenario, actions);
    const double resumed = sim.projected_utim(prefix, &town.scenario, actions);

    EXPECT_EQ(resumed, fresh.tim_g());
    EXPECT_GT(fresh.tim_g(), 0.0);
}

TEST(Simulation, NoIngestionBeforeSeven)
{
    Town town;
    EmergencySimulator sim(town.net, {});
    auto st = sim.initial_state();
    sim.advance(st, 6.99 * kH, &town.scenario, {});
    EXPECT_EQ(st.tim_g(), 0.0);
    sim.advance(st, 7 * kH, &town.scenario, {});
    EXPECT_GT(st.tim_g(), 0.0);
}

TEST(Simulation, MassConservedWithActions)
{
    Town town;
    EmergencySimulator sim(town.net, {});
    const auto a1 = protocol_actions(town.hydrants({1, 7, 15}), town.hydrants({3, 12, 18}), 9 * kH, {});
    auto actions = a1;
    const auto a2 = protocol_actions(town.hydrants({1, 4, 9}), town.hydrants({0, 6, 11}), 12 * kH, {});
    actions.insert(actions.end(), a2.begin(), a2.end());
    auto st = sim.initial_state();
    sim.advance(st, 24 * kH, &town.scenario, actions);
    expect_conserved(st);
    EXPECT_GT(st.transport.account[0].flushed_mg, 0.0);
    EXPECT_NEAR(st.transport.account[1].injected_mg, 6 * 100.0 * 1e6, 1e-3);
}

TEST(Simulation, MassConservedWithoutActions)
{
    Town town;
    EmergencySimulator sim(town.net, {});
    auto st = sim.initial_state();
    sim.advance(st, 24 * kH, &town.scenario, {});
    expect_conserved(st);
    EXPECT_NEAR(st.transport.account[0].injected_mg, 33.0 * 1e6, 1e-3);
}

TEST(Simulation, ActionsAfterLastIngestionDoNotChangeUtim)
{
    Town town;
    EmergencySimulator sim(town.net, {});
    const double base = sim.projected_utim(sim.initial_state(), &town.scenario, {});
    for (double t : {18.0 * kH, 19.0 * kH, 22.5 * kH}) {
        const auto actions = protocol_actions(town.hydrants({0, 5, 10}), town.hydrants({2, 8, 14}), t, {});
        EXPECT_EQ(sim.projected_utim(sim.initial_state(), &town.scenario, actions), base);
        auto st = sim.initial_state();
        sim.advance(st, 24 * kH, &town.scenario, actions);
        EXPECT_EQ(st.tim_g(), base);
    }
}

TEST(Simulation, ToxicDoseOrderingOnTheTown)
{
    Town town;
    double previous = -1.0;
    for (auto level : {ToxicDoseLevel::Min, ToxicDoseLevel::Avg, ToxicDoseLevel::Max}) {
        SimulationSettings s;
        s.exposure.toxic_dose_mg = toxic_dose_mg(level);
        EmergencySimulator sim(town.net, s);
        const double utim = sim.projected_utim(sim.initial_state(), &town.scenario, {});
        EXPECT_LE(previous, utim) << to_string(level);
        previous = utim;
    }
}

TEST(Simulation, ReactionsOffMeansNobodyStops)
{
    Town town;
    SimulationSettings s;
    s.rules.sickness = false;
    s.demand_feedback = false;
    EmergencySimulator sim(town.net, s);
    const auto st = sim.projected_state(sim.initial_state(), &town.scenario, {});
    for (const auto& c : st.cohorts) {
        EXPECT_EQ(c.state, CohortState::Normal);
    }
    EmergencySimulator reacting(town.net, {});
    EXPECT_GE(st.tim_g(), reacting.projected_utim(reacting.initial_state(), &town.scenario, {}));
}

TEST(Simulation, NoScenarioMeansNoIngestion)
{
    Town town;
    EmergencySimulator sim(town.net, {});
    EXPECT_EQ(sim.projected_utim(sim.initial_state(), nullptr, {}), 0.0);
}

TEST(Simulation, UtimAgreesWithIngestionByNode)
{
    Town town;
    EmergencySimulator sim(town.net, {});
    const auto st = sim.projected_state(sim.initial_state(), &town.scenario, {});
    double sum = 0.0;
    for (double g : ingested_by_node(town.net, st)) {
        sum += g;
    }
    EXPECT_NEAR(sum, st.tim_g(), 1e-9 * st.tim_g());
}

TEST(Simulation, ProtocolActionsCarrySettings)
{
    const std::vector<std::size_t> flush{4, 9};
    const std::vector<std::size_t> dye{2};
    const auto acts = protocol_actions(flush, dye, 9 * kH, {});
    ASSERT_EQ(acts.size(), 3u);
    EXPECT_EQ(acts[0].kind, ActionKind::Flush);
    EXPECT_DOUBLE_EQ(acts[0].start_s, 9 * kH);
    EXPECT_DOUBLE_EQ(acts[0].duration_s, 5 * kH);
    EXPECT_DOUBLE_EQ(acts[0].magnitude, 166.5);
    EXPECT_EQ(acts[2].kind, ActionKind::Dye);
    EXPECT_DOUBLE_EQ(acts[2].duration_s, kH);
    EXPECT_DOUBLE_EQ(acts[2].magnitude, 100.0);
}

TEST(Simulation, HydraulicsResolvedAtEmitterEdges)
{
    Town town;
    EmergencySimulator sim(town.net, {});
    const auto actions = protocol_actions(town.hydrants({3}), {}, 9.5 * kH, {});
    std::vector<double> emitter_changes;
    std::size_t last = 0;
    auto st = sim.initial_state();
    sim.advance(st, 16 * kH, &town.scenario, actions, [&](const SimulationState& s, double) {
        if (s.hydraulic_solves != last) {
            last = s.hydraulic_solves;
            emitter_changes.push_back(s.hydraulics.time_s);
        }
    });
    EXPECT_NE(std::find(emitter_changes.begin(), emitter_changes.end(), 9.5 * kH), emitter_changes.end());
    EXPECT_NE(std::find(emitter_changes.begin(), emitter_changes.end(), 14.5 * kH), emitter_changes.end());
}
