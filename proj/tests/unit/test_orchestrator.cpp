#include "wdsguard/orchestrator.hpp"
#include "wdsguard/text_format.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace wdsguard;

namespace {

constexpr double kH = 3600.0;

std::string fixture(const char* name)
{
    return read_file(std::string(WDSGUARD_FIXTURE_DIR) + "/" + name);
}

struct TownRun {
    Network net = parse_native(fixture("synthetic_town.net"));
    PerceivedTimeline timeline = parse_timeline(fixture("town_timeline.txt")).timeline;
    EmergencyConfig config = small_config();

    static EmergencyConfig small_config()
    {
        auto cfg = parse_config(fixture("default_run.cfg"));
        cfg.generations_per_hour = 2;
        cfg.ga.population = 10;
        return cfg;
    }
};

} // namespace

TEST(Orchestrator, ConfigRoundTrip)
{
    const auto cfg = parse_config(fixture("default_run.cfg"));
    EXPECT_DOUBLE_EQ(cfg.response_delay_s, 6 * kH);
    EXPECT_EQ(cfg.execution_times_s, (std::vector<double>{9 * kH, 12 * kH}));
    EXPECT_EQ(cfg.generations_per_hour, 25u);
    EXPECT_EQ(cfg.ga.population, 50u);
    EXPECT_DOUBLE_EQ(cfg.exposure.toxic_dose_mg, 3.5);

    auto custom = cfg;
    custom.strategy = Strategy::Dye;
    custom.ga.metric = DiversityMetric::DBS;
    custom.flags.consumer_reactions = false;
    custom.execution_times_s.clear();
    custom.exposure.toxic_dose_mg = 2.45;
    const auto again = parse_config(serialize_config(custom));
    EXPECT_EQ(serialize_config(again), serialize_config(custom));
    EXPECT_EQ(again.strategy, Strategy::Dye);
    EXPECT_TRUE(again.execution_times_s.empty());
    EXPECT_FALSE(again.flags.consumer_reactions);
}

TEST(Orchestrator, ConfigRejectsUnknownKeys)
{
    EXPECT_THROW(parse_config("[RUN]\nwarp = 9\n"), ParseError);
    EXPECT_THROW(parse_config("[GA]\nmetric = xyz\n"), ParseError);
    EXPECT_THROW(parse_config("[RUN]\nclock = sundial\n"), ParseError);
}

TEST(Orchestrator, StrategyShapes)
{
    EmergencyConfig cfg;
    EXPECT_EQ(cfg.shape(), (ProtocolShape{3, 3}));
    cfg.strategy = Strategy::Flush;
    EXPECT_EQ(cfg.shape(), (ProtocolShape{3, 0}));
    cfg.strategy = Strategy::Dye;
    cfg.slots_per_action = 2;
    EXPECT_EQ(cfg.shape(), (ProtocolShape{0, 2}));
    cfg.flags.consumer_reactions = false;
    const auto s = cfg.simulation_settings();
    EXPECT_FALSE(s.rules.sickness);
    EXPECT_FALSE(s.demand_feedback);
    EXPECT_TRUE(s.rules.dye_alert);
}

TEST(Orchestrator, ExecuteProtocol)
{
    std::vector<ResponseAction> history;
    execute_protocol(history, ExecutedProtocol{9 * kH, {}, {}, 0}, {});
    EXPECT_TRUE(history.empty());

    const ExecutedProtocol p{9 * kH, {3, 4}, {5}, 1};
    execute_protocol(history, p, {});
    ASSERT_EQ(history.size(), 3u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(history[i].kind, ActionKind::Flush);
        EXPECT_DOUBLE_EQ(history[i].start_s, 9 * kH);
        EXPECT_DOUBLE_EQ(history[i].start_s + history[i].duration_s, 14 * kH);
    }
    EXPECT_EQ(history[2].kind, ActionKind::Dye);

    execute_protocol(history, p, {});
    ASSERT_EQ(history.size(), 6u);
    EXPECT_EQ(history[3], history[0]);
}

TEST(Orchestrator, ConfinedArea)
{
    std::vector<UtimSample> same;
    std::vector<UtimSample> gap;
    for (int h = 6; h <= 18; ++h) {
        same.push_back({h * kH, 50.0, 50.0, 0, 0});
        gap.push_back({h * kH, 40.0, 50.0, 0, 0});
    }
    EXPECT_EQ(confined_area(same, 6 * kH, 18 * kH), 0.0);
    EXPECT_DOUBLE_EQ(confined_area(gap, 6 * kH, 18 * kH), 120.0);
    EXPECT_DOUBLE_EQ(confined_area(gap, 6 * kH, 9 * kH), 30.0);
}

TEST(Orchestrator, EpochBoundariesAreTheUnionOfTicksUpdatesAndExecutions)
{
    TownRun t;
    t.config.execution_times_s = {9.5 * kH, 12 * kH};
    PerceivedTimeline tl;
    const auto& e = t.timeline.entries();
    tl.append(e[0]);
    tl.append({8.25 * kH, e[1].scenario});
    tl.append({10 * kH, e[2].scenario});
    const auto r = run_emergency(t.net, tl, t.config);

    std::set<double> want;
    for (int h = 6; h < 24; ++h) {
        want.insert(h * kH);
    }
    want.insert(8.25 * kH);
    want.insert(9.5 * kH);
    std::set<double> got;
    for (const auto& ep : r.epochs) {
        got.insert(ep.start_s);
    }
    EXPECT_EQ(got, want);
    ASSERT_EQ(r.executions.size(), 2u);
    EXPECT_DOUBLE_EQ(r.executions[0].time_s, 9.5 * kH);
}

TEST(Orchestrator, BudgetRunProperties)
{
    TownRun t;
    const auto r = run_emergency(t.net, t.timeline, t.config);
    ASSERT_FALSE(r.series.empty());
    EXPECT_DOUBLE_EQ(r.series.front().sim_time_s, 6 * kH);

    // incumbent non-increasing within an epoch
    for (std::size_t i = 1; i < r.series.size(); ++i) {
        if (r.series[i].epoch == r.series[i - 1].epoch) {
            EXPECT_LE(r.series[i].incumbent_utim_g, r.series[i - 1].incumbent_utim_g) << i;
        }
    }
    // constant after the last ingestion event
    const UtimSample* at18 = nullptr;
    for (const auto& s : r.series) {
        if (s.sim_time_s >= 18 * kH) {
            if (at18 == nullptr) {
                at18 = &s;
            }
            EXPECT_EQ(s.incumbent_utim_g, at18->incumbent_utim_g);
            EXPECT_EQ(s.no_response_utim_g, at18->no_response_utim_g);
        }
    }
    ASSERT_NE(at18, nullptr);

    // no-response changes exactly at scenario-update epochs
    std::set<double> steps;
    for (std::size_t i = 1; i < r.epochs.size(); ++i) {
        if (r.epochs[i].no_response_utim_g != r.epochs[i - 1].no_response_utim_g) {
            steps.insert(r.epochs[i].start_s);
        }
    }
    EXPECT_EQ(steps, (std::set<double>{8 * kH, 10 * kH}));

    ASSERT_EQ(r.executions.size(), 2u);
    EXPECT_DOUBLE_EQ(r.executions[0].time_s, 9 * kH);
    EXPECT_DOUBLE_EQ(r.executions[1].time_s, 12 * kH);
    EXPECT_EQ(r.executions[0].flush_nodes.size(), 3u);
    EXPECT_EQ(r.executions[0].dye_nodes.size(), 3u);
    ASSERT_TRUE(r.impact.has_value());
}

TEST(Orchestrator, NoResponseFlatWithAllFlagsOff)
{
    TownRun t;
    t.config.flags = {false, false, false};
    const auto r = run_emergency(t.net, t.timeline, t.config);
    for (const auto& s : r.series) {
        EXPECT_EQ(s.no_response_utim_g, r.series.front().no_response_utim_g);
    }
    EXPECT_TRUE(r.executions.empty());
    for (const auto& ev : r.events) {
        EXPECT_NE(ev.kind, "scenario_update");
        EXPECT_NE(ev.kind, "execution");
    }
}

TEST(Orchestrator, DeterministicOutputs)
{
    TownRun t;
    auto csv = [&] {
        const auto r = run_emergency(t.net, t.timeline, t.config);
        return utim_series_csv(r.series, t.config.report_until_s) + events_csv(r.events) +
               protocols_csv(t.net, r.epochs, t.config.shape()) + impact_map_csv(*r.impact);
    };
    EXPECT_EQ(csv(), csv());
}

TEST(Orchestrator, SeriesCsvStopsAtReportTime)
{
    TownRun t;
    const auto r = run_emergency(t.net, t.timeline, t.config);
    const auto text = utim_series_csv(r.series, 18 * kH);
    EXPECT_EQ(text.find("\n68400,"), std::string::npos);
    EXPECT_NE(text.find("\n64800,"), std::string::npos);
}

TEST(Orchestrator, QueueValidation)
{
    TownRun t;
    EmergencyRun run(t.net, t.timeline, t.config);
    run.start();
    PendingCommand bad;
    bad.kind = PendingCommand::Kind::ScenarioUpdate;
    bad.scenario = {"NOPE", 10, 1, 0, kH};
    try {
        run.queue(bad);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.entity(), "NOPE");
    }
    PendingCommand past;
    past.at_s = 2 * kH;
    EXPECT_THROW(run.queue(past), ValidationError);
    PendingCommand wrong;
    wrong.protocol = std::vector<std::size_t>{t.net.intermediate_nodes()[0]};
    EXPECT_THROW(run.queue(wrong), ValidationError);
    run.run_to_end();
    EXPECT_THROW(run.queue(PendingCommand{}), std::logic_error);
}

TEST(Orchestrator, ExplicitProtocolExecution)
{
    TownRun t;
    t.config.flags.execution_feedback = false;
    EmergencyRun run(t.net, t.timeline, t.config);
    run.schedule_from_config();
    run.advance_until(9 * kH);
    const auto in = t.net.intermediate_nodes();
    PendingCommand c;
    c.protocol = std::vector<std::size_t>{in[0], in[1], in[2], in[3], in[4], in[5]};
    run.queue(c);
    run.advance_until(10 * kH);
    ASSERT_EQ(run.executions().size(), 1u);
    EXPECT_DOUBLE_EQ(run.executions()[0].time_s, 9 * kH);
    EXPECT_EQ(run.executions()[0].flush_nodes, (std::vector<std::size_t>{in[0], in[1], in[2]}));
}

TEST(Orchestrator, PrefixedEpochFitnessMatchesFreshEvaluation)
{
    TownRun t;
    const auto settings = t.config.simulation_settings();
    EpochFitness fit(t.net, settings, t.config.shape(), t.config.actions, 1);
    const auto scenario = t.timeline.perceived_at(10 * kH);
    std::vector<ResponseAction> history;
    const auto in = t.net.intermediate_nodes();
    execute_protocol(history, {9 * kH, {in[2], in[3], in[4]}, {in[7], in[8], in[9]}, 0}, t.config.actions);
    fit.begin_epoch(11 * kH, scenario, history);

    const std::vector<std::size_t> proto{in[10], in[11], in[12], in[13], in[14], in[15]};
    const double via_prefix = fit.evaluate(std::vector<std::vector<std::size_t>>{proto})[0];

    auto all = history;
    execute_protocol(all, {11 * kH, {in[10], in[11], in[12]}, {in[13], in[14], in[15]}, 1}, t.config.actions);
    EmergencySimulator sim(t.net, settings);
    EXPECT_EQ(via_prefix, sim.projected_utim(sim.initial_state(), &scenario, all));

    EXPECT_EQ(fit.no_response_utim(), sim.projected_utim(sim.initial_state(), &scenario, {}));
    // the memo answers repeats
    fit.evaluate(std::vector<std::vector<std::size_t>>{proto});
    EXPECT_EQ(fit.memo_hits(), 1u);
}
