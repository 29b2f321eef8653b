#include "wdsguard/fixtures.hpp"
#include "wdsguard/optimizer.hpp"
#include "wdsguard/oracles.hpp"
#include "wdsguard/orchestrator.hpp"
#include "wdsguard/text_format.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace wdsguard;

namespace {

std::string fixture(const char* name)
{
    return read_file(std::string(WDSGUARD_FIXTURE_DIR) + "/" + name);
}

Genome at(std::initializer_list<Coordinate> pts)
{
    return Genome{std::vector<Coordinate>(pts)};
}

// Distance of every slot's node to a target point: cheap, deterministic, and with a known optimum.
class DistanceOracle : public FitnessOracle {
public:
    DistanceOracle(const Network& net, Coordinate target) : net_(&net), target_(target) {}
    std::vector<double> evaluate(std::span<const std::vector<std::size_t>> protocols) override
    {
        std::vector<double> out;
        for (const auto& p : protocols) {
            double s = 0.0;
            for (auto n : p) {
                const auto c = net_->node_coordinate(n);
                s += std::hypot(c.x - target_.x, c.y - target_.y);
            }
            out.push_back(s);
            ++calls;
        }
        return out;
    }
    std::size_t calls = 0;

private:
    const Network* net_;
    Coordinate target_;
};

} // namespace

TEST(Optimizer, ProtocolDistance)
{
    EXPECT_EQ(protocol_distance(at({{1, 2}, {3, 4}}), at({{1, 2}, {3, 4}})), 0.0);
    EXPECT_DOUBLE_EQ(protocol_distance(at({{0, 0}}), at({{3, 4}})), 5.0);
    EXPECT_DOUBLE_EQ(protocol_distance(at({{0, 0}, {1, 1}}), at({{3, 4}, {1, 2}})), 6.0);
    EXPECT_THROW(protocol_distance(at({{0, 0}}), at({{0, 0}, {0, 0}})), std::invalid_argument);
}

TEST(Optimizer, DiversityExamples)
{
    const std::vector<Genome> g{at({{0, 0}}), at({{10, 0}}), at({{25, 0}})};
    const std::vector<double> u{5.0, 1.0, 3.0};
    const auto dnn = diversity_values(g, u, DiversityMetric::DNN);
    EXPECT_DOUBLE_EQ(dnn[0], 10.0);
    EXPECT_DOUBLE_EQ(dnn[1], 10.0);
    EXPECT_DOUBLE_EQ(dnn[2], 15.0);
    const auto ads = diversity_values(g, u, DiversityMetric::ADS);
    EXPECT_DOUBLE_EQ(ads[1], 25.0 / 3.0);
    EXPECT_DOUBLE_EQ(ads[0], 35.0 / 3.0);
    const auto dbs = diversity_values(g, u, DiversityMetric::DBS);
    EXPECT_EQ(dbs[1], 0.0);
    EXPECT_DOUBLE_EQ(dbs[2], 15.0);

    const std::vector<Genome> twins{at({{4, 4}}), at({{4, 4}})};
    const std::vector<double> tu{1.0, 2.0};
    for (double v : diversity_values(twins, tu, DiversityMetric::DNN)) {
        EXPECT_EQ(v, 0.0);
    }
    EXPECT_EQ(diversity_metric_from_string("ads"), DiversityMetric::ADS);
    EXPECT_FALSE(diversity_metric_from_string("xyz").has_value());
}

TEST(Optimizer, DiversityMatchesBruteForce)
{
    for (const auto& c : oracle::diversity_battery(200, 99)) {
        EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
    }
}

TEST(Optimizer, Dominance)
{
    EXPECT_TRUE(dominates({10, 5}, {12, 4}));
    EXPECT_FALSE(dominates({10, 5}, {10, 5}));
    EXPECT_FALSE(dominates({10, 5}, {9, 9}));
    EXPECT_TRUE(dominates({9, 9}, {10, 5})); // lower UTIM and more diverse
    EXPECT_TRUE(dominates({10, 5}, {10, 4}));
}

TEST(Optimizer, SortingMatchesBruteForce)
{
    for (const auto& c : oracle::sorting_battery(200, 5)) {
        EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
    }
    const std::vector<Objectives> objs{{1, 5}, {2, 4}, {0, 0}, {3, 1}};
    std::vector<int> ranks;
    const auto fronts = fast_non_dominated_sort(objs, &ranks);
    EXPECT_EQ(ranks, (std::vector<int>{0, 1, 0, 2}));
    EXPECT_EQ(fronts.size(), 3u);
}

TEST(Optimizer, CrowdingBoundariesAreInfinite)
{
    const std::vector<Objectives> objs{{1, 5}, {2, 4}, {3, 2}, {4, 1}};
    const std::vector<std::size_t> front{0, 1, 2, 3};
    const auto cd = crowding_distance(objs, front);
    EXPECT_TRUE(std::isinf(cd[0]));
    EXPECT_TRUE(std::isinf(cd[3]));
    EXPECT_GT(cd[1], 0.0);
    EXPECT_FALSE(std::isinf(cd[1]));
}

TEST(Optimizer, NoOpVariationLeavesPopulationUnchanged)
{
    const auto net = toy_network();
    GASettings s;
    s.population = 8;
    s.crossover_rate = 0.0;
    s.mutation_rate = 0.0;
    DynamicNsga2 ga(net, {1, 0}, s);
    DistanceOracle oracle(net, {0, 0});
    const auto c = net.node_coordinate(net.intermediate_nodes()[2]);
    ga.seed_population(std::vector<Genome>(8, at({c})), oracle);
    const auto before = ga.population();
    for (int g = 0; g < 5; ++g) {
        ga.step(oracle);
    }
    ASSERT_EQ(ga.population().size(), before.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        EXPECT_EQ(ga.population()[i].genome, before[i].genome);
        EXPECT_EQ(ga.population()[i].utim, before[i].utim);
    }
}

TEST(Optimizer, SnappedGenomesSitOnIntermediateNodes)
{
    const auto net = parse_native(fixture("synthetic_town.net"));
    GASettings s;
    s.population = 20;
    DynamicNsga2 ga(net, {3, 3}, s);
    DistanceOracle oracle(net, {1000, 1000});
    ga.initialize(oracle);
    for (int g = 0; g < 10; ++g) {
        ga.step(oracle);
        for (const auto& ind : ga.population()) {
            ASSERT_EQ(ind.nodes.size(), 6u);
            for (std::size_t k = 0; k < 6; ++k) {
                ASSERT_TRUE(net.is_intermediate(ind.nodes[k]));
                ASSERT_EQ(ind.genome.slots[k], net.node_coordinate(ind.nodes[k]));
                ASSERT_EQ(nearest_intermediate_node(ind.genome.slots[k], net), net.node_id(ind.nodes[k]));
            }
        }
    }
}

TEST(Optimizer, IncumbentNeverWorsensInAStaticEpoch)
{
    const auto net = parse_native(fixture("synthetic_town.net"));
    for (auto metric : {DiversityMetric::DNN, DiversityMetric::ADS, DiversityMetric::DBS}) {
        GASettings s;
        s.population = 20;
        s.metric = metric;
        s.seed = 3;
        DynamicNsga2 ga(net, {2, 1}, s);
        DistanceOracle oracle(net, {1500, 900});
        ga.initialize(oracle);
        double best = ga.incumbent().utim;
        for (int g = 0; g < 30; ++g) {
            ga.step(oracle);
            ASSERT_LE(ga.incumbent().utim, best) << to_string(metric);
            best = ga.incumbent().utim;
        }
    }
}

TEST(Optimizer, SameSeedSameRun)
{
    const auto net = parse_native(fixture("synthetic_town.net"));
    auto run = [&](std::uint64_t seed) {
        GASettings s;
        s.population = 16;
        s.seed = seed;
        DynamicNsga2 ga(net, {3, 3}, s);
        DistanceOracle oracle(net, {200, 300});
        ga.initialize(oracle);
        for (int g = 0; g < 8; ++g) {
            ga.step(oracle);
        }
        std::vector<std::vector<std::size_t>> nodes;
        for (const auto& ind : ga.population()) {
            nodes.push_back(ind.nodes);
        }
        return nodes;
    };
    EXPECT_EQ(run(4), run(4));
    EXPECT_NE(run(4), run(5));
}

TEST(Optimizer, SettingsValidate)
{
    GASettings s;
    s.population = 7;
    EXPECT_THROW(s.validate(), ValidationError);
    s.population = 8;
    s.mutation_rate = 1.5;
    EXPECT_THROW(s.validate(), ValidationError);
}

TEST(Optimizer, ToyNetworkFindsExhaustiveOptimum)
{
    const auto r = oracle::toy_exhaustive_search(3, 30);
    EXPECT_EQ(r.candidate_utims_g.size(), 6u);
    EXPECT_EQ(r.matches, 3u);
}

// Zero perceived load: every protocol scores zero.
TEST(Optimizer, ZeroLoadScoresZero)
{
    const auto net = parse_native(fixture("synthetic_town.net"));
    EmergencyConfig cfg;
    EpochFitness fit(net, cfg.simulation_settings(), cfg.shape(), cfg.actions, 1);
    ContaminationScenario none{"IN0709", 0.0, 1.0, 0.0, 3600.0};
    fit.begin_epoch(9 * 3600.0, none, {});
    const auto in = net.intermediate_nodes();
    const std::vector<std::vector<std::size_t>> protos{{in[0], in[1], in[2], in[3], in[4], in[5]},
                                                       {in[6], in[7], in[8], in[9], in[10], in[11]}};
    for (double u : fit.evaluate(protos)) {
        EXPECT_EQ(u, 0.0);
    }
}

TEST(Optimizer, LaterExecutionRarelyHelps)
{
    const auto net = parse_native(fixture("synthetic_town.net"));
    EmergencyConfig cfg;
    const ContaminationScenario sc{"IN0709", 33.0, 1.0, 0.0, 5 * 3600.0};
    EpochFitness early(net, cfg.simulation_settings(), cfg.shape(), cfg.actions, 1);
    EpochFitness late(net, cfg.simulation_settings(), cfg.shape(), cfg.actions, 1);
    // while the plume is still spreading, before the first drinking event
    early.begin_epoch(6 * 3600.0, sc, {});
    late.begin_epoch(7 * 3600.0, sc, {});
    Rng rng(12);
    const auto in = net.intermediate_nodes();
    std::vector<std::vector<std::size_t>> protos;
    for (int i = 0; i < 60; ++i) {
        std::vector<std::size_t> p;
        for (std::size_t k = 0; k < 6; ++k) {
            p.push_back(in[rng.below(in.size())]);
        }
        protos.push_back(p);
    }
    const auto a = early.evaluate(protos);
    const auto b = late.evaluate(protos);
    std::size_t worse_or_equal = 0;
    for (std::size_t i = 0; i < protos.size(); ++i) {
        worse_or_equal += b[i] >= a[i] ? 1 : 0;
    }
    EXPECT_GE(static_cast<double>(worse_or_equal), 0.95 * static_cast<double>(protos.size()));
}
