#pragma once

#include "wdsguard/netmodel.hpp"
#include "wdsguard/random.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace wdsguard {

enum class DiversityMetric { DNN, ADS, DBS };
std::string_view to_string(DiversityMetric m);
std::optional<DiversityMetric> diversity_metric_from_string(std::string_view s);

struct GASettings {
    std::size_t population = 50;
    double crossover_rate = 0.85; // per mating pair
    double mutation_rate = 0.04;  // per variable
    double sbx_eta = 15.0;
    double mutation_eta = 10.0;
    DiversityMetric metric = DiversityMetric::DNN;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Flushing slots come first, then dye slots.
struct ProtocolShape {
    std::size_t flush_slots = 3;
    std::size_t dye_slots = 3;
    [[nodiscard]] std::size_t slots() const noexcept { return flush_slots + dye_slots; }
    friend bool operator==(const ProtocolShape&, const ProtocolShape&) = default;
};

struct Genome {
    std::vector<Coordinate> slots;
    friend bool operator==(const Genome&, const Genome&) = default;
};

/// Sum over corresponding slots of the Euclidean distance. Throws std::invalid_argument when
/// the slot counts differ.
double protocol_distance(const Genome& a, const Genome& b);

struct Individual {
    Genome genome;
    std::vector<std::size_t> nodes; // snapped intermediate node per slot
    double utim = 0.0;              // true objective, minimized (g)
    double diversity = 0.0;         // artificial objective, maximized (m)
    int rank = 0;
    double crowding = 0.0;
};

/// Diversity of every member under `metric`. DNN: distance to the nearest other member; ADS:
/// mean distance to all members including itself; DBS: distance to the first minimum-UTIM member.
std::vector<double> diversity_values(std::span<const Genome> genomes, std::span<const double> utims,
                                     DiversityMetric metric);

struct Objectives {
    double utim = 0.0;
    double diversity = 0.0;
};

/// a dominates b: no worse in both objectives and strictly better in one.
bool dominates(const Objectives& a, const Objectives& b);

/// Fronts of indices, front 0 non-dominated. Ranks returned through `ranks` when given.
std::vector<std::vector<std::size_t>> fast_non_dominated_sort(std::span<const Objectives> objs,
                                                             std::vector<int>* ranks = nullptr);

/// Crowding distance of the members of one front (same order as `front`).
std::vector<double> crowding_distance(std::span<const Objectives> objs, std::span<const std::size_t> front);

/// Evaluates protocols (snapped node lists) under the current environment epoch.
class FitnessOracle {
public:
    virtual ~FitnessOracle() = default;
    virtual std::vector<double> evaluate(std::span<const std::vector<std::size_t>> protocols) = 0;
};

/// NSGA-II over protocol coordinates with a diversity objective, kept alive across environment
/// changes: `reevaluate` refreshes fitness in place, the population is never restarted.
class DynamicNsga2 {
public:
    DynamicNsga2(const Network& net, ProtocolShape shape, GASettings settings);

    /// Random initial population, evaluated.
    void initialize(FitnessOracle& oracle);
    /// Re-scores the whole population under a new environment epoch.
    void reevaluate(FitnessOracle& oracle);
    /// One generation: tournament, SBX, polynomial mutation, snapping, evaluation, selection.
    void step(FitnessOracle& oracle);

    /// Replaces the population (tests and warm starts); evaluates it.
    void seed_population(std::vector<Genome> genomes, FitnessOracle& oracle);

    [[nodiscard]] const std::vector<Individual>& population() const noexcept { return population_; }
    [[nodiscard]] const Individual& incumbent() const;
    [[nodiscard]] std::size_t generation() const noexcept { return generation_; }
    [[nodiscard]] const ProtocolShape& shape() const noexcept { return shape_; }
    [[nodiscard]] const GASettings& settings() const noexcept { return settings_; }

    /// Snaps every slot to its nearest intermediate node and moves the slot onto that node.
    void snap(Individual& ind) const;

private:
    void rank_population(std::vector<Individual>& pop) const;
    [[nodiscard]] std::size_t tournament();
    void variation(const Genome& p1, const Genome& p2, Genome& c1, Genome& c2);
    void mutate(Genome& g);
    void evaluate(std::vector<Individual>& pop, FitnessOracle& oracle) const;

    const Network* net_;
    IntermediateNodeIndex index_;
    ProtocolShape shape_;
    GASettings settings_;
    Rng rng_;
    BoundingBox bounds_;
    std::vector<Individual> population_;
    std::size_t generation_ = 0;
};

} // namespace wdsguard
