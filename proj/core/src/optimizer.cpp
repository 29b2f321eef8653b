#include "wdsguard/optimizer.hpp"

#include "wdsguard/text_format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace wdsguard {

std::string_view to_string(DiversityMetric m)
{
    switch (m) {
    case DiversityMetric::DNN:
        return "dnn";
    case DiversityMetric::ADS:
        return "ads";
    case DiversityMetric::DBS:
        return "dbs";
    }
    return "dnn";
}

std::optional<DiversityMetric> diversity_metric_from_string(std::string_view s)
{
    const auto lower = to_lower(s);
    for (auto m : {DiversityMetric::DNN, DiversityMetric::ADS, DiversityMetric::DBS}) {
        if (to_string(m) == lower) {
            return m;
        }
    }
    return std::nullopt;
}

void GASettings::validate() const
{
    if (population < 4 || population % 2 != 0) {
        throw ValidationError("ga", "population size must be even and at least 4");
    }
    if (crossover_rate < 0.0 || crossover_rate > 1.0 || mutation_rate < 0.0 || mutation_rate > 1.0) {
        throw ValidationError("ga", "crossover and mutation rates must lie in [0, 1]");
    }
    if (!(sbx_eta >= 0.0) || !(mutation_eta >= 0.0)) {
        throw ValidationError("ga", "distribution indices must not be negative");
    }
}

double protocol_distance(const Genome& a, const Genome& b)
{
    if (a.slots.size() != b.slots.size()) {
        throw std::invalid_argument("protocol_distance: slot counts differ");
    }
    double d = 0.0;
    for (std::size_t k = 0; k < a.slots.size(); ++k) {
        d += std::hypot(a.slots[k].x - b.slots[k].x, a.slots[k].y - b.slots[k].y);
    }
    return d;
}

std::vector<double> diversity_values(std::span<const Genome> genomes, std::span<const double> utims,
                                     DiversityMetric metric)
{
    const std::size_t n = genomes.size();
    std::vector<double> out(n, 0.0);
    if (n == 0) {
        return out;
    }
    if (metric == DiversityMetric::DBS) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (utims[i] < utims[best]) {
                best = i;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = protocol_distance(genomes[i], genomes[best]);
        }
        return out;
    }
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = protocol_distance(genomes[i], genomes[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (metric == DiversityMetric::DNN) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    best = std::min(best, dist[i * n + j]);
                }
            }
            out[i] = n > 1 ? best : 0.0;
        } else {
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                sum += dist[i * n + j];
            }
            out[i] = sum / static_cast<double>(n);
        }
    }
    return out;
}

bool dominates(const Objectives& a, const Objectives& b)
{
    return a.utim <= b.utim && a.diversity >= b.diversity && (a.utim < b.utim || a.diversity > b.diversity);
}

std::vector<std::vector<std::size_t>> fast_non_dominated_sort(std::span<const Objectives> objs,
                                                             std::vector<int>* ranks)
{
    const std::size_t n = objs.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> count(n, 0);
    std::vector<std::vector<std::size_t>> fronts(1);
    std::vector<int> rank(n, 0);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (p == q) {
                continue;
            }
            if (dominates(objs[p], objs[q])) {
                dominated[p].push_back(q);
            } else if (dominates(objs[q], objs[p])) {
                ++count[p];
            }
        }
        if (count[p] == 0) {
            fronts[0].push_back(p);
        }
    }
    std::size_t i = 0;
    while (i < fronts.size() && !fronts[i].empty()) {
        std::vector<std::size_t> next;
        for (auto p : fronts[i]) {
            rank[p] = static_cast<int>(i);
            for (auto q : dominated[p]) {
                if (--count[q] == 0) {
                    next.push_back(q);
                }
            }
        }
        std::sort(next.begin(), next.end());
        if (next.empty()) {
            break;
        }
        fronts.push_back(std::move(next));
        ++i;
    }
    if (n == 0) {
        fronts.clear();
    }
    if (ranks != nullptr) {
        *ranks = std::move(rank);
    }
    return fronts;
}

std::vector<double> crowding_distance(std::span<const Objectives> objs, std::span<const std::size_t> front)
{
    const std::size_t m = front.size();
    std::vector<double> out(m, 0.0);
    if (m <= 2) {
        std::fill(out.begin(), out.end(), std::numeric_limits<double>::infinity());
        return out;
    }
    std::vector<std::size_t> order(m);
    for (int objective = 0; objective < 2; ++objective) {
        auto value = [&](std::size_t k) {
            const auto& o = objs[front[k]];
            return objective == 0 ? o.utim : o.diversity;
        };
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
        const double lo = value(order.front());
        const double hi = value(order.back());
        out[order.front()] = std::numeric_limits<double>::infinity();
        out[order.back()] = std::numeric_limits<double>::infinity();
        if (!(hi > lo)) {
            continue;
        }
        for (std::size_t k = 1; k + 1 < m; ++k) {
            out[order[k]] += (value(order[k + 1]) - value(order[k - 1])) / (hi - lo);
        }
    }
    return out;
}

// --- DynamicNsga2 --------------------------------------------------------------------------

DynamicNsga2::DynamicNsga2(const Network& net, ProtocolShape shape, GASettings settings)
    : net_(&net), index_(net), shape_(shape), settings_(settings), rng_(settings.seed), bounds_(net.bounds())
{
    settings_.validate();
    if (net.intermediate_nodes().empty()) {
        throw ValidationError("network", "no intermediate nodes to place response actions on");
    }
    if (shape_.slots() == 0) {
        throw ValidationError("protocol", "a protocol needs at least one slot");
    }
}

void DynamicNsga2::snap(Individual& ind) const
{
    ind.nodes.resize(ind.genome.slots.size());
    for (std::size_t k = 0; k < ind.genome.slots.size(); ++k) {
        const auto node = index_.nearest(ind.genome.slots[k]);
        ind.nodes[k] = node;
        ind.genome.slots[k] = net_->node_coordinate(node);
    }
}

void DynamicNsga2::evaluate(std::vector<Individual>& pop, FitnessOracle& oracle) const
{
    std::vector<std::vector<std::size_t>> protocols;
    protocols.reserve(pop.size());
    for (const auto& ind : pop) {
        protocols.push_back(ind.nodes);
    }
    const auto utims = oracle.evaluate(protocols);
    if (utims.size() != pop.size()) {
        throw std::runtime_error("fitness oracle returned a wrong number of values");
    }
    for (std::size_t i = 0; i < pop.size(); ++i) {
        if (!std::isfinite(utims[i])) {
            throw std::runtime_error("fitness oracle returned a non-finite value");
        }
        pop[i].utim = utims[i];
    }
}

void DynamicNsga2::rank_population(std::vector<Individual>& pop) const
{
    std::vector<Genome> genomes;
    std::vector<double> utims;
    for (const auto& ind : pop) {
        genomes.push_back(ind.genome);
        utims.push_back(ind.utim);
    }
    const auto div = diversity_values(genomes, utims, settings_.metric);
    std::vector<Objectives> objs;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        pop[i].diversity = div[i];
        objs.push_back({pop[i].utim, div[i]});
    }
    const auto fronts = fast_non_dominated_sort(objs);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
        const auto cd = crowding_distance(objs, fronts[f]);
        for (std::size_t k = 0; k < fronts[f].size(); ++k) {
            pop[fronts[f][k]].rank = static_cast<int>(f);
            pop[fronts[f][k]].crowding = cd[k];
        }
    }
}

void DynamicNsga2::initialize(FitnessOracle& oracle)
{
    std::vector<Genome> genomes(settings_.population);
    for (auto& g : genomes) {
        g.slots.resize(shape_.slots());
        for (auto& c : g.slots) {
            c.x = rng_.uniform(bounds_.min.x, bounds_.max.x);
            c.y = rng_.uniform(bounds_.min.y, bounds_.max.y);
        }
    }
    seed_population(std::move(genomes), oracle);
}

void DynamicNsga2::seed_population(std::vector<Genome> genomes, FitnessOracle& oracle)
{
    population_.clear();
    for (auto& g : genomes) {
        if (g.slots.size() != shape_.slots()) {
            throw std::invalid_argument("seeded genome has the wrong slot count");
        }
        Individual ind;
        ind.genome = std::move(g);
        snap(ind);
        population_.push_back(std::move(ind));
    }
    evaluate(population_, oracle);
    rank_population(population_);
    generation_ = 0;
}

void DynamicNsga2::reevaluate(FitnessOracle& oracle)
{
    evaluate(population_, oracle);
    rank_population(population_);
}

const Individual& DynamicNsga2::incumbent() const
{
    if (population_.empty()) {
        throw std::logic_error("incumbent of an empty population");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < population_.size(); ++i) {
        if (population_[i].utim < population_[best].utim) {
            best = i;
        }
    }
    return population_[best];
}

std::size_t DynamicNsga2::tournament()
{
    const auto n = population_.size();
    const auto a = static_cast<std::size_t>(rng_.below(n));
    const auto b = static_cast<std::size_t>(rng_.below(n));
    const auto& x = population_[a];
    const auto& y = population_[b];
    if (x.rank != y.rank) {
        return x.rank < y.rank ? a : b;
    }
    if (x.crowding != y.crowding) {
        return x.crowding > y.crowding ? a : b;
    }
    if (x.utim != y.utim) {
        return x.utim < y.utim ? a : b;
    }
    return a;
}

namespace {

double reflect(double v, double lo, double hi)
{
    if (!(hi > lo)) {
        return lo;
    }
    const double width = hi - lo;
    double t = std::fmod(v - lo, 2.0 * width);
    if (t < 0.0) {
        t += 2.0 * width;
    }
    return t <= width ? lo + t : hi - (t - width);
}

} // namespace

void DynamicNsga2::variation(const Genome& p1, const Genome& p2, Genome& c1, Genome& c2)
{
    c1 = p1;
    c2 = p2;
    if (!rng_.chance(settings_.crossover_rate)) {
        return;
    }
    const double eta = settings_.sbx_eta;
    auto cross = [&](double& a, double& b) {
        if (!rng_.chance(0.5)) {
            return;
        }
        const double u = rng_.uniform();
        const double beta =
            u <= 0.5 ? std::pow(2.0 * u, 1.0 / (eta + 1.0)) : std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
        const double x = a;
        const double y = b;
        a = 0.5 * ((1.0 + beta) * x + (1.0 - beta) * y);
        b = 0.5 * ((1.0 - beta) * x + (1.0 + beta) * y);
    };
    for (std::size_t k = 0; k < c1.slots.size(); ++k) {
        cross(c1.slots[k].x, c2.slots[k].x);
        cross(c1.slots[k].y, c2.slots[k].y);
    }
}

void DynamicNsga2::mutate(Genome& g)
{
    const double eta = settings_.mutation_eta;
    auto mut = [&](double& v, double lo, double hi) {
        if (!rng_.chance(settings_.mutation_rate)) {
            return;
        }
        const double u = rng_.uniform();
        const double delta = u < 0.5 ? std::pow(2.0 * u, 1.0 / (eta + 1.0)) - 1.0
                                     : 1.0 - std::pow(2.0 * (1.0 - u), 1.0 / (eta + 1.0));
        v += delta * (hi - lo);
    };
    for (auto& c : g.slots) {
        mut(c.x, bounds_.min.x, bounds_.max.x);
        mut(c.y, bounds_.min.y, bounds_.max.y);
        c.x = reflect(c.x, bounds_.min.x, bounds_.max.x);
        c.y = reflect(c.y, bounds_.min.y, bounds_.max.y);
    }
}

void DynamicNsga2::step(FitnessOracle& oracle)
{
    const std::size_t n = population_.size();
    std::vector<Individual> offspring;
    offspring.reserve(n);
    while (offspring.size() < n) {
        const auto& p1 = population_[tournament()];
        const auto& p2 = population_[tournament()];
        Individual c1;
        Individual c2;
        variation(p1.genome, p2.genome, c1.genome, c2.genome);
        mutate(c1.genome);
        mutate(c2.genome);
        snap(c1);
        snap(c2);
        offspring.push_back(std::move(c1));
        if (offspring.size() < n) {
            offspring.push_back(std::move(c2));
        }
    }
    evaluate(offspring, oracle);

    std::vector<Individual> pool = population_;
    for (auto& c : offspring) {
        pool.push_back(std::move(c));
    }
    rank_population(pool);
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = pool[a];
        const auto& y = pool[b];
        if (x.rank != y.rank) {
            return x.rank < y.rank;
        }
        if (x.crowding != y.crowding) {
            return x.crowding > y.crowding;
        }
        return x.utim < y.utim;
    });
    std::vector<Individual> next;
    next.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        next.push_back(std::move(pool[order[k]]));
    }
    rank_population(next);
    population_ = std::move(next);
    ++generation_;
}

} // namespace wdsguard
