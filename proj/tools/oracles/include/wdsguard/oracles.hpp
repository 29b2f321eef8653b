#pragma once

// Reference computations written independently of the engine: closed forms and brute-force
// recomputations. Shared by the `oracle` command, the unit tests and the acceptance binary.

#include "wdsguard/optimizer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace wdsguard::oracle {

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Head loss of one Hazen-Williams pipe, SI form 10.67 L Q^1.852 / (C^1.852 D^4.87).
double hazen_williams_head_loss_m(double flow_lps, double length_m, double diameter_mm, double c);

/// Travel time L / v of a pipe at a steady flow.
double plug_flow_travel_s(double length_m, double diameter_mm, double flow_lps);

/// Persons x daily volume x constant concentration, grams.
double constant_concentration_utim_g(double persons, double daily_volume_l, double conc_mgl);

/// Hand-rolled exposure of one person under the toxic-dose rule: drinks `volume_l` at each
/// time; once the cumulative dose reaches `td_mg` the person stops at `time + delay`.
struct DoseTrace {
    std::vector<bool> drank;
    double ingested_mg = 0.0;
};
DoseTrace toxic_dose_trace(const std::vector<double>& times_s, const std::vector<double>& conc_mgl,
                           double volume_l, double td_mg, double delay_s);

/// Pairwise brute force over all members, no caching.
std::vector<double> diversity_bruteforce(const std::vector<Genome>& genomes, const std::vector<double>& utims,
                                         DiversityMetric metric);

/// Ranks by repeated peeling: rank r holds every member not dominated by any unranked member.
std::vector<int> ranks_bruteforce(const std::vector<Objectives>& objs);

std::vector<Check> diversity_battery(std::size_t trials, std::uint64_t seed);
std::vector<Check> sorting_battery(std::size_t trials, std::uint64_t seed);

struct ToySearchResult {
    std::size_t optimum_node = 0;
    double optimum_utim_g = 0.0;
    std::vector<double> candidate_utims_g; // per intermediate node, id order
    std::vector<std::size_t> incumbent_nodes; // per seed
    std::size_t matches = 0;
    double seconds = 0.0;
};

/// Exhaustive search over a single flushing slot on the toy network against the optimizer,
/// one static epoch, `seeds` runs of `generations` generations.
ToySearchResult toy_exhaustive_search(std::size_t seeds, std::size_t generations,
                                      std::size_t population = GASettings{}.population);

std::vector<Check> closed_form_battery();

/// Everything above with default sizes.
std::vector<Check> run_all();

} // namespace wdsguard::oracle
