#include "wdsguard/exposure.hpp"

#include "wdsguard/text_format.hpp"

#include <algorithm>

namespace wdsguard {

double toxic_dose_mg(ToxicDoseLevel level)
{
    switch (level) {
    case ToxicDoseLevel::Min:
        return 2.45;
    case ToxicDoseLevel::Avg:
        return 3.5;
    case ToxicDoseLevel::Max:
        return 4.97;
    }
    return 3.5;
}

std::string_view to_string(ToxicDoseLevel level)
{
    switch (level) {
    case ToxicDoseLevel::Min:
        return "min";
    case ToxicDoseLevel::Avg:
        return "avg";
    case ToxicDoseLevel::Max:
        return "max";
    }
    return "avg";
}

std::optional<ToxicDoseLevel> toxic_dose_level_from_string(std::string_view s)
{
    for (auto l : {ToxicDoseLevel::Min, ToxicDoseLevel::Avg, ToxicDoseLevel::Max}) {
        if (to_string(l) == s) {
            return l;
        }
    }
    return std::nullopt;
}

void ExposureParams::validate() const
{
    if (!(daily_volume_l > 0.0) || !(toxic_dose_mg > 0.0) || !(reaction_delay_s > 0.0) || !(dye_alert_mgl > 0.0)) {
        throw ValidationError("exposure", "all exposure parameters must be positive");
    }
    if (ingestion_times_s.empty()) {
        throw ValidationError("exposure", "at least one ingestion time is required");
    }
    for (std::size_t i = 1; i < ingestion_times_s.size(); ++i) {
        if (!(ingestion_times_s[i] > ingestion_times_s[i - 1])) {
            throw ValidationError("exposure", "ingestion times must be strictly increasing");
        }
    }
}

std::vector<IngestionEvent> ingestion_schedule(const ExposureParams& params, double horizon_s)
{
    std::vector<IngestionEvent> out;
    const double v = params.volume_per_event_l();
    for (double t : params.ingestion_times_s) {
        if (t < horizon_s) {
            out.push_back({t, v});
        }
    }
    return out;
}

std::vector<ConsumerCohort> make_cohorts(const Network& net)
{
    std::vector<ConsumerCohort> out;
    for (std::size_t j = 0; j < net.junction_count(); ++j) {
        const auto& junction = net.junctions()[j];
        if (junction.population > 0.0) {
            ConsumerCohort c;
            c.node = j;
            c.size = junction.population;
            c.consumer_class = junction.consumer_class;
            out.push_back(c);
        }
    }
    return out;
}

void settle_cohorts(std::span<ConsumerCohort> cohorts, double t)
{
    for (auto& c : cohorts) {
        if (c.state == CohortState::SickPending && c.stop_time_s && t >= *c.stop_time_s) {
            c.state = CohortState::Stopped;
        }
    }
}

void step_cohorts(std::span<ConsumerCohort> cohorts, std::span<const double> contaminant, std::span<const double> dye,
                  const IngestionEvent& event, const ExposureParams& params, const ReactionRules& rules,
                  ExposureLedger& ledger)
{
    settle_cohorts(cohorts, event.time_s);
    for (std::size_t i = 0; i < cohorts.size(); ++i) {
        auto& c = cohorts[i];
        if (c.state == CohortState::Stopped) {
            continue;
        }
        if (rules.dye_alert && dye[c.node] >= params.dye_alert_mgl) {
            c.state = CohortState::Stopped;
            c.cause = StopCause::DyeAlert;
            if (!c.stop_time_s || *c.stop_time_s > event.time_s) {
                c.stop_time_s = event.time_s;
            }
            continue;
        }
        const double conc = contaminant[c.node];
        const double dose = event.volume_l * conc;
        c.ingested_mg += dose;
        if (dose > 0.0) {
            ledger.tim_g += c.size * dose / 1000.0;
            if (ledger.keep_entries) {
                ledger.entries.push_back({i, event.time_s, event.volume_l, conc});
            }
        }
        if (rules.sickness && c.state == CohortState::Normal && c.ingested_mg >= params.toxic_dose_mg) {
            c.state = CohortState::SickPending;
            c.cause = StopCause::Sickness;
            c.stop_time_s = event.time_s + params.reaction_delay_s;
        }
    }
}

double demand_multiplier(const ConsumerCohort& cohort, double t, const Network& net)
{
    const bool stopped = cohort.state == CohortState::Stopped ||
                         (cohort.state == CohortState::SickPending && cohort.stop_time_s && t >= *cohort.stop_time_s);
    return stopped ? net.retained_fraction(cohort.consumer_class) : 1.0;
}

double compute_utim(const ExposureLedger& ledger, std::span<const ConsumerCohort> cohorts)
{
    double total = 0.0;
    for (const auto& e : ledger.entries) {
        total += cohorts[e.cohort].size * e.volume_l * e.conc_mgl;
    }
    return total / 1000.0;
}

} // namespace wdsguard
