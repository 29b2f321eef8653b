#pragma once

#include "wdsguard/netmodel.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace wdsguard {

/// Arsenic toxic-dose estimates for a 70 kg adult, mg.
enum class ToxicDoseLevel { Min, Avg, Max };
double toxic_dose_mg(ToxicDoseLevel level);
std::string_view to_string(ToxicDoseLevel level);
std::optional<ToxicDoseLevel> toxic_dose_level_from_string(std::string_view s);

struct ExposureParams {
    double daily_volume_l = 0.93;
    /// Clock times of tap-water ingestion (s after midnight).
    std::vector<double> ingestion_times_s{7.0 * 3600.0, 9.5 * 3600.0, 12.0 * 3600.0, 15.0 * 3600.0, 18.0 * 3600.0};
    double toxic_dose_mg = 3.5;
    double reaction_delay_s = 3600.0;
    double dye_alert_mgl = 25.0;

    /// Volume drunk per person per event (equal split of the daily volume).
    [[nodiscard]] double volume_per_event_l() const
    {
        return daily_volume_l / static_cast<double>(ingestion_times_s.size());
    }
    void validate() const;
};

struct IngestionEvent {
    double time_s = 0.0;
    double volume_l = 0.0;
    friend bool operator==(const IngestionEvent&, const IngestionEvent&) = default;
};

/// Ingestion events falling in [0, horizon_s).
std::vector<IngestionEvent> ingestion_schedule(const ExposureParams& params, double horizon_s);

enum class CohortState { Normal, SickPending, Stopped };
enum class StopCause { None, Sickness, DyeAlert };

struct ConsumerCohort {
    std::size_t node = 0;
    double size = 0.0; // persons
    ConsumerClass consumer_class = ConsumerClass::ResidentialMedium;
    double ingested_mg = 0.0; // per person
    CohortState state = CohortState::Normal;
    std::optional<double> stop_time_s;
    StopCause cause = StopCause::None;
};

/// One cohort per populated junction.
std::vector<ConsumerCohort> make_cohorts(const Network& net);

struct LedgerEntry {
    std::size_t cohort = 0;
    double time_s = 0.0;
    double volume_l = 0.0;
    double conc_mgl = 0.0;
};

struct ExposureLedger {
    bool keep_entries = true;
    std::vector<LedgerEntry> entries;
    double tim_g = 0.0; // running total ingested mass
};

struct ReactionRules {
    bool sickness = true;  // TD crossing stops drinking after the reaction delay
    bool dye_alert = true; // intense dye at an ingestion event stops drinking immediately
};

/// Promotes sick-pending cohorts whose stop time has passed.
void settle_cohorts(std::span<ConsumerCohort> cohorts, double t);

/// Applies one ingestion event. `contaminant` and `dye` are node concentrations (mg/L) at the
/// event time, indexed by node.
void step_cohorts(std::span<ConsumerCohort> cohorts, std::span<const double> contaminant, std::span<const double> dye,
                  const IngestionEvent& event, const ExposureParams& params, const ReactionRules& rules,
                  ExposureLedger& ledger);

/// Fraction of base demand a cohort's node draws at time t.
double demand_multiplier(const ConsumerCohort& cohort, double t, const Network& net);

/// Sum over ledger entries of persons x volume x concentration, in grams.
double compute_utim(const ExposureLedger& ledger, std::span<const ConsumerCohort> cohorts);

} // namespace wdsguard
