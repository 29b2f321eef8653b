#pragma once

#include "wdsguard/netmodel.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wdsguard {

struct ContaminationScenario {
    std::string node;
    double load_kg = 0.0;
    double demand_multiplier = 1.0; // global scale on all base demands
    double start_s = 0.0;
    double duration_s = 0.0;

    void validate(const Network& net) const;
    friend bool operator==(const ContaminationScenario&, const ContaminationScenario&) = default;
};

struct TimelineEntry {
    double effective_from_s = 0.0;
    ContaminationScenario scenario;
    friend bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
};

/// Perceived-scenario updates, append-only, effective-from strictly increasing.
class PerceivedTimeline {
public:
    PerceivedTimeline() = default;
    explicit PerceivedTimeline(std::vector<TimelineEntry> entries);

    /// Throws ValidationError when `entry` does not come strictly after the last one.
    void append(TimelineEntry entry);

    /// Scenario of the latest entry effective at or before `t`. Throws std::out_of_range before
    /// the first entry.
    [[nodiscard]] const ContaminationScenario& perceived_at(double t) const;

    [[nodiscard]] const std::vector<TimelineEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] bool empty() const noexcept { return entries_.empty(); }
    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }

    void validate(const Network& net) const;
    friend bool operator==(const PerceivedTimeline&, const PerceivedTimeline&) = default;

private:
    std::vector<TimelineEntry> entries_;
};

struct ScenarioFile {
    PerceivedTimeline timeline;
    std::optional<ContaminationScenario> truth; // ground truth, evaluation only
};

/// `[TIMELINE]` rows: effective_from, node, load_kg, demand_mult, start, duration_h.
/// An optional `[TRUE]` section holds one row: node, load_kg, demand_mult, start, duration_h.
ScenarioFile parse_timeline(std::string_view text);
std::string serialize_timeline(const ScenarioFile& file);

} // namespace wdsguard
