#include "wdsguard/scenario.hpp"

#include "wdsguard/text_format.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <stdexcept>

namespace wdsguard {

void ContaminationScenario::validate(const Network& net) const
{
    if (!net.node_index(node)) {
        throw ValidationError(node, fmt::format("unknown injection node '{}'", node));
    }
    if (!(load_kg > 0.0)) {
        throw ValidationError(node, "load must be positive");
    }
    if (!(duration_s > 0.0)) {
        throw ValidationError(node, "duration must be positive");
    }
    if (!(demand_multiplier > 0.0)) {
        throw ValidationError(node, "demand multiplier must be positive");
    }
    if (start_s < 0.0) {
        throw ValidationError(node, "start time must not be negative");
    }
}

PerceivedTimeline::PerceivedTimeline(std::vector<TimelineEntry> entries)
{
    for (auto& e : entries) {
        append(std::move(e));
    }
}

void PerceivedTimeline::append(TimelineEntry entry)
{
    if (!entries_.empty() && !(entry.effective_from_s > entries_.back().effective_from_s)) {
        throw ValidationError("timeline", fmt::format("update at {} does not follow the previous one at {}",
                                                      format_clock(entry.effective_from_s),
                                                      format_clock(entries_.back().effective_from_s)));
    }
    entries_.push_back(std::move(entry));
}

const ContaminationScenario& PerceivedTimeline::perceived_at(double t) const
{
    auto it = std::upper_bound(entries_.begin(), entries_.end(), t,
                               [](double v, const TimelineEntry& e) { return v < e.effective_from_s; });
    if (it == entries_.begin()) {
        throw std::out_of_range(fmt::format("no perceived scenario before {}", format_clock(t)));
    }
    return std::prev(it)->scenario;
}

void PerceivedTimeline::validate(const Network& net) const
{
    if (entries_.empty()) {
        throw ValidationError("timeline", "timeline has no entries");
    }
    for (const auto& e : entries_) {
        e.scenario.validate(net);
    }
}

namespace {

ContaminationScenario scenario_from(const std::vector<std::string>& tok, std::size_t first, std::size_t line)
{
    ContaminationScenario s;
    s.node = tok[first];
    s.load_kg = parse_number(tok[first + 1], line);
    s.demand_multiplier = parse_number(tok[first + 2], line);
    s.start_s = parse_clock(tok[first + 3], line);
    s.duration_s = parse_number(tok[first + 4], line) * kSecondsPerHour;
    return s;
}

std::string scenario_row(const ContaminationScenario& s)
{
    return fmt::format("{}, {}, {}, {}, {}", s.node, format_number(s.load_kg), format_number(s.demand_multiplier),
                       format_clock(s.start_s), format_number(s.duration_s / kSecondsPerHour));
}

} // namespace

ScenarioFile parse_timeline(std::string_view text)
{
    ScenarioFile out;
    SectionedTextOptions opts;
    opts.split_on_commas = true;
    for (const auto& ln : read_sectioned_text(text, opts)) {
        if (ln.section == "TIMELINE") {
            if (ln.tokens.size() != 6) {
                throw ParseError(ln.line, "timeline row needs 6 fields: effective_from, node, load_kg, demand_mult, "
                                          "start, duration_h");
            }
            TimelineEntry e;
            e.effective_from_s = parse_clock(ln.tokens[0], ln.line);
            e.scenario = scenario_from(ln.tokens, 1, ln.line);
            try {
                out.timeline.append(std::move(e));
            } catch (const ValidationError& err) {
                throw ParseError(ln.line, err.what());
            }
        } else if (ln.section == "TRUE") {
            if (ln.tokens.size() != 5 || out.truth) {
                throw ParseError(ln.line, "[TRUE] takes one row: node, load_kg, demand_mult, start, duration_h");
            }
            out.truth = scenario_from(ln.tokens, 0, ln.line);
        } else {
            throw ParseError(ln.line, fmt::format("unexpected section [{}] in timeline file", ln.section));
        }
    }
    if (out.timeline.empty()) {
        throw ValidationError("timeline", "timeline has no entries");
    }
    return out;
}

std::string serialize_timeline(const ScenarioFile& file)
{
    std::string out = "[TIMELINE]\n# effective_from, node, load_kg, demand_mult, start, duration_h\n";
    for (const auto& e : file.timeline.entries()) {
        out += fmt::format("{}, {}\n", format_clock(e.effective_from_s), scenario_row(e.scenario));
    }
    if (file.truth) {
        out += "\n[TRUE]\n" + scenario_row(*file.truth) + "\n";
    }
    return out;
}

} // namespace wdsguard
