// Native network format and the EPANET INP subset importer.

#include "wdsguard/netmodel.hpp"
#include "wdsguard/text_format.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <set>

namespace wdsguard {

namespace {

void expect_tokens(const SectionLine& l, std::size_t min, std::size_t max)
{
    if (l.tokens.size() < min || l.tokens.size() > max) {
        if (min == max) {
            throw ParseError(l.line, fmt::format("[{}] expects {} fields, got {}", l.section, min, l.tokens.size()));
        }
        throw ParseError(l.line,
                         fmt::format("[{}] expects {}-{} fields, got {}", l.section, min, max, l.tokens.size()));
    }
}

std::string none_if_dash(const std::string& s)
{
    return s == "-" ? std::string{} : s;
}

void append_pattern(std::vector<Pattern>& patterns, const std::string& id, const SectionLine& l, std::size_t first,
                    double scale = 1.0)
{
    auto it = std::find_if(patterns.begin(), patterns.end(), [&](const Pattern& p) { return p.id == id; });
    if (it == patterns.end()) {
        patterns.push_back({id, {}});
        it = std::prev(patterns.end());
    }
    for (std::size_t i = first; i < l.tokens.size(); ++i) {
        it->multipliers.push_back(parse_number(l.tokens[i], l.line) * scale);
    }
}

} // namespace

// --- native --------------------------------------------------------------------------------

Network parse_native(std::string_view text)
{
    NetworkSpec spec;
    for (const auto& l : read_sectioned_text(text, {.comment_chars = "#"})) {
        const auto& t = l.tokens;
        if (l.section == "TITLE") {
            std::string joined;
            for (const auto& tok : t) {
                joined += joined.empty() ? tok : " " + tok;
            }
            spec.title += spec.title.empty() ? joined : "\n" + joined;
        } else if (l.section == "NODES") {
            expect_tokens(l, 9, 9);
            Junction j;
            j.id = t[0];
            if (t[1] == "I") {
                j.intermediate = true;
            } else if (t[1] != "J") {
                throw ParseError(l.line, fmt::format("node kind must be J or I, got '{}'", t[1]));
            }
            j.at = {parse_number(t[2], l.line), parse_number(t[3], l.line)};
            j.elevation_m = parse_number(t[4], l.line);
            j.base_demand_lps = parse_number(t[5], l.line);
            j.pattern = none_if_dash(t[6]);
            auto cls = consumer_class_from_string(t[7]);
            if (!cls) {
                throw ParseError(l.line, fmt::format("unknown consumer class '{}'", t[7]));
            }
            j.consumer_class = *cls;
            j.population = parse_number(t[8], l.line);
            spec.junctions.push_back(std::move(j));
        } else if (l.section == "RESERVOIRS") {
            expect_tokens(l, 4, 4);
            spec.reservoirs.push_back(
                {t[0], {parse_number(t[1], l.line), parse_number(t[2], l.line)}, parse_number(t[3], l.line)});
        } else if (l.section == "TANKS") {
            expect_tokens(l, 8, 8);
            Tank tk;
            tk.id = t[0];
            tk.at = {parse_number(t[1], l.line), parse_number(t[2], l.line)};
            tk.elevation_m = parse_number(t[3], l.line);
            tk.diameter_m = parse_number(t[4], l.line);
            tk.min_level_m = parse_number(t[5], l.line);
            tk.init_level_m = parse_number(t[6], l.line);
            tk.max_level_m = parse_number(t[7], l.line);
            spec.tanks.push_back(std::move(tk));
        } else if (l.section == "PIPES") {
            expect_tokens(l, 6, 6);
            spec.pipes.push_back({t[0], t[1], t[2], parse_number(t[3], l.line), parse_number(t[4], l.line),
                                  parse_number(t[5], l.line)});
        } else if (l.section == "PUMPS") {
            expect_tokens(l, 9, 9);
            Pump p{t[0], t[1], t[2], {}};
            for (std::size_t k = 0; k < 3; ++k) {
                p.curve[k] = {parse_number(t[3 + 2 * k], l.line), parse_number(t[4 + 2 * k], l.line)};
            }
            spec.pumps.push_back(std::move(p));
        } else if (l.section == "PATTERNS") {
            expect_tokens(l, 2, 1000);
            append_pattern(spec.patterns, t[0], l, 1);
        } else if (l.section == "CLASSES") {
            expect_tokens(l, 2, 2);
            auto cls = consumer_class_from_string(t[0]);
            if (!cls) {
                throw ParseError(l.line, fmt::format("unknown consumer class '{}'", t[0]));
            }
            spec.retained_fraction[*cls] = parse_number(t[1], l.line);
        } else if (l.section.empty()) {
            throw ParseError(l.line, "data before the first section header");
        } else {
            throw ParseError(l.line, fmt::format("unknown section [{}]", l.section));
        }
    }
    return Network::build(std::move(spec));
}

std::string serialize_native(const Network& net)
{
    const auto& s = net.spec();
    std::string out;
    auto line = [&out](const std::string& text) {
        out += text;
        out += '\n';
    };
    const auto num = format_number;

    if (!s.title.empty()) {
        line("[TITLE]");
        std::size_t start = 0;
        while (start <= s.title.size()) {
            auto nl = s.title.find('\n', start);
            line(s.title.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
            if (nl == std::string::npos) {
                break;
            }
            start = nl + 1;
        }
        line("");
    }
    line("[NODES]");
    line("# id kind x_m y_m elevation_m demand_lps pattern class population");
    for (const auto& j : s.junctions) {
        line(fmt::format("{} {} {} {} {} {} {} {} {}", j.id, j.intermediate ? "I" : "J", num(j.at.x), num(j.at.y),
                         num(j.elevation_m), num(j.base_demand_lps), j.pattern.empty() ? "-" : j.pattern,
                         to_string(j.consumer_class), num(j.population)));
    }
    line("");
    line("[RESERVOIRS]");
    line("# id x_m y_m head_m");
    for (const auto& r : s.reservoirs) {
        line(fmt::format("{} {} {} {}", r.id, num(r.at.x), num(r.at.y), num(r.head_m)));
    }
    line("");
    line("[TANKS]");
    line("# id x_m y_m elevation_m diameter_m min_level_m init_level_m max_level_m");
    for (const auto& t : s.tanks) {
        line(fmt::format("{} {} {} {} {} {} {} {}", t.id, num(t.at.x), num(t.at.y), num(t.elevation_m),
                         num(t.diameter_m), num(t.min_level_m), num(t.init_level_m), num(t.max_level_m)));
    }
    line("");
    line("[PIPES]");
    line("# id from to length_m diameter_mm hazen_williams_c");
    for (const auto& p : s.pipes) {
        line(fmt::format("{} {} {} {} {} {}", p.id, p.from, p.to, num(p.length_m), num(p.diameter_mm),
                         num(p.roughness)));
    }
    line("");
    line("[PUMPS]");
    line("# id from to q0_lps h0_m q1_lps h1_m q2_lps h2_m");
    for (const auto& p : s.pumps) {
        line(fmt::format("{} {} {} {} {} {} {} {} {}", p.id, p.from, p.to, num(p.curve[0].flow_lps),
                         num(p.curve[0].head_m), num(p.curve[1].flow_lps), num(p.curve[1].head_m),
                         num(p.curve[2].flow_lps), num(p.curve[2].head_m)));
    }
    line("");
    line("[PATTERNS]");
    for (const auto& p : s.patterns) {
        for (std::size_t start = 0; start < p.multipliers.size(); start += 12) {
            std::string row = p.id;
            for (std::size_t k = start; k < std::min(start + 12, p.multipliers.size()); ++k) {
                row += ' ';
                row += num(p.multipliers[k]);
            }
            line(row);
        }
    }
    line("");
    line("[CLASSES]");
    line("# class retained_fraction");
    for (const auto& [cls, fraction] : s.retained_fraction) {
        line(fmt::format("{} {}", to_string(cls), num(fraction)));
    }
    return out;
}

// --- INP subset ----------------------------------------------------------------------------

namespace {

struct UnitScale {
    double length = 1.0;   // to m
    double diameter = 1.0; // to mm
    double flow = 1.0;     // to L/s
};

constexpr double kGpmToLps = 6.30902e-2; // 6.30902e-5 m3/s

const std::set<std::string, std::less<>> kFatalSections{"VALVES", "CONTROLS", "RULES", "STATUS", "EMITTERS"};
const std::set<std::string, std::less<>> kCosmeticSections{"LABELS",   "BACKDROP",  "TAGS",   "VERTICES",
                                                           "REPORT",   "ENERGY",    "QUALITY", "REACTIONS",
                                                           "MIXING",   "SOURCES"};

} // namespace

InpImportResult parse_inp_subset(std::string_view text)
{
    const auto lines = read_sectioned_text(text, {.comment_chars = ";"});
    std::vector<std::string> warnings;

    // Options first: they determine units for every other section.
    UnitScale units;
    std::string default_pattern;
    for (const auto& l : lines) {
        if (l.section != "OPTIONS" || l.tokens.empty()) {
            continue;
        }
        const auto key = to_upper(l.tokens[0]);
        if (key == "UNITS" && l.tokens.size() >= 2) {
            const auto u = to_upper(l.tokens[1]);
            if (u == "GPM") {
                units = {0.3048, 25.4, kGpmToLps};
            } else if (u != "LPS") {
                throw ValidationError("OPTIONS", fmt::format("unsupported unit system '{}' (expected LPS or GPM)", l.tokens[1]));
            }
        } else if (key == "HEADLOSS" && l.tokens.size() >= 2) {
            if (to_upper(l.tokens[1]) != "H-W") {
                throw ValidationError("OPTIONS", fmt::format("unsupported headloss formula '{}'", l.tokens[1]));
            }
        } else if (key == "PATTERN" && l.tokens.size() >= 2) {
            default_pattern = l.tokens[1];
        }
    }

    NetworkSpec spec;
    std::map<std::string, Coordinate> coords;
    std::map<std::string, std::vector<PumpCurvePoint>> curves;
    std::vector<std::pair<std::string, std::string>> pump_curve_refs;
    std::map<std::string, std::pair<double, std::string>> demands; // [DEMANDS] override
    std::set<std::string> warned;

    for (const auto& l : lines) {
        const auto& t = l.tokens;
        const auto& sec = l.section;
        if (kFatalSections.contains(sec)) {
            throw ValidationError(sec, fmt::format("unsupported section [{}] at line {}", sec, l.line));
        }
        if (kCosmeticSections.contains(sec)) {
            if (warned.insert(sec).second) {
                warnings.push_back(fmt::format("skipping unsupported section [{}]", sec));
            }
            continue;
        }
        if (sec == "TITLE") {
            std::string joined;
            for (const auto& tok : t) {
                joined += joined.empty() ? tok : " " + tok;
            }
            spec.title += spec.title.empty() ? joined : "\n" + joined;
        } else if (sec == "JUNCTIONS") {
            expect_tokens(l, 2, 4);
            Junction j;
            j.id = t[0];
            j.elevation_m = parse_number(t[1], l.line) * units.length;
            j.base_demand_lps = t.size() > 2 ? parse_number(t[2], l.line) * units.flow : 0.0;
            j.pattern = t.size() > 3 ? t[3] : std::string{};
            spec.junctions.push_back(std::move(j));
        } else if (sec == "RESERVOIRS") {
            expect_tokens(l, 2, 3);
            if (t.size() == 3) {
                warnings.push_back(fmt::format("reservoir {}: head pattern ignored", t[0]));
            }
            spec.reservoirs.push_back({t[0], {}, parse_number(t[1], l.line) * units.length});
        } else if (sec == "TANKS") {
            expect_tokens(l, 6, 8);
            if (t.size() == 8 && t[7] != "*") {
                throw ValidationError(t[0], "tank volume curves are not supported");
            }
            Tank tk;
            tk.id = t[0];
            tk.elevation_m = parse_number(t[1], l.line) * units.length;
            tk.init_level_m = parse_number(t[2], l.line) * units.length;
            tk.min_level_m = parse_number(t[3], l.line) * units.length;
            tk.max_level_m = parse_number(t[4], l.line) * units.length;
            tk.diameter_m = parse_number(t[5], l.line) * units.length;
            spec.tanks.push_back(std::move(tk));
        } else if (sec == "PIPES") {
            expect_tokens(l, 6, 8);
            if (t.size() >= 7 && parse_number(t[6], l.line) != 0.0) {
                warnings.push_back(fmt::format("pipe {}: minor loss coefficient ignored", t[0]));
            }
            if (t.size() == 8 && to_upper(t[7]) != "OPEN") {
                throw ValidationError(t[0], fmt::format("pipe status '{}' is not supported", t[7]));
            }
            spec.pipes.push_back({t[0], t[1], t[2], parse_number(t[3], l.line) * units.length,
                                  parse_number(t[4], l.line) * units.diameter, parse_number(t[5], l.line)});
        } else if (sec == "PUMPS") {
            if (t.size() != 5 || to_upper(t[3]) != "HEAD") {
                throw ValidationError(t.empty() ? "PUMPS" : t[0], "only fixed-speed HEAD-curve pumps are supported");
            }
            spec.pumps.push_back({t[0], t[1], t[2], {}});
            pump_curve_refs.emplace_back(t[0], t[4]);
        } else if (sec == "CURVES") {
            expect_tokens(l, 3, 3);
            curves[t[0]].push_back({parse_number(t[1], l.line) * units.flow, parse_number(t[2], l.line) * units.length});
        } else if (sec == "PATTERNS") {
            expect_tokens(l, 2, 1000);
            append_pattern(spec.patterns, t[0], l, 1);
        } else if (sec == "DEMANDS") {
            expect_tokens(l, 2, 3);
            const double d = parse_number(t[1], l.line) * units.flow;
            const std::string pat = t.size() > 2 ? t[2] : std::string{};
            auto [it, inserted] = demands.try_emplace(t[0], d, pat);
            if (!inserted) {
                if (it->second.second != pat) {
                    throw ValidationError(t[0], "multiple demand categories with different patterns are not supported");
                }
                it->second.first += d;
            }
        } else if (sec == "COORDINATES") {
            expect_tokens(l, 3, 3);
            coords[t[0]] = {parse_number(t[1], l.line), parse_number(t[2], l.line)};
        } else if (sec == "TIMES" || sec == "OPTIONS") {
            // units handled above; time settings are fixed by the simulator (1 h hydraulic step, 24 h)
        } else if (sec.empty()) {
            throw ParseError(l.line, "data before the first section header");
        } else {
            throw ValidationError(sec, fmt::format("unsupported section [{}] at line {}", sec, l.line));
        }
    }

    // patterns shorter than a day repeat cyclically
    for (auto& p : spec.patterns) {
        const auto n = p.multipliers.size();
        if (n == 0 || n > kHoursPerDay || kHoursPerDay % n != 0) {
            throw ValidationError(p.id, fmt::format("pattern length {} does not tile 24 hourly steps", n));
        }
        while (p.multipliers.size() < kHoursPerDay) {
            p.multipliers.push_back(p.multipliers[p.multipliers.size() - n]);
        }
    }
    if (default_pattern.empty() &&
        std::any_of(spec.patterns.begin(), spec.patterns.end(), [](const Pattern& p) { return p.id == "1"; })) {
        default_pattern = "1";
    }

    for (auto& j : spec.junctions) {
        if (auto it = demands.find(j.id); it != demands.end()) {
            j.base_demand_lps = it->second.first;
            j.pattern = it->second.second;
        }
        if (j.pattern.empty() && j.base_demand_lps > 0.0) {
            j.pattern = default_pattern;
        }
        if (j.base_demand_lps == 0.0) {
            j.intermediate = true;
            j.pattern.clear();
        }
        if (auto it = coords.find(j.id); it != coords.end()) {
            j.at = it->second;
        }
    }
    for (auto& r : spec.reservoirs) {
        if (auto it = coords.find(r.id); it != coords.end()) {
            r.at = it->second;
        }
    }
    for (auto& tk : spec.tanks) {
        if (auto it = coords.find(tk.id); it != coords.end()) {
            tk.at = it->second;
        }
    }
    for (std::size_t k = 0; k < spec.pumps.size(); ++k) {
        const auto& [pump_id, curve_id] = pump_curve_refs[k];
        auto it = curves.find(curve_id);
        if (it == curves.end()) {
            throw ValidationError(curve_id, fmt::format("curve referenced by pump {} is not defined", pump_id));
        }
        const auto& pts = it->second;
        if (pts.size() == 1) {
            // single design point: EPANET's implied curve h = 4/3 h_d - (h_d/3) (q/q_d)^2
            const auto [qd, hd] = pts[0];
            spec.pumps[k].curve = {PumpCurvePoint{0.0, 4.0 / 3.0 * hd}, pts[0], PumpCurvePoint{2.0 * qd, 0.0}};
        } else if (pts.size() == 3) {
            spec.pumps[k].curve = {pts[0], pts[1], pts[2]};
        } else {
            throw ValidationError(curve_id, "pump curves must have one or three points");
        }
    }
    return {Network::build(std::move(spec)), std::move(warnings)};
}

} // namespace wdsguard
