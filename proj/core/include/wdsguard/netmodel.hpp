#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wdsguard {

inline constexpr std::size_t kHoursPerDay = 24;
inline constexpr double kSecondsPerHour = 3600.0;

enum class ConsumerClass {
    ResidentialLow,
    ResidentialMedium,
    ResidentialHigh,
    Commercial,
    Industrial,
};

inline constexpr std::array kAllConsumerClasses{
    ConsumerClass::ResidentialLow, ConsumerClass::ResidentialMedium, ConsumerClass::ResidentialHigh,
    ConsumerClass::Commercial,     ConsumerClass::Industrial,
};

std::string_view to_string(ConsumerClass c);
std::optional<ConsumerClass> consumer_class_from_string(std::string_view tag);

/// Share of total demand an alerted consumer of this class keeps using (non-consumptive uses).
/// Commercial has no published figure and defaults to 1.0 (no reduction).
double default_retained_fraction(ConsumerClass c);

struct Coordinate {
    double x = 0.0; // m
    double y = 0.0; // m
    friend bool operator==(const Coordinate&, const Coordinate&) = default;
};

struct BoundingBox {
    Coordinate min;
    Coordinate max;
};

struct Junction {
    std::string id;
    Coordinate at;
    double elevation_m = 0.0;
    double base_demand_lps = 0.0;
    std::string pattern; // empty: constant multiplier 1
    ConsumerClass consumer_class = ConsumerClass::ResidentialMedium;
    double population = 0.0;
    bool intermediate = false; // zero-demand hydrant / injection site
    friend bool operator==(const Junction&, const Junction&) = default;
};

struct Reservoir {
    std::string id;
    Coordinate at;
    double head_m = 0.0;
    friend bool operator==(const Reservoir&, const Reservoir&) = default;
};

struct Tank {
    std::string id;
    Coordinate at;
    double elevation_m = 0.0;
    double diameter_m = 0.0;
    double min_level_m = 0.0;
    double init_level_m = 0.0;
    double max_level_m = 0.0;
    [[nodiscard]] double area_m2() const;
    friend bool operator==(const Tank&, const Tank&) = default;
};

struct Pipe {
    std::string id;
    std::string from;
    std::string to;
    double length_m = 0.0;
    double diameter_mm = 0.0;
    double roughness = 0.0; // Hazen-Williams C
    [[nodiscard]] double volume_l() const;
    friend bool operator==(const Pipe&, const Pipe&) = default;
};

struct PumpCurvePoint {
    double flow_lps = 0.0;
    double head_m = 0.0;
    friend bool operator==(const PumpCurvePoint&, const PumpCurvePoint&) = default;
};

struct Pump {
    std::string id;
    std::string from;
    std::string to;
    std::array<PumpCurvePoint, 3> curve{}; // first point is the shutoff head (flow 0)
    friend bool operator==(const Pump&, const Pump&) = default;
};

struct Pattern {
    std::string id;
    std::vector<double> multipliers; // exactly 24 hourly values
    friend bool operator==(const Pattern&, const Pattern&) = default;
};

/// Raw network description as read from a file, before validation and indexing.
struct NetworkSpec {
    std::string title;
    std::vector<Junction> junctions;
    std::vector<Reservoir> reservoirs;
    std::vector<Tank> tanks;
    std::vector<Pipe> pipes;
    std::vector<Pump> pumps;
    std::vector<Pattern> patterns;
    std::map<ConsumerClass, double> retained_fraction; // overrides of the defaults
    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

enum class NodeKind { Junction, Reservoir, Tank };

/// Fitted pump head curve H = shutoff - r * Q^n (Q in m3/s, H in m).
struct PumpLaw {
    double shutoff_head_m = 0.0;
    double resistance = 0.0;
    double exponent = 1.0;
};

/// Validated, indexed, immutable network. Node indices run junctions, then reservoirs,
/// then tanks; link indices run pipes, then pumps.
class Network {
public:
    /// Validates `spec` and builds the index. Throws ValidationError naming the offending entity.
    static Network build(NetworkSpec spec);

    [[nodiscard]] const NetworkSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const std::vector<Junction>& junctions() const noexcept { return spec_.junctions; }
    [[nodiscard]] const std::vector<Reservoir>& reservoirs() const noexcept { return spec_.reservoirs; }
    [[nodiscard]] const std::vector<Tank>& tanks() const noexcept { return spec_.tanks; }
    [[nodiscard]] const std::vector<Pipe>& pipes() const noexcept { return spec_.pipes; }
    [[nodiscard]] const std::vector<Pump>& pumps() const noexcept { return spec_.pumps; }

    [[nodiscard]] std::size_t junction_count() const noexcept { return spec_.junctions.size(); }
    [[nodiscard]] std::size_t node_count() const noexcept;
    [[nodiscard]] std::size_t link_count() const noexcept;

    [[nodiscard]] std::optional<std::size_t> node_index(std::string_view id) const;
    [[nodiscard]] std::size_t require_node(std::string_view id) const; // throws ValidationError
    [[nodiscard]] const std::string& node_id(std::size_t node) const;
    [[nodiscard]] NodeKind node_kind(std::size_t node) const;
    [[nodiscard]] Coordinate node_coordinate(std::size_t node) const;
    [[nodiscard]] double node_elevation(std::size_t node) const;
    [[nodiscard]] std::size_t reservoir_node(std::size_t reservoir) const { return junction_count() + reservoir; }
    [[nodiscard]] std::size_t tank_node(std::size_t tank) const
    {
        return junction_count() + spec_.reservoirs.size() + tank;
    }

    [[nodiscard]] std::size_t link_from(std::size_t link) const { return link_ends_[link].first; }
    [[nodiscard]] std::size_t link_to(std::size_t link) const { return link_ends_[link].second; }
    [[nodiscard]] bool is_pump(std::size_t link) const { return link >= spec_.pipes.size(); }
    [[nodiscard]] const std::string& link_id(std::size_t link) const;
    [[nodiscard]] const PumpLaw& pump_law(std::size_t pump) const { return pump_laws_[pump]; }

    /// Links incident to a node.
    [[nodiscard]] std::span<const std::size_t> incident_links(std::size_t node) const;

    /// Intermediate junction node indices, sorted by id.
    [[nodiscard]] std::span<const std::size_t> intermediate_nodes() const noexcept { return intermediate_; }
    [[nodiscard]] bool is_intermediate(std::size_t node) const;

    /// Hourly demand multiplier of a junction (pattern lookup, 1 when no pattern). `hour` wraps at 24.
    [[nodiscard]] double pattern_multiplier(std::size_t junction, std::size_t hour) const;
    [[nodiscard]] double retained_fraction(ConsumerClass c) const;

    [[nodiscard]] BoundingBox bounds() const noexcept { return bounds_; }
    [[nodiscard]] double total_population() const;

    friend bool operator==(const Network& a, const Network& b) { return a.spec_ == b.spec_; }

private:
    NetworkSpec spec_;
    std::unordered_map<std::string, std::size_t> node_lookup_;
    std::vector<std::pair<std::size_t, std::size_t>> link_ends_;
    std::vector<std::size_t> adjacency_offsets_;
    std::vector<std::size_t> adjacency_;
    std::vector<std::size_t> intermediate_;
    std::vector<char> intermediate_flag_;
    static constexpr std::size_t kNoPattern = static_cast<std::size_t>(-1);
    std::vector<std::size_t> junction_pattern_; // index into spec_.patterns
    std::vector<PumpLaw> pump_laws_;
    BoundingBox bounds_{};
};

/// Fits H = h0 - r Q^n through a three-point curve whose first point has zero flow.
PumpLaw fit_pump_curve(const std::array<PumpCurvePoint, 3>& curve);

// --- native format -------------------------------------------------------------------------

Network parse_native(std::string_view text);
std::string serialize_native(const Network& net);

// --- INP subset ----------------------------------------------------------------------------

struct InpImportResult {
    Network network;
    std::vector<std::string> warnings;
};

InpImportResult parse_inp_subset(std::string_view text);

// --- spatial queries -----------------------------------------------------------------------

/// Grid-bucketed lookup of the intermediate node nearest to a point. Ties resolve to the
/// lexicographically smallest id.
class IntermediateNodeIndex {
public:
    explicit IntermediateNodeIndex(const Network& net);

    /// Global node index of the nearest intermediate node. Requires at least one.
    [[nodiscard]] std::size_t nearest(Coordinate p) const;

private:
    const Network* net_;
    Coordinate origin_{};
    double cell_ = 1.0;
    std::size_t cols_ = 1;
    std::size_t rows_ = 1;
    std::vector<std::vector<std::size_t>> cells_;
};

/// Id of the nearest intermediate node (see IntermediateNodeIndex).
std::string nearest_intermediate_node(Coordinate p, const Network& net);

} // namespace wdsguard
