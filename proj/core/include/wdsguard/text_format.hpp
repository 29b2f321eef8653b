#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wdsguard {

/// Raised for malformed input text. Carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what);
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised when a document parses but violates a model invariant.
/// `entity()` names the offending id (node, pattern, section...).
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string entity, const std::string& what);
    [[nodiscard]] const std::string& entity() const noexcept { return entity_; }

private:
    std::string entity_;
};

/// One data line of a `[SECTION]`-structured text document.
struct SectionLine {
    std::string section;             // upper-cased, without brackets; empty before the first header
    std::vector<std::string> tokens; // whitespace/comma separated
    std::size_t line = 0;
};

struct SectionedTextOptions {
    std::string_view comment_chars = "#";
    bool split_on_commas = false;
};

/// Splits a sectioned document into data lines. Blank and comment-only lines are dropped,
/// section headers are folded into `SectionLine::section`.
std::vector<SectionLine> read_sectioned_text(std::string_view text, const SectionedTextOptions& options = {});

double parse_number(std::string_view token, std::size_t line);
long parse_integer(std::string_view token, std::size_t line);

/// "HH:MM" or "HH:MM:SS" (hours may exceed 23, e.g. "24:00") to seconds.
double parse_clock(std::string_view token, std::size_t line);
std::string format_clock(double seconds);

std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);

/// Shortest representation that parses back to the same double.
std::string format_number(double value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace wdsguard
