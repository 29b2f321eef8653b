#include "wdsguard/text_format.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace wdsguard {

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("line {}: {}", line, what)), line_(line)
{
}

ValidationError::ValidationError(std::string entity, const std::string& what)
    : std::runtime_error(fmt::format("{}: {}", entity, what)), entity_(std::move(entity))
{
}

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

} // namespace

std::string to_upper(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::string to_lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<SectionLine> read_sectioned_text(std::string_view text, const SectionedTextOptions& options)
{
    std::vector<SectionLine> out;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::string_view raw = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;

        if (auto c = raw.find_first_of(options.comment_chars); c != std::string_view::npos) {
            raw = raw.substr(0, c);
        }
        raw = trim(raw);
        if (raw.empty()) {
            if (eol == text.size()) {
                break;
            }
            continue;
        }
        if (raw.front() == '[') {
            auto close = raw.find(']');
            if (close == std::string_view::npos) {
                throw ParseError(line_no, fmt::format("unterminated section header '{}'", raw));
            }
            section = to_upper(trim(raw.substr(1, close - 1)));
            continue;
        }

        SectionLine entry{section, {}, line_no};
        std::string current;
        for (char ch : raw) {
            const bool sep = std::isspace(static_cast<unsigned char>(ch)) || (options.split_on_commas && ch == ',');
            if (sep) {
                if (!current.empty()) {
                    entry.tokens.push_back(std::move(current));
                    current.clear();
                }
            } else {
                current.push_back(ch);
            }
        }
        if (!current.empty()) {
            entry.tokens.push_back(std::move(current));
        }
        out.push_back(std::move(entry));
        if (eol == text.size()) {
            break;
        }
    }
    return out;
}

double parse_number(std::string_view token, std::size_t line)
{
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value)) {
        throw ParseError(line, fmt::format("expected a number, got '{}'", token));
    }
    return value;
}

long parse_integer(std::string_view token, std::size_t line)
{
    long value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw ParseError(line, fmt::format("expected an integer, got '{}'", token));
    }
    return value;
}

double parse_clock(std::string_view token, std::size_t line)
{
    std::vector<long> parts;
    std::size_t start = 0;
    while (true) {
        auto colon = token.find(':', start);
        auto piece = token.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start);
        if (piece.empty()) {
            throw ParseError(line, fmt::format("malformed clock time '{}'", token));
        }
        parts.push_back(parse_integer(piece, line));
        if (colon == std::string_view::npos) {
            break;
        }
        start = colon + 1;
    }
    if (parts.size() < 2 || parts.size() > 3 || parts[0] < 0 || parts[1] < 0 || parts[1] > 59 ||
        (parts.size() == 3 && (parts[2] < 0 || parts[2] > 59))) {
        throw ParseError(line, fmt::format("malformed clock time '{}'", token));
    }
    double seconds = static_cast<double>(parts[0]) * 3600.0 + static_cast<double>(parts[1]) * 60.0;
    if (parts.size() == 3) {
        seconds += static_cast<double>(parts[2]);
    }
    return seconds;
}

std::string format_clock(double seconds)
{
    const auto total = static_cast<long>(std::llround(seconds));
    const long h = total / 3600;
    const long m = (total % 3600) / 60;
    const long s = total % 60;
    if (s != 0) {
        return fmt::format("{:02}:{:02}:{:02}", h, m, s);
    }
    return fmt::format("{:02}:{:02}", h, m);
}

std::string format_number(double value)
{
    return fmt::format("{}", value);
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(fmt::format("cannot open '{}'", path));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(fmt::format("cannot write '{}'", path));
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

} // namespace wdsguard
