#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace fmim::csv {

/// Quotes a field when it contains a comma, quote or line break.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Reads one record (which may span lines inside quotes). Returns nullopt at
/// end of input. Throws FormatError on an unterminated quote.
std::optional<std::vector<std::string>> read_row(std::istream& in);

/// Shortest decimal representation that round-trips (locale independent).
std::string format_number(double value);
std::string format_number(std::uint64_t value);

std::optional<std::uint64_t> parse_uint(std::string_view text);
std::optional<double> parse_double(std::string_view text);

}  // namespace fmim::csv
