#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace opticlass::csv {

/// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
/// Returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> split_line(std::string_view line);

/// Quotes a field when it contains a comma, quote or leading/trailing space.
std::string quote(std::string_view field);

/// Joins fields with commas, quoting as needed.
std::string join(const std::vector<std::string>& fields);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

/// Strict finite-number parse of the whole field; nullopt otherwise.
std::optional<double> parse_double(std::string_view text);

/// Strips a trailing '\r' left by CRLF files.
inline std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace opticlass::csv
