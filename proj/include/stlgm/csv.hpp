#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace stlgm::csv {

/// Splits one comma-delimited record. Double-quoted fields may contain
/// commas; a doubled quote inside a quoted field is a literal quote.
std::vector<std::string> split_record(std::string_view line);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

/// Fixed number of significant digits; used for human-facing summaries.
std::string format_fixed(double value, int significant);

std::string quote_if_needed(std::string_view field);

/// Parses a full-string double; returns false on any trailing junk.
bool parse_double(std::string_view text, double& out);

/// Writes fields joined by commas and terminated with '\n'.
void write_record(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace stlgm::csv
