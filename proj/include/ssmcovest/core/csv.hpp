#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace ssmcovest::core {

// Shortest decimal string that parses back to exactly the same binary64.
// Non-finite values print as "nan", "inf" and "-inf".
std::string format_double(double value);

// Inverse of format_double; throws InvalidArgument on malformed input.
double parse_double(std::string_view text);

// Writes one comma-separated line. Fields are written verbatim.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

// Splits a comma-separated line (no quoting support).
std::vector<std::string> split_csv_line(std::string_view line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws InvalidArgument when absent.
  std::size_t column(std::string_view name) const;
};

// Reads a header line followed by data rows. Blank lines are skipped.
CsvTable read_csv(std::istream& in);

}  // namespace ssmcovest::core
