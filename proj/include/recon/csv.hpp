#pragma once

// Minimal RFC 4180 reader/writer: comma separated, double-quote escaping,
// quoted fields may span lines, LF or CRLF record terminators.

#include <iosfwd>
#include <string>
#include <vector>

namespace recon {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// Physical line on which each record starts (1-based, header is line 1).
  std::vector<std::size_t> lines;

  /// Position of `name` in the header, or -1.
  long column(const std::string& name) const;
};

CsvTable parse_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv(const std::string& path);

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal representation that round-trips to the same double.
std::string format_number(double value);

/// Strict full-string parse; returns false on trailing garbage or empty input.
bool parse_number(const std::string& text, double& value);

}  // namespace recon
