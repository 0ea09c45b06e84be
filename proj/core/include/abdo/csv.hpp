#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace abdo {

using CsvRow = std::vector<std::string>;

struct CsvTable {
  CsvRow header;
  std::vector<CsvRow> rows;
  /// 1-based source line of each row's first physical line.
  std::vector<std::size_t> lines;

  /// Index of `name` in the header; throws ParseError if absent.
  std::size_t column(std::string_view name) const;
};

/// RFC 4180 parsing: quoted fields, doubled quotes, CRLF or LF line ends,
/// embedded newlines inside quotes. Blank lines are skipped. Every row must
/// have as many fields as the header.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& os, const CsvRow& row);

}  // namespace abdo
