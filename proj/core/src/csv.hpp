#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace zslgmm::detail {

struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> cells;
};

/// Comma-separated text without quoting. Cells are trimmed; blank lines are
/// skipped. The first non-blank line is the header.
struct CsvTable {
  std::string file;
  std::vector<std::string> header;
  std::size_t header_line = 0;
  std::vector<CsvRow> rows;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Parses a finite double; throws DataError naming file and line.
double parse_double(std::string_view text, const std::string& file, std::size_t line);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace zslgmm::detail
