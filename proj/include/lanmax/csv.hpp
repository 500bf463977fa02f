#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lanmax {

// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
double parse_double(const std::string& text);

// A CSV document: one "# lanmax <schema> v<version>" line, a header row and
// data rows. Values never contain commas or quotes.
struct CsvTable {
  std::string schema;
  int version = 1;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string str() const;
  std::size_t column(const std::string& name) const;  // throws std::out_of_range
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

// Writes to "<path>.tmp" and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace lanmax
