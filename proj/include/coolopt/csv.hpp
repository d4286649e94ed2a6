#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coolopt::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and `""`
/// escapes; embedded newlines are not supported.
std::vector<std::string> split_line(std::string_view line, bool* unterminated = nullptr);

/// Strict decimal parse of a whole cell (surrounding blanks allowed).
/// Returns nullopt for blank or malformed cells.
std::optional<double> parse_double(std::string_view cell);

std::string_view trim(std::string_view s);

/// Shortest round-trip text for a double; NaN is written as an empty cell.
std::string format_double(double v);

/// Line-oriented writer that throws IoError naming the path when the file
/// cannot be opened or written.
class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);

  void row(const std::vector<std::string>& fields);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

/// Whole-file reader returning the header and data rows (blank lines skipped).
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based file line for each row

  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;
};

Table read_table(const std::filesystem::path& path);

}  // namespace coolopt::csv
