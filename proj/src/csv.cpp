#include "coolopt/csv.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "coolopt/error.hpp"

namespace coolopt::csv {

std::vector<std::string> split_line(std::string_view line, bool* unterminated) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  if (unterminated) *unterminated = quoted;
  return fields;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_double(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  if (std::isnan(v)) return {};
  if (v == 0.0) return "0";  // folds -0
  return fmt::format("{}", v);
}

Writer::Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
  if (!out_) throw Error(ErrorCode::IoError, "cannot open for writing: " + path.string());
}

void Writer::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_.put(',');
    const auto& f = fields[i];
    if (f.find_first_of(",\"") != std::string::npos) {
      out_.put('"');
      for (char c : f) {
        if (c == '"') out_.put('"');
        out_.put(c);
      }
      out_.put('"');
    } else {
      out_ << f;
    }
  }
  out_.put('\n');
  if (!out_) throw Error(ErrorCode::IoError, "write failed: " + path_.string());
}

void Writer::close() {
  out_.close();
  if (!out_) throw Error(ErrorCode::IoError, "close failed: " + path_.string());
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::size_t Table::require_column(std::string_view name) const {
  if (auto c = column(name)) return *c;
  throw Error(ErrorCode::MissingColumn, std::string(name));
}

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open: " + path.string());
  Table table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    bool open_quote = false;
    auto fields = split_line(line, &open_quote);
    if (open_quote)
      throw Error(ErrorCode::RowParseError,
                  path.string() + ":" + std::to_string(line_no) + ": unterminated quoted field");
    if (!have_header) {
      for (auto& f : fields) f = std::string(trim(f));
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorCode::EmptyFile, path.string());
  return table;
}

}  // namespace coolopt::csv
