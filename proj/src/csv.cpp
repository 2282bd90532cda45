#include "ripple/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ripple/error.hpp"

namespace ripple {
namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.emplace_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

}  // namespace

CsvTable CsvTable::read(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

CsvTable CsvTable::parse(std::string_view text, std::string_view origin) {
  CsvTable table;
  table.origin_ = std::string(origin);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    ++line_no;
    auto cells = split_line(line);
    if (line_no == 1) {
      table.header_ = std::move(cells);
      for (std::size_t i = 0; i < table.header_.size(); ++i) table.index_[table.header_[i]] = i;
      continue;
    }
    if (cells.size() != table.header_.size()) {
      throw Error(ErrorCode::ParseError, table.origin_ + ": row " + std::to_string(line_no) +
                                             " has " + std::to_string(cells.size()) +
                                             " cells, header has " +
                                             std::to_string(table.header_.size()));
    }
    table.rows_.push_back(std::move(cells));
  }
  if (table.header_.empty()) throw Error(ErrorCode::ParseError, table.origin_ + ": missing header");
  return table;
}

bool CsvTable::has_column(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t CsvTable::column(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw Error(ErrorCode::ParseError, origin_ + ": missing column '" + std::string(name) + "'");
  }
  return it->second;
}

double parse_double(std::string_view text) {
  // from_chars for double is available in libstdc++ 11.
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw Error(ErrorCode::ParseError, "not a finite number: '" + std::string(text) + "'");
  }
  return value;
}

long parse_long(std::string_view text) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::ParseError, "not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ripple
