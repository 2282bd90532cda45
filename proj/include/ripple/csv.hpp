#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ripple {

/// Minimal comma-separated table: header row plus string cells. No quoting;
/// none of the ingested formats carry commas inside fields.
class CsvTable {
 public:
  static CsvTable read(const std::filesystem::path& path);
  static CsvTable parse(std::string_view text, std::string_view origin = "<memory>");

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  bool has_column(std::string_view name) const;
  /// Column index; throws ParseError when absent.
  std::size_t column(std::string_view name) const;

 private:
  std::string origin_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

double parse_double(std::string_view text);
long parse_long(std::string_view text);

/// Shortest text that round-trips the value exactly.
std::string format_double(double value);

void write_text_file(const std::filesystem::path& path, std::string_view content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace ripple
