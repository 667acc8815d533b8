#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bikepref::csv {

/// A parsed CSV document with a header row. Blank lines and lines starting
/// with '#' are skipped; fields may be double-quoted.
class Table {
 public:
  static Table parse(std::string_view text, std::string source_name = "<memory>");
  static Table read(const std::filesystem::path& path);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t size() const { return rows_.size(); }
  const std::vector<std::string>& row(std::size_t i) const { return rows_[i]; }
  /// 1-based line number of row i in the source text, for error messages.
  std::size_t line_of(std::size_t i) const { return lines_[i]; }
  const std::string& source() const { return source_; }

  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;

  /// Field of row i in the named column; empty when the row is short.
  std::string_view get(std::size_t i, std::size_t col) const;
  double get_double(std::size_t i, std::size_t col) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> lines_;
};

std::vector<std::string> split_line(std::string_view line);

/// Quotes a field when it contains a separator, quote or newline.
std::string escape(std::string_view field);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace bikepref::csv
