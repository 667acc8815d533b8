#include "bikepref/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "bikepref/errors.hpp"

namespace bikepref::csv {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
  }
  return fields;
}

Table Table::parse(std::string_view text, std::string source_name) {
  Table t;
  t.source_ = std::move(source_name);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') continue;
    auto fields = split_line(line);
    if (!have_header) {
      t.header_ = std::move(fields);
      have_header = true;
    } else {
      t.rows_.push_back(std::move(fields));
      t.lines_.push_back(line_no);
    }
  }
  if (!have_header) throw DataError(t.source_ + ": missing CSV header");
  return t;
}

Table Table::read(const std::filesystem::path& path) { return parse(read_file(path), path.string()); }

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  return std::nullopt;
}

std::size_t Table::require_column(std::string_view name) const {
  if (auto c = column(name)) return *c;
  throw DataError(source_ + ": missing column '" + std::string(name) + "'");
}

std::string_view Table::get(std::size_t i, std::size_t col) const {
  const auto& r = rows_[i];
  return col < r.size() ? std::string_view(r[col]) : std::string_view{};
}

double Table::get_double(std::size_t i, std::size_t col) const {
  const auto field = get(i, col);
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, v);
  if (field.empty() || res.ec != std::errc{} || res.ptr != end) {
    std::ostringstream msg;
    msg << source_ << ":" << lines_[i] << ": malformed number '" << field << "' in column '"
        << (col < header_.size() ? header_[col] : std::to_string(col)) << "'";
    throw DataError(msg.str());
  }
  return v;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

}  // namespace bikepref::csv
