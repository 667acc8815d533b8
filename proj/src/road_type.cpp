#include "bikepref/road_type.hpp"

#include <cctype>

namespace bikepref {

namespace {

std::string normalize_tag(std::string_view raw) {
  std::size_t b = 0;
  std::size_t e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;

  std::string out;
  out.reserve(e - b);
  bool pending_sep = false;
  for (std::size_t i = b; i < e; ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (std::isspace(c) || c == '-') {
      pending_sep = true;
      continue;
    }
    if (pending_sep && !out.empty() && out.back() != '_') out.push_back('_');
    pending_sep = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  if (out.empty()) return "unknown";

  constexpr std::string_view kGradePrefix = "track_grade_";
  if (out.size() > kGradePrefix.size() && out.starts_with(kGradePrefix)) {
    out.erase(kGradePrefix.size() - 1, 1);
  }
  return out;
}

}  // namespace

RoadType::RoadType(std::string_view tag) : tag_(normalize_tag(tag)) {}

RoadTypeSet parse_road_type_list(std::string_view comma_separated) {
  RoadTypeSet out;
  std::size_t start = 0;
  while (start <= comma_separated.size()) {
    std::size_t end = comma_separated.find(',', start);
    if (end == std::string_view::npos) end = comma_separated.size();
    const auto piece = comma_separated.substr(start, end - start);
    if (piece.find_first_not_of(" \t") != std::string_view::npos) out.insert(RoadType(piece));
    start = end + 1;
  }
  return out;
}

}  // namespace bikepref
