#pragma once

#include <compare>
#include <functional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>

namespace bikepref {

/// Categorical road attribute such as `cycleway` or `track_grade5`.
///
/// Tags are normalized on construction: trimmed, lower-cased, internal
/// whitespace and hyphens become underscores, and `track_grade_N` is folded to
/// `track_gradeN`. Unrecognized tags are kept as they are.
class RoadType {
 public:
  RoadType() : tag_("unknown") {}
  explicit RoadType(std::string_view tag);

  const std::string& str() const { return tag_; }

  friend auto operator<=>(const RoadType&, const RoadType&) = default;
  friend bool operator==(const RoadType&, const RoadType&) = default;
  friend std::ostream& operator<<(std::ostream& os, const RoadType& t) { return os << t.tag_; }

 private:
  std::string tag_;
};

using RoadTypeSet = std::set<RoadType>;

RoadTypeSet parse_road_type_list(std::string_view comma_separated);

}  // namespace bikepref

template <>
struct std::hash<bikepref::RoadType> {
  std::size_t operator()(const bikepref::RoadType& t) const noexcept { return std::hash<std::string>{}(t.str()); }
};
