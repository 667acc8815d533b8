#include "bikepref/geo.hpp"

#include <algorithm>
#include <limits>

namespace bikepref {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

double haversine_m(LonLat a, LonLat b) {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s = std::sin(dphi / 2.0);
  const double t = std::sin(dlambda / 2.0);
  const double h = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double polyline_length_m(std::span<const LonLat> line) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) total += haversine_m(line[i - 1], line[i]);
  return total;
}

LocalProjection::LocalProjection(LonLat origin)
    : origin_(origin),
      meters_per_deg_lat_(kEarthRadiusM * kDegToRad),
      meters_per_deg_lon_(kEarthRadiusM * kDegToRad * std::cos(origin.lat * kDegToRad)) {}

XY LocalProjection::project(LonLat p) const {
  return {(p.lon - origin_.lon) * meters_per_deg_lon_, (p.lat - origin_.lat) * meters_per_deg_lat_};
}

LonLat LocalProjection::unproject(XY p) const {
  return {origin_.lon + p.x / meters_per_deg_lon_, origin_.lat + p.y / meters_per_deg_lat_};
}

double distance(XY a, XY b) { return std::hypot(a.x - b.x, a.y - b.y); }

SegmentProjection project_onto_segment(XY p, XY a, XY b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  const XY q{a.x + t * dx, a.y + t * dy};
  return {q, t, distance(p, q)};
}

PolylineProjection project_onto_polyline(XY p, std::span<const XY> line) {
  PolylineProjection best{line.front(), 0.0, distance(p, line.front())};
  double walked = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const double seg = distance(line[i - 1], line[i]);
    const auto proj = project_onto_segment(p, line[i - 1], line[i]);
    if (proj.distance < best.distance) best = {proj.point, walked + proj.t * seg, proj.distance};
    walked += seg;
  }
  return best;
}

double planar_length(std::span<const XY> line) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) total += distance(line[i - 1], line[i]);
  return total;
}

XY point_along(std::span<const XY> line, double offset) {
  if (offset <= 0.0 || line.size() == 1) return line.front();
  double walked = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const double seg = distance(line[i - 1], line[i]);
    if (walked + seg >= offset && seg > 0.0) {
      const double t = (offset - walked) / seg;
      return {line[i - 1].x + t * (line[i].x - line[i - 1].x),
              line[i - 1].y + t * (line[i].y - line[i - 1].y)};
    }
    walked += seg;
  }
  return line.back();
}

std::vector<XY> sample_polyline(std::span<const XY> line, double step) {
  std::vector<XY> out;
  if (line.empty()) return out;
  const double total = planar_length(line);
  // Integer stepping keeps the sample count independent of accumulated error.
  const auto count = static_cast<std::size_t>(std::floor(total / step + 1e-9));
  out.reserve(count + 1);
  for (std::size_t i = 0; i <= count; ++i) out.push_back(point_along(line, static_cast<double>(i) * step));
  return out;
}

bool point_in_ring(XY p, std::span<const XY> ring) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const XY& a = ring[i];
    const XY& b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

double distance_to_ring(XY p, std::span<const XY> ring) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < ring.size(); ++i)
    best = std::min(best, project_onto_segment(p, ring[i - 1], ring[i]).distance);
  return best;
}

}  // namespace bikepref
