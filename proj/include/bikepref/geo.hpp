#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace bikepref {

inline constexpr double kEarthRadiusM = 6371000.0;

/// WGS84 position in degrees.
struct LonLat {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const LonLat&, const LonLat&) = default;
};

/// Planar position in meters, relative to a LocalProjection origin.
struct XY {
  double x = 0.0;
  double y = 0.0;
};

/// Great-circle distance on a sphere of radius kEarthRadiusM.
double haversine_m(LonLat a, LonLat b);

/// Sum of haversine distances between consecutive vertices.
double polyline_length_m(std::span<const LonLat> line);

/// Equirectangular projection around a reference latitude. Accurate to well
/// below a meter over a few tens of kilometers, which is all matching and
/// buffering need.
class LocalProjection {
 public:
  LocalProjection() = default;
  explicit LocalProjection(LonLat origin);

  XY project(LonLat p) const;
  LonLat unproject(XY p) const;
  LonLat origin() const { return origin_; }

 private:
  LonLat origin_;
  double meters_per_deg_lat_ = kEarthRadiusM * M_PI / 180.0;
  double meters_per_deg_lon_ = kEarthRadiusM * M_PI / 180.0;
};

double distance(XY a, XY b);

struct SegmentProjection {
  XY point;
  double t = 0.0;         // in [0, 1] along the segment
  double distance = 0.0;  // from the query point
};

SegmentProjection project_onto_segment(XY p, XY a, XY b);

struct PolylineProjection {
  XY point;
  double offset = 0.0;  // arc length from the first vertex
  double distance = 0.0;
};

/// Closest point on a planar polyline with at least one vertex.
PolylineProjection project_onto_polyline(XY p, std::span<const XY> line);

double planar_length(std::span<const XY> line);

/// Point at arc length `offset` along the polyline (clamped to its ends).
XY point_along(std::span<const XY> line, double offset);

/// Evenly spaced samples at 0, step, 2*step, ... up to the polyline length.
std::vector<XY> sample_polyline(std::span<const XY> line, double step);

/// Even-odd rule; points on the boundary may go either way, callers that
/// care combine this with distance_to_ring.
bool point_in_ring(XY p, std::span<const XY> ring);

double distance_to_ring(XY p, std::span<const XY> ring);

}  // namespace bikepref
