#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bikepref/matching.hpp"
#include "bikepref/matrix.hpp"
#include "bikepref/network.hpp"

namespace bikepref {

struct LandUsePolygon {
  std::string category;
  std::vector<std::vector<LonLat>> rings;  // outer ring first, then holes; all closed
};

struct LandUseMap {
  std::vector<LandUsePolygon> polygons;

  /// Distinct categories, sorted.
  std::vector<std::string> categories() const;
};

/// GeoJSON FeatureCollection of Polygon / MultiPolygon features with a
/// `category` property.
LandUseMap parse_landuse_geojson(std::string_view text, std::string_view source_name = "<memory>");
LandUseMap load_landuse(const std::filesystem::path& path);

/// Fraction of trajectory samples (every `sample_step` meters along the
/// polyline) lying inside or within `buffer_radius` of a polygon of each
/// category. Categories overlap freely, so fractions need not sum to 1.
std::map<std::string, double> landuse_shares(const Trajectory& traj, const LandUseMap& landuse, double buffer_radius,
                                             double sample_step);

struct FeatureParams {
  double buffer_radius = 50.0;
  double sample_step = 10.0;
  double circular_min_gap = 200.0;      // meters
  double circular_length_fraction = 0.01;
  double detour_factor_cap = 1e4;
};

struct FeatureVector {
  std::string trajectory_id;
  double total_length = 0.0;
  double climb = 0.0;           // NaN when no elevation series exists
  double descent = 0.0;         // NaN when no elevation series exists
  double altitude_range = 0.0;  // NaN when no elevation series exists
  bool elevation_missing = false;
  bool is_circular = false;
  double detour_difference = 0.0;
  double detour_factor = 1.0;
  bool reference_degenerate = false;  // start and end snapped to the same node
  std::map<RoadType, double> road_type_shares;
  std::map<std::string, double> landuse_shares;
  double snap_mean = 0.0;
  double snap_max = 0.0;
};

struct ElevationStats {
  double climb = 0.0;
  double descent = 0.0;
  double range = 0.0;
};

/// Sums of positive and negative steps plus max - min.
ElevationStats elevation_stats(std::span<const double> series);

FeatureVector extract_features(const Trajectory& traj, const MatchedPath& matched, const RoadNetwork& net,
                               const LandUseMap& landuse, const FeatureParams& params);

/// Observations x named features.
struct FeatureMatrix {
  std::vector<std::string> ids;
  std::vector<std::string> names;
  Matrix values;

  std::size_t index_of(std::string_view name) const;
};

/// Aligns the feature vectors into columns (fixed scalar features, then
/// `road:<type>`, `landuse:<category>`, snap statistics) and imputes missing
/// altitude features by the column mean over trajectories that have them.
FeatureMatrix build_feature_matrix(std::span<const FeatureVector> features);

struct Normalization {
  Matrix values;
  std::vector<double> mean;
  std::vector<double> stddev;  // population convention
  std::vector<bool> zero_variance;
};

/// Column-wise z-score. Zero-variance columns become all zeros and are flagged.
Normalization znormalize(const Matrix& x);

}  // namespace bikepref
