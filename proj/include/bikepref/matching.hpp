#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bikepref/network.hpp"

namespace bikepref {

struct TrackPoint {
  LonLat pos;
  std::optional<double> elevation;
  std::optional<double> time;  // seconds since the Unix epoch
};

struct TrajectoryMetadata {
  std::optional<double> total_length;
  std::optional<double> climb;
  std::optional<double> descent;
};

struct Trajectory {
  std::string id;
  std::optional<std::string> declared_activity;
  std::vector<TrackPoint> points;
  TrajectoryMetadata metadata;
};

/// Maps a free-form activity tag onto biking / mountainbiking / racingbiking / other.
std::string normalize_activity(std::string_view tag);

struct TrajectoryLoad {
  std::vector<Trajectory> trajectories;
  std::vector<std::string> warnings;  // skipped tracks
};

/// GPX 1.1: one trajectory per <trk>; segments are concatenated.
TrajectoryLoad parse_gpx(std::string_view text, std::string_view source_name);
/// `trajectory_id,seq,lon,lat[,ele][,time]`, rows ordered by `seq` per id.
TrajectoryLoad parse_trajectory_csv(std::string_view text, std::string_view source_name);
/// Sidecar `trajectory_id,activity`.
std::map<std::string, std::string> parse_activity_csv(std::string_view text, std::string_view source_name);

/// Loads every GPX/CSV file given (directories are scanned non-recursively,
/// in sorted order). Declared activities from `activities_csv` override GPX
/// <type> elements. Output is sorted by trajectory id.
TrajectoryLoad load_trajectories(std::span<const std::filesystem::path> sources,
                                 const std::optional<std::filesystem::path>& activities_csv = std::nullopt);

// ---------------------------------------------------------------------------
// Map matching

struct MatchParams {
  double max_snap_distance = 30.0;  // meters
  double sigma_gps = 10.0;          // emission standard deviation, meters
  int max_candidates = 5;
  double transition_scale = 50.0;   // meters
  double low_sampling_gap = 500.0;  // straight-line gap above which routing is unpenalized
};

struct MatchedPath {
  std::string trajectory_id;
  Walk walk;
  std::int64_t matched_length = 0;
  std::vector<double> snap_distances;  // one per trajectory point
};

struct MatchError {
  enum class Kind { unmatchable_point, no_route, degenerate };
  Kind kind = Kind::unmatchable_point;
  std::size_t point_index = 0;
  std::string message;
};

std::string_view to_string(MatchError::Kind kind);

struct MatchResult {
  std::optional<MatchedPath> path;
  std::optional<MatchError> error;

  bool ok() const { return path.has_value(); }
};

/// Edge candidate for a position: the closest point of one edge.
struct EdgeCandidate {
  EdgeIndex edge = kNoEdge;
  double fraction = 0.0;  // position along the edge from u (0) to v (1)
  double distance = 0.0;  // meters from the query position
};

/// Uniform-grid index over projected edge geometry.
class EdgeLocator {
 public:
  explicit EdgeLocator(const RoadNetwork& net, double cell_size = 100.0);

  /// Up to `limit` closest edges within `radius`, sorted by (distance, edge).
  std::vector<EdgeCandidate> nearest(XY p, double radius, std::size_t limit) const;
  const RoadNetwork& network() const { return *net_; }

 private:
  const RoadNetwork* net_;
  double cell_;
  double min_x_ = 0.0;
  double min_y_ = 0.0;
  std::size_t nx_ = 1;
  std::size_t ny_ = 1;
  std::vector<std::vector<EdgeIndex>> cells_;
};

/// Hidden-Markov map matching with dynamic programming over the point
/// sequence. Fails with the index of the first point that has no edge within
/// max_snap_distance.
MatchResult map_match(const RoadNetwork& net, const Trajectory& traj, const MatchParams& params);
MatchResult map_match(const EdgeLocator& locator, const Trajectory& traj, const MatchParams& params);

/// Outcome of matching with the split policy: unmatchable points cut the
/// trajectory; every fragment must keep at least two points.
struct TrajectoryMatch {
  std::string trajectory_id;
  std::vector<MatchedPath> fragments;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [first, end) point range per fragment
  std::optional<MatchError> error;
};

TrajectoryMatch match_trajectory(const EdgeLocator& locator, const Trajectory& traj, const MatchParams& params);

/// Summed edge length per road type; each traversal counts.
std::map<RoadType, double> length_by_type(const MatchedPath& matched, const RoadNetwork& net);

}  // namespace bikepref
