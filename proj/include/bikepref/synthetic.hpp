#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bikepref/matching.hpp"
#include "bikepref/network.hpp"

namespace bikepref::synthetic {

/// Jittered square grid with random road types, for fixtures and benchmarks.
struct GridSpec {
  std::size_t rows = 20;
  std::size_t cols = 20;
  double spacing_m = 100.0;
  double jitter = 0.25;  // node displacement as a fraction of spacing
  LonLat origin{7.10, 50.70};
  std::vector<RoadType> types{RoadType("cycleway"), RoadType("residential")};
  std::uint64_t seed = 1;
};

RoadNetwork make_grid_network(const GridSpec& spec);

/// Node of the grid at (row, col); ids are "r<row>c<col>".
NodeIndex grid_node(const RoadNetwork& net, std::size_t row, std::size_t col);

/// Minimum-cost walks under `costs` between random node pairs whose straight
/// distance is at least `min_separation_m`.
std::vector<Walk> planted_routes(const RoadNetwork& net, std::span<const std::int64_t> costs, std::size_t count,
                                 std::uint64_t seed, double min_separation_m = 0.0);

/// Points every `step_m` meters along the walk (including both ends), each
/// displaced by up to `noise_m` meters in a random direction.
Trajectory sample_trajectory(const RoadNetwork& net, const Walk& walk, std::string id, double step_m,
                             double noise_m = 0.0, std::uint64_t seed = 0);

}  // namespace bikepref::synthetic
