#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bikepref/network.hpp"

namespace bikepref {

/// Ordered set of rational trade-off values, all sharing exact integer arithmetic.
struct AlphaGrid {
  std::vector<Alpha> values;

  /// num/den for num = num_min, num_min + step, ..., num_max.
  static AlphaGrid uniform(std::int64_t den, std::int64_t num_min, std::int64_t num_max, std::int64_t step = 1);
  /// 0.1 to 0.9 in steps of 0.005.
  static AlphaGrid standard() { return uniform(200, 20, 180); }
  /// Parses "den:num_min:num_max[:step]" or a comma list of decimals ("0.1,0.25,...").
  static AlphaGrid parse(std::string_view spec);
};

/// Interior split positions (indices into walk.nodes) of a minimum milestone
/// decomposition. Single edges that are not themselves optimal become their
/// own subpath and are reported in `non_optimal_atoms` by edge position.
struct Decomposition {
  std::vector<std::size_t> milestones;
  std::vector<std::size_t> non_optimal_atoms;

  std::size_t subpaths() const { return milestones.size() + 1; }
};

/// Greedy decomposition under integer edge costs (scaled w_alpha).
///
/// From the current start, the walk is extended while the prefix cost still
/// equals the shortest-path distance between its ends (ties count as
/// optimal). At the first violation a milestone goes on the previous node and
/// the scan restarts there. Operates on positions, so a node that the walk
/// visits twice can carry two milestones.
Decomposition min_decomposition(const RoadNetwork& net, std::span<const std::int64_t> costs, const Walk& walk);

Decomposition min_decomposition(const RoadNetwork& net, const EdgeClassification& cls, Alpha alpha, const Walk& walk);

struct AlphaProfile {
  std::string trajectory_id;
  std::vector<Alpha> grid;
  std::vector<std::size_t> milestones;      // per grid value
  std::vector<std::size_t> atoms;           // non-optimal atoms per grid value
  std::size_t min_milestones = 0;
  std::vector<Alpha> optimal_alphas;
};

AlphaProfile alpha_sweep(const RoadNetwork& net, const EdgeClassification& cls, const Walk& walk,
                         const AlphaGrid& grid, std::string trajectory_id = {});

enum class ConsistencyCategory { low_only, high_only, other };

std::string_view to_string(ConsistencyCategory c);

/// low_only: every optimal alpha <= 0.5 and at least one below; high_only
/// mirrors it; everything else (only 0.5, or both sides) is `other`.
ConsistencyCategory consistency_category(const AlphaProfile& profile);

struct CategoryDistribution {
  double low_only = 0.0;
  double high_only = 0.0;
  double other = 0.0;
};

struct GroupAggregate {
  std::vector<Alpha> grid;
  /// Mean over trajectories of 100 * subpaths(alpha) / min subpaths.
  std::vector<double> mean_relative_percent;
  Alpha argmin;
  CategoryDistribution distribution;
  std::size_t trajectories = 0;
};

/// Ties of the curve minimum are resolved toward 0.5, then toward the lower alpha.
GroupAggregate group_aggregate(std::span<const AlphaProfile> profiles);

/// (1 - alpha) / alpha: the longest favored detour accepted in place of an
/// unfavored edge. Throws std::domain_error outside (0, 1).
double max_detour_ratio(double alpha);

enum class ModelVerdict { consistent, boundary, inconsistent };

std::string_view to_string(ModelVerdict v);

struct GroupPreferenceModel {
  std::string group;
  RoadTypeSet favored_types;
  Alpha alpha;
  std::vector<Alpha> curve_alphas;
  std::vector<double> curve_percent;
  ModelVerdict verdict = ModelVerdict::boundary;
  CategoryDistribution distribution;
  std::size_t trajectories = 0;

  Weighting weighting() const { return Weighting(alpha, EdgeClassification(favored_types)); }
};

/// alpha < 0.5 is consistent (favored types cost less per meter); exactly 0.5
/// means the classification does not outweigh plain distance.
GroupPreferenceModel build_model(const std::string& group, const RoadTypeSet& favored, const GroupAggregate& aggregate);

}  // namespace bikepref
