#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bikepref/errors.hpp"
#include "bikepref/matrix.hpp"

namespace bikepref {

struct KMeansParams {
  std::size_t k = 3;
  std::size_t restarts = 20;
  std::uint64_t seed = 1;
  std::size_t max_iterations = 300;
};

struct ClusterModel {
  std::size_t k = 0;
  Matrix centroids;                     // k x d
  std::vector<std::size_t> assignment;  // per input row
  double sse = 0.0;                     // within-cluster sum of squares ("compactness", lower is better)
  std::uint64_t seed = 0;
  std::size_t restarts = 0;
  std::size_t best_restart = 0;
  std::size_t iterations = 0;        // Lloyd iterations of the chosen restart
  std::vector<double> sse_history;   // SSE after each assignment step of the chosen restart
  std::size_t reseeded = 0;          // empty-cluster re-seeds in the chosen restart
};

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by SSE.
///
/// Every pass over the data visits rows in ascending `ids` order, so the
/// result does not depend on row order. Ties in the nearest-centroid choice go
/// to the lower cluster index. An empty cluster is re-seeded at the point
/// farthest from its current centroid.
ClusterModel kmeans(const Matrix& x, std::span<const std::string> ids, const KMeansParams& params);
/// Same, with rows identified by position.
ClusterModel kmeans(const Matrix& x, const KMeansParams& params);

double within_cluster_sse(const Matrix& x, const Matrix& centroids, std::span<const std::size_t> assignment);

/// Best SSE for k = 1..k_max (clamped to the row count).
std::vector<double> sse_sweep(const Matrix& x, std::span<const std::string> ids, const KMeansParams& params,
                              std::size_t k_max);

struct ReliefResult {
  std::vector<double> weights;
  bool neighbors_lowered = false;  // some class had too few members for k_neighbors
};

/// Deterministic ReliefF: every instance is used, Manhattan distance on
/// range-scaled features, k nearest hits and k nearest misses per other
/// class, misses weighted by P(C) / (1 - P(class)).
ReliefResult relieff(const Matrix& x, std::span<const std::size_t> labels, std::size_t k_neighbors);

/// Indices of features whose weight is at least the `quantile` value of the
/// weight distribution (linear interpolation between order statistics).
std::vector<std::size_t> select_top_features(std::span<const double> weights, double quantile);

/// Linear-interpolation quantile of a sample.
double quantile_linear(std::vector<double> values, double q);

struct ContingencyTable {
  std::vector<std::string> labels;               // user labels (rows)
  std::vector<std::string> clusters;             // cluster names (columns)
  std::vector<std::vector<std::size_t>> counts;  // [label][cluster]
  std::vector<std::optional<std::size_t>> cluster_label;  // mapped label per cluster
  std::string mapping_policy;                    // "optimal" or "greedy"
  std::size_t total = 0;
  std::size_t unlabeled = 0;
  double agreement = 0.0;

  std::size_t label_total(std::size_t label) const;
  std::size_t cluster_total(std::size_t cluster) const;
  /// Share of a label's trajectories that landed in its mapped cluster.
  double recall(std::size_t label) const;
  /// Share of a cluster's trajectories carrying its mapped label.
  double precision(std::size_t cluster) const;
};

/// Builds the table from counts and picks the cluster-to-label mapping that
/// maximizes the matched diagonal: exhaustive over bijections when the
/// numbers of labels and clusters agree, greedy on the largest cells otherwise.
ContingencyTable contingency_from_counts(std::vector<std::string> labels, std::vector<std::string> clusters,
                                         std::vector<std::vector<std::size_t>> counts);

/// Trajectories without a user label are excluded and counted in `unlabeled`.
ContingencyTable contingency(std::span<const std::optional<std::string>> user_labels,
                             std::span<const std::size_t> assignment, std::size_t k);

/// Fraction of rows on which two clusterings agree after optimal relabeling.
double clustering_agreement(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t k);

std::string format_contingency(const ContingencyTable& table);

}  // namespace bikepref
