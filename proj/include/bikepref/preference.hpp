#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bikepref/matching.hpp"
#include "bikepref/network.hpp"

namespace bikepref {

using TypeShares = std::map<RoadType, double>;

/// Geometric-shortest reference path for each matched walk, between its
/// first and last node. Round trips (same start and end node) get an empty
/// walk and are counted in `excluded_circular`.
struct ReferencePaths {
  std::vector<Walk> paths;  // parallel to the input; empty for excluded ones
  std::size_t excluded_circular = 0;
};

ReferencePaths reference_paths(const RoadNetwork& net, std::span<const MatchedPath> matched);

/// Per-type length divided by the total length over all given walks. Empty
/// walks contribute nothing; throws UsageError when no length remains.
TypeShares type_shares(std::span<const Walk> paths, const RoadNetwork& net);

struct TypeVerdicts {
  RoadTypeSet favored;
  RoadTypeSet unfavored;
};

/// c is favored iff r_user(c) >= r_shortest(c). Types of `vocabulary` that
/// carry zero share in both maps count as unfavored, as do any other types
/// with no observed length.
TypeVerdicts classify_types(const TypeShares& r_user, const TypeShares& r_shortest,
                            const RoadTypeSet& vocabulary = {});

EdgeClassification build_classification(const RoadNetwork& net, const RoadTypeSet& favored);

struct TypeShareReport {
  std::string group;
  TypeShares r_user;
  TypeShares r_shortest;
  double user_total_m = 0.0;
  double shortest_total_m = 0.0;
  std::size_t trajectories = 0;
  std::size_t excluded_circular = 0;
  TypeVerdicts verdicts;
};

/// Shares of the actual routes against their shortest references, and the
/// resulting favored/unfavored split over every road type of the network.
TypeShareReport analyze_group(const RoadNetwork& net, const std::string& group, std::span<const MatchedPath> matched);

}  // namespace bikepref
