#include "bikepref/preference.hpp"

#include <numeric>

namespace bikepref {

ReferencePaths reference_paths(const RoadNetwork& net, std::span<const MatchedPath> matched) {
  ReferencePaths out;
  out.paths.reserve(matched.size());
  for (const auto& m : matched) {
    const NodeIndex s = m.walk.front();
    const NodeIndex t = m.walk.back();
    if (s == t) {
      out.paths.emplace_back();
      ++out.excluded_circular;
      continue;
    }
    auto sp = shortest_path(net, LengthCost{&net}, s, t);
    if (!sp.reachable) throw DataError("trajectory '" + m.trajectory_id + "' has endpoints in different components");
    out.paths.push_back(std::move(sp.walk));
  }
  return out;
}

TypeShares type_shares(std::span<const Walk> paths, const RoadNetwork& net) {
  std::map<RoadType, double> lengths;
  double total = 0.0;
  for (const auto& w : paths) {
    for (EdgeIndex e : w.edges) {
      const auto len = static_cast<double>(net.edge(e).length_m);
      lengths[net.edge(e).type] += len;
      total += len;
    }
  }
  if (total <= 0.0) throw UsageError("no data for group: paths have no length");
  TypeShares out;
  for (const auto& [t, len] : lengths) out[t] = len / total;
  return out;
}

TypeVerdicts classify_types(const TypeShares& r_user, const TypeShares& r_shortest, const RoadTypeSet& vocabulary) {
  RoadTypeSet all = vocabulary;
  for (const auto& [t, _] : r_user) all.insert(t);
  for (const auto& [t, _] : r_shortest) all.insert(t);

  const auto share = [](const TypeShares& m, const RoadType& t) {
    const auto it = m.find(t);
    return it == m.end() ? 0.0 : it->second;
  };
  TypeVerdicts out;
  for (const auto& t : all) {
    const double u = share(r_user, t);
    const double s = share(r_shortest, t);
    if (u == 0.0 && s == 0.0) {
      out.unfavored.insert(t);
    } else if (u >= s) {
      out.favored.insert(t);
    } else {
      out.unfavored.insert(t);
    }
  }
  return out;
}

EdgeClassification build_classification(const RoadNetwork& /*net*/, const RoadTypeSet& favored) {
  return EdgeClassification(favored);
}

TypeShareReport analyze_group(const RoadNetwork& net, const std::string& group, std::span<const MatchedPath> matched) {
  if (matched.empty()) throw UsageError("group '" + group + "' has no trajectories");
  TypeShareReport rep;
  rep.group = group;
  rep.trajectories = matched.size();

  std::vector<Walk> user;
  user.reserve(matched.size());
  for (const auto& m : matched) {
    user.push_back(m.walk);
    rep.user_total_m += static_cast<double>(m.matched_length);
  }
  rep.r_user = type_shares(user, net);

  auto refs = reference_paths(net, matched);
  rep.excluded_circular = refs.excluded_circular;
  for (const auto& w : refs.paths) rep.shortest_total_m += static_cast<double>(walk_length(net, w));
  if (rep.shortest_total_m > 0.0) rep.r_shortest = type_shares(refs.paths, net);

  rep.verdicts = classify_types(rep.r_user, rep.r_shortest, net.road_types());
  return rep;
}

}  // namespace bikepref
