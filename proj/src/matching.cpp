#include "bikepref/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <unordered_map>

namespace bikepref {

std::string_view to_string(MatchError::Kind kind) {
  switch (kind) {
    case MatchError::Kind::unmatchable_point: return "unmatchable_point";
    case MatchError::Kind::no_route: return "no_route";
    case MatchError::Kind::degenerate: return "degenerate";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// EdgeLocator

EdgeLocator::EdgeLocator(const RoadNetwork& net, double cell_size) : net_(&net), cell_(cell_size) {
  if (net.num_edges() == 0) throw DataError("cannot match against an empty network");
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = max_x;
  min_x_ = std::numeric_limits<double>::infinity();
  min_y_ = min_x_;
  for (EdgeIndex e = 0; e < net.num_edges(); ++e) {
    for (const auto& p : net.edge_xy(e)) {
      min_x_ = std::min(min_x_, p.x);
      min_y_ = std::min(min_y_, p.y);
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
    }
  }
  nx_ = static_cast<std::size_t>((max_x - min_x_) / cell_) + 1;
  ny_ = static_cast<std::size_t>((max_y - min_y_) / cell_) + 1;
  cells_.resize(nx_ * ny_);
  for (EdgeIndex e = 0; e < net.num_edges(); ++e) {
    const auto xy = net.edge_xy(e);
    for (std::size_t i = 1; i < xy.size(); ++i) {
      const auto x0 = static_cast<std::size_t>((std::min(xy[i - 1].x, xy[i].x) - min_x_) / cell_);
      const auto x1 = static_cast<std::size_t>((std::max(xy[i - 1].x, xy[i].x) - min_x_) / cell_);
      const auto y0 = static_cast<std::size_t>((std::min(xy[i - 1].y, xy[i].y) - min_y_) / cell_);
      const auto y1 = static_cast<std::size_t>((std::max(xy[i - 1].y, xy[i].y) - min_y_) / cell_);
      for (auto cx = x0; cx <= x1; ++cx)
        for (auto cy = y0; cy <= y1; ++cy) {
          auto& cell = cells_[cy * nx_ + cx];
          if (cell.empty() || cell.back() != e) cell.push_back(e);
        }
    }
  }
}

std::vector<EdgeCandidate> EdgeLocator::nearest(XY p, double radius, std::size_t limit) const {
  std::vector<EdgeCandidate> out;
  const auto clamp_cell = [&](double v, double lo, std::size_t n) -> std::ptrdiff_t {
    const auto c = static_cast<std::ptrdiff_t>(std::floor((v - lo) / cell_));
    return std::clamp<std::ptrdiff_t>(c, 0, static_cast<std::ptrdiff_t>(n) - 1);
  };
  // Entirely outside the indexed extent.
  if (p.x + radius < min_x_ || p.y + radius < min_y_ || p.x - radius > min_x_ + cell_ * static_cast<double>(nx_) ||
      p.y - radius > min_y_ + cell_ * static_cast<double>(ny_))
    return out;
  const auto x0 = clamp_cell(p.x - radius, min_x_, nx_);
  const auto x1 = clamp_cell(p.x + radius, min_x_, nx_);
  const auto y0 = clamp_cell(p.y - radius, min_y_, ny_);
  const auto y1 = clamp_cell(p.y + radius, min_y_, ny_);
  std::vector<EdgeIndex> seen;
  for (auto cx = x0; cx <= x1; ++cx)
    for (auto cy = y0; cy <= y1; ++cy)
      for (EdgeIndex e : cells_[static_cast<std::size_t>(cy) * nx_ + static_cast<std::size_t>(cx)]) seen.push_back(e);
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  for (EdgeIndex e : seen) {
    const auto xy = net_->edge_xy(e);
    const auto proj = project_onto_polyline(p, xy);
    if (proj.distance > radius) continue;
    const double len = planar_length(xy);
    out.push_back({e, len > 0.0 ? proj.offset / len : 0.0, proj.distance});
  }
  std::sort(out.begin(), out.end(), [](const EdgeCandidate& a, const EdgeCandidate& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.edge < b.edge;
  });
  if (out.size() > limit) out.resize(limit);
  return out;
}

// ---------------------------------------------------------------------------
// Matching

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Geometric shortest-path distances from the endpoints seen so far, grown on demand.
class RouteCache {
 public:
  explicit RouteCache(const RoadNetwork& net) : net_(&net) {}

  std::optional<std::int64_t> distance(NodeIndex from, NodeIndex to, double limit) {
    auto& search = search_from(from);
    if (!search.settled(to)) search.run_until(static_cast<std::int64_t>(std::ceil(limit)));
    if (!search.settled(to)) return std::nullopt;
    return search.tentative(to);
  }

  Walk path(NodeIndex from, NodeIndex to) {
    auto& search = search_from(from);
    search.distance_to(to);
    return search.path_to(to);
  }

 private:
  DijkstraSearch<std::int64_t>& search_from(NodeIndex n) {
    auto it = searches_.find(n);
    if (it == searches_.end())
      it = searches_.emplace(n, std::make_unique<DijkstraSearch<std::int64_t>>(*net_, LengthCost{net_}, n)).first;
    return *it->second;
  }

  const RoadNetwork* net_;
  std::unordered_map<NodeIndex, std::unique_ptr<DijkstraSearch<std::int64_t>>> searches_;
};

struct Link {
  double route = std::numeric_limits<double>::infinity();
  NodeIndex exit = kNoNode;   // endpoint of the earlier edge
  NodeIndex entry = kNoNode;  // endpoint of the later edge
};

// Network distance between two on-edge positions, leaving the first edge
// through one endpoint and entering the second through one endpoint.
Link route_between(const RoadNetwork& net, RouteCache& cache, const EdgeCandidate& a, const EdgeCandidate& b,
                   double limit) {
  Link best;
  const auto& ea = net.edge(a.edge);
  const auto& eb = net.edge(b.edge);
  if (a.edge == b.edge) {
    best.route = std::abs(b.fraction - a.fraction) * static_cast<double>(ea.length_m);
    return best;
  }
  const double la = static_cast<double>(ea.length_m);
  const double lb = static_cast<double>(eb.length_m);
  const std::pair<NodeIndex, double> exits[2] = {{ea.u, a.fraction * la}, {ea.v, (1.0 - a.fraction) * la}};
  const std::pair<NodeIndex, double> entries[2] = {{eb.u, b.fraction * lb}, {eb.v, (1.0 - b.fraction) * lb}};
  for (const auto& [x, dx] : exits) {
    for (const auto& [y, dy] : entries) {
      const auto sp = cache.distance(x, y, limit);
      if (!sp) continue;
      const double total = dx + static_cast<double>(*sp) + dy;
      if (total < best.route) best = {total, x, y};
    }
  }
  return best;
}

struct Run {
  EdgeIndex edge;
  std::size_t first_point;
  std::size_t last_point;
  double first_fraction;
  double last_fraction;
};

}  // namespace

MatchResult map_match(const RoadNetwork& net, const Trajectory& traj, const MatchParams& params) {
  const EdgeLocator locator(net);
  return map_match(locator, traj, params);
}

MatchResult map_match(const EdgeLocator& locator, const Trajectory& traj, const MatchParams& params) {
  const auto& net = locator.network();
  MatchResult result;
  const std::size_t n = traj.points.size();
  if (n < 2) {
    result.error = MatchError{MatchError::Kind::degenerate, 0, "trajectory has fewer than 2 points"};
    return result;
  }

  std::vector<XY> xy(n);
  for (std::size_t i = 0; i < n; ++i) xy[i] = net.projection().project(traj.points[i].pos);

  std::vector<std::vector<EdgeCandidate>> cands(n);
  for (std::size_t i = 0; i < n; ++i) {
    cands[i] = locator.nearest(xy[i], params.max_snap_distance, static_cast<std::size_t>(params.max_candidates));
    if (cands[i].empty()) {
      result.error = MatchError{MatchError::Kind::unmatchable_point, i,
                                "point " + std::to_string(i) + " is farther than max_snap_distance from every edge"};
      return result;
    }
  }

  const double two_sigma2 = 2.0 * params.sigma_gps * params.sigma_gps;
  RouteCache cache(net);

  // Viterbi over candidate states.
  std::vector<std::vector<double>> score(n);
  std::vector<std::vector<std::size_t>> back(n);
  score[0].resize(cands[0].size());
  for (std::size_t a = 0; a < cands[0].size(); ++a) score[0][a] = -cands[0][a].distance * cands[0][a].distance / two_sigma2;

  for (std::size_t i = 1; i < n; ++i) {
    const double straight = distance(xy[i - 1], xy[i]);
    const double limit = 3.0 * straight + 4.0 * params.max_snap_distance + 2000.0;
    const bool unpenalized = straight > params.low_sampling_gap;
    score[i].assign(cands[i].size(), kNegInf);
    back[i].assign(cands[i].size(), 0);
    for (std::size_t b = 0; b < cands[i].size(); ++b) {
      const double emit = -cands[i][b].distance * cands[i][b].distance / two_sigma2;
      for (std::size_t a = 0; a < cands[i - 1].size(); ++a) {
        if (score[i - 1][a] == kNegInf) continue;
        const auto link = route_between(net, cache, cands[i - 1][a], cands[i][b], limit);
        if (!std::isfinite(link.route)) continue;
        const double trans = unpenalized ? 0.0 : -std::abs(link.route - straight) / params.transition_scale;
        const double s = score[i - 1][a] + trans + emit;
        if (s > score[i][b]) {
          score[i][b] = s;
          back[i][b] = a;
        }
      }
    }
    if (std::none_of(score[i].begin(), score[i].end(), [](double s) { return s > kNegInf; })) {
      result.error = MatchError{MatchError::Kind::no_route, i,
                                "no network route reaches point " + std::to_string(i) + " from its predecessor"};
      return result;
    }
  }

  std::vector<EdgeCandidate> chosen(n);
  {
    std::size_t best = 0;
    for (std::size_t b = 1; b < score[n - 1].size(); ++b)
      if (score[n - 1][b] > score[n - 1][best]) best = b;
    for (std::size_t i = n; i-- > 0;) {
      chosen[i] = cands[i][best];
      if (i > 0) best = back[i][best];
    }
  }

  // Collapse consecutive points on the same edge into runs.
  std::vector<Run> runs;
  for (std::size_t i = 0; i < n; ++i) {
    if (!runs.empty() && runs.back().edge == chosen[i].edge) {
      runs.back().last_point = i;
      runs.back().last_fraction = chosen[i].fraction;
    } else {
      runs.push_back({chosen[i].edge, i, i, chosen[i].fraction, chosen[i].fraction});
    }
  }

  // Exit/entry endpoints between consecutive runs.
  std::vector<Link> links(runs.size() > 0 ? runs.size() - 1 : 0);
  for (std::size_t j = 0; j + 1 < runs.size(); ++j) {
    const EdgeCandidate a{runs[j].edge, runs[j].last_fraction, 0.0};
    const EdgeCandidate b{runs[j + 1].edge, runs[j + 1].first_fraction, 0.0};
    links[j] = route_between(net, cache, a, b, std::numeric_limits<double>::max() / 4);
  }

  const auto near_node = [&](const Run& r, NodeIndex node) {
    const XY nxy = net.projection().project(net.node(node).pos);
    for (std::size_t i = r.first_point; i <= r.last_point; ++i)
      if (distance(xy[i], nxy) > params.max_snap_distance) return false;
    return true;
  };

  std::vector<EdgeIndex> edges;
  NodeIndex start = kNoNode;
  NodeIndex cur = kNoNode;
  const auto append = [&](EdgeIndex e) {
    edges.push_back(e);
    cur = net.edge(e).other(cur);
  };

  for (std::size_t j = 0; j < runs.size(); ++j) {
    const auto& r = runs[j];
    const auto& edge = net.edge(r.edge);
    NodeIndex entry;
    NodeIndex exit;
    if (j == 0 && runs.size() == 1) {
      entry = r.last_fraction >= r.first_fraction ? edge.u : edge.v;
      exit = edge.other(entry);
    } else if (j == 0) {
      exit = links[0].exit;
      entry = edge.other(exit);
    } else {
      entry = links[j - 1].entry;
      exit = j + 1 < runs.size() ? links[j].exit : edge.other(entry);
    }

    const bool terminal = j == 0 || j + 1 == runs.size();
    bool drop = false;
    if (runs.size() > 1 && j == 0) drop = near_node(r, exit);
    else if (runs.size() > 1 && j + 1 == runs.size()) drop = near_node(r, entry);
    else if (!terminal && entry == exit) drop = near_node(r, entry);

    if (start == kNoNode) {
      start = drop ? exit : entry;
      cur = start;
    }
    if (!drop) {
      if (entry == exit) {
        append(r.edge);
        append(r.edge);
      } else {
        append(r.edge);
      }
    }
    if (j + 1 < runs.size()) {
      const auto conn = cache.path(links[j].exit, links[j].entry);
      for (EdgeIndex e : conn.edges) append(e);
    }
  }

  if (edges.empty()) {
    result.error = MatchError{MatchError::Kind::degenerate, 0, "trajectory matched to a single node"};
    return result;
  }

  MatchedPath mp;
  mp.trajectory_id = traj.id;
  mp.walk = walk_from_edges(net, start, edges);
  mp.matched_length = walk_length(net, mp.walk);
  mp.snap_distances.reserve(n);
  for (const auto& c : chosen) mp.snap_distances.push_back(c.distance);
  result.path = std::move(mp);
  return result;
}

TrajectoryMatch match_trajectory(const EdgeLocator& locator, const Trajectory& traj, const MatchParams& params) {
  const auto& net = locator.network();
  TrajectoryMatch out;
  out.trajectory_id = traj.id;

  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const auto p = net.projection().project(traj.points[i].pos);
    if (locator.nearest(p, params.max_snap_distance, 1).empty()) bad.push_back(i);
  }

  std::vector<std::pair<std::size_t, std::size_t>> pieces;  // [begin, end)
  std::size_t begin = 0;
  for (std::size_t b : bad) {
    pieces.emplace_back(begin, b);
    begin = b + 1;
  }
  pieces.emplace_back(begin, traj.points.size());
  for (const auto& [b, e] : pieces) {
    if (e - b < 2) {
      out.error = MatchError{MatchError::Kind::unmatchable_point, bad.empty() ? 0 : bad.front(),
                             "point " + std::to_string(bad.empty() ? 0 : bad.front()) +
                                 " is unmatchable and leaves a fragment with fewer than 2 points"};
      return out;
    }
  }

  for (std::size_t k = 0; k < pieces.size(); ++k) {
    Trajectory frag;
    frag.id = pieces.size() > 1 ? traj.id + "#" + std::to_string(k + 1) : traj.id;
    frag.declared_activity = traj.declared_activity;
    frag.points.assign(traj.points.begin() + static_cast<std::ptrdiff_t>(pieces[k].first),
                       traj.points.begin() + static_cast<std::ptrdiff_t>(pieces[k].second));
    auto r = map_match(locator, frag, params);
    if (!r.ok()) {
      auto err = *r.error;
      err.point_index += pieces[k].first;
      out.fragments.clear();
      out.ranges.clear();
      out.error = err;
      return out;
    }
    out.fragments.push_back(std::move(*r.path));
    out.ranges.push_back(pieces[k]);
  }
  return out;
}

std::map<RoadType, double> length_by_type(const MatchedPath& matched, const RoadNetwork& net) {
  std::map<RoadType, double> out;
  for (EdgeIndex e : matched.walk.edges) out[net.edge(e).type] += static_cast<double>(net.edge(e).length_m);
  return out;
}

}  // namespace bikepref
