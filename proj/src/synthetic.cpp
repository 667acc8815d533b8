#include "bikepref/synthetic.hpp"

#include <cmath>

namespace bikepref::synthetic {

namespace {
double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
}  // namespace

RoadNetwork make_grid_network(const GridSpec& spec) {
  if (spec.rows < 2 || spec.cols < 2) throw UsageError("grid needs at least 2 x 2 nodes");
  if (spec.types.empty()) throw UsageError("grid needs at least one road type");
  std::mt19937_64 gen(spec.seed);
  const LocalProjection proj(spec.origin);

  std::vector<Node> nodes;
  nodes.reserve(spec.rows * spec.cols);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    for (std::size_t c = 0; c < spec.cols; ++c) {
      const double jx = (uniform01(gen) * 2.0 - 1.0) * spec.jitter * spec.spacing_m;
      const double jy = (uniform01(gen) * 2.0 - 1.0) * spec.jitter * spec.spacing_m;
      Node n;
      n.id = "r" + std::to_string(r) + "c" + std::to_string(c);
      n.pos = proj.unproject({static_cast<double>(c) * spec.spacing_m + jx, static_cast<double>(r) * spec.spacing_m + jy});
      nodes.push_back(std::move(n));
    }
  }

  std::vector<Edge> edges;
  const auto add = [&](std::size_t a, std::size_t b) {
    Edge e;
    e.id = "e" + std::to_string(edges.size());
    e.u = static_cast<NodeIndex>(a);
    e.v = static_cast<NodeIndex>(b);
    e.geometry = {nodes[a].pos, nodes[b].pos};
    e.length_m = std::max<std::int64_t>(1, round_length_m(polyline_length_m(e.geometry)));
    e.type = spec.types[static_cast<std::size_t>(gen() % spec.types.size())];
    edges.push_back(std::move(e));
  };
  for (std::size_t r = 0; r < spec.rows; ++r) {
    for (std::size_t c = 0; c < spec.cols; ++c) {
      const std::size_t i = r * spec.cols + c;
      if (c + 1 < spec.cols) add(i, i + 1);
      if (r + 1 < spec.rows) add(i, i + spec.cols);
    }
  }
  return RoadNetwork(std::move(nodes), std::move(edges));
}

NodeIndex grid_node(const RoadNetwork& net, std::size_t row, std::size_t col) {
  const auto n = net.find_node("r" + std::to_string(row) + "c" + std::to_string(col));
  if (!n) throw UsageError("no grid node at that position");
  return *n;
}

std::vector<Walk> planted_routes(const RoadNetwork& net, std::span<const std::int64_t> costs, std::size_t count,
                                 std::uint64_t seed, double min_separation_m) {
  std::mt19937_64 gen(seed);
  std::vector<Walk> out;
  std::size_t attempts = 0;
  while (out.size() < count) {
    if (++attempts > 1000 * (count + 1)) throw UsageError("planted_routes: cannot find separated node pairs");
    const auto s = static_cast<NodeIndex>(gen() % net.num_nodes());
    const auto t = static_cast<NodeIndex>(gen() % net.num_nodes());
    if (s == t) continue;
    if (haversine_m(net.node(s).pos, net.node(t).pos) < min_separation_m) continue;
    auto sp = shortest_path(net, TableCost<std::int64_t>{costs}, s, t);
    if (!sp.reachable) continue;
    out.push_back(std::move(sp.walk));
  }
  return out;
}

Trajectory sample_trajectory(const RoadNetwork& net, const Walk& walk, std::string id, double step_m, double noise_m,
                             std::uint64_t seed) {
  if (walk.edges.empty()) throw UsageError("sample_trajectory: walk has no edges");
  std::vector<XY> line;
  for (std::size_t i = 0; i < walk.edges.size(); ++i) {
    const auto xy = net.edge_xy(walk.edges[i]);
    const bool forward = net.edge(walk.edges[i]).u == walk.nodes[i];
    std::vector<XY> seg(xy.begin(), xy.end());
    if (!forward) std::reverse(seg.begin(), seg.end());
    const std::size_t skip = line.empty() ? 0 : 1;
    line.insert(line.end(), seg.begin() + static_cast<std::ptrdiff_t>(skip), seg.end());
  }
  auto pts = sample_polyline(line, step_m);
  const double total = planar_length(line);
  if (pts.empty() || distance(pts.back(), line.back()) > 1e-6 * std::max(1.0, total)) pts.push_back(line.back());

  std::mt19937_64 gen(seed);
  Trajectory t;
  t.id = std::move(id);
  for (const auto& p : pts) {
    XY q = p;
    if (noise_m > 0.0) {
      const double r = noise_m * uniform01(gen);
      const double th = 2.0 * M_PI * uniform01(gen);
      q.x += r * std::cos(th);
      q.y += r * std::sin(th);
    }
    TrackPoint tp;
    tp.pos = net.projection().unproject(q);
    if (!t.points.empty() && t.points.back().pos == tp.pos) continue;
    t.points.push_back(tp);
  }
  return t;
}

}  // namespace bikepref::synthetic
