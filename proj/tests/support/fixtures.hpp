// Shared fixtures and brute-force oracles for the unit and acceptance suites.
// Nothing here calls the library's search or decomposition code.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "bikepref/network.hpp"

namespace fixtures {

using namespace bikepref;

inline constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

/// A-B 100 m residential (unfavored), A-C and C-B 60 m cycleway (favored).
/// Coordinates put the nodes at the stated distances around lon 7.1, lat 50.7.
inline RoadNetwork triangle() {
  const LocalProjection proj({7.1, 50.7});
  const double h = std::sqrt(60.0 * 60.0 - 50.0 * 50.0);
  std::vector<Node> nodes{{"A", proj.unproject({0.0, 0.0}), std::nullopt},
                          {"B", proj.unproject({100.0, 0.0}), std::nullopt},
                          {"C", proj.unproject({50.0, h}), std::nullopt}};
  std::vector<Edge> edges(3);
  edges[0] = {"AB", 0, 1, 100, RoadType("residential"), {}, false};
  edges[1] = {"AC", 0, 2, 60, RoadType("cycleway"), {}, false};
  edges[2] = {"CB", 2, 1, 60, RoadType("cycleway"), {}, false};
  return RoadNetwork(std::move(nodes), std::move(edges));
}

inline RoadTypeSet cycleway_only() { return {RoadType("cycleway")}; }

struct RandomGraphSpec {
  std::size_t max_nodes = 12;
  std::size_t max_edges = 25;
  std::int64_t min_length = 1;
  std::int64_t max_length = 100;
  bool connected = true;
};

/// Random undirected multigraph without self-loops; connected when asked
/// (a random spanning tree first, then extra edges). Types are "fav"/"unfav".
inline RoadNetwork random_graph(std::mt19937_64& gen, const RandomGraphSpec& spec) {
  std::uniform_int_distribution<std::size_t> nn(2, spec.max_nodes);
  const std::size_t n = nn(gen);
  std::vector<Node> nodes;
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  for (std::size_t i = 0; i < n; ++i)
    nodes.push_back({"n" + std::to_string(i), {7.1 + jitter(gen), 50.7 + jitter(gen)}, std::nullopt});

  std::uniform_int_distribution<std::int64_t> len(spec.min_length, spec.max_length);
  std::bernoulli_distribution coin(0.5);
  std::vector<Edge> edges;
  const auto add = [&](std::size_t a, std::size_t b) {
    Edge e;
    e.id = "e" + std::to_string(edges.size());
    e.u = static_cast<NodeIndex>(a);
    e.v = static_cast<NodeIndex>(b);
    e.length_m = len(gen);
    e.type = RoadType(coin(gen) ? "fav" : "unfav");
    edges.push_back(std::move(e));
  };
  if (spec.connected) {
    for (std::size_t i = 1; i < n; ++i) add(std::uniform_int_distribution<std::size_t>(0, i - 1)(gen), i);
  }
  const std::size_t min_m = spec.connected ? n - 1 : 0;
  const std::size_t m = std::uniform_int_distribution<std::size_t>(std::max<std::size_t>(min_m, 1),
                                                                   std::max(spec.max_edges, min_m))(gen);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  while (edges.size() < m) {
    const auto a = pick(gen), b = pick(gen);
    if (a != b) add(a, b);
  }
  return RoadNetwork(std::move(nodes), std::move(edges));
}

/// Random walk of 1..max_edges edges (edges and nodes may repeat).
inline Walk random_walk(std::mt19937_64& gen, const RoadNetwork& net, std::size_t max_edges) {
  Walk w;
  NodeIndex cur;
  do {
    cur = static_cast<NodeIndex>(std::uniform_int_distribution<std::size_t>(0, net.num_nodes() - 1)(gen));
  } while (net.incident(cur).empty());
  w.nodes.push_back(cur);
  const std::size_t len = std::uniform_int_distribution<std::size_t>(1, max_edges)(gen);
  for (std::size_t i = 0; i < len; ++i) {
    const auto inc = net.incident(cur);
    const auto& pick = inc[std::uniform_int_distribution<std::size_t>(0, inc.size() - 1)(gen)];
    w.edges.push_back(pick.edge);
    cur = pick.neighbor;
    w.nodes.push_back(cur);
  }
  return w;
}

/// Scaled w_alpha costs computed straight from the definition.
inline std::vector<std::int64_t> scaled_costs(const RoadNetwork& net, const RoadTypeSet& favored, std::int64_t p,
                                              std::int64_t q) {
  std::vector<std::int64_t> c;
  for (const auto& e : net.edges()) c.push_back(favored.contains(e.type) ? p * e.length_m : (q - p) * e.length_m);
  return c;
}

inline std::vector<std::int64_t> lengths(const RoadNetwork& net) {
  std::vector<std::int64_t> c;
  for (const auto& e : net.edges()) c.push_back(e.length_m);
  return c;
}

/// Minimum cost over every simple s-t path by depth-first enumeration;
/// kInf when t is unreachable. s == t gives 0.
inline std::int64_t enumerate_min_cost(const RoadNetwork& net, const std::vector<std::int64_t>& cost, NodeIndex s,
                                       NodeIndex t) {
  std::int64_t best = kInf;
  std::vector<bool> seen(net.num_nodes(), false);
  std::function<void(NodeIndex, std::int64_t)> dfs = [&](NodeIndex u, std::int64_t acc) {
    if (u == t) {
      best = std::min(best, acc);
      return;
    }
    seen[u] = true;
    for (const auto& inc : net.incident(u))
      if (!seen[inc.neighbor]) dfs(inc.neighbor, acc + cost[inc.edge]);
    seen[u] = false;
  };
  dfs(s, 0);
  return best;
}

/// All-pairs distances by Floyd-Warshall.
inline std::vector<std::vector<std::int64_t>> floyd_warshall(const RoadNetwork& net, const std::vector<std::int64_t>& cost) {
  const std::size_t n = net.num_nodes();
  std::vector<std::vector<std::int64_t>> d(n, std::vector<std::int64_t>(n, kInf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (EdgeIndex e = 0; e < net.num_edges(); ++e) {
    const auto& ed = net.edge(e);
    d[ed.u][ed.v] = std::min(d[ed.u][ed.v], cost[e]);
    d[ed.v][ed.u] = std::min(d[ed.v][ed.u], cost[e]);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  return d;
}

/// Minimum number of subpaths by dynamic programming over split positions:
/// best[j] = min over i < j of best[i] + 1, where walk[i..j] is optimal or a
/// single edge.
inline std::size_t dp_min_subpaths(const RoadNetwork& net, const std::vector<std::int64_t>& cost, const Walk& w) {
  const auto d = floyd_warshall(net, cost);
  const std::size_t L = w.edges.size();
  std::vector<std::size_t> best(L + 1, std::numeric_limits<std::size_t>::max());
  best[0] = 0;
  for (std::size_t j = 1; j <= L; ++j) {
    std::int64_t suffix = 0;
    for (std::size_t i = j; i-- > 0;) {
      suffix += cost[w.edges[i]];
      const bool ok = (j == i + 1) || suffix == d[w.nodes[i]][w.nodes[j]];
      if (ok && best[i] != std::numeric_limits<std::size_t>::max()) best[j] = std::min(best[j], best[i] + 1);
    }
  }
  return best[L];
}

/// True when each subpath between consecutive cut positions is optimal or a single edge.
inline bool subpaths_optimal(const RoadNetwork& net, const std::vector<std::int64_t>& cost, const Walk& w,
                             const std::vector<std::size_t>& milestones) {
  const auto d = floyd_warshall(net, cost);
  std::vector<std::size_t> cuts{0};
  cuts.insert(cuts.end(), milestones.begin(), milestones.end());
  cuts.push_back(w.edges.size());
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const auto a = cuts[k], b = cuts[k + 1];
    if (b <= a) return false;
    std::int64_t c = 0;
    for (std::size_t i = a; i < b; ++i) c += cost[w.edges[i]];
    if (b - a > 1 && c != d[w.nodes[a]][w.nodes[b]]) return false;
  }
  return true;
}

}  // namespace fixtures
