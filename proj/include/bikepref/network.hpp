#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bikepref/errors.hpp"
#include "bikepref/geo.hpp"
#include "bikepref/road_type.hpp"

namespace bikepref {

using NodeIndex = std::uint32_t;
using EdgeIndex = std::uint32_t;
inline constexpr NodeIndex kNoNode = std::numeric_limits<NodeIndex>::max();
inline constexpr EdgeIndex kNoEdge = std::numeric_limits<EdgeIndex>::max();

struct Node {
  std::string id;
  LonLat pos;
  std::optional<double> elevation;
};

struct Edge {
  std::string id;
  NodeIndex u = kNoNode;
  NodeIndex v = kNoNode;
  std::int64_t length_m = 0;  // rounded half-up to whole meters
  RoadType type;
  std::vector<LonLat> geometry;  // from u to v; straight segment when the source had none
  bool explicit_geometry = false;

  NodeIndex other(NodeIndex n) const { return n == u ? v : u; }
};

struct Incidence {
  EdgeIndex edge;
  NodeIndex neighbor;
};

/// Undirected road graph. Immutable after construction; concurrent reads are safe.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  /// Validates the edge invariants (existing distinct endpoints, length >= 1).
  RoadNetwork(std::vector<Node> nodes, std::vector<Edge> edges);

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Node& node(NodeIndex n) const { return nodes_.at(n); }
  const Edge& edge(EdgeIndex e) const { return edges_.at(e); }
  std::span<const Incidence> incident(NodeIndex n) const { return adjacency_.at(n); }

  std::optional<NodeIndex> find_node(std::string_view id) const;
  std::optional<EdgeIndex> find_edge(std::string_view id) const;

  /// Road types present on at least one edge, sorted.
  RoadTypeSet road_types() const;
  std::int64_t total_length() const;

  const LocalProjection& projection() const { return projection_; }
  /// Edge geometry in projected meters, oriented from u to v.
  std::span<const XY> edge_xy(EdgeIndex e) const { return edge_xy_.at(e); }

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Incidence>> adjacency_;
  std::unordered_map<std::string, NodeIndex> node_lookup_;
  std::unordered_map<std::string, EdgeIndex> edge_lookup_;
  LocalProjection projection_;
  std::vector<std::vector<XY>> edge_xy_;
};

// ---------------------------------------------------------------------------
// Loading

std::int64_t round_length_m(double meters);

/// GeoJSON FeatureCollection of LineStrings with `road_type` and optional
/// `length_m`. Endpoints closer than the 0.1 m snapping grid share a node.
RoadNetwork parse_network_geojson(std::string_view text, const RoadTypeSet& forbidden,
                                  std::string_view source_name = "<memory>");

/// Edge list `edge_id,from_node,to_node,length_m,road_type` plus node list
/// `node_id,lon,lat[,ele]`.
RoadNetwork parse_network_csv(std::string_view edges_csv, std::string_view nodes_csv,
                              const RoadTypeSet& forbidden);

/// Dispatches on extension. For `.csv` edge lists the node file defaults to
/// `nodes.csv` next to the edge file.
RoadNetwork load_network(const std::filesystem::path& source, const RoadTypeSet& forbidden,
                         const std::optional<std::filesystem::path>& nodes_csv = std::nullopt);

// ---------------------------------------------------------------------------
// Walks

/// Node/edge sequence with nodes.size() == edges.size() + 1. An empty walk
/// (no nodes) represents "no path".
struct Walk {
  std::vector<NodeIndex> nodes;
  std::vector<EdgeIndex> edges;

  bool empty() const { return nodes.empty(); }
  NodeIndex front() const { return nodes.front(); }
  NodeIndex back() const { return nodes.back(); }

  friend bool operator==(const Walk&, const Walk&) = default;
};

/// Throws DataError unless consecutive edges share the listed nodes.
void validate_walk(const RoadNetwork& net, const Walk& walk);

/// Builds a walk from a start node and an edge sequence.
Walk walk_from_edges(const RoadNetwork& net, NodeIndex start, std::span<const EdgeIndex> edges);

std::int64_t walk_length(const RoadNetwork& net, const Walk& walk);

/// Total cost of a contiguous walk.
template <typename CostFn>
auto path_cost(const RoadNetwork& net, CostFn&& cost, const Walk& walk) {
  using Cost = std::decay_t<decltype(cost(EdgeIndex{}))>;
  validate_walk(net, walk);
  Cost total{};
  for (EdgeIndex e : walk.edges) total += cost(e);
  return total;
}

// ---------------------------------------------------------------------------
// Edge classification and weightings

/// Partition of E into favored (E+) and unfavored (E-) edges by road type.
class EdgeClassification {
 public:
  EdgeClassification() = default;
  explicit EdgeClassification(RoadTypeSet favored) : favored_(std::move(favored)) {}

  bool is_favored(const RoadType& t) const { return favored_.contains(t); }
  bool is_favored(const Edge& e) const { return is_favored(e.type); }
  const RoadTypeSet& favored_types() const { return favored_; }

 private:
  RoadTypeSet favored_;
};

/// Trade-off parameter as an exact rational num/den in [0, 1].
struct Alpha {
  std::int64_t num = 1;
  std::int64_t den = 2;

  Alpha() = default;
  Alpha(std::int64_t n, std::int64_t d);

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  /// Sign of (this - 1/2).
  int compare_half() const;

  friend bool operator==(const Alpha& a, const Alpha& b) { return a.num * b.den == b.num * a.den; }
  friend bool operator<(const Alpha& a, const Alpha& b) { return a.num * b.den < b.num * a.den; }
};

struct ComponentWeights {
  std::int64_t w1 = 0;  // length on favored edges, 0 otherwise
  std::int64_t w2 = 0;  // length on unfavored edges, 0 otherwise
};

ComponentWeights component_weights(const Edge& edge, const EdgeClassification& cls);

/// w = alpha * w1 + (1 - alpha) * w2 over a fixed classification.
class Weighting {
 public:
  Weighting(Alpha alpha, EdgeClassification cls) : alpha_(alpha), cls_(std::move(cls)) {}

  const Alpha& alpha() const { return alpha_; }
  const EdgeClassification& classification() const { return cls_; }
  /// Integerization denominator: scaled weights equal scale() * w(e).
  std::int64_t scale() const { return alpha_.den; }

  double edge_weight(const Edge& e) const;
  std::int64_t scaled_edge_weight(const Edge& e) const;
  /// Scaled weight for every edge of the network, indexed by EdgeIndex.
  std::vector<std::int64_t> scaled_costs(const RoadNetwork& net) const;

 private:
  Alpha alpha_;
  EdgeClassification cls_;
};

double edge_weight(const Edge& edge, const Weighting& weighting);

/// Geometric length as an edge-cost functor.
struct LengthCost {
  const RoadNetwork* net;
  std::int64_t operator()(EdgeIndex e) const { return net->edge(e).length_m; }
};

/// Cost functor over a precomputed per-edge table.
template <typename Cost>
struct TableCost {
  std::span<const Cost> table;
  Cost operator()(EdgeIndex e) const { return table[e]; }
};

// ---------------------------------------------------------------------------
// Dijkstra

/// Resumable single-source Dijkstra. Equal-cost predecessors are resolved
/// toward the smaller predecessor node index (then smaller edge index), which
/// makes every extracted path deterministic.
template <typename Cost>
class DijkstraSearch {
 public:
  static constexpr Cost kInf = std::numeric_limits<Cost>::max();

  template <typename CostFn>
  DijkstraSearch(const RoadNetwork& net, CostFn cost, NodeIndex source)
      : net_(&net),
        cost_(std::move(cost)),
        dist_(net.num_nodes(), kInf),
        pred_node_(net.num_nodes(), kNoNode),
        pred_edge_(net.num_nodes(), kNoEdge),
        settled_(net.num_nodes(), false) {
    dist_.at(source) = Cost{};
    heap_.push({Cost{}, source});
  }

  /// Settles nodes until `target` is settled or the graph is exhausted.
  std::optional<Cost> distance_to(NodeIndex target) {
    while (!settled_[target] && step()) {
    }
    if (!settled_[target]) return std::nullopt;
    return dist_[target];
  }

  /// Settles every node whose distance is at most `limit`.
  void run_until(Cost limit) {
    while (!heap_.empty() && heap_.top().first <= limit && step()) {
    }
  }

  void run() {
    while (step()) {
    }
  }

  bool settled(NodeIndex n) const { return settled_[n]; }
  Cost tentative(NodeIndex n) const { return dist_[n]; }

  /// Walk from the source to a settled node.
  Walk path_to(NodeIndex target) const {
    Walk w;
    if (!settled_[target]) return w;
    for (NodeIndex n = target; n != kNoNode; n = pred_node_[n]) {
      w.nodes.push_back(n);
      if (pred_edge_[n] != kNoEdge) w.edges.push_back(pred_edge_[n]);
    }
    std::reverse(w.nodes.begin(), w.nodes.end());
    std::reverse(w.edges.begin(), w.edges.end());
    return w;
  }

 private:
  bool step() {
    while (!heap_.empty()) {
      const auto [d, u] = heap_.top();
      heap_.pop();
      if (settled_[u] || d != dist_[u]) continue;
      settled_[u] = true;
      for (const auto& inc : net_->incident(u)) {
        const NodeIndex v = inc.neighbor;
        if (settled_[v]) continue;
        const Cost nd = d + cost_(inc.edge);
        const bool better = nd < dist_[v];
        const bool tie = nd == dist_[v] &&
                         (u < pred_node_[v] || (u == pred_node_[v] && inc.edge < pred_edge_[v]));
        if (better || tie) {
          dist_[v] = nd;
          pred_node_[v] = u;
          pred_edge_[v] = inc.edge;
          if (better) heap_.push({nd, v});
        }
      }
      return true;
    }
    return false;
  }

  using Entry = std::pair<Cost, NodeIndex>;
  const RoadNetwork* net_;
  std::function<Cost(EdgeIndex)> cost_;
  std::vector<Cost> dist_;
  std::vector<NodeIndex> pred_node_;
  std::vector<EdgeIndex> pred_edge_;
  std::vector<bool> settled_;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap_;
};

template <typename Cost>
struct PathResult {
  bool reachable = false;
  Walk walk;
  Cost cost{};
};

/// Minimum-cost s-t path; `reachable` is false across components.
template <typename CostFn>
auto shortest_path(const RoadNetwork& net, CostFn cost, NodeIndex s, NodeIndex t) {
  using Cost = std::decay_t<decltype(cost(EdgeIndex{}))>;
  if (s >= net.num_nodes() || t >= net.num_nodes()) throw UsageError("shortest_path: node index out of range");
  DijkstraSearch<Cost> search(net, std::move(cost), s);
  PathResult<Cost> out;
  if (auto d = search.distance_to(t)) {
    out.reachable = true;
    out.cost = *d;
    out.walk = search.path_to(t);
  }
  return out;
}

}  // namespace bikepref
