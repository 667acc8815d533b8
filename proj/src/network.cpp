#include "bikepref/network.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "bikepref/csv.hpp"

namespace bikepref {

using nlohmann::json;

RoadNetwork::RoadNetwork(std::vector<Node> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), adjacency_(nodes_.size()) {
  for (NodeIndex i = 0; i < nodes_.size(); ++i) {
    if (!node_lookup_.emplace(nodes_[i].id, i).second) throw DataError("duplicate node id '" + nodes_[i].id + "'");
  }
  for (EdgeIndex i = 0; i < edges_.size(); ++i) {
    auto& e = edges_[i];
    if (e.u >= nodes_.size() || e.v >= nodes_.size()) throw DataError("edge '" + e.id + "' references a missing node");
    if (e.u == e.v) throw DataError("edge '" + e.id + "' is a self-loop");
    if (e.length_m <= 0) throw DataError("edge '" + e.id + "' has non-positive length after rounding");
    if (!edge_lookup_.emplace(e.id, i).second) throw DataError("duplicate edge id '" + e.id + "'");
    if (e.geometry.size() < 2) e.geometry = {nodes_[e.u].pos, nodes_[e.v].pos};
    adjacency_[e.u].push_back({i, e.v});
    adjacency_[e.v].push_back({i, e.u});
  }

  LonLat origin{};
  if (!nodes_.empty()) {
    for (const auto& n : nodes_) {
      origin.lon += n.pos.lon;
      origin.lat += n.pos.lat;
    }
    origin.lon /= static_cast<double>(nodes_.size());
    origin.lat /= static_cast<double>(nodes_.size());
  }
  projection_ = LocalProjection(origin);
  edge_xy_.reserve(edges_.size());
  for (const auto& e : edges_) {
    std::vector<XY> xy;
    xy.reserve(e.geometry.size());
    for (const auto& p : e.geometry) xy.push_back(projection_.project(p));
    edge_xy_.push_back(std::move(xy));
  }
}

std::optional<NodeIndex> RoadNetwork::find_node(std::string_view id) const {
  if (auto it = node_lookup_.find(std::string(id)); it != node_lookup_.end()) return it->second;
  return std::nullopt;
}

std::optional<EdgeIndex> RoadNetwork::find_edge(std::string_view id) const {
  if (auto it = edge_lookup_.find(std::string(id)); it != edge_lookup_.end()) return it->second;
  return std::nullopt;
}

RoadTypeSet RoadNetwork::road_types() const {
  RoadTypeSet out;
  for (const auto& e : edges_) out.insert(e.type);
  return out;
}

std::int64_t RoadNetwork::total_length() const {
  return std::accumulate(edges_.begin(), edges_.end(), std::int64_t{0},
                         [](std::int64_t acc, const Edge& e) { return acc + e.length_m; });
}

std::int64_t round_length_m(double meters) { return static_cast<std::int64_t>(std::floor(meters + 0.5)); }

namespace {

struct RawEdge {
  std::string id;
  std::string u;
  std::string v;
  double length = 0.0;
  RoadType type;
  std::vector<LonLat> geometry;
  bool explicit_geometry = false;
};

// Drops forbidden edges and the nodes they leave isolated, then reindexes.
RoadNetwork assemble(const std::vector<Node>& raw_nodes, std::vector<RawEdge> raw_edges,
                     const RoadTypeSet& forbidden) {
  std::unordered_map<std::string, NodeIndex> raw_lookup;
  for (NodeIndex i = 0; i < raw_nodes.size(); ++i) raw_lookup.emplace(raw_nodes[i].id, i);

  std::vector<RawEdge> kept;
  kept.reserve(raw_edges.size());
  for (auto& e : raw_edges) {
    if (forbidden.contains(e.type)) continue;
    if (!raw_lookup.contains(e.u) || !raw_lookup.contains(e.v))
      throw DataError("edge '" + e.id + "' references missing node '" + (raw_lookup.contains(e.u) ? e.v : e.u) + "'");
    kept.push_back(std::move(e));
  }

  std::vector<bool> used(raw_nodes.size(), false);
  for (const auto& e : kept) {
    used[raw_lookup[e.u]] = true;
    used[raw_lookup[e.v]] = true;
  }
  std::vector<NodeIndex> remap(raw_nodes.size(), kNoNode);
  std::vector<Node> nodes;
  for (NodeIndex i = 0; i < raw_nodes.size(); ++i) {
    if (!used[i]) continue;
    remap[i] = static_cast<NodeIndex>(nodes.size());
    nodes.push_back(raw_nodes[i]);
  }

  std::vector<Edge> edges;
  edges.reserve(kept.size());
  for (auto& r : kept) {
    Edge e;
    e.id = std::move(r.id);
    e.u = remap[raw_lookup[r.u]];
    e.v = remap[raw_lookup[r.v]];
    e.length_m = round_length_m(r.length);
    e.type = r.type;
    e.geometry = std::move(r.geometry);
    e.explicit_geometry = r.explicit_geometry;
    edges.push_back(std::move(e));
  }
  return RoadNetwork(std::move(nodes), std::move(edges));
}

std::int64_t snap_key_component(double meters) { return static_cast<std::int64_t>(std::llround(meters * 10.0)); }

}  // namespace

RoadNetwork parse_network_geojson(std::string_view text, const RoadTypeSet& forbidden, std::string_view source_name) {
  const std::string src(source_name);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(src + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
    throw DataError(src + ": expected a GeoJSON FeatureCollection");

  std::vector<Node> nodes;
  std::map<std::pair<std::int64_t, std::int64_t>, std::string> snapped;
  auto node_for = [&](const json& coord) -> std::string {
    if (!coord.is_array() || coord.size() < 2) throw DataError(src + ": malformed coordinate");
    const LonLat p{coord[0].get<double>(), coord[1].get<double>()};
    const double y = p.lat * M_PI / 180.0 * kEarthRadiusM;
    const double x = p.lon * M_PI / 180.0 * kEarthRadiusM * std::cos(p.lat * M_PI / 180.0);
    const auto key = std::make_pair(snap_key_component(x), snap_key_component(y));
    if (auto it = snapped.find(key); it != snapped.end()) return it->second;
    Node n;
    n.id = "n" + std::to_string(nodes.size());
    n.pos = p;
    if (coord.size() >= 3 && coord[2].is_number()) n.elevation = coord[2].get<double>();
    nodes.push_back(n);
    snapped.emplace(key, n.id);
    return n.id;
  };

  std::vector<RawEdge> edges;
  const auto& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    const auto& geom = f.contains("geometry") ? f["geometry"] : json();
    if (!geom.is_object() || geom.value("type", "") != "LineString")
      throw DataError(src + ": feature " + std::to_string(i) + " is not a LineString");
    const auto& coords = geom["coordinates"];
    if (!coords.is_array() || coords.size() < 2)
      throw DataError(src + ": feature " + std::to_string(i) + " has fewer than two coordinates");
    const json props = f.contains("properties") && f["properties"].is_object() ? f["properties"] : json::object();

    RawEdge e;
    if (props.contains("id")) {
      e.id = props["id"].is_string() ? props["id"].get<std::string>() : props["id"].dump();
    } else if (f.contains("id")) {
      e.id = f["id"].is_string() ? f["id"].get<std::string>() : f["id"].dump();
    } else {
      e.id = "e" + std::to_string(i);
    }
    e.type = RoadType(props.contains("road_type") && props["road_type"].is_string()
                          ? props["road_type"].get<std::string>()
                          : std::string("unknown"));
    for (const auto& c : coords) {
      if (!c.is_array() || c.size() < 2) throw DataError(src + ": edge '" + e.id + "' has a malformed coordinate");
      e.geometry.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    e.explicit_geometry = true;
    if (forbidden.contains(e.type)) continue;

    e.u = node_for(coords.front());
    e.v = node_for(coords.back());
    const double geodesic = polyline_length_m(e.geometry);
    if (props.contains("length_m") && props["length_m"].is_number()) {
      e.length = props["length_m"].get<double>();
      // Rounding to whole meters may add up to half a meter on short edges.
      if (std::abs(e.length - geodesic) > 0.01 * geodesic + 0.5)
        throw DataError(src + ": edge '" + e.id + "' length_m disagrees with its geometry by more than 1%");
    } else {
      e.length = geodesic;
    }
    edges.push_back(std::move(e));
  }
  return assemble(nodes, std::move(edges), forbidden);
}

RoadNetwork parse_network_csv(std::string_view edges_csv, std::string_view nodes_csv, const RoadTypeSet& forbidden) {
  const auto nt = csv::Table::parse(nodes_csv, "nodes.csv");
  const auto c_id = nt.require_column("node_id");
  const auto c_lon = nt.require_column("lon");
  const auto c_lat = nt.require_column("lat");
  const auto c_ele = nt.column("ele");
  std::vector<Node> nodes;
  nodes.reserve(nt.size());
  for (std::size_t i = 0; i < nt.size(); ++i) {
    Node n;
    n.id = std::string(nt.get(i, c_id));
    n.pos = {nt.get_double(i, c_lon), nt.get_double(i, c_lat)};
    if (c_ele && !nt.get(i, *c_ele).empty()) n.elevation = nt.get_double(i, *c_ele);
    nodes.push_back(std::move(n));
  }

  const auto et = csv::Table::parse(edges_csv, "edges.csv");
  const auto e_id = et.require_column("edge_id");
  const auto e_from = et.require_column("from_node");
  const auto e_to = et.require_column("to_node");
  const auto e_len = et.require_column("length_m");
  const auto e_type = et.require_column("road_type");
  std::vector<RawEdge> edges;
  edges.reserve(et.size());
  for (std::size_t i = 0; i < et.size(); ++i) {
    RawEdge e;
    e.id = std::string(et.get(i, e_id));
    e.u = std::string(et.get(i, e_from));
    e.v = std::string(et.get(i, e_to));
    e.length = et.get_double(i, e_len);
    e.type = RoadType(et.get(i, e_type));
    edges.push_back(std::move(e));
  }
  return assemble(nodes, std::move(edges), forbidden);
}

RoadNetwork load_network(const std::filesystem::path& source, const RoadTypeSet& forbidden,
                         const std::optional<std::filesystem::path>& nodes_csv) {
  const auto ext = source.extension().string();
  if (ext == ".csv") {
    const auto nodes_path = nodes_csv.value_or(source.parent_path() / "nodes.csv");
    return parse_network_csv(csv::read_file(source), csv::read_file(nodes_path), forbidden);
  }
  return parse_network_geojson(csv::read_file(source), forbidden, source.string());
}

void validate_walk(const RoadNetwork& net, const Walk& walk) {
  if (walk.nodes.empty()) {
    if (!walk.edges.empty()) throw DataError("walk has edges but no nodes");
    return;
  }
  if (walk.nodes.size() != walk.edges.size() + 1) throw DataError("walk node/edge counts are inconsistent");
  for (std::size_t i = 0; i < walk.edges.size(); ++i) {
    if (walk.edges[i] >= net.num_edges()) throw DataError("walk references an unknown edge");
    const auto& e = net.edge(walk.edges[i]);
    const NodeIndex a = walk.nodes[i];
    const NodeIndex b = walk.nodes[i + 1];
    if (!((e.u == a && e.v == b) || (e.u == b && e.v == a))) {
      std::ostringstream msg;
      msg << "walk is not contiguous at edge position " << i << " ('" << e.id << "')";
      throw DataError(msg.str());
    }
  }
}

Walk walk_from_edges(const RoadNetwork& net, NodeIndex start, std::span<const EdgeIndex> edges) {
  Walk w;
  w.nodes.push_back(start);
  NodeIndex cur = start;
  for (EdgeIndex e : edges) {
    const auto& edge = net.edge(e);
    if (edge.u != cur && edge.v != cur) throw DataError("edge sequence is not contiguous at edge '" + edge.id + "'");
    cur = edge.other(cur);
    w.nodes.push_back(cur);
    w.edges.push_back(e);
  }
  return w;
}

std::int64_t walk_length(const RoadNetwork& net, const Walk& walk) {
  std::int64_t total = 0;
  for (EdgeIndex e : walk.edges) total += net.edge(e).length_m;
  return total;
}

Alpha::Alpha(std::int64_t n, std::int64_t d) : num(n), den(d) {
  if (d <= 0 || n < 0 || n > d) throw UsageError("alpha must be a fraction in [0, 1]");
}

int Alpha::compare_half() const {
  const auto twice = 2 * num;
  return twice < den ? -1 : (twice > den ? 1 : 0);
}

ComponentWeights component_weights(const Edge& edge, const EdgeClassification& cls) {
  if (cls.is_favored(edge)) return {edge.length_m, 0};
  return {0, edge.length_m};
}

double Weighting::edge_weight(const Edge& e) const {
  const auto [w1, w2] = component_weights(e, cls_);
  const double a = alpha_.value();
  return a * static_cast<double>(w1) + (1.0 - a) * static_cast<double>(w2);
}

std::int64_t Weighting::scaled_edge_weight(const Edge& e) const {
  const auto [w1, w2] = component_weights(e, cls_);
  return alpha_.num * w1 + (alpha_.den - alpha_.num) * w2;
}

std::vector<std::int64_t> Weighting::scaled_costs(const RoadNetwork& net) const {
  std::vector<std::int64_t> out;
  out.reserve(net.num_edges());
  for (const auto& e : net.edges()) out.push_back(scaled_edge_weight(e));
  return out;
}

double edge_weight(const Edge& edge, const Weighting& weighting) { return weighting.edge_weight(edge); }

}  // namespace bikepref
