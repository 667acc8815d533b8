// Writes the shipped sample dataset: a jittered grid network, a land-use
// layer and 12 GPX tracks in three rider groups, each planted as minimum-cost
// routes under its own favored types and trade-off.
//
//   make_sample <out-dir>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "bikepref/synthetic.hpp"

using namespace bikepref;
namespace fs = std::filesystem;

namespace {

struct GroupSpec {
  std::string activity;
  RoadTypeSet favored;
  Alpha alpha;
  double min_separation_m;
  double relief_m;  // elevation amplitude
  double x_lo, x_hi, y_lo, y_hi;  // every node of a route lies in this bounding-box window
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

std::string fmt(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

std::string network_geojson(const RoadNetwork& net) {
  nlohmann::ordered_json fc = {{"type", "FeatureCollection"}, {"features", nlohmann::ordered_json::array()}};
  for (const auto& e : net.edges()) {
    nlohmann::ordered_json coords = nlohmann::ordered_json::array();
    for (const auto& p : e.geometry) coords.push_back({std::round(p.lon * 1e7) / 1e7, std::round(p.lat * 1e7) / 1e7});
    fc["features"].push_back({{"type", "Feature"},
                              {"properties", {{"id", e.id}, {"road_type", e.type.str()}, {"length_m", e.length_m}}},
                              {"geometry", {{"type", "LineString"}, {"coordinates", coords}}}});
  }
  return fc.dump(1) + "\n";
}

/// Rectangles in fractions of the network's bounding box.
std::string landuse_geojson(const RoadNetwork& net) {
  const auto& proj = net.projection();
  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  for (const auto& n : net.nodes()) {
    const auto p = proj.project(n.pos);
    min_x = std::min(min_x, p.x), max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y), max_y = std::max(max_y, p.y);
  }
  const auto at = [&](double fx, double fy) { return std::pair{min_x + fx * (max_x - min_x), min_y + fy * (max_y - min_y)}; };
  const auto ring = [&](std::pair<double, double> lo, std::pair<double, double> hi) {
    const auto [x0, y0] = lo;
    const auto [x1, y1] = hi;
    nlohmann::ordered_json r = nlohmann::ordered_json::array();
    for (auto [x, y] : std::vector<std::pair<double, double>>{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}) {
      const auto p = proj.unproject({x, y});
      r.push_back({std::round(p.lon * 1e7) / 1e7, std::round(p.lat * 1e7) / 1e7});
    }
    return r;
  };
  nlohmann::ordered_json fc = {{"type", "FeatureCollection"}, {"features", nlohmann::ordered_json::array()}};
  const auto add = [&](const std::string& cat, nlohmann::ordered_json r) {
    fc["features"].push_back({{"type", "Feature"},
                              {"properties", {{"category", cat}}},
                              {"geometry", {{"type", "Polygon"}, {"coordinates", {r}}}}});
  };
  add("forest", ring(at(-0.05, -0.05), at(0.45, 1.05)));
  add("residential", ring(at(0.55, 0.45), at(1.05, 1.05)));
  add("farmland", ring(at(0.55, -0.05), at(1.05, 0.35)));
  return fc.dump(1) + "\n";
}

std::string gpx(const Trajectory& t, const std::string& type) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
                  "<gpx version=\"1.1\" creator=\"make_sample\" xmlns=\"http://www.topografix.com/GPX/1/1\">\n"
                  "  <trk>\n    <name>" + t.id + "</name>\n    <type>" + type + "</type>\n    <trkseg>\n";
  for (const auto& p : t.points) {
    s += "      <trkpt lat=\"" + fmt(p.pos.lat, 7) + "\" lon=\"" + fmt(p.pos.lon, 7) + "\">";
    if (p.elevation) s += "<ele>" + fmt(*p.elevation, 1) + "</ele>";
    s += "</trkpt>\n";
  }
  return s + "    </trkseg>\n  </trk>\n</gpx>\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_sample <out-dir>\n";
    return 1;
  }
  const fs::path dir = argv[1];
  fs::create_directories(dir / "trajectories");

  synthetic::GridSpec spec;
  spec.rows = spec.cols = 12;
  spec.types = {RoadType("cycleway"), RoadType("residential"), RoadType("track_grade3"), RoadType("secondary")};
  spec.seed = 2021;
  const auto net = synthetic::make_grid_network(spec);
  write_text(dir / "network.geojson", network_geojson(net));
  write_text(dir / "landuse.geojson", landuse_geojson(net));

  const std::vector<GroupSpec> groups{
      {"mountainbiking", {RoadType("track_grade3")}, Alpha(3, 20), 400.0, 40.0, 0.0, 0.45, 0.0, 1.0},
      {"racingbiking", {RoadType("secondary")}, Alpha(3, 20), 1000.0, 4.0, 0.0, 1.0, 0.0, 1.0},
      {"biking", {RoadType("cycleway")}, Alpha(1, 5), 300.0, 0.0, 0.55, 1.0, 0.45, 1.0},
  };

  double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
  for (const auto& n : net.nodes()) {
    const auto p = net.projection().project(n.pos);
    min_x = std::min(min_x, p.x), max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y), max_y = std::max(max_y, p.y);
  }
  const auto frac = [&](LonLat pos) {
    const auto p = net.projection().project(pos);
    return std::pair{(p.x - min_x) / (max_x - min_x), (p.y - min_y) / (max_y - min_y)};
  };

  std::string activities = "trajectory_id,activity\n";
  std::uint64_t seed = 7;
  for (const auto& g : groups) {
    const Weighting w(g.alpha, EdgeClassification(g.favored));
    const auto costs = w.scaled_costs(net);
    // Keep candidates inside the group's window that mostly use favored roads.
    std::vector<Walk> routes;
    for (const auto& r : synthetic::planted_routes(net, costs, 2000, seed++, g.min_separation_m)) {
      bool inside = true;
      for (auto n : r.nodes) {
        const auto [fx, fy] = frac(net.node(n).pos);
        inside = inside && fx >= g.x_lo && fx <= g.x_hi && fy >= g.y_lo && fy <= g.y_hi;
      }
      double fav = 0;
      for (auto e : r.edges)
        if (g.favored.contains(net.edge(e).type)) fav += static_cast<double>(net.edge(e).length_m);
      if (inside && fav >= 0.5 * static_cast<double>(walk_length(net, r))) routes.push_back(r);
      if (routes.size() == 4) break;
    }
    if (routes.size() < 4) throw std::runtime_error("not enough routes for " + g.activity);
    for (std::size_t i = 0; i < routes.size(); ++i) {
      const std::string id = g.activity.substr(0, 3) + "_" + std::to_string(i + 1);
      auto t = synthetic::sample_trajectory(net, routes[i], id, 20.0, 3.0, seed++);
      for (auto& p : t.points) {
        const auto xy = net.projection().project(p.pos);
        p.elevation = 120.0 + g.relief_m * std::sin(xy.x / 90.0) * std::cos(xy.y / 110.0);
      }
      write_text(dir / "trajectories" / (id + ".gpx"), gpx(t, g.activity));
      activities += id + "," + g.activity + "\n";
    }
  }
  write_text(dir / "activities.csv", activities);
  write_text(dir / "config.toml",
             "# Sample pipeline configuration; paths are relative to this file.\n"
             "network = \"network.geojson\"\n"
             "landuse = \"landuse.geojson\"\n"
             "trajectories = [\"trajectories\"]\n"
             "activities = \"activities.csv\"\n"
             "k = 3\n"
             "restarts = 20\n"
             "seed = 1\n"
             "max_snap_distance = 30\n"
             "sigma_gps = 10\n"
             "alpha_grid = \"200:20:180\"\n");
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}
