#include "bikepref/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "bikepref/csv.hpp"

namespace bikepref {

using nlohmann::json;

std::vector<std::string> LandUseMap::categories() const {
  std::set<std::string> cats;
  for (const auto& p : polygons) cats.insert(p.category);
  return {cats.begin(), cats.end()};
}

namespace {

std::vector<LonLat> parse_ring(const json& ring, const std::string& where) {
  if (!ring.is_array() || ring.size() < 4) throw DataError(where + ": polygon ring needs at least 4 positions");
  std::vector<LonLat> out;
  out.reserve(ring.size());
  for (const auto& c : ring) {
    if (!c.is_array() || c.size() < 2) throw DataError(where + ": malformed coordinate");
    out.push_back({c[0].get<double>(), c[1].get<double>()});
  }
  if (!(out.front() == out.back())) throw DataError(where + ": polygon ring is not closed");
  return out;
}

}  // namespace

LandUseMap parse_landuse_geojson(std::string_view text, std::string_view source_name) {
  const std::string src(source_name);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(src + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
    throw DataError(src + ": expected a GeoJSON FeatureCollection");

  LandUseMap out;
  const auto& features = doc["features"];
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    const std::string where = src + ": feature " + std::to_string(i);
    std::string category;
    if (f.contains("properties") && f["properties"].is_object() && f["properties"].contains("category") &&
        f["properties"]["category"].is_string())
      category = f["properties"]["category"].get<std::string>();
    if (category.empty()) throw DataError(where + ": missing category");
    const auto& geom = f.contains("geometry") ? f["geometry"] : json();
    const std::string type = geom.is_object() ? geom.value("type", "") : "";
    std::vector<json> polys;
    if (type == "Polygon") {
      polys.push_back(geom["coordinates"]);
    } else if (type == "MultiPolygon") {
      for (const auto& p : geom["coordinates"]) polys.push_back(p);
    } else {
      throw DataError(where + ": geometry must be a Polygon or MultiPolygon");
    }
    for (const auto& poly : polys) {
      if (!poly.is_array() || poly.empty()) throw DataError(where + ": empty polygon");
      LandUsePolygon p;
      p.category = category;
      for (const auto& ring : poly) p.rings.push_back(parse_ring(ring, where));
      out.polygons.push_back(std::move(p));
    }
  }
  return out;
}

LandUseMap load_landuse(const std::filesystem::path& path) {
  return parse_landuse_geojson(csv::read_file(path), path.string());
}

std::map<std::string, double> landuse_shares(const Trajectory& traj, const LandUseMap& landuse, double buffer_radius,
                                             double sample_step) {
  if (buffer_radius < 0.0 || sample_step <= 0.0) throw UsageError("landuse_shares: invalid buffer or sample step");
  std::map<std::string, double> out;
  for (const auto& c : landuse.categories()) out[c] = 0.0;
  if (landuse.polygons.empty() || traj.points.empty()) return out;

  const LocalProjection proj(traj.points.front().pos);
  std::vector<XY> line;
  line.reserve(traj.points.size());
  for (const auto& p : traj.points) line.push_back(proj.project(p.pos));
  const auto samples = sample_polyline(line, sample_step);

  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  for (const auto& s : samples) {
    min_x = std::min(min_x, s.x);
    min_y = std::min(min_y, s.y);
    max_x = std::max(max_x, s.x);
    max_y = std::max(max_y, s.y);
  }

  std::map<std::string, std::vector<bool>> hit;
  for (const auto& c : landuse.categories()) hit[c].assign(samples.size(), false);

  for (const auto& poly : landuse.polygons) {
    std::vector<std::vector<XY>> rings;
    double px0 = std::numeric_limits<double>::infinity(), py0 = px0, px1 = -px0, py1 = -px0;
    for (const auto& ring : poly.rings) {
      std::vector<XY> r;
      r.reserve(ring.size());
      for (const auto& p : ring) {
        const auto q = proj.project(p);
        px0 = std::min(px0, q.x);
        py0 = std::min(py0, q.y);
        px1 = std::max(px1, q.x);
        py1 = std::max(py1, q.y);
        r.push_back(q);
      }
      rings.push_back(std::move(r));
    }
    if (px0 - buffer_radius > max_x || px1 + buffer_radius < min_x || py0 - buffer_radius > max_y ||
        py1 + buffer_radius < min_y)
      continue;

    auto& flags = hit[poly.category];
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (flags[i]) continue;
      const auto& s = samples[i];
      bool inside = point_in_ring(s, rings.front());
      for (std::size_t h = 1; inside && h < rings.size(); ++h)
        if (point_in_ring(s, rings[h])) inside = false;
      if (!inside) {
        for (const auto& r : rings) {
          if (distance_to_ring(s, r) <= buffer_radius) {
            inside = true;
            break;
          }
        }
      }
      flags[i] = inside;
    }
  }

  for (auto& [cat, flags] : hit) {
    const auto n = std::count(flags.begin(), flags.end(), true);
    out[cat] = samples.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(samples.size());
  }
  return out;
}

ElevationStats elevation_stats(std::span<const double> series) {
  ElevationStats s;
  if (series.empty()) return s;
  for (std::size_t i = 1; i < series.size(); ++i) {
    const double d = series[i] - series[i - 1];
    if (d > 0) s.climb += d;
    else s.descent -= d;
  }
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  s.range = *hi - *lo;
  return s;
}

FeatureVector extract_features(const Trajectory& traj, const MatchedPath& matched, const RoadNetwork& net,
                               const LandUseMap& landuse, const FeatureParams& params) {
  FeatureVector fv;
  fv.trajectory_id = traj.id;
  fv.total_length = static_cast<double>(matched.matched_length);

  std::vector<double> elevations;
  for (const auto& p : traj.points)
    if (p.elevation) elevations.push_back(*p.elevation);
  if (elevations.size() < 2) {
    elevations.clear();
    bool complete = true;
    for (NodeIndex n : matched.walk.nodes) {
      if (!net.node(n).elevation) {
        complete = false;
        break;
      }
      elevations.push_back(*net.node(n).elevation);
    }
    if (!complete) elevations.clear();
  }
  if (elevations.size() >= 2) {
    const auto es = elevation_stats(elevations);
    fv.climb = es.climb;
    fv.descent = es.descent;
    fv.altitude_range = es.range;
  } else {
    fv.elevation_missing = true;
    fv.climb = fv.descent = fv.altitude_range = std::numeric_limits<double>::quiet_NaN();
  }

  const double gap = haversine_m(traj.points.front().pos, traj.points.back().pos);
  fv.is_circular = gap < std::max(params.circular_min_gap, params.circular_length_fraction * fv.total_length);

  const NodeIndex s = matched.walk.front();
  const NodeIndex t = matched.walk.back();
  if (s == t) {
    fv.reference_degenerate = true;
    fv.detour_difference = fv.total_length;
    fv.detour_factor = std::min(fv.total_length / 1.0, params.detour_factor_cap);
  } else {
    const auto ref = shortest_path(net, LengthCost{&net}, s, t);
    const double shortest = static_cast<double>(ref.cost);
    fv.detour_difference = fv.total_length - shortest;
    fv.detour_factor = fv.total_length / shortest;
  }

  const auto by_type = length_by_type(matched, net);
  const double total = std::accumulate(by_type.begin(), by_type.end(), 0.0,
                                       [](double acc, const auto& kv) { return acc + kv.second; });
  for (const auto& [type, len] : by_type) fv.road_type_shares[type] = total > 0.0 ? len / total : 0.0;

  fv.landuse_shares = landuse_shares(traj, landuse, params.buffer_radius, params.sample_step);

  if (!matched.snap_distances.empty()) {
    fv.snap_mean = std::accumulate(matched.snap_distances.begin(), matched.snap_distances.end(), 0.0) /
                   static_cast<double>(matched.snap_distances.size());
    fv.snap_max = *std::max_element(matched.snap_distances.begin(), matched.snap_distances.end());
  }
  return fv;
}

std::size_t FeatureMatrix::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw UsageError("unknown feature '" + std::string(name) + "'");
}

FeatureMatrix build_feature_matrix(std::span<const FeatureVector> features) {
  std::set<RoadType> types;
  std::set<std::string> cats;
  for (const auto& f : features) {
    for (const auto& [t, _] : f.road_type_shares) types.insert(t);
    for (const auto& [c, _] : f.landuse_shares) cats.insert(c);
  }

  FeatureMatrix fm;
  fm.names = {"total_length", "climb", "descent", "altitude_range", "elevation_missing",
              "is_circular", "detour_difference", "detour_factor"};
  for (const auto& t : types) fm.names.push_back("road:" + t.str());
  for (const auto& c : cats) fm.names.push_back("landuse:" + c);
  fm.names.push_back("snap_mean");
  fm.names.push_back("snap_max");

  fm.values = Matrix(features.size(), fm.names.size());
  for (std::size_t r = 0; r < features.size(); ++r) {
    const auto& f = features[r];
    fm.ids.push_back(f.trajectory_id);
    std::size_t c = 0;
    auto row = fm.values.row(r);
    row[c++] = f.total_length;
    row[c++] = f.climb;
    row[c++] = f.descent;
    row[c++] = f.altitude_range;
    row[c++] = f.elevation_missing ? 1.0 : 0.0;
    row[c++] = f.is_circular ? 1.0 : 0.0;
    row[c++] = f.detour_difference;
    row[c++] = f.detour_factor;
    for (const auto& t : types) {
      const auto it = f.road_type_shares.find(t);
      row[c++] = it == f.road_type_shares.end() ? 0.0 : it->second;
    }
    for (const auto& cat : cats) {
      const auto it = f.landuse_shares.find(cat);
      row[c++] = it == f.landuse_shares.end() ? 0.0 : it->second;
    }
    row[c++] = f.snap_mean;
    row[c++] = f.snap_max;
  }

  for (std::size_t c = 1; c <= 3; ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < fm.values.rows(); ++r) {
      if (!std::isnan(fm.values(r, c))) {
        sum += fm.values(r, c);
        ++n;
      }
    }
    const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
    for (std::size_t r = 0; r < fm.values.rows(); ++r)
      if (std::isnan(fm.values(r, c))) fm.values(r, c) = mean;
  }
  return fm;
}

Normalization znormalize(const Matrix& x) {
  if (x.rows() < 2) throw UsageError("znormalize needs at least 2 rows");
  Normalization out;
  out.values = Matrix(x.rows(), x.cols());
  out.mean.assign(x.cols(), 0.0);
  out.stddev.assign(x.cols(), 0.0);
  out.zero_variance.assign(x.cols(), false);
  const auto n = static_cast<double>(x.rows());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
    const double sd = std::sqrt(var / n);
    out.mean[c] = mean;
    out.stddev[c] = sd;
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      out.zero_variance[c] = true;
      continue;
    }
    for (std::size_t r = 0; r < x.rows(); ++r) out.values(r, c) = (x(r, c) - mean) / sd;
  }
  return out;
}

}  // namespace bikepref
