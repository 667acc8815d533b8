#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "bikepref/csv.hpp"
#include "bikepref/matching.hpp"

namespace bikepref {

namespace pt = boost::property_tree;

std::string normalize_activity(std::string_view tag) {
  std::string s;
  for (char c : tag)
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  const auto has = [&](std::string_view w) { return s.find(w) != std::string::npos; };
  const bool cycling = has("bik") || has("cycl") || has("bicycle");
  if (s == "mtb" || (has("mountain") && cycling)) return "mountainbiking";
  if ((has("racing") || has("road")) && cycling) return "racingbiking";
  if (cycling) return "biking";
  return "other";
}

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::optional<double> parse_iso8601(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%lf%n", &y, &mo, &d, &h, &mi, &sec, &consumed) != 6) return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || d > 31) return std::nullopt;
  double offset = 0.0;
  const std::string rest = s.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest != "Z") {
    int oh = 0, om = 0;
    char sign = 0;
    if (std::sscanf(rest.c_str(), "%c%d:%d", &sign, &oh, &om) != 3 || (sign != '+' && sign != '-')) return std::nullopt;
    offset = (sign == '+' ? 1.0 : -1.0) * (oh * 3600.0 + om * 60.0);
  }
  const auto days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  return static_cast<double>(days) * 86400.0 + h * 3600.0 + mi * 60.0 + sec - offset;
}

// Collapses repeated positions and checks the remaining invariants. Returns
// a warning when the trajectory has to be skipped.
std::optional<std::string> finalize(Trajectory& t) {
  std::vector<TrackPoint> pts;
  pts.reserve(t.points.size());
  for (auto& p : t.points)
    if (pts.empty() || !(pts.back().pos == p.pos)) pts.push_back(p);
  t.points = std::move(pts);
  if (t.points.size() < 2) return "trajectory '" + t.id + "' has fewer than 2 distinct points; skipped";
  for (std::size_t i = 1; i < t.points.size(); ++i) {
    const auto& a = t.points[i - 1].time;
    const auto& b = t.points[i].time;
    if (a && b && *b < *a) return "trajectory '" + t.id + "' has decreasing timestamps; skipped";
  }
  return std::nullopt;
}

std::optional<double> child_double(const pt::ptree& node, const char* name) {
  if (auto v = node.get_optional<std::string>(name)) {
    try {
      return std::stod(*v);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

TrajectoryLoad parse_gpx(std::string_view text, std::string_view source_name) {
  const std::string src(source_name);
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw DataError(src + ": invalid GPX: " + e.what());
  }
  const auto gpx = tree.get_child_optional("gpx");
  if (!gpx) throw DataError(src + ": missing <gpx> root element");

  std::string stem = std::filesystem::path(src).stem().string();
  std::size_t n_tracks = 0;
  for (const auto& [name, _] : *gpx)
    if (name == "trk") ++n_tracks;

  TrajectoryLoad out;
  std::size_t k = 0;
  for (const auto& [name, trk] : *gpx) {
    if (name != "trk") continue;
    ++k;
    Trajectory t;
    t.id = n_tracks > 1 ? stem + "-" + std::to_string(k) : stem;
    if (auto type = trk.get_optional<std::string>("type")) t.declared_activity = normalize_activity(*type);
    if (auto ext = trk.get_child_optional("extensions")) {
      t.metadata.total_length = child_double(*ext, "length");
      t.metadata.climb = child_double(*ext, "climb");
      t.metadata.descent = child_double(*ext, "descent");
    }
    for (const auto& [seg_name, seg] : trk) {
      if (seg_name != "trkseg") continue;
      for (const auto& [pt_name, p] : seg) {
        if (pt_name != "trkpt") continue;
        TrackPoint tp;
        try {
          tp.pos.lat = std::stod(p.get<std::string>("<xmlattr>.lat"));
          tp.pos.lon = std::stod(p.get<std::string>("<xmlattr>.lon"));
        } catch (const std::exception&) {
          throw DataError(src + ": track '" + t.id + "' has a trkpt with malformed lat/lon");
        }
        tp.elevation = child_double(p, "ele");
        if (auto time = p.get_optional<std::string>("time")) {
          tp.time = parse_iso8601(*time);
          if (!tp.time) throw DataError(src + ": track '" + t.id + "' has malformed <time> '" + *time + "'");
        }
        t.points.push_back(tp);
      }
    }
    if (auto warn = finalize(t)) {
      out.warnings.push_back(src + ": " + *warn);
      continue;
    }
    out.trajectories.push_back(std::move(t));
  }
  return out;
}

TrajectoryLoad parse_trajectory_csv(std::string_view text, std::string_view source_name) {
  const auto table = csv::Table::parse(text, std::string(source_name));
  const auto c_id = table.require_column("trajectory_id");
  const auto c_seq = table.require_column("seq");
  const auto c_lon = table.require_column("lon");
  const auto c_lat = table.require_column("lat");
  const auto c_ele = table.column("ele");
  const auto c_time = table.column("time");

  struct Row {
    double seq;
    TrackPoint p;
  };
  std::map<std::string, std::vector<Row>> by_id;
  for (std::size_t i = 0; i < table.size(); ++i) {
    Row r;
    r.seq = table.get_double(i, c_seq);
    r.p.pos = {table.get_double(i, c_lon), table.get_double(i, c_lat)};
    if (c_ele && !table.get(i, *c_ele).empty()) r.p.elevation = table.get_double(i, *c_ele);
    if (c_time && !table.get(i, *c_time).empty()) {
      const std::string raw(table.get(i, *c_time));
      r.p.time = parse_iso8601(raw);
      if (!r.p.time) r.p.time = table.get_double(i, *c_time);
    }
    by_id[std::string(table.get(i, c_id))].push_back(r);
  }

  TrajectoryLoad out;
  for (auto& [id, rows] : by_id) {
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.seq < b.seq; });
    Trajectory t;
    t.id = id;
    for (const auto& r : rows) t.points.push_back(r.p);
    if (auto warn = finalize(t)) {
      out.warnings.push_back(std::string(source_name) + ": " + *warn);
      continue;
    }
    out.trajectories.push_back(std::move(t));
  }
  return out;
}

std::map<std::string, std::string> parse_activity_csv(std::string_view text, std::string_view source_name) {
  const auto table = csv::Table::parse(text, std::string(source_name));
  const auto c_id = table.require_column("trajectory_id");
  const auto c_act = table.require_column("activity");
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < table.size(); ++i)
    out[std::string(table.get(i, c_id))] = normalize_activity(table.get(i, c_act));
  return out;
}

TrajectoryLoad load_trajectories(std::span<const std::filesystem::path> sources,
                                 const std::optional<std::filesystem::path>& activities_csv) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& s : sources) {
    if (fs::is_directory(s)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(s)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext != ".gpx" && ext != ".csv") continue;
        if (activities_csv && fs::equivalent(entry.path(), *activities_csv)) continue;
        found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(s)) {
      files.push_back(s);
    } else {
      throw DataError("trajectory source not found: " + s.string());
    }
  }

  TrajectoryLoad out;
  std::set<std::string> seen;
  for (const auto& f : files) {
    const auto text = csv::read_file(f);
    auto part = f.extension() == ".gpx" ? parse_gpx(text, f.string()) : parse_trajectory_csv(text, f.string());
    for (auto& t : part.trajectories) {
      if (!seen.insert(t.id).second) throw DataError(f.string() + ": duplicate trajectory id '" + t.id + "'");
      out.trajectories.push_back(std::move(t));
    }
    out.warnings.insert(out.warnings.end(), part.warnings.begin(), part.warnings.end());
  }

  if (activities_csv) {
    const auto labels = parse_activity_csv(csv::read_file(*activities_csv), activities_csv->string());
    for (auto& t : out.trajectories)
      if (auto it = labels.find(t.id); it != labels.end()) t.declared_activity = it->second;
  }
  std::sort(out.trajectories.begin(), out.trajectories.end(),
            [](const Trajectory& a, const Trajectory& b) { return a.id < b.id; });
  return out;
}

}  // namespace bikepref
