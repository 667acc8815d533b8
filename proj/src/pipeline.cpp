#include "bikepref/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "bikepref/csv.hpp"
#include "bikepref/errors.hpp"

namespace bikepref::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) return s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_list(std::string_view v) {
  std::string s = trim(v);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(trim(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  const std::string s = trim(value);
  std::size_t used = 0;
  T out{};
  try {
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(s, &used));
    } else {
      if (!s.empty() && s.front() == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(s, &used));
    }
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw UsageError("option '" + std::string(key) + "': invalid number '" + s + "'");
  return out;
}

fs::path resolve(std::string_view value, const fs::path& base) {
  fs::path p(unquote(trim(value)));
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

std::string join(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

std::vector<std::string> type_names(const RoadTypeSet& types) {
  std::vector<std::string> out;
  for (const auto& t : types) out.push_back(t.str());
  return out;
}

/// First line of a CSV output, or the config_hash key of a JSON output.
std::optional<std::string> stamped_hash(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  std::getline(in, line);
  if (path.extension() == ".csv") {
    const auto k = line.find("config_hash=");
    if (k == std::string::npos) return std::nullopt;
    const auto b = k + 12;
    return line.substr(b, line.find(' ', b) - b);
  }
  try {
    in.seekg(0);
    const auto j = json::parse(in);
    if (j.contains("config_hash")) return j["config_hash"].get<std::string>();
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(csv::read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

json line_geometry(std::span<const LonLat> pts) {
  json coords = json::array();
  for (const auto& p : pts) coords.push_back({p.lon, p.lat});
  return {{"type", "LineString"}, {"coordinates", coords}};
}

std::vector<LonLat> walk_geometry(const RoadNetwork& net, const Walk& walk) {
  std::vector<LonLat> pts;
  if (walk.empty()) return pts;
  pts.push_back(net.node(walk.front()).pos);
  for (std::size_t i = 0; i < walk.edges.size(); ++i) {
    const auto& e = net.edge(walk.edges[i]);
    std::vector<LonLat> g = e.geometry;
    if (walk.nodes[i] != e.u) std::reverse(g.begin(), g.end());
    pts.insert(pts.end(), g.begin() + 1, g.end());
  }
  return pts;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void set_option(PipelineConfig& cfg, std::string_view key, std::string_view value, const fs::path& base_dir) {
  const std::string k = trim(key);
  const std::string v = unquote(trim(value));
  if (k == "network") {
    cfg.network = resolve(v, base_dir);
  } else if (k == "nodes") {
    cfg.nodes = v.empty() ? std::nullopt : std::optional(resolve(v, base_dir));
  } else if (k == "landuse") {
    cfg.landuse = v.empty() ? std::nullopt : std::optional(resolve(v, base_dir));
  } else if (k == "activities") {
    cfg.activities = v.empty() ? std::nullopt : std::optional(resolve(v, base_dir));
  } else if (k == "trajectories") {
    cfg.trajectories.clear();
    for (const auto& item : split_list(value)) cfg.trajectories.push_back(resolve(item, base_dir));
  } else if (k == "forbidden_types") {
    cfg.forbidden_types.clear();
    for (const auto& item : split_list(value)) cfg.forbidden_types.insert(RoadType(item));
  } else if (k == "max_snap_distance") {
    cfg.match.max_snap_distance = parse_number<double>(k, v);
  } else if (k == "sigma_gps") {
    cfg.match.sigma_gps = parse_number<double>(k, v);
  } else if (k == "max_candidates") {
    cfg.match.max_candidates = parse_number<int>(k, v);
  } else if (k == "buffer_radius") {
    cfg.features.buffer_radius = parse_number<double>(k, v);
  } else if (k == "sample_step") {
    cfg.features.sample_step = parse_number<double>(k, v);
  } else if (k == "k") {
    cfg.k = parse_number<std::size_t>(k, v);
  } else if (k == "restarts") {
    cfg.restarts = parse_number<std::size_t>(k, v);
  } else if (k == "k_sweep_max") {
    cfg.k_sweep_max = parse_number<std::size_t>(k, v);
  } else if (k == "seed") {
    cfg.seed = parse_number<std::uint64_t>(k, v);
  } else if (k == "relieff_k") {
    cfg.relieff_k = parse_number<std::size_t>(k, v);
  } else if (k == "quantile") {
    cfg.quantile = parse_number<double>(k, v);
  } else if (k == "alpha_grid") {
    AlphaGrid::parse(v);  // validate early
    cfg.alpha_grid = v;
  } else if (k == "out_dir") {
    cfg.out_dir = resolve(v, base_dir);
  } else if (k == "threads") {
    cfg.threads = parse_number<unsigned>(k, v);
  } else {
    throw UsageError("unknown configuration key '" + k + "'");
  }
  if (cfg.match.max_snap_distance <= 0 || cfg.match.sigma_gps <= 0 || cfg.match.max_candidates < 1)
    throw UsageError("matching parameters must be positive");
  if (cfg.features.buffer_radius < 0 || cfg.features.sample_step <= 0)
    throw UsageError("buffer_radius must be >= 0 and sample_step > 0");
  if (cfg.k < 1 || cfg.restarts < 1) throw UsageError("k and restarts must be at least 1");
  if (!(cfg.quantile >= 0.0 && cfg.quantile <= 1.0)) throw UsageError("quantile must lie in [0, 1]");
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  PipelineConfig cfg;
  const fs::path base = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set_option(cfg, t.substr(0, eq), t.substr(eq + 1), base);
    } catch (const UsageError& e) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

std::string canonical_config(const PipelineConfig& cfg) {
  const auto opt = [](const std::optional<fs::path>& p) { return p ? p->generic_string() : std::string(); };
  std::vector<std::string> trajs;
  for (const auto& p : cfg.trajectories) trajs.push_back(p.generic_string());
  std::map<std::string, std::string> kv{
      {"network", cfg.network.generic_string()},
      {"nodes", opt(cfg.nodes)},
      {"landuse", opt(cfg.landuse)},
      {"trajectories", join(trajs, ",")},
      {"activities", opt(cfg.activities)},
      {"forbidden_types", join(type_names(cfg.forbidden_types), ",")},
      {"max_snap_distance", csv::format_double(cfg.match.max_snap_distance)},
      {"sigma_gps", csv::format_double(cfg.match.sigma_gps)},
      {"max_candidates", std::to_string(cfg.match.max_candidates)},
      {"buffer_radius", csv::format_double(cfg.features.buffer_radius)},
      {"sample_step", csv::format_double(cfg.features.sample_step)},
      {"k", std::to_string(cfg.k)},
      {"restarts", std::to_string(cfg.restarts)},
      {"k_sweep_max", std::to_string(cfg.k_sweep_max)},
      {"seed", std::to_string(cfg.seed)},
      {"relieff_k", std::to_string(cfg.relieff_k)},
      {"quantile", csv::format_double(cfg.quantile)},
      {"alpha_grid", cfg.alpha_grid},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

std::string config_hash(const PipelineConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canonical_config(cfg)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Helpers

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const auto workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  const auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

Coverage coverage(const RoadNetwork& net, std::span<const MatchedPath> matched) {
  std::vector<bool> used(net.num_edges(), false);
  for (const auto& m : matched)
    for (EdgeIndex e : m.walk.edges) used[e] = true;
  Coverage c;
  c.edges_total = net.num_edges();
  for (EdgeIndex e = 0; e < net.num_edges(); ++e) {
    const auto len = static_cast<double>(net.edge(e).length_m);
    c.length_total += len;
    if (used[e]) {
      ++c.edges_used;
      c.length_used += len;
    }
  }
  return c;
}

GroupInference infer_group(const RoadNetwork& net, const std::string& group, std::span<const MatchedPath> matched,
                           const AlphaGrid& grid, unsigned threads, const std::optional<RoadTypeSet>& favored) {
  if (matched.empty()) throw UsageError("group '" + group + "' has no trajectories");
  GroupInference out;
  out.shares = analyze_group(net, group, matched);
  const RoadTypeSet fav = favored ? *favored : out.shares.verdicts.favored;
  const EdgeClassification cls(fav);
  out.profiles.resize(matched.size());
  parallel_for(matched.size(), threads, [&](std::size_t i) {
    out.profiles[i] = alpha_sweep(net, cls, matched[i].walk, grid, matched[i].trajectory_id);
  });
  out.aggregate = group_aggregate(out.profiles);
  out.model = build_model(group, fav, out.aggregate);
  return out;
}

RouteResult route(const RoadNetwork& net, const Weighting& weighting, LonLat from, LonLat to,
                  double max_snap_distance) {
  const EdgeLocator locator(net);
  const auto snap = [&](LonLat p, const char* which) {
    const auto c = locator.nearest(net.projection().project(p), max_snap_distance, 1);
    if (c.empty()) {
      std::ostringstream msg;
      msg << which << " (" << p.lon << ", " << p.lat << ") is not within " << max_snap_distance
          << " m of the network";
      throw DataError(msg.str());
    }
    const auto& e = net.edge(c.front().edge);
    return c.front().fraction <= 0.5 ? e.u : e.v;
  };
  RouteResult r;
  r.from = snap(from, "origin");
  r.to = snap(to, "destination");
  r.alpha = weighting.alpha();
  const auto costs = weighting.scaled_costs(net);
  const auto sp = shortest_path(net, TableCost<std::int64_t>{costs}, r.from, r.to);
  if (!sp.reachable)
    throw DataError("no path between " + net.node(r.from).id + " and " + net.node(r.to).id);
  r.walk = sp.walk;
  r.weighted_cost = static_cast<double>(sp.cost) / static_cast<double>(weighting.scale());
  r.length_m = walk_length(net, r.walk);
  r.shortest_length_m = shortest_path(net, LengthCost{&net}, r.from, r.to).cost;
  return r;
}

ModelFile read_model(const fs::path& path) {
  const auto j = parse_json_file(path);
  try {
    ModelFile m;
    m.group = j.at("group").get<std::string>();
    for (const auto& t : j.at("favored_types")) m.favored_types.insert(RoadType(t.get<std::string>()));
    if (j.contains("alpha_num") && j.contains("alpha_den")) {
      m.alpha = Alpha(j["alpha_num"].get<std::int64_t>(), j["alpha_den"].get<std::int64_t>());
    } else {
      // Decimal alpha: exact at 1e-6 resolution.
      const auto a = j.at("alpha").get<double>();
      m.alpha = Alpha(static_cast<std::int64_t>(std::llround(a * 1e6)), 1000000);
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const UsageError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string file_token(std::string_view name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "_" : out;
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(PipelineConfig cfg, std::ostream* log) : cfg_(std::move(cfg)), log_(log), hash_(config_hash(cfg_)) {}

std::string Pipeline::csv_stamp() const {
  return "# config_hash=" + hash_ + " seed=" + std::to_string(cfg_.seed) + "\n";
}

void Pipeline::note(const std::string& msg) {
  if (log_) *log_ << "note: " << msg << "\n";
}

const RoadNetwork& Pipeline::network() {
  if (!net_) {
    if (cfg_.network.empty()) throw UsageError("no network configured");
    if (!fs::exists(cfg_.network)) throw DataError("network file not found: " + cfg_.network.string());
    net_ = load_network(cfg_.network, cfg_.forbidden_types, cfg_.nodes);
  }
  return *net_;
}

std::vector<Trajectory> Pipeline::load_inputs() {
  if (cfg_.trajectories.empty()) throw UsageError("no trajectory inputs configured");
  for (const auto& p : cfg_.trajectories)
    if (!fs::exists(p)) throw DataError("trajectory input not found: " + p.string());
  if (cfg_.activities && !fs::exists(*cfg_.activities))
    throw DataError("activity file not found: " + cfg_.activities->string());
  auto load = load_trajectories(cfg_.trajectories, cfg_.activities);
  for (const auto& w : load.warnings) note(w);
  if (load.trajectories.empty()) throw DataError("no trajectories");
  return std::move(load.trajectories);
}

void Pipeline::run_match() {
  const auto& net = network();
  const auto trajs = load_inputs();
  const EdgeLocator locator(net);
  std::vector<TrajectoryMatch> results(trajs.size());
  parallel_for(trajs.size(), cfg_.threads,
               [&](std::size_t i) { results[i] = match_trajectory(locator, trajs[i], cfg_.match); });

  std::vector<MatchedRecord> records;
  std::string unmatched = csv_stamp() + "trajectory_id,point_index,kind,reason\n";
  std::size_t failed = 0;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    auto& r = results[i];
    if (r.error) {
      ++failed;
      unmatched += csv::escape(r.trajectory_id) + "," + std::to_string(r.error->point_index) + "," +
                   std::string(to_string(r.error->kind)) + "," + csv::escape(r.error->message) + "\n";
      continue;
    }
    for (std::size_t f = 0; f < r.fragments.size(); ++f)
      records.push_back({std::move(r.fragments[f]), trajs[i].id, trajs[i].declared_activity, r.ranges[f].first,
                         r.ranges[f].second});
  }
  if (records.empty())
    throw DataError("no trajectory matched (" + std::to_string(failed) + " of " + std::to_string(trajs.size()) +
                    " unmatchable)");
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.path.trajectory_id < b.path.trajectory_id; });
  if (failed > 0) note(std::to_string(failed) + " of " + std::to_string(trajs.size()) + " trajectories unmatchable");

  fs::create_directories(cfg_.out_dir);
  json doc;
  doc["config_hash"] = hash_;
  doc["seed"] = cfg_.seed;
  json arr = json::array();
  for (const auto& r : records) {
    json edges = json::array();
    for (EdgeIndex e : r.path.walk.edges) edges.push_back(net.edge(e).id);
    arr.push_back({{"trajectory_id", r.path.trajectory_id},
                   {"source_id", r.source_id},
                   {"activity", r.activity ? json(*r.activity) : json(nullptr)},
                   {"first_point", r.first_point},
                   {"end_point", r.end_point},
                   {"start_node", net.node(r.path.walk.front()).id},
                   {"edges", edges},
                   {"matched_length", r.path.matched_length},
                   {"snap_distances", r.path.snap_distances}});
  }
  doc["trajectories"] = arr;
  csv::write_file(out("matched.json"), doc.dump(1) + "\n");
  csv::write_file(out("unmatched.csv"), unmatched);

  std::vector<MatchedPath> paths;
  for (const auto& r : records) paths.push_back(r.path);
  const auto c = coverage(net, paths);
  std::ostringstream cov;
  cov << csv_stamp() << "trajectories,matched,unmatched,edges_total,edges_used,edge_fraction_used,length_total_m,"
      << "length_used_m,length_fraction_used\n"
      << trajs.size() << "," << trajs.size() - failed << "," << failed << "," << c.edges_total << "," << c.edges_used
      << "," << csv::format_double(c.edges_total ? static_cast<double>(c.edges_used) / c.edges_total : 0.0) << ","
      << csv::format_double(c.length_total) << "," << csv::format_double(c.length_used) << ","
      << csv::format_double(c.length_total > 0 ? c.length_used / c.length_total : 0.0) << "\n";
  csv::write_file(out("coverage.csv"), cov.str());
  matched_ = std::move(records);
  features_.reset();
  groups_.reset();
}

void Pipeline::load_matched() {
  const auto path = out("matched.json");
  if (stamped_hash(path) != hash_) {
    run_match();
    return;
  }
  const auto& net = network();
  const auto doc = parse_json_file(path);
  std::vector<MatchedRecord> records;
  try {
    for (const auto& t : doc.at("trajectories")) {
      MatchedRecord r;
      r.path.trajectory_id = t.at("trajectory_id").get<std::string>();
      r.source_id = t.at("source_id").get<std::string>();
      if (!t.at("activity").is_null()) r.activity = t["activity"].get<std::string>();
      r.first_point = t.at("first_point").get<std::size_t>();
      r.end_point = t.at("end_point").get<std::size_t>();
      const auto start = net.find_node(t.at("start_node").get<std::string>());
      if (!start) throw DataError("unknown node in matched.json");
      std::vector<EdgeIndex> edges;
      for (const auto& e : t.at("edges")) {
        const auto idx = net.find_edge(e.get<std::string>());
        if (!idx) throw DataError("unknown edge '" + e.get<std::string>() + "' in matched.json");
        edges.push_back(*idx);
      }
      r.path.walk = walk_from_edges(net, *start, edges);
      r.path.matched_length = t.at("matched_length").get<std::int64_t>();
      r.path.snap_distances = t.at("snap_distances").get<std::vector<double>>();
      records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  matched_ = std::move(records);
}

const std::vector<Pipeline::MatchedRecord>& Pipeline::matched() {
  if (!matched_) load_matched();
  return *matched_;
}

void Pipeline::run_features() {
  const auto& records = matched();
  const auto& net = network();
  const auto trajs = load_inputs();
  std::map<std::string, const Trajectory*> by_id;
  for (const auto& t : trajs) by_id[t.id] = &t;
  LandUseMap landuse;
  if (cfg_.landuse) {
    if (!fs::exists(*cfg_.landuse)) throw DataError("land-use file not found: " + cfg_.landuse->string());
    landuse = load_landuse(*cfg_.landuse);
  }

  std::vector<FeatureVector> fv(records.size());
  parallel_for(records.size(), cfg_.threads, [&](std::size_t i) {
    const auto& r = records[i];
    const auto it = by_id.find(r.source_id);
    if (it == by_id.end()) throw DataError("matched trajectory '" + r.source_id + "' missing from the inputs");
    const auto& src = *it->second;
    if (r.end_point > src.points.size() || r.first_point >= r.end_point)
      throw DataError("matched point range out of bounds for '" + r.source_id + "'");
    Trajectory frag;
    frag.id = r.path.trajectory_id;
    frag.declared_activity = src.declared_activity;
    frag.points.assign(src.points.begin() + static_cast<std::ptrdiff_t>(r.first_point),
                       src.points.begin() + static_cast<std::ptrdiff_t>(r.end_point));
    if (r.first_point == 0 && r.end_point == src.points.size()) frag.metadata = src.metadata;
    fv[i] = extract_features(frag, r.path, net, landuse, cfg_.features);
  });
  auto fm = build_feature_matrix(fv);

  std::string text = csv_stamp() + "trajectory_id";
  for (const auto& n : fm.names) text += "," + csv::escape(n);
  text += "\n";
  for (std::size_t r = 0; r < fm.values.rows(); ++r) {
    text += csv::escape(fm.ids[r]);
    for (double v : fm.values.row(r)) text += "," + csv::format_double(v);
    text += "\n";
  }
  fs::create_directories(cfg_.out_dir);
  csv::write_file(out("features.csv"), text);
  features_ = std::move(fm);
  groups_.reset();
}

void Pipeline::load_features() {
  const auto path = out("features.csv");
  if (stamped_hash(path) != hash_) {
    run_features();
    return;
  }
  const auto t = csv::Table::read(path);
  FeatureMatrix fm;
  if (t.header().empty() || t.header().front() != "trajectory_id") throw DataError(path.string() + ": bad header");
  fm.names.assign(t.header().begin() + 1, t.header().end());
  fm.values = Matrix(t.size(), fm.names.size());
  for (std::size_t r = 0; r < t.size(); ++r) {
    fm.ids.emplace_back(t.get(r, 0));
    for (std::size_t c = 0; c < fm.names.size(); ++c) fm.values(r, c) = t.get_double(r, c + 1);
  }
  features_ = std::move(fm);
}

void Pipeline::run_cluster() {
  if (!features_) load_features();
  const auto& fm = *features_;
  const std::size_t n = fm.values.rows();
  if (n < cfg_.k)
    throw UsageError("fewer trajectories (" + std::to_string(n) + ") than clusters (k = " + std::to_string(cfg_.k) +
                     ")");
  const auto norm = znormalize(fm.values);
  const KMeansParams params{cfg_.k, cfg_.restarts, cfg_.seed, 300};
  const auto model = kmeans(norm.values, fm.ids, params);

  // Declared activities, by matched trajectory id.
  std::map<std::string, std::optional<std::string>> declared;
  for (const auto& r : matched()) declared[r.path.trajectory_id] = r.activity;
  std::vector<std::optional<std::string>> labels;
  bool any_label = false;
  for (const auto& id : fm.ids) {
    const auto it = declared.find(id);
    labels.push_back(it == declared.end() ? std::nullopt : it->second);
    any_label = any_label || labels.back().has_value();
  }

  std::vector<std::string> names(cfg_.k);
  std::optional<ContingencyTable> table;
  if (any_label) {
    table = contingency(labels, model.assignment, cfg_.k);
  } else {
    note("no declared activities; contingency table skipped");
  }
  std::set<std::string> taken;
  for (std::size_t c = 0; c < cfg_.k; ++c) {
    if (table && table->cluster_label[c]) names[c] = table->labels[*table->cluster_label[c]];
    if (names[c].empty() || taken.contains(names[c])) names[c] = "cluster" + std::to_string(c);
    taken.insert(names[c]);
  }

  ReliefResult relief;
  if (cfg_.k >= 2) {
    relief = relieff(norm.values, model.assignment, cfg_.relieff_k);
  } else {
    relief.weights.assign(fm.names.size(), 0.0);
    note("k = 1: feature weighting skipped");
  }
  const auto selected = select_top_features(relief.weights, cfg_.quantile);
  const auto remodel = kmeans(norm.values.select_columns(selected), fm.ids, params);
  const double agreement = clustering_agreement(model.assignment, remodel.assignment, cfg_.k);
  const auto sweep = cfg_.k_sweep_max > 0 ? sse_sweep(norm.values, fm.ids, params, cfg_.k_sweep_max)
                                          : std::vector<double>{};

  fs::create_directories(cfg_.out_dir);
  std::string text = csv_stamp() + "trajectory_id,cluster,activity_label\n";
  std::map<std::string, std::string> groups;
  for (std::size_t r = 0; r < n; ++r) {
    const auto c = model.assignment[r];
    text += csv::escape(fm.ids[r]) + "," + std::to_string(c) + "," + csv::escape(names[c]) + "\n";
    groups[fm.ids[r]] = names[c];
  }
  csv::write_file(out("clusters.csv"), text);

  std::set<std::size_t> sel(selected.begin(), selected.end());
  text = csv_stamp() + "feature,weight,selected\n";
  for (std::size_t f = 0; f < fm.names.size(); ++f)
    text += csv::escape(fm.names[f]) + "," + csv::format_double(relief.weights[f]) + "," +
            (sel.contains(f) ? "1" : "0") + "\n";
  csv::write_file(out("feature_weights.csv"), text);

  text = csv_stamp() + "k,sse\n";
  for (std::size_t k = 0; k < sweep.size(); ++k) text += std::to_string(k + 1) + "," + csv::format_double(sweep[k]) + "\n";
  csv::write_file(out("k_sweep.csv"), text);

  json report;
  report["config_hash"] = hash_;
  report["seed"] = cfg_.seed;
  report["k"] = cfg_.k;
  report["trajectories"] = n;
  report["sse"] = model.sse;
  report["best_restart"] = model.best_restart;
  report["iterations"] = model.iterations;
  report["cluster_names"] = names;
  json sel_names = json::array();
  for (auto f : selected) sel_names.push_back(fm.names[f]);
  report["selected_features"] = sel_names;
  report["relieff_neighbors_lowered"] = relief.neighbors_lowered;
  report["agreement_with_selected_features"] = agreement;

  if (table) {
    text = csv_stamp() + "label";
    for (std::size_t c = 0; c < cfg_.k; ++c) text += "," + csv::escape(names[c]);
    text += ",total\n";
    for (std::size_t l = 0; l < table->labels.size(); ++l) {
      text += csv::escape(table->labels[l]);
      for (std::size_t c = 0; c < cfg_.k; ++c) text += "," + std::to_string(table->counts[l][c]);
      text += "," + std::to_string(table->label_total(l)) + "\n";
    }
    text += "total";
    for (std::size_t c = 0; c < cfg_.k; ++c) text += "," + std::to_string(table->cluster_total(c));
    text += "," + std::to_string(table->total) + "\n";
    csv::write_file(out("contingency.csv"), text);
    csv::write_file(out("contingency.txt"), "config_hash=" + hash_ + " seed=" + std::to_string(cfg_.seed) + "\n\n" +
                                                format_contingency(*table));
    json recall = json::object(), precision = json::object();
    for (std::size_t l = 0; l < table->labels.size(); ++l) recall[table->labels[l]] = table->recall(l);
    for (std::size_t c = 0; c < cfg_.k; ++c) precision[names[c]] = table->precision(c);
    report["contingency"] = {{"agreement", table->agreement},
                             {"mapping_policy", table->mapping_policy},
                             {"unlabeled", table->unlabeled},
                             {"recall", recall},
                             {"precision", precision}};
  } else {
    report["contingency"] = nullptr;
  }
  csv::write_file(out("clustering.json"), report.dump(1) + "\n");
  groups_ = std::move(groups);
}

void Pipeline::load_groups() {
  const auto path = out("clusters.csv");
  if (stamped_hash(path) != hash_) {
    run_cluster();
    return;
  }
  const auto t = csv::Table::read(path);
  const auto id = t.require_column("trajectory_id");
  const auto label = t.require_column("activity_label");
  std::map<std::string, std::string> groups;
  for (std::size_t r = 0; r < t.size(); ++r) groups[std::string(t.get(r, id))] = std::string(t.get(r, label));
  groups_ = std::move(groups);
}

const std::map<std::string, std::string>& Pipeline::groups() {
  if (!groups_) load_groups();
  return *groups_;
}

namespace {

std::map<std::string, std::vector<MatchedPath>> paths_by_group(const std::vector<Pipeline::MatchedRecord>& records,
                                                               const std::map<std::string, std::string>& groups) {
  std::map<std::string, std::vector<MatchedPath>> out;
  for (const auto& g : groups) out[g.second];
  for (const auto& r : records) {
    const auto it = groups.find(r.path.trajectory_id);
    if (it != groups.end()) out[it->second].push_back(r.path);
  }
  return out;
}

}  // namespace

void Pipeline::run_classify() {
  const auto& net = network();
  const auto by_group = paths_by_group(matched(), groups());
  fs::create_directories(cfg_.out_dir);
  for (const auto& [group, paths] : by_group) {
    TypeShareReport rep;
    try {
      rep = analyze_group(net, group, paths);
    } catch (const UsageError& e) {
      note("group '" + group + "' skipped: " + e.what());
      continue;
    }
    RoadTypeSet types = net.road_types();
    for (const auto& [t, _] : rep.r_user) types.insert(t);
    for (const auto& [t, _] : rep.r_shortest) types.insert(t);
    const auto share = [](const TypeShares& s, const RoadType& t) {
      const auto it = s.find(t);
      return it == s.end() ? 0.0 : it->second;
    };
    std::string text = csv_stamp() + "road_type,r_user,r_shortest,classification\n";
    for (const auto& t : types)
      text += csv::escape(t.str()) + "," + csv::format_double(share(rep.r_user, t)) + "," +
              csv::format_double(share(rep.r_shortest, t)) + "," +
              (rep.verdicts.favored.contains(t) ? "favored" : "unfavored") + "\n";
    csv::write_file(out("shares_" + file_token(group) + ".csv"), text);

    json doc;
    doc["config_hash"] = hash_;
    doc["seed"] = cfg_.seed;
    doc["group"] = group;
    doc["favored_types"] = type_names(rep.verdicts.favored);
    doc["unfavored_types"] = type_names(rep.verdicts.unfavored);
    doc["excluded_circular_count"] = rep.excluded_circular;
    doc["trajectories"] = rep.trajectories;
    doc["user_total_m"] = rep.user_total_m;
    doc["shortest_total_m"] = rep.shortest_total_m;
    csv::write_file(out("preference_" + file_token(group) + ".json"), doc.dump(1) + "\n");
  }
}

RoadTypeSet Pipeline::load_favored(const std::string& group) {
  const auto path = out("preference_" + file_token(group) + ".json");
  if (stamped_hash(path) != hash_) run_classify();
  if (!fs::exists(path)) throw DataError("no preference report for group '" + group + "'");
  const auto doc = parse_json_file(path);
  RoadTypeSet fav;
  for (const auto& t : doc.at("favored_types")) fav.insert(RoadType(t.get<std::string>()));
  return fav;
}

std::vector<GroupPreferenceModel> Pipeline::run_infer(const std::optional<std::string>& group) {
  const auto& net = network();
  const auto by_group = paths_by_group(matched(), groups());
  std::vector<std::string> selected;
  if (group) {
    if (!by_group.contains(*group)) {
      std::vector<std::string> names;
      for (const auto& [g, _] : by_group) names.push_back(g);
      throw UsageError("unknown group '" + *group + "'; available groups: " + join(names, ", "));
    }
    selected.push_back(*group);
  } else {
    for (const auto& [g, _] : by_group) selected.push_back(g);
  }
  const auto grid = AlphaGrid::parse(cfg_.alpha_grid);
  fs::create_directories(cfg_.out_dir);

  std::vector<GroupPreferenceModel> models;
  for (const auto& g : selected) {
    const auto& paths = by_group.at(g);
    if (paths.empty()) throw UsageError("group '" + g + "' has no trajectories");
    const auto fav = load_favored(g);
    auto inf = infer_group(net, g, paths, grid, cfg_.threads, fav);
    const auto token = file_token(g);

    std::string text = csv_stamp() + "trajectory_id,alpha,milestones\n";
    for (const auto& p : inf.profiles)
      for (std::size_t i = 0; i < p.grid.size(); ++i)
        text += csv::escape(p.trajectory_id) + "," + csv::format_double(p.grid[i].value()) + "," +
                std::to_string(p.milestones[i]) + "\n";
    csv::write_file(out("profiles_" + token + ".csv"), text);

    text = csv_stamp() + "alpha,mean_relative_percent\n";
    for (std::size_t i = 0; i < inf.aggregate.grid.size(); ++i)
      text += csv::format_double(inf.aggregate.grid[i].value()) + "," +
              csv::format_double(inf.aggregate.mean_relative_percent[i]) + "\n";
    csv::write_file(out("curve_" + token + ".csv"), text);

    const auto& m = inf.model;
    json doc;
    doc["config_hash"] = hash_;
    doc["seed"] = cfg_.seed;
    doc["group"] = g;
    doc["favored_types"] = type_names(m.favored_types);
    doc["alpha"] = m.alpha.value();
    doc["alpha_num"] = m.alpha.num;
    doc["alpha_den"] = m.alpha.den;
    doc["consistent"] = m.alpha.compare_half() <= 0;
    doc["verdict"] = std::string(to_string(m.verdict));
    doc["distribution"] = {{"low_only", m.distribution.low_only},
                           {"high_only", m.distribution.high_only},
                           {"other", m.distribution.other}};
    doc["trajectories"] = m.trajectories;
    if (m.alpha.num > 0 && m.alpha.num < m.alpha.den) doc["max_detour_ratio"] = max_detour_ratio(m.alpha.value());
    csv::write_file(out("model_" + token + ".json"), doc.dump(1) + "\n");

    // Every edge is weighted, used by a trajectory or not.
    const auto w = m.weighting();
    json features = json::array();
    for (const auto& e : net.edges()) {
      features.push_back({{"type", "Feature"},
                          {"geometry", line_geometry(e.geometry)},
                          {"properties",
                           {{"id", e.id},
                            {"road_type", e.type.str()},
                            {"length_m", e.length_m},
                            {"w_alpha", w.edge_weight(e)},
                            {"class", w.classification().is_favored(e) ? "favored" : "unfavored"}}}});
    }
    json fc = {{"type", "FeatureCollection"},
               {"config_hash", hash_},
               {"seed", cfg_.seed},
               {"group", g},
               {"alpha", m.alpha.value()},
               {"features", features}};
    csv::write_file(out("network_" + token + ".geojson"), fc.dump() + "\n");
    models.push_back(std::move(inf.model));
  }
  return models;
}

RouteResult Pipeline::run_route(const fs::path& model_path, LonLat from, LonLat to) {
  if (!fs::exists(model_path)) throw DataError("model file not found: " + model_path.string());
  const auto model = read_model(model_path);
  const auto& net = network();
  const Weighting w(model.alpha, EdgeClassification(model.favored_types));
  const auto r = route(net, w, from, to, cfg_.match.max_snap_distance);

  json edges = json::array();
  for (EdgeIndex e : r.walk.edges) edges.push_back(net.edge(e).id);
  json fc = {{"type", "FeatureCollection"},
             {"config_hash", hash_},
             {"seed", cfg_.seed},
             {"features",
              json::array({{{"type", "Feature"},
                            {"geometry", line_geometry(walk_geometry(net, r.walk))},
                            {"properties",
                             {{"group", model.group},
                              {"alpha", r.alpha.value()},
                              {"from_node", net.node(r.from).id},
                              {"to_node", net.node(r.to).id},
                              {"w_alpha_cost", r.weighted_cost},
                              {"length_m", r.length_m},
                              {"shortest_length_m", r.shortest_length_m},
                              {"edges", edges}}}}})}};
  fs::create_directories(cfg_.out_dir);
  csv::write_file(out("route.geojson"), fc.dump(1) + "\n");
  return r;
}

void Pipeline::run_all() {
  run_match();
  run_features();
  run_cluster();
  run_classify();
  run_infer();
}

}  // namespace bikepref::pipeline
