#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "bikepref/matching.hpp"
#include "bikepref/synthetic.hpp"
#include "fixtures.hpp"

using namespace bikepref;

namespace {

// Points every `step` meters along a planar polyline (both ends included).
Trajectory along(const RoadNetwork& net, std::vector<XY> line, double step, double noise = 0.0,
                 std::uint64_t seed = 0) {
  std::vector<XY> pts;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const double len = distance(line[i], line[i + 1]);
    const int n = static_cast<int>(std::floor(len / step));
    for (int k = 0; k < n; ++k) {
      const double t = k * step / len;
      pts.push_back({line[i].x + t * (line[i + 1].x - line[i].x), line[i].y + t * (line[i + 1].y - line[i].y)});
    }
  }
  pts.push_back(line.back());
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Trajectory t;
  t.id = "t";
  for (auto p : pts) {
    if (noise > 0) {
      const double r = noise * u(gen), th = 2 * M_PI * u(gen);
      p.x += r * std::cos(th);
      p.y += r * std::sin(th);
    }
    t.points.push_back({net.projection().unproject(p), std::nullopt, std::nullopt});
  }
  return t;
}

XY at(const RoadNetwork& net, const char* id) { return net.projection().project(net.node(*net.find_node(id)).pos); }

// Exhaustive Viterbi: every assignment of points to edges within the radius,
// scored with the documented emission and transition terms, network
// distances from Floyd-Warshall. Returns the collapsed edge sequence.
std::vector<EdgeIndex> brute_force_viterbi(const RoadNetwork& net, const Trajectory& traj, const MatchParams& p) {
  const auto d = fixtures::floyd_warshall(net, fixtures::lengths(net));
  const std::size_t n = traj.points.size();
  std::vector<XY> xy;
  for (const auto& tp : traj.points) xy.push_back(net.projection().project(tp.pos));

  struct Cand {
    EdgeIndex e;
    double frac;
    double dist;
  };
  std::vector<std::vector<Cand>> cands(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (EdgeIndex e = 0; e < net.num_edges(); ++e) {
      const auto xyl = net.edge_xy(e);
      const auto pr = project_onto_segment(xy[i], xyl[0], xyl[1]);
      const double dist = distance(xy[i], pr.point);
      if (dist <= p.max_snap_distance) cands[i].push_back({e, pr.t, dist});
    }
  }
  const auto route = [&](const Cand& a, const Cand& b) {
    const auto& ea = net.edge(a.e);
    const auto& eb = net.edge(b.e);
    if (a.e == b.e) return std::abs(a.frac - b.frac) * static_cast<double>(ea.length_m);
    double best = 1e18;
    const double la = static_cast<double>(ea.length_m), lb = static_cast<double>(eb.length_m);
    for (auto [x, dx] : {std::pair{ea.u, a.frac * la}, std::pair{ea.v, (1 - a.frac) * la}})
      for (auto [y, dy] : {std::pair{eb.u, b.frac * lb}, std::pair{eb.v, (1 - b.frac) * lb}})
        best = std::min(best, dx + static_cast<double>(d[x][y]) + dy);
    return best;
  };

  std::vector<std::size_t> choice(n, 0), best_choice;
  double best = -1e300;
  const double s2 = 2 * p.sigma_gps * p.sigma_gps;
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double score) {
    if (i == n) {
      if (score > best) {
        best = score;
        best_choice = choice;
      }
      return;
    }
    for (std::size_t c = 0; c < cands[i].size(); ++c) {
      choice[i] = c;
      double s = score - cands[i][c].dist * cands[i][c].dist / s2;
      if (i > 0) {
        const double straight = distance(xy[i - 1], xy[i]);
        s -= std::abs(route(cands[i - 1][choice[i - 1]], cands[i][c]) - straight) / p.transition_scale;
      }
      rec(i + 1, s);
    }
  };
  rec(0, 0.0);
  // Runs of equal edges; a terminal run that only touches the node it shares
  // with its neighbor run (every point within the snap radius) is dropped.
  std::vector<std::pair<EdgeIndex, std::vector<std::size_t>>> runs;
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = cands[i][best_choice[i]].e;
    if (runs.empty() || runs.back().first != e) runs.push_back({e, {}});
    runs.back().second.push_back(i);
  }
  const auto shared = [&](EdgeIndex a, EdgeIndex b) {
    const auto& ea = net.edge(a);
    const auto& eb = net.edge(b);
    return (ea.u == eb.u || ea.u == eb.v) ? ea.u : ea.v;
  };
  const auto touches = [&](const std::vector<std::size_t>& pts, NodeIndex node) {
    const XY q = net.projection().project(net.node(node).pos);
    return std::all_of(pts.begin(), pts.end(), [&](std::size_t i) { return distance(xy[i], q) <= p.max_snap_distance; });
  };
  std::vector<EdgeIndex> seq;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (runs.size() > 1 && r == 0 && touches(runs[0].second, shared(runs[0].first, runs[1].first))) continue;
    if (runs.size() > 1 && r + 1 == runs.size() && touches(runs[r].second, shared(runs[r].first, runs[r - 1].first)))
      continue;
    seq.push_back(runs[r].first);
  }
  return seq;
}

std::string join(const std::vector<EdgeIndex>& v) {
  std::string s;
  for (auto e : v) s += std::to_string(e) + " ";
  return s;
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto dir = std::filesystem::temp_directory_path() / "bikepref_unit";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << content;
  return path;
}

}  // namespace

TEST_CASE("load_trajectories: GPX with one 3-point track") {
  const auto r = parse_gpx(R"(<?xml version="1.0"?>
<gpx version="1.1" creator="test" xmlns="http://www.topografix.com/GPX/1/1">
  <trk><name>x</name><type>Mountain Biking</type><trkseg>
    <trkpt lat="50.70" lon="7.10"><ele>100</ele><time>2020-05-01T10:00:00Z</time></trkpt>
    <trkpt lat="50.701" lon="7.10"><ele>110</ele><time>2020-05-01T10:00:10Z</time></trkpt>
    <trkpt lat="50.702" lon="7.10"><ele>105</ele><time>2020-05-01T10:00:20Z</time></trkpt>
  </trkseg></trk>
</gpx>)",
                           "ride.gpx");
  REQUIRE(r.trajectories.size() == 1);
  const auto& t = r.trajectories[0];
  CHECK(t.id == "ride");
  CHECK(t.points.size() == 3);
  CHECK(t.declared_activity == std::optional<std::string>("mountainbiking"));
  CHECK(*t.points[1].elevation == doctest::Approx(110));
  CHECK(*t.points[2].time - *t.points[0].time == doctest::Approx(20));
}

TEST_CASE("load_trajectories: GPX with two tracks gives two trajectories") {
  const auto r = parse_gpx(R"(<gpx version="1.1"><trk><trkseg>
    <trkpt lat="50.70" lon="7.10"/><trkpt lat="50.701" lon="7.10"/></trkseg></trk>
    <trk><trkseg><trkpt lat="50.70" lon="7.11"/><trkpt lat="50.701" lon="7.11"/>
    <trkpt lat="50.701" lon="7.11"/></trkseg></trk></gpx>)",
                           "two.gpx");
  REQUIRE(r.trajectories.size() == 2);
  CHECK(r.trajectories[1].points.size() == 2);  // duplicate consecutive point collapsed
}

TEST_CASE("load_trajectories: short tracks are skipped with a warning") {
  const auto r = parse_gpx(R"(<gpx version="1.1"><trk><trkseg><trkpt lat="50.70" lon="7.10"/></trkseg></trk></gpx>)",
                           "one.gpx");
  CHECK(r.trajectories.empty());
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("load_trajectories: malformed CSV coordinate names the row") {
  CHECK_THROWS_WITH_AS(parse_trajectory_csv("trajectory_id,seq,lon,lat\nt1,0,7.1,50.7\nt1,1,abc,50.7\n", "tracks.csv"),
                       doctest::Contains("tracks.csv:3"), DataError);
}

TEST_CASE("load_trajectories: directories, sidecar activities, sorted ids") {
  const auto dir = std::filesystem::temp_directory_path() / "bikepref_unit_dir";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "b.csv") << "trajectory_id,seq,lon,lat,ele\nz,1,7.1,50.701,5\nz,0,7.1,50.7,3\n"
                                  "y,0,7.2,50.7,1\ny,1,7.2,50.701,2\n";
  const auto act = temp_file("act.csv", "trajectory_id,activity\nz,racing bike\n");
  const std::vector<std::filesystem::path> src{dir};
  const auto r = load_trajectories(src, act);
  REQUIRE(r.trajectories.size() == 2);
  CHECK(r.trajectories[0].id == "y");
  CHECK(r.trajectories[1].id == "z");
  CHECK(*r.trajectories[1].points[0].elevation == doctest::Approx(3));
  CHECK(r.trajectories[1].declared_activity == std::optional<std::string>("racingbiking"));
  CHECK_FALSE(r.trajectories[0].declared_activity);
}

TEST_CASE("map_match: zero-noise samples along A-C-B") {
  const auto net = fixtures::triangle();
  const auto traj = along(net, {at(net, "A"), at(net, "C"), at(net, "B")}, 10.0);
  const auto r = map_match(net, traj, MatchParams{});
  REQUIRE(r.ok());
  const std::vector<NodeIndex> expect{*net.find_node("A"), *net.find_node("C"), *net.find_node("B")};
  CHECK(r.path->walk.nodes == expect);
  CHECK(r.path->matched_length == 120);
  CHECK(r.path->snap_distances.size() == traj.points.size());
}

TEST_CASE("map_match: noisy samples agree with brute-force Viterbi") {
  const auto net = fixtures::triangle();
  const std::vector<NodeIndex> expect{*net.find_node("A"), *net.find_node("C"), *net.find_node("B")};
  MatchParams p;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // 20 m spacing keeps the exhaustive search small (3 candidates per point).
    const auto traj = along(net, {at(net, "A"), at(net, "C"), at(net, "B")}, 20.0, 5.0, seed);
    const auto oracle = brute_force_viterbi(net, traj, p);
    const auto r = map_match(net, traj, p);
    REQUIRE(r.ok());
    CHECK(r.path->walk.nodes == expect);
    INFO("oracle " << join(oracle) << " got " << join(r.path->walk.edges));
    CHECK(oracle == r.path->walk.edges);
    for (double s : r.path->snap_distances) CHECK(s <= p.max_snap_distance);
  }
}

TEST_CASE("map_match: far point is unmatchable with its index") {
  const auto net = fixtures::triangle();
  auto traj = along(net, {at(net, "A"), at(net, "B")}, 10.0);
  const XY far{50.0, -500.0};
  traj.points.insert(traj.points.begin() + 4, TrackPoint{net.projection().unproject(far), {}, {}});
  const auto r = map_match(net, traj, MatchParams{});
  REQUIRE_FALSE(r.ok());
  CHECK(r.error->kind == MatchError::Kind::unmatchable_point);
  CHECK(r.error->point_index == 4);

  // The split policy keeps both halves (each has at least 2 points).
  const EdgeLocator loc(net);
  const auto m = match_trajectory(loc, traj, MatchParams{});
  CHECK_FALSE(m.error);
  CHECK(m.fragments.size() == 2);

  // A bad second point leaves a 1-point fragment: whole trajectory unmatchable.
  auto bad = along(net, {at(net, "A"), at(net, "B")}, 10.0);
  bad.points.insert(bad.points.begin() + 1, TrackPoint{net.projection().unproject(far), {}, {}});
  const auto m2 = match_trajectory(loc, bad, MatchParams{});
  REQUIRE(m2.error);
  CHECK(m2.error->point_index == 1);
  CHECK(m2.fragments.empty());
}

TEST_CASE("map_match: single-node match is degenerate") {
  const auto net = fixtures::triangle();
  const XY a = at(net, "A");
  const auto traj = along(net, {a, {a.x + 0.5, a.y + 0.5}}, 10.0);
  const auto r = map_match(net, traj, MatchParams{});
  REQUIRE_FALSE(r.ok());
  CHECK(r.error->kind == MatchError::Kind::degenerate);
}

TEST_CASE("length_by_type") {
  const auto net = fixtures::triangle();
  MatchedPath m;
  m.walk = walk_from_edges(net, 0, std::vector<EdgeIndex>{1});
  auto by = length_by_type(m, net);
  CHECK(by.size() == 1);
  CHECK(by[RoadType("cycleway")] == 60);

  m.walk = walk_from_edges(net, 0, std::vector<EdgeIndex>{0, 2});
  by = length_by_type(m, net);
  CHECK(by[RoadType("residential")] == 100);
  CHECK(by[RoadType("cycleway")] == 60);

  m.walk = walk_from_edges(net, 0, std::vector<EdgeIndex>{0, 0});
  by = length_by_type(m, net);
  CHECK(by[RoadType("residential")] == 200);
}

TEST_CASE("property: matching is idempotent on dense samples of its own output") {
  synthetic::GridSpec spec;
  spec.rows = spec.cols = 6;
  spec.seed = 3;
  const auto net = synthetic::make_grid_network(spec);
  const EdgeLocator loc(net);
  const auto costs = fixtures::lengths(net);
  const auto routes = synthetic::planted_routes(net, costs, 20, 99, 150.0);
  for (std::size_t i = 0; i < routes.size(); ++i) {
    const auto traj = synthetic::sample_trajectory(net, routes[i], "r" + std::to_string(i), 10.0);
    const auto first = map_match(loc, traj, MatchParams{});
    REQUIRE(first.ok());
    CHECK(first.path->walk == routes[i]);
    const auto again = map_match(loc, synthetic::sample_trajectory(net, first.path->walk, "again", 10.0), MatchParams{});
    REQUIRE(again.ok());
    CHECK(again.path->walk == first.path->walk);
    std::int64_t sum = 0;
    for (const auto& [t, len] : length_by_type(*first.path, net)) sum += static_cast<std::int64_t>(len);
    CHECK(sum == first.path->matched_length);
  }
}
