// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "bikepref/clustering.hpp"
#include "bikepref/csv.hpp"
#include "bikepref/decomposition.hpp"
#include "bikepref/features.hpp"
#include "bikepref/pipeline.hpp"
#include "bikepref/preference.hpp"
#include "bikepref/synthetic.hpp"
#include "fixtures.hpp"

using namespace bikepref;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// 1 -------------------------------------------------------------------------
Outcome decomposition_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto grid = AlphaGrid::parse("0.1,0.25,0.4,0.455,0.5,0.545,0.75,0.9");
  const EdgeClassification cls({RoadType("fav")});
  std::mt19937_64 gen(1001);
  std::size_t cases = 0, agree = 0;
  for (int g = 0; g < 100; ++g) {
    const auto net = fixtures::random_graph(gen, {});
    const auto walk = fixtures::random_walk(gen, net, 10);
    for (const auto& a : grid.values) {
      ++cases;
      const auto costs = fixtures::scaled_costs(net, cls.favored_types(), a.num, a.den);
      if (min_decomposition(net, cls, a, walk).subpaths() == fixtures::dp_min_subpaths(net, costs, walk)) ++agree;
    }
  }
  const double s = seconds_since(t0);
  return {agree == cases && s < 30.0,
          std::to_string(agree) + "/" + std::to_string(cases) + " graph-alpha cases agree, " + fmt(s, 2) + " s"};
}

// 2 -------------------------------------------------------------------------
Outcome dijkstra_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(2002);
  std::size_t cases = 0, agree = 0;
  const auto check = [&](const RoadNetwork& net, const std::vector<std::int64_t>& costs, NodeIndex s, NodeIndex t) {
    ++cases;
    const auto expected = fixtures::enumerate_min_cost(net, costs, s, t);
    const auto got = shortest_path(net, TableCost<std::int64_t>{costs}, s, t);
    const bool ok = expected == fixtures::kInf ? !got.reachable
                                               : got.reachable && got.cost == expected &&
                                                     path_cost(net, TableCost<std::int64_t>{costs}, got.walk) == expected;
    if (ok) ++agree;
  };
  for (int g = 0; g < 100; ++g) {
    fixtures::RandomGraphSpec spec;
    spec.max_nodes = 10;
    spec.connected = g % 4 != 0;
    const auto net = fixtures::random_graph(gen, spec);
    const Alpha a(std::uniform_int_distribution<std::int64_t>(20, 180)(gen), 200);
    const auto weighted = fixtures::scaled_costs(net, {RoadType("fav")}, a.num, a.den);
    const auto geometric = fixtures::lengths(net);
    std::uniform_int_distribution<NodeIndex> node(0, static_cast<NodeIndex>(net.num_nodes() - 1));
    for (int q = 0; q < 5; ++q) {
      const auto s = node(gen), t = node(gen);
      check(net, geometric, s, t);
      check(net, weighted, s, t);
    }
  }
  const double s = seconds_since(t0);
  return {agree == cases && s < 10.0,
          std::to_string(agree) + "/" + std::to_string(cases) + " queries agree with enumeration, " + fmt(s, 2) + " s"};
}

// 3 -------------------------------------------------------------------------
Outcome alpha_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const Alpha planted(70, 200);
  const RoadTypeSet favored{RoadType("cycleway")};
  const auto grid = AlphaGrid::standard();
  std::size_t runs_a = 0, runs_c = 0, traj_b = 0, traj_total = 0, unmatched = 0;
  double worst_c = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    synthetic::GridSpec spec;
    spec.seed = seed;
    const auto net = synthetic::make_grid_network(spec);
    const auto costs = Weighting(planted, EdgeClassification(favored)).scaled_costs(net);
    const auto routes = synthetic::planted_routes(net, costs, 50, seed * 7919, 500.0);

    // Sample with GPS-like noise and map-match back onto the network.
    const EdgeLocator locator(net);
    std::vector<MatchedPath> matched(routes.size());
    std::vector<char> ok(routes.size(), 0);
    pipeline::parallel_for(routes.size(), 0, [&](std::size_t i) {
      const auto t = synthetic::sample_trajectory(net, routes[i], "t" + std::to_string(i), 15.0, 3.0, seed * 1000 + i);
      auto m = match_trajectory(locator, t, MatchParams{});
      if (!m.error && m.fragments.size() == 1) {
        matched[i] = std::move(m.fragments.front());
        ok[i] = 1;
      }
    });
    std::vector<MatchedPath> good;
    for (std::size_t i = 0; i < routes.size(); ++i) {
      if (ok[i]) good.push_back(std::move(matched[i]));
      else ++unmatched;
    }

    const auto inf = pipeline::infer_group(net, "synthetic", good, grid, 0);
    if (inf.shares.verdicts.favored == favored) ++runs_a;
    for (const auto& p : inf.profiles) {
      ++traj_total;
      if (std::find(p.optimal_alphas.begin(), p.optimal_alphas.end(), planted) != p.optimal_alphas.end()) ++traj_b;
    }
    const double err = std::abs(inf.aggregate.argmin.value() - planted.value());
    worst_c = std::max(worst_c, err);
    if (err <= 0.02 + 1e-12) ++runs_c;
  }
  const double s = seconds_since(t0);
  const bool pass = runs_a >= 45 && traj_b == traj_total && runs_c == 50 && s < 120.0;
  return {pass, "(a) favored set exact on " + std::to_string(runs_a) + "/50 runs; (b) 0.35 optimal for " +
                    std::to_string(traj_b) + "/" + std::to_string(traj_total) + " trajectories; (c) argmin within 0.02 on " +
                    std::to_string(runs_c) + "/50 runs (worst |error| " + fmt(worst_c, 3) + "); " +
                    std::to_string(unmatched) + " unmatched; " + fmt(s, 1) + " s"};
}

// 4 -------------------------------------------------------------------------
Outcome detour_ratios() {
  const double r38 = max_detour_ratio(0.38), r485 = max_detour_ratio(0.485), r1 = max_detour_ratio(0.1);
  const bool pass = std::abs(r38 - 1.6316) <= 0.0005 && std::abs(r485 - 1.0619) <= 0.0005 && r1 == 9.0;
  return {pass, "ratio(0.38)=" + fmt(r38) + " ratio(0.485)=" + fmt(r485) + " ratio(0.1)=" + fmt(r1, 6)};
}

// 5 -------------------------------------------------------------------------
Outcome table_one() {
  // Rows: user labels; columns: clusters (the transpose of the printed table).
  const auto t = contingency_from_counts({"mountainbiking", "racingbiking", "biking"}, {"0", "1", "2"},
                                         {{125, 10, 17}, {20, 135, 63}, {39, 47, 141}});
  const std::vector<double> precision_pct{68, 70, 64}, recall_pct{82, 62, 62};
  bool pass = std::abs(t.agreement - 0.672) <= 0.001 && std::abs(t.recall(0) - 125.0 / 152.0) < 1e-12 &&
              std::abs(t.recall(0) - 0.822) <= 0.0005;
  std::string prec, rec;
  for (std::size_t i = 0; i < 3; ++i) {
    const double p = 100.0 * t.precision(i), r = 100.0 * t.recall(i);
    pass = pass && std::lround(p) == precision_pct[i] && std::lround(r) == recall_pct[i];
    prec += (i ? "/" : "") + fmt(p, 1);
    rec += (i ? "/" : "") + fmt(r, 1);
  }
  return {pass, "agreement=" + fmt(t.agreement) + " precision%=" + prec + " recall%=" + rec};
}

// 6 -------------------------------------------------------------------------
Outcome triangle_threshold() {
  const auto net = fixtures::triangle();
  const EdgeClassification cls(fixtures::cycleway_only());
  const auto detour = walk_from_edges(net, 0, std::vector<EdgeIndex>{1, 2});
  std::size_t oracle_agree = 0, literal_ok = 0, n = 0;
  std::string literal_failures;
  Alpha last_zero(0, 1), first_one(1, 1);
  for (const auto& a : AlphaGrid::standard().values) {
    ++n;
    const auto m = min_decomposition(net, cls, a, detour).milestones.size();
    const auto costs = fixtures::scaled_costs(net, cls.favored_types(), a.num, a.den);
    const bool detour_optimal = fixtures::enumerate_min_cost(net, costs, 0, 1) == costs[1] + costs[2];
    if (m == (detour_optimal ? 0u : 1u)) ++oracle_agree;
    if (m == 0 && last_zero < a) last_zero = a;
    if (m == 1 && a < first_one) first_one = a;
    // The criterion as stated: 0 milestones up to 0.455, 1 from 0.46 on.
    const bool expected_zero = a.num * 1000 <= 455 * a.den;
    if (m == (expected_zero ? 0u : 1u)) {
      ++literal_ok;
    } else {
      literal_failures += (literal_failures.empty() ? "" : ",") + fmt(a.value(), 3) + "->" + std::to_string(m);
    }
  }
  const bool pass = literal_ok == n && oracle_agree == n;
  std::string d = "enumeration oracle agrees on " + std::to_string(oracle_agree) + "/" + std::to_string(n) +
                  " grid alphas; last 0-milestone alpha " + fmt(last_zero.value(), 3) + ", first 1-milestone alpha " +
                  fmt(first_one.value(), 3) + " (threshold 5/11=" + fmt(5.0 / 11.0, 5) + "); stated split holds on " +
                  std::to_string(literal_ok) + "/" + std::to_string(n);
  if (!literal_failures.empty())
    d += ", violated at alpha " + literal_failures + " (detour 120*0.455=54.6 > direct 100*0.545=54.5)";
  return {pass, d};
}

// 7 -------------------------------------------------------------------------
Outcome clustering_properties() {
  std::size_t kmeans_ok = 0, relief_ok = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    const double rot = angle(gen);
    // Equilateral triangle of side 10 (centers exactly 10 apart), randomly rotated.
    std::vector<std::pair<double, double>> centers;
    for (int c = 0; c < 3; ++c) {
      const double th = rot + c * 2.0 * M_PI / 3.0;
      centers.emplace_back(10.0 / std::sqrt(3.0) * std::cos(th), 10.0 / std::sqrt(3.0) * std::sin(th));
    }
    Matrix x(300, 2);
    std::vector<std::size_t> truth(300);
    for (std::size_t i = 0; i < 300; ++i) {
      truth[i] = i / 100;
      x(i, 0) = centers[truth[i]].first + noise(gen);
      x(i, 1) = centers[truth[i]].second + noise(gen);
    }
    const auto m = kmeans(x, KMeansParams{3, 20, seed, 300});
    if (clustering_agreement(truth, m.assignment, 3) >= 0.99) ++kmeans_ok;

    // One perfect separator followed by five noise columns.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix f(200, 6);
    std::vector<std::size_t> labels(200);
    for (std::size_t i = 0; i < 200; ++i) {
      labels[i] = i % 2;
      f(i, 0) = labels[i] == 0 ? 0.4 * u(gen) : 0.6 + 0.4 * u(gen);
      for (std::size_t c = 1; c < 6; ++c) f(i, c) = u(gen);
    }
    const auto w = relieff(f, labels, 10).weights;
    if (w[0] > *std::max_element(w.begin() + 1, w.end())) ++relief_ok;
  }
  return {kmeans_ok >= 95 && relief_ok >= 95, "k-means >= 99% agreement on " + std::to_string(kmeans_ok) +
                                                  "/100 seeds; reliefF separator ranked first on " +
                                                  std::to_string(relief_ok) + "/100 seeds"};
}

// 8 -------------------------------------------------------------------------
Outcome invariants() {
  std::mt19937_64 gen(8008);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t z_ok = 0, share_ok = 0, scale_ok = 0, eq_ok = 0;
  const std::size_t n = 1000;

  for (std::size_t trial = 0; trial < n; ++trial) {
    const std::size_t rows = 2 + static_cast<std::size_t>(u(gen) * 60), cols = 1 + static_cast<std::size_t>(u(gen) * 6);
    Matrix x(rows, cols);
    for (std::size_t c = 0; c < cols; ++c) {
      const double scale = std::pow(10.0, 4.0 * u(gen) - 2.0), offset = 1000.0 * (u(gen) - 0.5);
      for (std::size_t r = 0; r < rows; ++r) x(r, c) = offset + scale * (u(gen) - 0.5);
      x(0, c) = offset + scale;  // never constant
    }
    const auto z = znormalize(x).values;
    bool ok = true;
    for (std::size_t c = 0; c < cols; ++c) {
      double mean = 0.0, var = 0.0;
      for (std::size_t r = 0; r < rows; ++r) mean += z(r, c);
      mean /= static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r) var += (z(r, c) - mean) * (z(r, c) - mean);
      const double sd = std::sqrt(var / static_cast<double>(rows));
      ok = ok && std::abs(mean) <= 1e-9 && std::abs(sd - 1.0) <= 1e-9;
    }
    if (ok) ++z_ok;
  }

  const std::vector<std::string> vocab{"cycleway", "residential", "path", "track_grade3", "service"};
  for (std::size_t trial = 0; trial < n; ++trial) {
    const auto base = fixtures::random_graph(gen, {});
    // Relabel with a wider vocabulary, then build a copy with all lengths scaled.
    const auto k = static_cast<std::int64_t>(2 + u(gen) * 6);
    std::vector<Edge> edges = base.edges(), scaled_edges;
    for (auto& e : edges) e.type = RoadType(vocab[static_cast<std::size_t>(u(gen) * vocab.size())]);
    scaled_edges = edges;
    for (auto& e : scaled_edges) e.length_m *= k;
    const RoadNetwork net(base.nodes(), edges), scaled(base.nodes(), scaled_edges);

    std::vector<Walk> user, ref;
    for (int w = 0; w < 3; ++w) user.push_back(fixtures::random_walk(gen, net, 8));
    for (int w = 0; w < 3; ++w) ref.push_back(fixtures::random_walk(gen, net, 8));
    const auto has_length = [&](const std::vector<Walk>& ws) {
      for (const auto& w : ws)
        if (!w.edges.empty()) return true;
      return false;
    };
    if (!has_length(user) || !has_length(ref)) user[0] = ref[0] = walk_from_edges(net, net.edge(0).u, std::vector<EdgeIndex>{0});

    const auto ru = type_shares(user, net), rs = type_shares(ref, net);
    double sum = 0.0;
    for (const auto& [_, v] : ru) sum += v;
    if (std::abs(sum - 1.0) <= 1e-9) ++share_ok;

    const auto v1 = classify_types(ru, rs, net.road_types());
    const auto v2 = classify_types(type_shares(user, scaled), type_shares(ref, scaled), scaled.road_types());
    if (v1.favored == v2.favored && v1.unfavored == v2.unfavored) ++scale_ok;

    // Component weights reconstruct the combined weight for every edge.
    const Alpha a(std::uniform_int_distribution<std::int64_t>(20, 180)(gen), 200);
    const EdgeClassification cls({RoadType(vocab[trial % vocab.size()]), RoadType(vocab[(trial / 5) % vocab.size()])});
    const Weighting wt(a, cls);
    bool ok = true;
    for (const auto& e : net.edges()) {
      const auto c = component_weights(e, cls);
      ok = ok && c.w1 + c.w2 == e.length_m && (c.w1 == 0 || c.w2 == 0);
      ok = ok && a.num * c.w1 + (a.den - a.num) * c.w2 == wt.scaled_edge_weight(e);
      ok = ok && std::abs(a.value() * c.w1 + (1.0 - a.value()) * c.w2 - wt.edge_weight(e)) <= 1e-9 * e.length_m;
    }
    if (ok) ++eq_ok;
  }
  const bool pass = z_ok == n && share_ok == n && scale_ok == n && eq_ok == n;
  return {pass, "z-norm " + std::to_string(z_ok) + "/1000, shares sum " + std::to_string(share_ok) +
                    "/1000, scaling invariance " + std::to_string(scale_ok) + "/1000, weight reconstruction " +
                    std::to_string(eq_ok) + "/1000"};
}

// 9 -------------------------------------------------------------------------
Outcome determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path sample = BIKEPREF_SAMPLE_DIR;
  const auto root = fs::temp_directory_path() / "bikepref_acceptance_determinism";
  fs::remove_all(root);
  std::vector<fs::path> dirs{root / "a", root / "b"};
  for (const auto& d : dirs) {
    auto cfg = pipeline::load_config(sample / "config.toml");
    cfg.out_dir = d;
    pipeline::Pipeline(cfg).run_all();
  }
  const double s = seconds_since(t0) / 2.0;
  std::size_t files = 0, identical = 0;
  for (const auto& e : fs::directory_iterator(dirs[0])) {
    ++files;
    const auto other = dirs[1] / e.path().filename();
    if (fs::exists(other) && csv::read_file(e.path()) == csv::read_file(other)) ++identical;
  }
  std::size_t files_b = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dirs[1])) ++files_b;
  fs::remove_all(root);
  return {files > 0 && identical == files && files_b == files && s < 60.0,
          std::to_string(identical) + "/" + std::to_string(files) + " output files byte-identical; " + fmt(s, 2) +
              " s per run"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"decomposition equals the DP oracle", decomposition_oracle},
      {"Dijkstra equals path enumeration", dijkstra_oracle},
      {"synthetic alpha recovery", alpha_recovery},
      {"closed-form detour ratios", detour_ratios},
      {"contingency table arithmetic", table_one},
      {"triangle threshold", triangle_threshold},
      {"clustering properties", clustering_properties},
      {"normalization and share invariants", invariants},
      {"end-to-end determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << "criterion " << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
