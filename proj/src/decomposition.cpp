#include "bikepref/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bikepref/csv.hpp"

namespace bikepref {

AlphaGrid AlphaGrid::uniform(std::int64_t den, std::int64_t num_min, std::int64_t num_max, std::int64_t step) {
  if (den <= 0 || step <= 0 || num_min < 0 || num_max > den || num_min > num_max)
    throw UsageError("invalid alpha grid");
  AlphaGrid g;
  for (auto p = num_min; p <= num_max; p += step) g.values.emplace_back(p, den);
  return g;
}

AlphaGrid AlphaGrid::parse(std::string_view spec) {
  if (spec.find(':') != std::string_view::npos) {
    std::vector<std::int64_t> parts;
    std::size_t start = 0;
    while (start <= spec.size()) {
      auto end = spec.find(':', start);
      if (end == std::string_view::npos) end = spec.size();
      try {
        parts.push_back(std::stoll(std::string(spec.substr(start, end - start))));
      } catch (const std::exception&) {
        throw UsageError("malformed alpha grid '" + std::string(spec) + "'");
      }
      start = end + 1;
    }
    if (parts.size() < 3 || parts.size() > 4) throw UsageError("alpha grid must be den:min:max[:step]");
    return uniform(parts[0], parts[1], parts[2], parts.size() == 4 ? parts[3] : 1);
  }
  // Decimal list; each value becomes an exact fraction over a power of ten.
  AlphaGrid g;
  for (const auto& field : csv::split_line(spec)) {
    if (field.empty()) continue;
    const auto dot = field.find('.');
    const std::size_t decimals = dot == std::string::npos ? 0 : field.size() - dot - 1;
    std::string digits = field;
    if (dot != std::string::npos) digits.erase(dot, 1);
    std::int64_t den = 1;
    for (std::size_t i = 0; i < decimals; ++i) den *= 10;
    try {
      g.values.emplace_back(std::stoll(digits), den);
    } catch (const std::exception&) {
      throw UsageError("malformed alpha value '" + field + "'");
    }
  }
  if (g.values.empty()) throw UsageError("empty alpha grid");
  std::sort(g.values.begin(), g.values.end());
  return g;
}

Decomposition min_decomposition(const RoadNetwork& net, std::span<const std::int64_t> costs, const Walk& walk) {
  validate_walk(net, walk);
  Decomposition out;
  const std::size_t last = walk.nodes.empty() ? 0 : walk.nodes.size() - 1;
  std::size_t start = 0;
  while (start < last) {
    DijkstraSearch<std::int64_t> search(net, TableCost<std::int64_t>{costs}, walk.nodes[start]);
    std::int64_t prefix = 0;
    std::size_t j = start + 1;
    bool violated = false;
    for (; j <= last; ++j) {
      prefix += costs[walk.edges[j - 1]];
      const auto d = search.distance_to(walk.nodes[j]);
      if (*d < prefix) {
        violated = true;
        break;
      }
    }
    if (!violated) break;
    if (j == start + 1) {
      out.non_optimal_atoms.push_back(start);
      start = j;
    } else {
      start = j - 1;
    }
    if (start < last) out.milestones.push_back(start);
  }
  return out;
}

Decomposition min_decomposition(const RoadNetwork& net, const EdgeClassification& cls, Alpha alpha, const Walk& walk) {
  const auto costs = Weighting(alpha, cls).scaled_costs(net);
  return min_decomposition(net, costs, walk);
}

AlphaProfile alpha_sweep(const RoadNetwork& net, const EdgeClassification& cls, const Walk& walk,
                         const AlphaGrid& grid, std::string trajectory_id) {
  if (grid.values.empty()) throw UsageError("alpha_sweep: empty grid");
  AlphaProfile p;
  p.trajectory_id = std::move(trajectory_id);
  p.grid = grid.values;
  p.milestones.reserve(grid.values.size());
  for (const auto& a : grid.values) {
    const auto d = min_decomposition(net, cls, a, walk);
    p.milestones.push_back(d.milestones.size());
    p.atoms.push_back(d.non_optimal_atoms.size());
  }
  p.min_milestones = *std::min_element(p.milestones.begin(), p.milestones.end());
  for (std::size_t i = 0; i < p.grid.size(); ++i)
    if (p.milestones[i] == p.min_milestones) p.optimal_alphas.push_back(p.grid[i]);
  return p;
}

std::string_view to_string(ConsistencyCategory c) {
  switch (c) {
    case ConsistencyCategory::low_only: return "low_only";
    case ConsistencyCategory::high_only: return "high_only";
    case ConsistencyCategory::other: return "other";
  }
  return "other";
}

ConsistencyCategory consistency_category(const AlphaProfile& profile) {
  bool below = false, above = false;
  for (const auto& a : profile.optimal_alphas) {
    const int c = a.compare_half();
    below |= c < 0;
    above |= c > 0;
  }
  if (below && !above) return ConsistencyCategory::low_only;
  if (above && !below) return ConsistencyCategory::high_only;
  return ConsistencyCategory::other;
}

GroupAggregate group_aggregate(std::span<const AlphaProfile> profiles) {
  if (profiles.empty()) throw UsageError("group_aggregate: no profiles");
  GroupAggregate g;
  g.grid = profiles.front().grid;
  g.trajectories = profiles.size();
  g.mean_relative_percent.assign(g.grid.size(), 0.0);
  std::size_t low = 0, high = 0, other = 0;
  for (const auto& p : profiles) {
    if (p.grid.size() != g.grid.size() || !std::equal(p.grid.begin(), p.grid.end(), g.grid.begin()))
      throw UsageError("group_aggregate: profiles use different alpha grids");
    const double base = static_cast<double>(p.min_milestones + 1);
    for (std::size_t i = 0; i < g.grid.size(); ++i)
      g.mean_relative_percent[i] += 100.0 * static_cast<double>(p.milestones[i] + 1) / base;
    switch (consistency_category(p)) {
      case ConsistencyCategory::low_only: ++low; break;
      case ConsistencyCategory::high_only: ++high; break;
      case ConsistencyCategory::other: ++other; break;
    }
  }
  const auto n = static_cast<double>(profiles.size());
  for (auto& v : g.mean_relative_percent) v /= n;
  g.distribution = {static_cast<double>(low) / n, static_cast<double>(high) / n, static_cast<double>(other) / n};

  const double lo = *std::min_element(g.mean_relative_percent.begin(), g.mean_relative_percent.end());
  const double tol = 1e-9 * std::max(1.0, lo);
  // |alpha - 1/2| compared exactly as |2 num - den| / den.
  const auto closer_to_half = [](const Alpha& a, const Alpha& b) {
    const auto da = std::abs(2 * a.num - a.den) * b.den;
    const auto db = std::abs(2 * b.num - b.den) * a.den;
    if (da != db) return da < db;
    return a < b;
  };
  bool have = false;
  for (std::size_t i = 0; i < g.grid.size(); ++i) {
    if (g.mean_relative_percent[i] > lo + tol) continue;
    if (!have || closer_to_half(g.grid[i], g.argmin)) {
      g.argmin = g.grid[i];
      have = true;
    }
  }
  return g;
}

double max_detour_ratio(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("max_detour_ratio: alpha must lie in (0, 1)");
  return (1.0 - alpha) / alpha;
}

std::string_view to_string(ModelVerdict v) {
  switch (v) {
    case ModelVerdict::consistent: return "consistent";
    case ModelVerdict::boundary: return "boundary";
    case ModelVerdict::inconsistent: return "inconsistent";
  }
  return "boundary";
}

GroupPreferenceModel build_model(const std::string& group, const RoadTypeSet& favored, const GroupAggregate& aggregate) {
  GroupPreferenceModel m;
  m.group = group;
  m.favored_types = favored;
  m.alpha = aggregate.argmin;
  m.curve_alphas = aggregate.grid;
  m.curve_percent = aggregate.mean_relative_percent;
  m.distribution = aggregate.distribution;
  m.trajectories = aggregate.trajectories;
  const int c = m.alpha.compare_half();
  m.verdict = c < 0 ? ModelVerdict::consistent : (c == 0 ? ModelVerdict::boundary : ModelVerdict::inconsistent);
  return m;
}

}  // namespace bikepref
