#include "bikepref/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "bikepref/errors.hpp"

namespace bikepref {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Uniform in [0, 1) from the top 53 bits; identical on every standard library.
double uniform01(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

std::size_t nearest_centroid(std::span<const double> p, const Matrix& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(p, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

struct RunResult {
  Matrix centroids;
  std::vector<std::size_t> assignment;
  double sse = 0.0;
  std::size_t iterations = 0;
  std::vector<double> history;
  std::size_t reseeded = 0;
};

// `order` lists row indices in ascending id order.
Matrix seed_plus_plus(const Matrix& x, std::span<const std::size_t> order, std::size_t k, std::mt19937_64& gen) {
  const std::size_t n = order.size();
  Matrix c(k, x.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  auto pick = static_cast<std::size_t>(uniform01(gen) * static_cast<double>(n));
  pick = std::min(pick, n - 1);
  for (std::size_t j = 0; j < k; ++j) {
    std::copy_n(x.row(order[pick]).begin(), x.cols(), c.row(j).begin());
    if (j + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(order[i]), c.row(j)));
      total += d2[i];
    }
    if (total <= 0.0) {
      pick = std::min(static_cast<std::size_t>(uniform01(gen) * static_cast<double>(n)), n - 1);
      continue;
    }
    const double target = uniform01(gen) * total;
    double acc = 0.0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += d2[i];
      if (acc > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }
  return c;
}

RunResult lloyd(const Matrix& x, std::span<const std::size_t> order, Matrix centroids, std::size_t max_iter) {
  const std::size_t k = centroids.rows();
  const std::size_t d = x.cols();
  RunResult r;
  r.assignment.assign(x.rows(), 0);
  for (std::size_t i : order) r.assignment[i] = nearest_centroid(x.row(i), centroids);
  r.history.push_back(within_cluster_sse(x, centroids, r.assignment));

  const auto update = [&] {
    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i : order) {
      const auto c = r.assignment[i];
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) sums(c, j) += x(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    }
    // Re-seed empty clusters at the point farthest from its own centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = order.front();
      double far_d = -1.0;
      for (std::size_t i : order) {
        if (counts[r.assignment[i]] <= 1) continue;
        const double dd = squared_distance(x.row(i), centroids.row(r.assignment[i]));
        if (dd > far_d) {
          far_d = dd;
          far = i;
        }
      }
      --counts[r.assignment[far]];
      r.assignment[far] = c;
      counts[c] = 1;
      std::copy_n(x.row(far).begin(), d, centroids.row(c).begin());
      ++r.reseeded;
    }
  };

  for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
    update();
    bool changed = false;
    for (std::size_t i : order) {
      const auto c = nearest_centroid(x.row(i), centroids);
      if (c != r.assignment[i]) {
        r.assignment[i] = c;
        changed = true;
      }
    }
    r.history.push_back(within_cluster_sse(x, centroids, r.assignment));
    if (!changed) break;
  }
  r.iterations = std::min(r.iterations, max_iter);
  // Leave centroids at the means of the final assignment.
  update();
  r.centroids = std::move(centroids);
  r.sse = within_cluster_sse(x, r.centroids, r.assignment);
  return r;
}

std::vector<std::size_t> sorted_order(std::span<const std::string> ids) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (ids[order[i]] == ids[order[i - 1]]) throw UsageError("kmeans: duplicate row id '" + ids[order[i]] + "'");
  return order;
}

}  // namespace

double within_cluster_sse(const Matrix& x, const Matrix& centroids, std::span<const std::size_t> assignment) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += squared_distance(x.row(i), centroids.row(assignment[i]));
  return s;
}

ClusterModel kmeans(const Matrix& x, std::span<const std::string> ids, const KMeansParams& params) {
  if (params.k < 1) throw UsageError("kmeans: k must be at least 1");
  if (params.k > x.rows())
    throw UsageError("kmeans: k = " + std::to_string(params.k) + " exceeds the number of rows (" +
                     std::to_string(x.rows()) + ")");
  if (ids.size() != x.rows()) throw UsageError("kmeans: one id per row required");
  const auto order = sorted_order(ids);
  const std::size_t restarts = std::max<std::size_t>(1, params.restarts);

  ClusterModel best;
  bool have = false;
  for (std::size_t r = 0; r < restarts; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(params.seed), static_cast<std::uint32_t>(params.seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 gen(seq);
    auto run = lloyd(x, order, seed_plus_plus(x, order, params.k, gen), params.max_iterations);
    if (!have || run.sse < best.sse) {
      best.centroids = std::move(run.centroids);
      best.assignment = std::move(run.assignment);
      best.sse = run.sse;
      best.best_restart = r;
      best.iterations = run.iterations;
      best.sse_history = std::move(run.history);
      best.reseeded = run.reseeded;
      have = true;
    }
  }
  best.k = params.k;
  best.seed = params.seed;
  best.restarts = restarts;
  return best;
}

ClusterModel kmeans(const Matrix& x, const KMeansParams& params) {
  std::vector<std::string> ids(x.rows());
  const auto width = std::to_string(x.rows()).size();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto s = std::to_string(i);
    ids[i] = std::string(width - s.size(), '0') + s;
  }
  return kmeans(x, ids, params);
}

std::vector<double> sse_sweep(const Matrix& x, std::span<const std::string> ids, const KMeansParams& params,
                              std::size_t k_max) {
  std::vector<double> out;
  for (std::size_t k = 1; k <= std::min(k_max, x.rows()); ++k) {
    auto p = params;
    p.k = k;
    out.push_back(kmeans(x, ids, p).sse);
  }
  return out;
}

ReliefResult relieff(const Matrix& x, std::span<const std::size_t> labels, std::size_t k_neighbors) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (labels.size() != n) throw UsageError("relieff: one label per row required");
  if (k_neighbors < 1) throw UsageError("relieff: k_neighbors must be at least 1");

  std::vector<std::size_t> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw UsageError("relieff: importance undefined for a single class");

  std::vector<std::size_t> class_of(n);
  std::vector<std::size_t> class_size(classes.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    class_of[i] = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());
    ++class_size[class_of[i]];
  }

  std::vector<double> range(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      lo = std::min(lo, x(i, j));
      hi = std::max(hi, x(i, j));
    }
    range[j] = hi - lo;
  }
  const auto diff = [&](std::size_t j, std::size_t a, std::size_t b) {
    return range[j] > 0.0 ? std::abs(x(a, j) - x(b, j)) / range[j] : 0.0;
  };
  const auto dist = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += diff(j, a, b);
    return s;
  };

  ReliefResult out;
  out.weights.assign(d, 0.0);
  const double m = static_cast<double>(n);
  std::vector<std::pair<double, std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ci = class_of[i];
    const double p_own = static_cast<double>(class_size[ci]) / m;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      members.clear();
      for (std::size_t o = 0; o < n; ++o)
        if (o != i && class_of[o] == c) members.emplace_back(dist(i, o), o);
      if (members.empty()) continue;
      std::size_t kk = k_neighbors;
      if (members.size() < kk) {
        kk = members.size();
        out.neighbors_lowered = true;
      }
      std::partial_sort(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(kk), members.end());
      double scale = 1.0 / (m * static_cast<double>(kk));
      if (c == ci) {
        scale = -scale;
      } else {
        scale *= (static_cast<double>(class_size[c]) / m) / (1.0 - p_own);
      }
      for (std::size_t h = 0; h < kk; ++h)
        for (std::size_t j = 0; j < d; ++j) out.weights[j] += scale * diff(j, i, members[h].second);
    }
  }
  return out;
}

double quantile_linear(std::vector<double> values, double q) {
  if (values.empty()) throw UsageError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<std::size_t> select_top_features(std::span<const double> weights, double quantile) {
  if (weights.empty()) throw UsageError("select_top_features: no weights");
  if (!(quantile > 0.0 && quantile < 1.0)) throw UsageError("select_top_features: quantile must lie in (0, 1)");
  const double cut = quantile_linear({weights.begin(), weights.end()}, quantile);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] >= cut) out.push_back(i);
  return out;
}

std::size_t ContingencyTable::label_total(std::size_t label) const {
  return std::accumulate(counts[label].begin(), counts[label].end(), std::size_t{0});
}

std::size_t ContingencyTable::cluster_total(std::size_t cluster) const {
  std::size_t s = 0;
  for (const auto& row : counts) s += row[cluster];
  return s;
}

double ContingencyTable::recall(std::size_t label) const {
  const auto total_l = label_total(label);
  if (total_l == 0) return 0.0;
  std::size_t hit = 0;
  for (std::size_t c = 0; c < clusters.size(); ++c)
    if (cluster_label[c] == label) hit += counts[label][c];
  return static_cast<double>(hit) / static_cast<double>(total_l);
}

double ContingencyTable::precision(std::size_t cluster) const {
  const auto total_c = cluster_total(cluster);
  if (total_c == 0 || !cluster_label[cluster]) return 0.0;
  return static_cast<double>(counts[*cluster_label[cluster]][cluster]) / static_cast<double>(total_c);
}

ContingencyTable contingency_from_counts(std::vector<std::string> labels, std::vector<std::string> clusters,
                                         std::vector<std::vector<std::size_t>> counts) {
  ContingencyTable t;
  t.labels = std::move(labels);
  t.clusters = std::move(clusters);
  t.counts = std::move(counts);
  const std::size_t nl = t.labels.size();
  const std::size_t nc = t.clusters.size();
  if (t.counts.size() != nl) throw UsageError("contingency: counts need one row per label");
  for (const auto& row : t.counts) {
    if (row.size() != nc) throw UsageError("contingency: counts need one column per cluster");
    t.total += std::accumulate(row.begin(), row.end(), std::size_t{0});
  }
  t.cluster_label.assign(nc, std::nullopt);

  std::size_t matched = 0;
  if (nl == nc && nc <= 9) {
    t.mapping_policy = "optimal";
    std::vector<std::size_t> perm(nc);  // perm[cluster] = label
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> best = perm;
    std::size_t best_score = 0;
    bool first = true;
    do {
      std::size_t score = 0;
      for (std::size_t c = 0; c < nc; ++c) score += t.counts[perm[c]][c];
      if (first || score > best_score) {
        best_score = score;
        best = perm;
        first = false;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (std::size_t c = 0; c < nc; ++c) t.cluster_label[c] = best[c];
    matched = best_score;
  } else {
    t.mapping_policy = "greedy";
    std::vector<bool> label_used(nl, false), cluster_used(nc, false);
    for (std::size_t step = 0; step < std::min(nl, nc); ++step) {
      std::size_t bl = 0, bc = 0;
      bool found = false;
      for (std::size_t l = 0; l < nl; ++l)
        for (std::size_t c = 0; c < nc; ++c) {
          if (label_used[l] || cluster_used[c]) continue;
          if (!found || t.counts[l][c] > t.counts[bl][bc]) {
            bl = l;
            bc = c;
            found = true;
          }
        }
      if (!found) break;
      label_used[bl] = cluster_used[bc] = true;
      t.cluster_label[bc] = bl;
      matched += t.counts[bl][bc];
    }
  }
  t.agreement = t.total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(t.total);
  return t;
}

ContingencyTable contingency(std::span<const std::optional<std::string>> user_labels,
                             std::span<const std::size_t> assignment, std::size_t k) {
  if (user_labels.size() != assignment.size()) throw UsageError("contingency: label and assignment sizes differ");
  std::set<std::string> label_set;
  for (const auto& l : user_labels)
    if (l) label_set.insert(*l);
  std::vector<std::string> labels(label_set.begin(), label_set.end());
  std::vector<std::string> clusters;
  for (std::size_t c = 0; c < k; ++c) clusters.push_back(std::to_string(c));
  std::vector<std::vector<std::size_t>> counts(labels.size(), std::vector<std::size_t>(k, 0));
  std::size_t unlabeled = 0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (!user_labels[i]) {
      ++unlabeled;
      continue;
    }
    if (assignment[i] >= k) throw UsageError("contingency: cluster index out of range");
    const auto l = static_cast<std::size_t>(std::lower_bound(labels.begin(), labels.end(), *user_labels[i]) - labels.begin());
    ++counts[l][assignment[i]];
  }
  auto t = contingency_from_counts(std::move(labels), std::move(clusters), std::move(counts));
  t.unlabeled = unlabeled;
  return t;
}

double clustering_agreement(std::span<const std::size_t> a, std::span<const std::size_t> b, std::size_t k) {
  std::vector<std::optional<std::string>> labels;
  labels.reserve(a.size());
  for (auto v : a) labels.emplace_back(std::to_string(v));
  // Labels present may be fewer than k; pad so the optimal bijection applies.
  auto t = contingency(labels, b, k);
  if (t.labels.size() < k) {
    for (std::size_t c = 0; c < k; ++c) {
      const auto name = std::to_string(c);
      if (std::find(t.labels.begin(), t.labels.end(), name) == t.labels.end()) {
        t.labels.push_back(name);
        t.counts.emplace_back(k, 0);
      }
    }
    t = contingency_from_counts(t.labels, t.clusters, t.counts);
  }
  return t.agreement;
}

std::string format_contingency(const ContingencyTable& t) {
  std::ostringstream os;
  std::size_t w = 8;
  for (const auto& l : t.labels) w = std::max(w, l.size() + 2);
  const auto cluster_name = [&](std::size_t c) {
    return t.cluster_label[c] ? t.clusters[c] + "->" + t.labels[*t.cluster_label[c]] : t.clusters[c];
  };
  for (std::size_t c = 0; c < t.clusters.size(); ++c) w = std::max(w, cluster_name(c).size() + 2);

  os << std::left << std::setw(static_cast<int>(w)) << "label";
  for (std::size_t c = 0; c < t.clusters.size(); ++c) os << std::setw(static_cast<int>(w)) << cluster_name(c);
  os << "sum\n";
  for (std::size_t l = 0; l < t.labels.size(); ++l) {
    os << std::setw(static_cast<int>(w)) << t.labels[l];
    for (std::size_t c = 0; c < t.clusters.size(); ++c) os << std::setw(static_cast<int>(w)) << t.counts[l][c];
    os << t.label_total(l) << " (" << std::fixed << std::setprecision(0) << 100.0 * t.recall(l) << "%)\n";
    os.unsetf(std::ios::fixed);
  }
  os << std::setw(static_cast<int>(w)) << "sum";
  for (std::size_t c = 0; c < t.clusters.size(); ++c) {
    std::ostringstream cell;
    cell << t.cluster_total(c) << " (" << std::fixed << std::setprecision(0) << 100.0 * t.precision(c) << "%)";
    os << std::setw(static_cast<int>(w)) << cell.str();
  }
  os << t.total << " (" << std::fixed << std::setprecision(0) << 100.0 * t.agreement << "%)\n";
  os << "mapping: " << t.mapping_policy << ", unlabeled excluded: " << t.unlabeled << "\n";
  return os.str();
}

}  // namespace bikepref
