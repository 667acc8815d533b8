#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "bikepref/clustering.hpp"
#include "bikepref/decomposition.hpp"
#include "bikepref/features.hpp"
#include "bikepref/matching.hpp"
#include "bikepref/network.hpp"
#include "bikepref/preference.hpp"

namespace bikepref::pipeline {

struct PipelineConfig {
  std::filesystem::path network;
  std::optional<std::filesystem::path> nodes;  // node CSV for edge-list networks
  std::optional<std::filesystem::path> landuse;
  std::vector<std::filesystem::path> trajectories;
  std::optional<std::filesystem::path> activities;
  RoadTypeSet forbidden_types;

  MatchParams match;
  FeatureParams features;

  std::size_t k = 3;
  std::size_t restarts = 20;
  std::size_t k_sweep_max = 6;
  std::uint64_t seed = 1;
  std::size_t relieff_k = 100;
  double quantile = 0.9;
  std::string alpha_grid = "200:20:180";

  std::filesystem::path out_dir = "bikepref_out";
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Sets one option by its config-file key; throws UsageError for unknown keys
/// or malformed values. Relative paths are resolved against `base_dir`.
void set_option(PipelineConfig& cfg, std::string_view key, std::string_view value,
                const std::filesystem::path& base_dir = {});

/// Reads `key = value` lines (TOML-style: `#` comments, optional quotes,
/// `[a, b]` or comma-separated lists). Paths are relative to the file.
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical `key=value` listing of everything that influences results
/// (output directory and thread count excluded).
std::string canonical_config(const PipelineConfig& cfg);

/// 64-bit FNV-1a of the canonical listing, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots; the first exception (lowest index) is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

struct Coverage {
  std::size_t edges_total = 0;
  std::size_t edges_used = 0;
  double length_total = 0.0;
  double length_used = 0.0;
};

Coverage coverage(const RoadNetwork& net, std::span<const MatchedPath> matched);

/// Share analysis, alpha sweep and aggregate for one group of matched paths.
struct GroupInference {
  TypeShareReport shares;
  std::vector<AlphaProfile> profiles;
  GroupAggregate aggregate;
  GroupPreferenceModel model;
};

/// Sweeps with the favored set given, or the one derived from the group's
/// own share comparison when `favored` is empty.
GroupInference infer_group(const RoadNetwork& net, const std::string& group, std::span<const MatchedPath> matched,
                           const AlphaGrid& grid, unsigned threads,
                           const std::optional<RoadTypeSet>& favored = std::nullopt);

struct RouteResult {
  NodeIndex from = kNoNode;
  NodeIndex to = kNoNode;
  Walk walk;
  Alpha alpha;
  double weighted_cost = 0.0;        // w_alpha(P)
  std::int64_t length_m = 0;         // geometric length of P
  std::int64_t shortest_length_m = 0;  // geometric shortest path between the same nodes
};

/// Snaps each position to the nearest edge within `max_snap_distance`, then
/// to that edge's closer endpoint, and routes under the weighting.
RouteResult route(const RoadNetwork& net, const Weighting& weighting, LonLat from, LonLat to,
                  double max_snap_distance);

struct ModelFile {
  std::string group;
  RoadTypeSet favored_types;
  Alpha alpha;
};

ModelFile read_model(const std::filesystem::path& path);

/// Stage runner. Each stage persists flat files in the output directory and
/// loads the files of earlier stages, running those stages first when their
/// outputs are missing.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg, std::ostream* log = nullptr);

  const PipelineConfig& config() const { return cfg_; }
  const std::string& hash() const { return hash_; }
  const RoadNetwork& network();

  void run_match();
  void run_features();
  void run_cluster();
  void run_classify();
  /// All groups when `group` is empty.
  std::vector<GroupPreferenceModel> run_infer(const std::optional<std::string>& group = std::nullopt);
  RouteResult run_route(const std::filesystem::path& model, LonLat from, LonLat to);
  void run_all();

  struct MatchedRecord {
    MatchedPath path;
    std::string source_id;
    std::optional<std::string> activity;
    std::size_t first_point = 0;
    std::size_t end_point = 0;
  };

  const std::vector<MatchedRecord>& matched();
  /// Group name per matched trajectory id, from the cluster assignment.
  const std::map<std::string, std::string>& groups();

 private:
  std::filesystem::path out(const std::string& name) const { return cfg_.out_dir / name; }
  std::string csv_stamp() const;
  void note(const std::string& msg);
  std::vector<Trajectory> load_inputs();
  void load_matched();
  void load_features();
  void load_groups();
  RoadTypeSet load_favored(const std::string& group);

  PipelineConfig cfg_;
  std::ostream* log_;
  std::string hash_;
  std::optional<RoadNetwork> net_;
  std::optional<std::vector<MatchedRecord>> matched_;
  std::optional<FeatureMatrix> features_;
  std::optional<std::map<std::string, std::string>> groups_;
};

/// File-name-safe form of a group name.
std::string file_token(std::string_view name);

}  // namespace bikepref::pipeline
