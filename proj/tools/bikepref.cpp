#include <CLI11.hpp>

#include <iostream>
#include <map>

#include <json.hpp>

#include "bikepref/errors.hpp"
#include "bikepref/pipeline.hpp"

using namespace bikepref;
using namespace bikepref::pipeline;

namespace {

LonLat parse_lonlat(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw UsageError("expected lon,lat but got '" + s + "'");
  try {
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw UsageError("expected lon,lat but got '" + s + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infer bicyclists' routing preferences from GPS trajectories"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_file;
  app.add_option("--config", config_file, "key = value configuration file; flags override it");

  // Flag name -> config key. Values are applied through set_option so that
  // the file and the command line share one validation path.
  const std::vector<std::pair<std::string, std::string>> scalar_flags{
      {"--network", "network"},
      {"--nodes", "nodes"},
      {"--landuse", "landuse"},
      {"--activities", "activities"},
      {"--forbidden-types", "forbidden_types"},
      {"--max-snap-distance", "max_snap_distance"},
      {"--sigma-gps", "sigma_gps"},
      {"--max-candidates", "max_candidates"},
      {"--buffer-radius", "buffer_radius"},
      {"--sample-step", "sample_step"},
      {"--k", "k"},
      {"--restarts", "restarts"},
      {"--k-sweep-max", "k_sweep_max"},
      {"--seed", "seed"},
      {"--relieff-k", "relieff_k"},
      {"--quantile", "quantile"},
      {"--alpha-grid", "alpha_grid"},
      {"--out-dir", "out_dir"},
      {"--threads", "threads"},
  };
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  for (const auto& [flag, key] : scalar_flags) options[key] = app.add_option(flag, values[key]);
  std::vector<std::string> trajectories;
  auto* traj_opt = app.add_option("--trajectories", trajectories, "GPX/CSV files or directories");

  auto* match = app.add_subcommand("match", "Map-match trajectories onto the network");
  auto* features = app.add_subcommand("features", "Extract per-trajectory features");
  auto* cluster = app.add_subcommand("cluster", "Cluster trajectories and rank features");
  auto* classify = app.add_subcommand("classify", "Favored/unfavored road types per group");
  auto* infer = app.add_subcommand("infer", "Sweep alpha and build group models");
  std::string group;
  infer->add_option("--group", group, "Only this group");
  auto* route_cmd = app.add_subcommand("route", "Route with a group model");
  std::string model_path, from, to;
  route_cmd->add_option("--model", model_path, "model_<group>.json")->required();
  route_cmd->add_option("--from", from, "lon,lat")->required();
  route_cmd->add_option("--to", to, "lon,lat")->required();
  auto* all = app.add_subcommand("all", "match, features, cluster, classify and infer");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    PipelineConfig cfg = config_file.empty() ? PipelineConfig{} : load_config(config_file);
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) set_option(cfg, key, values[key]);
    if (traj_opt->count() > 0) {
      cfg.trajectories.clear();
      for (const auto& t : trajectories) cfg.trajectories.emplace_back(t);
    }

    Pipeline p(cfg, &std::cerr);
    if (*match) {
      p.run_match();
      std::cout << "matched " << p.matched().size() << " trajectories -> " << cfg.out_dir.string() << "\n";
    } else if (*features) {
      p.run_features();
    } else if (*cluster) {
      p.run_cluster();
    } else if (*classify) {
      p.run_classify();
    } else if (*infer || *all) {
      if (*all) {
        p.run_match();
        p.run_features();
        p.run_cluster();
        p.run_classify();
      }
      const auto models = p.run_infer(*infer && !group.empty() ? std::optional(group) : std::nullopt);
      for (const auto& m : models)
        std::cout << m.group << ": alpha=" << m.alpha.value() << " verdict=" << to_string(m.verdict)
                  << " trajectories=" << m.trajectories << "\n";
    } else if (*route_cmd) {
      const auto r = p.run_route(model_path, parse_lonlat(from), parse_lonlat(to));
      const auto& net = p.network();
      std::cout << net.node(r.from).id << " -> " << net.node(r.to).id << ": w_alpha=" << r.weighted_cost
                << " length_m=" << r.length_m << " shortest_length_m=" << r.shortest_length_m << "\n";
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
