#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bikepref/clustering.hpp"
#include "bikepref/decomposition.hpp"
#include "bikepref/features.hpp"
#include "bikepref/pipeline.hpp"
#include "bikepref/preference.hpp"

namespace py = pybind11;
using namespace bikepref;

namespace {

RoadTypeSet to_types(const std::vector<std::string>& names) {
  RoadTypeSet out;
  for (const auto& n : names) out.insert(RoadType(n));
  return out;
}

std::vector<std::string> from_types(const RoadTypeSet& types) {
  std::vector<std::string> out;
  for (const auto& t : types) out.push_back(t.str());
  return out;
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  for (const auto& r : rows)
    if (!rows.empty() && r.size() != rows.front().size()) throw UsageError("rows must have equal length");
  return Matrix::from_rows(rows);
}

std::vector<std::vector<double>> from_matrix(const Matrix& m) {
  std::vector<std::vector<double>> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Routing-preference inference from bicycle GPS trajectories";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);

  py::class_<Alpha>(m, "Alpha")
      .def(py::init<std::int64_t, std::int64_t>(), py::arg("num"), py::arg("den"))
      .def_readonly("num", &Alpha::num)
      .def_readonly("den", &Alpha::den)
      .def("value", &Alpha::value)
      .def("__float__", &Alpha::value)
      .def("__repr__", [](const Alpha& a) { return std::to_string(a.num) + "/" + std::to_string(a.den); });

  py::class_<RoadNetwork>(m, "RoadNetwork")
      .def_property_readonly("num_nodes", &RoadNetwork::num_nodes)
      .def_property_readonly("num_edges", &RoadNetwork::num_edges)
      .def("road_types", [](const RoadNetwork& n) { return from_types(n.road_types()); })
      .def("total_length", &RoadNetwork::total_length)
      .def("node_id", [](const RoadNetwork& n, NodeIndex i) { return n.node(i).id; })
      .def("node_index", [](const RoadNetwork& n, const std::string& id) { return n.find_node(id); })
      .def("edge", [](const RoadNetwork& n, EdgeIndex e) {
        const auto& ed = n.edge(e);
        return py::dict(py::arg("id") = ed.id, py::arg("u") = ed.u, py::arg("v") = ed.v,
                        py::arg("length_m") = ed.length_m, py::arg("road_type") = ed.type.str());
      });

  m.def(
      "load_network",
      [](const std::filesystem::path& path, const std::vector<std::string>& forbidden,
         const std::optional<std::filesystem::path>& nodes) { return load_network(path, to_types(forbidden), nodes); },
      py::arg("path"), py::arg("forbidden_types") = std::vector<std::string>{}, py::arg("nodes_csv") = py::none());

  m.def(
      "shortest_path",
      [](const RoadNetwork& net, NodeIndex s, NodeIndex t, std::optional<std::vector<std::string>> favored,
         std::optional<Alpha> alpha) -> py::object {
        std::vector<EdgeIndex> edges;
        double cost = 0.0;
        if (favored && alpha) {
          const Weighting w(*alpha, EdgeClassification(to_types(*favored)));
          const auto costs = w.scaled_costs(net);
          const auto r = shortest_path(net, TableCost<std::int64_t>{costs}, s, t);
          if (!r.reachable) return py::none();
          edges = r.walk.edges;
          cost = static_cast<double>(r.cost) / static_cast<double>(w.scale());
        } else {
          const auto r = shortest_path(net, LengthCost{&net}, s, t);
          if (!r.reachable) return py::none();
          edges = r.walk.edges;
          cost = static_cast<double>(r.cost);
        }
        return py::make_tuple(cost, edges);
      },
      py::arg("net"), py::arg("source"), py::arg("target"), py::arg("favored_types") = py::none(),
      py::arg("alpha") = py::none(),
      "(cost, edge indices) of a geometric or w_alpha shortest path; None when unreachable.");

  m.def(
      "edge_weight",
      [](std::int64_t length, bool favored, const Alpha& a) {
        Edge e;
        e.length_m = length;
        e.type = RoadType(favored ? "favored" : "unfavored");
        return Weighting(a, EdgeClassification({RoadType("favored")})).edge_weight(e);
      },
      py::arg("length_m"), py::arg("favored"), py::arg("alpha"));

  m.def(
      "min_decomposition",
      [](const RoadNetwork& net, const std::vector<std::string>& favored, const Alpha& a, NodeIndex start,
         const std::vector<EdgeIndex>& edges) {
        const auto d = min_decomposition(net, EdgeClassification(to_types(favored)), a, walk_from_edges(net, start, edges));
        return d.milestones;
      },
      py::arg("net"), py::arg("favored_types"), py::arg("alpha"), py::arg("start"), py::arg("edges"),
      "Milestone positions (indices into the walk's node sequence).");

  m.def("max_detour_ratio", &max_detour_ratio, py::arg("alpha"));

  m.def(
      "znormalize", [](const std::vector<std::vector<double>>& rows) { return from_matrix(znormalize(to_matrix(rows)).values); },
      py::arg("rows"));

  m.def(
      "kmeans",
      [](const std::vector<std::vector<double>>& rows, std::size_t k, std::size_t restarts, std::uint64_t seed) {
        const auto model = kmeans(to_matrix(rows), KMeansParams{k, restarts, seed, 300});
        return py::make_tuple(model.assignment, model.sse);
      },
      py::arg("rows"), py::arg("k"), py::arg("restarts") = 20, py::arg("seed") = 1,
      "(assignment, sse) of the best restart.");

  m.def(
      "relieff",
      [](const std::vector<std::vector<double>>& rows, const std::vector<std::size_t>& labels, std::size_t k) {
        return relieff(to_matrix(rows), labels, k).weights;
      },
      py::arg("rows"), py::arg("labels"), py::arg("k_neighbors") = 10);

  m.def(
      "contingency_agreement",
      [](std::vector<std::vector<std::size_t>> counts) {
        std::vector<std::string> labels, clusters;
        for (std::size_t i = 0; i < counts.size(); ++i) labels.push_back(std::to_string(i));
        for (std::size_t j = 0; j < (counts.empty() ? 0 : counts.front().size()); ++j) clusters.push_back(std::to_string(j));
        return contingency_from_counts(labels, clusters, std::move(counts)).agreement;
      },
      py::arg("counts"), "Agreement after the best cluster-to-label mapping; counts[label][cluster].");

  m.def(
      "config_hash", [](const std::filesystem::path& cfg) { return pipeline::config_hash(pipeline::load_config(cfg)); },
      py::arg("config"));

  m.def(
      "run_all",
      [](const std::filesystem::path& config, const std::filesystem::path& out_dir,
         std::optional<std::uint64_t> seed) {
        auto cfg = pipeline::load_config(config);
        cfg.out_dir = out_dir;
        if (seed) cfg.seed = *seed;
        py::gil_scoped_release release;
        pipeline::Pipeline p(cfg);
        p.run_all();
        return pipeline::config_hash(cfg);
      },
      py::arg("config"), py::arg("out_dir"), py::arg("seed") = py::none(),
      "Runs every stage into out_dir and returns the config hash.");

  m.def(
      "route",
      [](const std::filesystem::path& config, const std::filesystem::path& model, std::pair<double, double> from,
         std::pair<double, double> to, const std::filesystem::path& out_dir) {
        auto cfg = pipeline::load_config(config);
        cfg.out_dir = out_dir;
        pipeline::Pipeline p(cfg);
        const auto r = p.run_route(model, {from.first, from.second}, {to.first, to.second});
        return py::dict(py::arg("from_node") = p.network().node(r.from).id,
                        py::arg("to_node") = p.network().node(r.to).id, py::arg("w_alpha_cost") = r.weighted_cost,
                        py::arg("length_m") = r.length_m, py::arg("shortest_length_m") = r.shortest_length_m,
                        py::arg("edges") = r.walk.edges);
      },
      py::arg("config"), py::arg("model"), py::arg("from_lonlat"), py::arg("to_lonlat"), py::arg("out_dir"));
}
