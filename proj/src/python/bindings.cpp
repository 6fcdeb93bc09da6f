// Python bindings. Structured results cross the boundary as JSON text; the package
// wrapper decodes them.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dhgat/checks.hpp"
#include "dhgat/config.hpp"
#include "dhgat/errors.hpp"
#include "dhgat/harness.hpp"

namespace py = pybind11;
using namespace dhgat;

namespace {

Overrides to_overrides(const std::map<std::string, std::string>& m) { return {m.begin(), m.end()}; }

std::string train_from_config(const std::filesystem::path& path, const std::map<std::string, std::string>& overrides,
                              const std::optional<std::string>& model) {
  auto cfg = load_config(path, to_overrides(overrides));
  const auto kind = model ? parse_model_kind(*model) : cfg.model;
  const auto data = load_dataset(cfg);
  const auto graph = build_graph(cfg, data, cfg.relations);
  const auto ctx = GraphContext::build(graph, cfg.train);
  const auto split = make_split(data.labels, cfg.split);
  TrainOutput out;
  {
    py::gil_scoped_release release;
    out = train_model(kind, ctx, data.features.values, data.labels, split, cfg.train);
  }
  auto j = out.record.to_json();
  j["config_hash"] = config_hash(cfg);
  return j.dump();
}

py::tuple gumbel_select(const std::vector<double>& rho, double tau, const std::vector<double>& noise, bool train) {
  const auto s = gumbel_softmax_select(rho, tau, noise, train ? SelectMode::Train : SelectMode::Eval);
  return py::make_tuple(s.soft, s.hard);
}

std::vector<std::vector<std::string>> lattice_types(const std::vector<std::string>& relations, const std::string& mode) {
  const RelationRegistry reg(relations);
  const auto lat = enumerate_lattice(reg, parse_lattice_mode(mode));
  std::vector<std::vector<std::string>> out;
  for (const auto& t : lat.types()) {
    std::vector<std::string> names;
    for (std::size_t r = 0; r < reg.size(); ++r) {
      if (t.contains(r)) names.push_back(reg.name(r));
    }
    out.push_back(std::move(names));
  }
  return out;
}

std::string metrics_json(const ad::Matrix& probs, const std::vector<int>& labels, const std::vector<NodeId>& ids) {
  return to_json(evaluate_predictions(probs, labels, ids)).dump();
}

py::tuple planted(std::size_t nodes, std::uint64_t seed) {
  PlantedSpec spec;
  spec.nodes = nodes;
  spec.seed = seed;
  const auto g = make_planted_graph(spec);
  py::dict rels;
  for (std::size_t r = 0; r < g.graph.num_relations(); ++r) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    const auto& adj = g.graph.relation(r);
    for (NodeId v = 0; v < adj.num_nodes(); ++v) {
      for (NodeId u : adj.neighbors(v)) {
        if (v < u) edges.emplace_back(v, u);
      }
    }
    rels[py::str(g.graph.registry().name(r))] = edges;
  }
  return py::make_tuple(g.features, g.labels, rels);
}

}  // namespace

PYBIND11_MODULE(_dhgat, m) {
  m.doc() = "Dynamic heterogeneous graph attention for ordinal fake-news classification";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  m.def("remap_label", [](const std::string& raw) { return remap_label(raw).value(); }, py::arg("raw"));
  m.def("normalize_attribute", &normalize_attribute, py::arg("raw"));
  m.def("gumbel_from_uniform", &gumbel_from_uniform, py::arg("u"));
  m.def("gumbel_select", &gumbel_select, py::arg("rho"), py::arg("tau"), py::arg("noise"), py::arg("train") = true);
  m.def("lattice", &lattice_types, py::arg("relations"), py::arg("mode") = "full");
  m.def("hash_embed", [](const std::string& text, int dim, std::uint64_t seed) -> Eigen::VectorXd {
    return hash_embed_text(text, dim, seed).row(0).transpose();
  },
        py::arg("text"), py::arg("dim") = 300, py::arg("seed") = 0);
  m.def("planted_graph", &planted, py::arg("nodes") = 200, py::arg("seed") = 0);
  m.def("_metrics_json", &metrics_json, py::arg("probs"), py::arg("labels"), py::arg("ids"));
  m.def("_config_ini", [](const std::filesystem::path& p, const std::map<std::string, std::string>& o) {
    return to_ini(load_config(p, to_overrides(o)));
  }, py::arg("path"), py::arg("overrides") = std::map<std::string, std::string>{});
  m.def("_train_json", &train_from_config, py::arg("path"), py::arg("overrides") = std::map<std::string, std::string>{},
        py::arg("model") = std::nullopt);
  m.def("_gradcheck_json", [](double tol, std::uint64_t seed) {
    py::gil_scoped_release release;
    return to_json(run_gradient_suite(tol, seed)).dump();
  }, py::arg("tolerance") = 1e-4, py::arg("seed") = 7);
}
