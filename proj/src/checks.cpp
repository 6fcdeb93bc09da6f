#include "dhgat/checks.hpp"

#include "dhgat/layers.hpp"
#include "dhgat/model.hpp"
#include "dhgat/synthetic.hpp"

namespace dhgat {

ToyProblem make_toy_problem(std::size_t nodes, int feature_dim, std::uint64_t seed) {
  PlantedSpec spec;
  spec.nodes = nodes;
  spec.feature_dim = feature_dim;
  spec.homophilous_degree = 2;
  spec.noise_degree = 2;
  spec.signal = 1.0;
  spec.seed = seed;
  auto planted = make_planted_graph(spec);
  ToyProblem toy{std::move(planted.graph), std::move(planted.features), std::move(planted.labels), {}};
  for (std::size_t v = 0; v < nodes; v += 2) toy.labeled.push_back(static_cast<NodeId>(v));
  return toy;
}

namespace {

ad::Matrix random_matrix(ad::Index rows, ad::Index cols, ad::Rng& rng) {
  ad::Matrix m(rows, cols);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * ad::uniform01(rng) - 1.0;
  return m;
}

// Random linear read-out so no gradient coordinate is structurally tiny.
ad::Var readout(ad::Var x, const ad::Matrix& r) { return ad::sum_all(ad::mul(x, x.tape().constant(r))); }

std::vector<ad::Parameter*> concat(std::vector<ad::Parameter*> a, const std::vector<ad::Parameter*>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

std::vector<NamedCheck> run_gradient_suite(double tolerance, std::uint64_t seed) {
  std::vector<NamedCheck> out;
  const ToyProblem toy = make_toy_problem(12, 5, seed);
  const auto n = static_cast<ad::Index>(toy.labels.size());
  ad::Rng rng(ad::derive_seed(seed, "gradcheck"));
  ad::GradCheckOptions opts;
  opts.seed = seed;

  TrainConfig cfg;
  cfg.layers = 2;
  cfg.hidden = {8, 4};
  cfg.heads = 2;
  cfg.mlp_hidden = {6};
  cfg.seed = seed;
  const GraphContext ctx = GraphContext::build(toy.graph, cfg);
  const Csr& adj = ctx.union_adj.adj;

  {
    auto layer = Gatv2Layer::create("check.gat", 5, 6, 2, Activation::Elu, seed);
    const ad::Matrix r = random_matrix(n, 6, rng);
    auto expr = [&](ad::Tape& t) {
      ad::Rng unused(0);
      return readout(gatv2_layer_forward(t.constant(toy.features), adj, layer, 0.0, unused, false).output, r);
    };
    auto params = layer.parameters();
    out.push_back({"gatv2_layer", ad::grad_check(expr, params, tolerance, opts)});
  }
  {
    // Soft per-node type weights as a parameter: checks the d/dw path through attention.
    auto layer = Gatv2Layer::create("check.gatw", 5, 4, 1, Activation::Elu, seed);
    ad::Matrix s0 = random_matrix(n, static_cast<ad::Index>(ctx.lattice.size()), rng).cwiseAbs();
    ad::Parameter selection("check.selection", s0);
    const ad::Matrix r = random_matrix(n, 4, rng);
    auto expr = [&](ad::Tape& t) {
      ad::Rng unused(0);
      ad::Var w = ad::edge_selection_weights(t.leaf(selection), adj, ctx.union_adj.edge_masks, ctx.type_masks);
      return readout(gatv2_layer_forward(t.constant(toy.features), adj, layer, 0.0, unused, false, w).output, r);
    };
    auto params = concat(layer.parameters(), {&selection});
    out.push_back({"gatv2_edge_selection", ad::grad_check(expr, params, tolerance, opts)});
  }
  {
    auto layer = GcnLayer::create("check.gcn", 5, 6, seed);
    layer.bias.value() = random_matrix(1, 6, rng);
    const GcnNorm norm = GcnNorm::of(adj);
    const ad::Matrix r = random_matrix(n, 6, rng);
    auto expr = [&](ad::Tape& t) {
      ad::Rng unused(0);
      return readout(gcn_layer_forward(t.constant(toy.features), adj, norm, layer, 0.0, unused, false), r);
    };
    auto params = layer.parameters();
    out.push_back({"gcn_layer", ad::grad_check(expr, params, tolerance, opts)});
  }
  {
    auto head = Mlp::create("check.mlp", 5, {7}, kNumClasses, seed);
    const ad::Matrix r = random_matrix(n, kNumClasses, rng);
    auto expr = [&](ad::Tape& t) { return readout(mlp_forward(t.constant(toy.features), head), r); };
    auto params = head.parameters();
    out.push_back({"mlp_head", ad::grad_check(expr, params, tolerance, opts)});
  }
  {
    auto phi = Gatv2Layer::create("check.phi", 5, static_cast<int>(ctx.lattice.size()), 1, Activation::Identity, seed);
    const ad::Matrix r = random_matrix(n, static_cast<ad::Index>(ctx.lattice.size()), rng);
    auto expr = [&](ad::Tape& t) {
      ad::Rng unused(0);
      return readout(decision_probs(t.constant(toy.features), ctx, phi, 0.0, unused, false), r);
    };
    auto params = phi.parameters();
    out.push_back({"decision_probs", ad::grad_check(expr, params, tolerance, opts)});
  }

  for (ModelKind kind : {ModelKind::Dhgat, ModelKind::Gatv2, ModelKind::Gcn}) {
    auto model = GraphModel::create(kind, 5, ctx.lattice.size(), cfg);
    SelectionFreeze freeze;
    auto expr = [&](ad::Tape& t) {
      ForwardOptions fo;
      fo.training = true;
      fo.tau = 0.7;
      fo.noise_seed = ad::derive_seed(seed, "gradcheck.noise");
      fo.freeze = &freeze;
      auto fwd = model_forward(t, ctx, toy.features, model, cfg, fo);
      return dhgat_loss(fwd.probs, toy.labels, toy.labeled, 1.0, 0.5);
    };
    auto params = model.parameters();
    out.push_back({std::string(model_kind_name(kind)) + "_loss", ad::grad_check(expr, params, tolerance, opts)});
  }
  return out;
}

nlohmann::json to_json(const std::vector<NamedCheck>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& c : checks) {
    all = all && c.report.passed;
    arr.push_back({{"name", c.name},
                   {"passed", c.report.passed},
                   {"tolerance", c.report.tolerance},
                   {"max_rel_error", c.report.max_rel_error},
                   {"max_abs_error", c.report.max_abs_error},
                   {"coords_checked", c.report.coords_checked},
                   {"worst_param", c.report.worst_param},
                   {"worst_index", c.report.worst_index}});
  }
  return {{"passed", all}, {"checks", arr}};
}

}  // namespace dhgat
