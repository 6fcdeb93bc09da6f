#include "dhgat/model.hpp"

#include <algorithm>
#include <cmath>

#include "dhgat/errors.hpp"

namespace dhgat {

ModelKind parse_model_kind(std::string_view name) {
  if (name == "dhgat") return ModelKind::Dhgat;
  if (name == "gatv2" || name == "gat") return ModelKind::Gatv2;
  if (name == "gcn") return ModelKind::Gcn;
  throw ConfigError("unknown model '" + std::string(name) + "' (expected dhgat, gatv2 or gcn)");
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Dhgat: return "dhgat";
    case ModelKind::Gatv2: return "gatv2";
    case ModelKind::Gcn: return "gcn";
  }
  return "?";
}

// ---- TrainConfig ------------------------------------------------------------------

void TrainConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) { throw ConfigError(key + ": " + why); };
  if (layers < 1) fail("layers", "must be >= 1");
  if (static_cast<int>(hidden.size()) != layers) fail("hidden", "needs one width per layer");
  for (int l = 0; l < layers; ++l) {
    if (hidden[static_cast<std::size_t>(l)] <= 0) fail("hidden", "widths must be positive");
    if (l + 1 < layers && hidden[static_cast<std::size_t>(l)] % heads != 0) {
      fail("hidden", "width " + std::to_string(hidden[static_cast<std::size_t>(l)]) + " not divisible by " +
                         std::to_string(heads) + " heads");
    }
  }
  if (heads < 1) fail("heads", "must be >= 1");
  for (int w : mlp_hidden) {
    if (w <= 0) fail("mlp_hidden", "widths must be positive");
  }
  if (!(lr > 0)) fail("lr", "must be > 0");
  if (!(dropout >= 0 && dropout < 1)) fail("dropout", "must lie in [0, 1)");
  if (!(weight_decay >= 0)) fail("weight_decay", "must be >= 0");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (!(lambda1 >= 0) || !(lambda2 >= 0)) fail("lambda", "loss weights must be >= 0");
  if (lambda1 == 0 && lambda2 == 0) fail("lambda", "lambda1 and lambda2 cannot both be 0");
  if (!(tau > 0)) fail("tau", "must be > 0");
  if (tau_final && !(*tau_final > 0)) fail("tau_final", "must be > 0");
}

double TrainConfig::tau_at(int epoch) const {
  if (!tau_final || epochs <= 1) return tau;
  const double t = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return tau + (*tau_final - tau) * std::clamp(t, 0.0, 1.0);
}

// ---- GraphContext -----------------------------------------------------------------

GraphContext GraphContext::build(const HeteroGraph& g, LatticeMode mode, NeighborhoodType decision_type) {
  GraphContext ctx;
  ctx.graph = &g;
  ctx.lattice = enumerate_lattice(g.registry(), mode);
  ctx.type_masks = ctx.lattice.masks();
  ctx.union_adj = typed_union(g, g.full_type());
  ctx.decision_adj = edges_for_type(g, decision_type);
  ctx.union_norm = GcnNorm::of(ctx.union_adj.adj);
  return ctx;
}

GraphContext GraphContext::build(const HeteroGraph& g, const TrainConfig& cfg) {
  const NeighborhoodType decision = cfg.decision_relations.empty() ? g.full_type() : g.type_of(cfg.decision_relations);
  auto ctx = build(g, cfg.lattice, decision);
  if (cfg.forced_selection && *cfg.forced_selection >= ctx.lattice.size()) {
    throw ConfigError("forced_selection: index " + std::to_string(*cfg.forced_selection) + " outside lattice of " +
                      std::to_string(ctx.lattice.size()));
  }
  return ctx;
}

std::optional<std::size_t> GraphContext::full_union_index() const {
  return lattice.index_of(graph->full_type());
}

// ---- GraphModel ---------------------------------------------------------------------

GraphModel GraphModel::create(ModelKind kind, int in_dim, std::size_t lattice_size, const TrainConfig& cfg) {
  cfg.validate();
  GraphModel m;
  m.kind = kind;
  int prev = in_dim;
  for (int l = 0; l < cfg.layers; ++l) {
    const int out = cfg.hidden[static_cast<std::size_t>(l)];
    const int heads = l + 1 == cfg.layers ? 1 : cfg.heads;
    const std::string idx = std::to_string(l);
    switch (kind) {
      case ModelKind::Dhgat:
        m.decision.push_back(Gatv2Layer::create("phi." + idx, prev, static_cast<int>(lattice_size), 1,
                                                Activation::Identity, cfg.seed));
        [[fallthrough]];
      case ModelKind::Gatv2:
        m.representation.push_back(Gatv2Layer::create("psi." + idx, prev, out, heads, Activation::Elu, cfg.seed));
        break;
      case ModelKind::Gcn:
        m.gcn.push_back(GcnLayer::create("gcn." + idx, prev, out, cfg.seed));
        break;
    }
    prev = out;
  }
  m.head = Mlp::create("mlp", prev, cfg.mlp_hidden, kNumClasses, cfg.seed);
  return m;
}

std::vector<ad::Parameter*> GraphModel::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& l : decision) {
    for (auto* p : l.parameters()) out.push_back(p);
  }
  for (auto& l : representation) {
    for (auto* p : l.parameters()) out.push_back(p);
  }
  for (auto& l : gcn) {
    for (auto* p : l.parameters()) out.push_back(p);
  }
  for (auto* p : head.parameters()) out.push_back(p);
  return out;
}

std::vector<ad::Parameter*> GraphModel::trainable(const TrainConfig& cfg) {
  auto all = parameters();
  if (!cfg.forced_selection) return all;
  std::vector<ad::Parameter*> out;
  for (auto* p : all) {
    if (!p->name().starts_with("phi.")) out.push_back(p);
  }
  return out;
}

// ---- Gumbel-Softmax ------------------------------------------------------------------

double gumbel_from_uniform(double u) {
  u = std::clamp(u, kGumbelClamp, 1.0 - kGumbelClamp);
  return -std::log(-std::log(u));
}

std::vector<double> gumbel_sample(std::size_t count, ad::Rng& rng) {
  std::vector<double> g(count);
  for (auto& x : g) x = gumbel_from_uniform(ad::uniform01(rng));
  return g;
}

GumbelSelection gumbel_softmax_select(std::span<const double> rho, double tau, std::span<const double> g,
                                      SelectMode mode) {
  if (!(tau > 0)) throw ConfigError("tau must be > 0");
  if (rho.empty()) throw ValidationError("gumbel_softmax_select: empty distribution");
  if (mode == SelectMode::Train && g.size() != rho.size()) {
    throw ValidationError("gumbel_softmax_select: noise length differs from distribution");
  }
  std::vector<double> logits(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    logits[i] = std::log(std::max(rho[i], 1e-10)) + (mode == SelectMode::Train ? g[i] : 0.0);
  }
  GumbelSelection sel;
  sel.hard = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
  const double m = logits[sel.hard];
  sel.soft.resize(rho.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    sel.soft[i] = std::exp((logits[i] - m) / tau);
    sum += sel.soft[i];
  }
  for (auto& s : sel.soft) s /= sum;
  return sel;
}

// ---- forward ----------------------------------------------------------------------------

namespace {

ad::Matrix one_hot(std::span<const std::size_t> chosen, std::size_t width) {
  ad::Matrix m = ad::Matrix::Zero(static_cast<ad::Index>(chosen.size()), static_cast<ad::Index>(width));
  for (std::size_t v = 0; v < chosen.size(); ++v) {
    if (chosen[v] >= width) throw ValidationError("selection index outside lattice");
    m(static_cast<ad::Index>(v), static_cast<ad::Index>(chosen[v])) = 1.0;
  }
  return m;
}

std::vector<std::size_t> row_argmax(const ad::Matrix& m) {
  std::vector<std::size_t> out(static_cast<std::size_t>(m.rows()));
  for (ad::Index i = 0; i < m.rows(); ++i) {
    ad::Index best = 0;
    for (ad::Index j = 1; j < m.cols(); ++j) {
      if (m(i, j) > m(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

ad::Rng stream(std::uint64_t seed, const std::string& tag) { return ad::Rng(ad::derive_seed(seed, tag)); }

}  // namespace

ad::Var decision_probs(ad::Var h, const GraphContext& ctx, Gatv2Layer& phi, double dropout, ad::Rng& rng,
                       bool training) {
  if (phi.out_dim() != static_cast<int>(ctx.lattice.size())) {
    throw ShapeError("decision_probs: decision layer width " + std::to_string(phi.out_dim()) + " != lattice size " +
                     std::to_string(ctx.lattice.size()));
  }
  auto logits = gatv2_layer_forward(h, ctx.decision_adj, phi, dropout, rng, training);
  return ad::softmax_rows(logits.output);
}

ad::Var representation_update(ad::Var h, const GraphContext& ctx, ad::Var selection, Gatv2Layer& psi,
                              double dropout, ad::Rng& rng, bool training) {
  ad::Var weights = ad::edge_selection_weights(selection, ctx.union_adj.adj, ctx.union_adj.edge_masks, ctx.type_masks);
  return gatv2_layer_forward(h, ctx.union_adj.adj, psi, dropout, rng, training, weights).output;
}

ad::Var representation_update(ad::Var h, const GraphContext& ctx, std::span<const std::size_t> selection,
                              Gatv2Layer& psi, double dropout, ad::Rng& rng, bool training) {
  if (selection.size() != ctx.num_nodes()) throw ShapeError("representation_update: one selection per node required");
  ad::Var sel = h.tape().constant(one_hot(selection, ctx.lattice.size()));
  return representation_update(h, ctx, sel, psi, dropout, rng, training);
}

ForwardResult model_forward(ad::Tape& tape, const GraphContext& ctx, const ad::Matrix& features, GraphModel& model,
                            const TrainConfig& cfg, const ForwardOptions& options) {
  if (features.rows() != static_cast<ad::Index>(ctx.num_nodes())) {
    throw ShapeError("model_forward: feature rows " + std::to_string(features.rows()) + " != nodes " +
                     std::to_string(ctx.num_nodes()));
  }
  if (!(options.tau > 0)) throw ConfigError("tau must be > 0");
  const std::size_t n = ctx.num_nodes();
  const std::size_t types = ctx.lattice.size();
  SelectionFreeze* freeze = options.freeze;
  const bool replay = freeze != nullptr && freeze->recorded;

  ForwardResult result;
  ad::Var h = tape.constant(features);
  for (int l = 0; l < cfg.layers; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const std::string idx = std::to_string(l);
    if (model.kind == ModelKind::Gcn) {
      auto rng = stream(options.noise_seed, "gcn." + idx + ".dropout");
      h = gcn_layer_forward(h, ctx.union_adj.adj, ctx.union_norm, model.gcn[li], cfg.dropout, rng, options.training);
      continue;
    }
    if (model.kind == ModelKind::Gatv2) {
      auto rng = stream(options.noise_seed, "psi." + idx + ".dropout");
      h = gatv2_layer_forward(h, ctx.union_adj.adj, model.representation[li], cfg.dropout, rng, options.training)
              .output;
      continue;
    }

    ad::Var selection;
    std::vector<std::size_t> chosen;
    ad::Matrix rho_value;
    if (cfg.forced_selection) {
      chosen.assign(n, *cfg.forced_selection);
      rho_value = one_hot(chosen, types);
      selection = tape.constant(rho_value);
    } else {
      auto phi_rng = stream(options.noise_seed, "phi." + idx + ".dropout");
      ad::Var rho = decision_probs(h, ctx, model.decision[li], cfg.dropout, phi_rng, options.training);
      rho_value = rho.value();
      if (options.training) {
        ad::Matrix noise;
        if (replay) {
          noise = freeze->noise.at(li);
        } else {
          auto g_rng = stream(options.noise_seed, "gumbel." + idx);
          noise.resize(static_cast<ad::Index>(n), static_cast<ad::Index>(types));
          for (ad::Index i = 0; i < noise.size(); ++i) noise.data()[i] = gumbel_from_uniform(ad::uniform01(g_rng));
        }
        ad::Var logits = ad::add_constant(ad::log_clamped(rho), noise);
        ad::Var soft = ad::softmax_rows(ad::scale(logits, 1.0 / options.tau));
        ad::Matrix hard;
        if (replay) {
          hard = freeze->hard.at(li);
          chosen = row_argmax(hard);
        } else {
          chosen = row_argmax(logits.value());
          hard = one_hot(chosen, types);
        }
        const ad::Matrix& reference = replay ? freeze->soft_reference.at(li) : soft.value();
        selection = ad::straight_through(soft, hard, reference);
        if (freeze != nullptr && !replay) {
          freeze->noise.push_back(noise);
          freeze->hard.push_back(hard);
          freeze->soft_reference.push_back(soft.value());
        }
      } else {
        chosen = row_argmax(rho_value);
        selection = tape.constant(one_hot(chosen, types));
      }
    }
    result.trace.chosen.push_back(std::move(chosen));
    result.trace.rho.push_back(std::move(rho_value));

    auto psi_rng = stream(options.noise_seed, "psi." + idx + ".dropout");
    h = representation_update(h, ctx, selection, model.representation[li], cfg.dropout, psi_rng, options.training);
  }
  if (freeze != nullptr && !replay && options.training && model.kind == ModelKind::Dhgat && !cfg.forced_selection) {
    freeze->recorded = true;
  }
  result.probs = mlp_forward(h, model.head);
  return result;
}

ad::Var dhgat_loss(ad::Var probs, std::span<const int> labels, std::span<const NodeId> labeled, double lambda1,
                   double lambda2) {
  if (labeled.empty()) throw ValidationError("dhgat_loss: labeled set is empty");
  if (lambda1 < 0 || lambda2 < 0 || (lambda1 == 0 && lambda2 == 0)) {
    throw ConfigError("dhgat_loss: loss weights must be >= 0 and not both 0");
  }
  std::vector<ad::Index> rows(labeled.begin(), labeled.end());
  ad::Tape& tape = probs.tape();

  std::optional<ad::Var> loss;
  if (lambda1 != 0) loss = ad::scale(ad::cross_entropy(probs, labels, rows), lambda1);
  if (lambda2 != 0) {
    ad::Matrix scores(probs.cols(), 1);
    for (ad::Index c = 0; c < probs.cols(); ++c) scores(c, 0) = static_cast<double>(c);
    ad::Var expected = ad::gather_rows(ad::matmul(probs, tape.constant(scores)), rows);
    ad::Matrix truth(static_cast<ad::Index>(rows.size()), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      truth(static_cast<ad::Index>(i), 0) = -static_cast<double>(labels[static_cast<std::size_t>(rows[i])]);
    }
    ad::Var ordinal = ad::scale(ad::mean_all(ad::abs(ad::add_constant(expected, truth))), lambda2);
    loss = loss ? ad::add(*loss, ordinal) : ordinal;
  }
  return *loss;
}

std::vector<int> label_values(std::span<const OrdinalLabel> labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (auto l : labels) out.push_back(l.value());
  return out;
}

}  // namespace dhgat
