#include "dhgat/layers.hpp"

#include <cmath>

#include "dhgat/errors.hpp"

namespace dhgat {

Gatv2Layer Gatv2Layer::create(const std::string& name, int in_dim, int out_dim, int heads, Activation activation,
                              std::uint64_t seed) {
  if (in_dim <= 0 || out_dim <= 0 || heads <= 0) throw ConfigError(name + ": layer sizes must be positive");
  if (out_dim % heads != 0) {
    throw ConfigError(name + ": output width " + std::to_string(out_dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  ad::Rng rng(ad::derive_seed(seed, name));
  const int head_dim = out_dim / heads;
  // Glorot bounds per head-sized block.
  ad::Matrix w(in_dim, out_dim);
  for (int k = 0; k < heads; ++k) w.middleCols(k * head_dim, head_dim) = ad::glorot_uniform(in_dim, head_dim, rng);
  ad::Matrix a = ad::glorot_uniform(heads, head_dim, rng);
  return Gatv2Layer{in_dim, heads, head_dim, activation, ad::Parameter(name + ".weight", std::move(w)),
                    ad::Parameter(name + ".attention", std::move(a))};
}

GcnLayer GcnLayer::create(const std::string& name, int in_dim, int out_dim, std::uint64_t seed) {
  if (in_dim <= 0 || out_dim <= 0) throw ConfigError(name + ": layer sizes must be positive");
  ad::Rng rng(ad::derive_seed(seed, name));
  return GcnLayer{in_dim, out_dim, ad::Parameter(name + ".weight", ad::glorot_uniform(in_dim, out_dim, rng)),
                  ad::Parameter(name + ".bias", ad::Matrix::Zero(1, out_dim))};
}

Mlp Mlp::create(const std::string& name, int in_dim, const std::vector<int>& hidden, int classes,
                std::uint64_t seed) {
  ad::Rng rng(ad::derive_seed(seed, name));
  Mlp mlp;
  int prev = in_dim;
  std::vector<int> sizes = hidden;
  sizes.push_back(classes);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] <= 0 || prev <= 0) throw ConfigError(name + ": layer sizes must be positive");
    const std::string prefix = name + "." + std::to_string(i);
    mlp.weights.emplace_back(prefix + ".weight", ad::glorot_uniform(prev, sizes[i], rng));
    mlp.biases.emplace_back(prefix + ".bias", ad::Matrix::Zero(1, sizes[i]));
    prev = sizes[i];
  }
  return mlp;
}

std::vector<ad::Parameter*> Mlp::parameters() {
  std::vector<ad::Parameter*> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.push_back(&weights[i]);
    out.push_back(&biases[i]);
  }
  return out;
}

GatForward gatv2_layer_forward(ad::Var h, const Csr& adj, Gatv2Layer& layer, double dropout, ad::Rng& rng,
                               bool training, std::optional<ad::Var> edge_weight) {
  if (h.cols() != layer.in_dim) {
    throw ShapeError("gatv2_layer_forward: input width " + std::to_string(h.cols()) + " != layer input " +
                     std::to_string(layer.in_dim));
  }
  ad::Tape& tape = h.tape();
  ad::Var x = ad::dropout(h, dropout, rng, training);
  ad::Var z = ad::matmul(x, tape.leaf(layer.weight));
  auto att = ad::gatv2_attention(z, tape.leaf(layer.attention), adj, layer.heads, edge_weight);
  ad::Var out = layer.activation == Activation::Elu ? ad::elu(att.output) : att.output;
  return {out, std::move(att.alpha)};
}

GcnNorm GcnNorm::of(const Csr& adj) {
  GcnNorm norm;
  const std::size_t n = adj.num_nodes();
  norm.self_coeff.resize(n);
  norm.edge_coeff.resize(adj.num_edges());
  for (std::size_t v = 0; v < n; ++v) {
    const double dv = static_cast<double>(adj.degree(static_cast<NodeId>(v))) + 1.0;
    norm.self_coeff[v] = 1.0 / dv;
    for (std::size_t e = adj.offsets[v]; e < adj.offsets[v + 1]; ++e) {
      const double du = static_cast<double>(adj.degree(adj.targets[e])) + 1.0;
      norm.edge_coeff[e] = 1.0 / std::sqrt(dv * du);
    }
  }
  return norm;
}

ad::Var gcn_layer_forward(ad::Var h, const Csr& adj, const GcnNorm& norm, GcnLayer& layer, double dropout,
                          ad::Rng& rng, bool training) {
  if (h.cols() != layer.in_dim) {
    throw ShapeError("gcn_layer_forward: input width " + std::to_string(h.cols()) + " != layer input " +
                     std::to_string(layer.in_dim));
  }
  ad::Tape& tape = h.tape();
  ad::Var x = ad::dropout(h, dropout, rng, training);
  ad::Var z = ad::matmul(x, tape.leaf(layer.weight));
  ad::Var agg = ad::sparse_aggregate(z, adj, norm.self_coeff, norm.edge_coeff);
  return ad::elu(ad::add_row_broadcast(agg, tape.leaf(layer.bias)));
}

ad::Var mlp_forward(ad::Var h, Mlp& mlp) {
  if (h.cols() != mlp.in_dim()) {
    throw ShapeError("mlp_forward: input width " + std::to_string(h.cols()) + " != head input " +
                     std::to_string(mlp.in_dim()));
  }
  ad::Tape& tape = h.tape();
  ad::Var x = h;
  for (std::size_t i = 0; i < mlp.weights.size(); ++i) {
    x = ad::add_row_broadcast(ad::matmul(x, tape.leaf(mlp.weights[i])), tape.leaf(mlp.biases[i]));
    if (i + 1 < mlp.weights.size()) x = ad::elu(x);
  }
  return ad::softmax_rows(x);
}

}  // namespace dhgat
