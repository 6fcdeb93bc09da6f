#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dhgat/csr.hpp"
#include "dhgat/tensor.hpp"

namespace dhgat {

enum class Activation { Elu, Identity };

/// Multi-head GATv2 layer. Head k owns columns [k*head_dim, (k+1)*head_dim) of `weight`
/// and row k of `attention`; head outputs are concatenated.
struct Gatv2Layer {
  int in_dim = 0;
  int heads = 1;
  int head_dim = 0;
  Activation activation = Activation::Elu;
  ad::Parameter weight;     // in_dim x (heads * head_dim)
  ad::Parameter attention;  // heads x head_dim

  /// out_dim is the concatenated width and must be divisible by heads.
  static Gatv2Layer create(const std::string& name, int in_dim, int out_dim, int heads, Activation activation,
                           std::uint64_t seed);
  int out_dim() const { return heads * head_dim; }
  std::vector<ad::Parameter*> parameters() { return {&weight, &attention}; }
};

struct GcnLayer {
  int in_dim = 0;
  int out_dim = 0;
  ad::Parameter weight;  // in_dim x out_dim
  ad::Parameter bias;    // 1 x out_dim

  static GcnLayer create(const std::string& name, int in_dim, int out_dim, std::uint64_t seed);
  std::vector<ad::Parameter*> parameters() { return {&weight, &bias}; }
};

/// Dense head: elu between layers, softmax over the final C logits.
struct Mlp {
  std::vector<ad::Parameter> weights;
  std::vector<ad::Parameter> biases;

  static Mlp create(const std::string& name, int in_dim, const std::vector<int>& hidden, int classes,
                    std::uint64_t seed);
  int in_dim() const { return static_cast<int>(weights.front().value().rows()); }
  int out_dim() const { return static_cast<int>(weights.back().value().cols()); }
  std::vector<ad::Parameter*> parameters();
};

struct GatForward {
  ad::Var output;
  ad::Matrix alpha;  ///< see ad::AttentionResult::alpha
};

/// Dropout on the input features, then per head softmax attention over {v} U adj(v).
/// `edge_weight` turns edges on (1) or off (0) per destination, see ad::gatv2_attention.
GatForward gatv2_layer_forward(ad::Var h, const Csr& adj, Gatv2Layer& layer, double dropout, ad::Rng& rng,
                               bool training, std::optional<ad::Var> edge_weight = {});

/// Symmetric normalization with self-loops: 1 / sqrt((deg(v)+1)(deg(u)+1)).
struct GcnNorm {
  std::vector<double> self_coeff;
  std::vector<double> edge_coeff;
  static GcnNorm of(const Csr& adj);
};

ad::Var gcn_layer_forward(ad::Var h, const Csr& adj, const GcnNorm& norm, GcnLayer& layer, double dropout,
                          ad::Rng& rng, bool training);

/// Row-stochastic class probabilities.
ad::Var mlp_forward(ad::Var h, Mlp& mlp);

}  // namespace dhgat
