#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dhgat/hgraph.hpp"
#include "dhgat/layers.hpp"
#include "dhgat/liar.hpp"
#include "dhgat/tensor.hpp"

namespace dhgat {

enum class ModelKind { Dhgat, Gatv2, Gcn };

ModelKind parse_model_kind(std::string_view name);
std::string_view model_kind_name(ModelKind kind);

struct TrainConfig {
  int layers = 2;
  /// Concatenated output width of each graph layer; size must equal `layers`.
  std::vector<int> hidden{256, 128};
  /// Heads on every graph layer except the last, which uses one.
  int heads = 4;
  std::vector<int> mlp_hidden{64};
  double lr = 1e-3;
  double dropout = 0.5;
  double weight_decay = 5e-4;
  int epochs = 200;
  double lambda1 = 1.0;
  double lambda2 = 0.25;
  double tau = 1.0;
  /// When set, tau moves linearly from `tau` (first epoch) to this value (last epoch).
  std::optional<double> tau_final;
  /// Relations the decision network attends over; empty means the full union.
  std::vector<std::string> decision_relations;
  LatticeMode lattice = LatticeMode::Full;
  /// Pin every node's selection to this lattice index and skip the decision network.
  std::optional<std::size_t> forced_selection;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
  double tau_at(int epoch) const;
};

/// Graph views shared by every forward pass. Tapes keep pointers into it.
struct GraphContext {
  const HeteroGraph* graph = nullptr;
  NeighborhoodLattice lattice;
  std::vector<std::uint32_t> type_masks;
  TypedAdjacency union_adj;  ///< full union with per-edge relation bitsets
  Csr decision_adj;
  GcnNorm union_norm;

  static GraphContext build(const HeteroGraph& g, LatticeMode mode, NeighborhoodType decision_type);
  static GraphContext build(const HeteroGraph& g, const TrainConfig& cfg);
  std::size_t num_nodes() const { return union_adj.adj.num_nodes(); }
  std::optional<std::size_t> full_union_index() const;
};

/// Trainable parameters for DHGAT and the two baselines. Only the members of the chosen
/// kind are populated. Holds Parameters by value: do not move while a tape is live.
struct GraphModel {
  ModelKind kind = ModelKind::Dhgat;
  std::vector<Gatv2Layer> decision;        // one per layer, output width |lattice|
  std::vector<Gatv2Layer> representation;  // DHGAT and GATv2
  std::vector<GcnLayer> gcn;
  Mlp head;

  static GraphModel create(ModelKind kind, int in_dim, std::size_t lattice_size, const TrainConfig& cfg);
  /// All parameters, or those that receive gradients under `cfg` (no decision layers when forced).
  std::vector<ad::Parameter*> parameters();
  std::vector<ad::Parameter*> trainable(const TrainConfig& cfg);
};

// ---- Gumbel-Softmax -------------------------------------------------------------

inline constexpr double kGumbelClamp = 1e-12;

/// -log(-log(u)) with u clamped to [1e-12, 1 - 1e-12].
double gumbel_from_uniform(double u);
std::vector<double> gumbel_sample(std::size_t count, ad::Rng& rng);

enum class SelectMode { Train, Eval };

struct GumbelSelection {
  std::vector<double> soft;
  std::size_t hard = 0;
};

/// soft = softmax((log rho + g) / tau), hard = argmax(log rho + g). Eval mode ignores g.
GumbelSelection gumbel_softmax_select(std::span<const double> rho, double tau, std::span<const double> g,
                                      SelectMode mode);

// ---- forward ------------------------------------------------------------------------

struct SelectionTrace {
  std::vector<std::vector<std::size_t>> chosen;  // [layer][node]
  std::vector<ad::Matrix> rho;                   // [layer] n x |lattice|
};

/// Records Gumbel noise, hard choices and soft references on first use and replays them
/// afterwards, so repeated evaluations see the same discrete selections.
struct SelectionFreeze {
  bool recorded = false;
  std::vector<ad::Matrix> noise;
  std::vector<ad::Matrix> hard;
  std::vector<ad::Matrix> soft_reference;
};

struct ForwardOptions {
  bool training = false;
  double tau = 1.0;
  /// Seed for this pass's dropout masks and Gumbel noise.
  std::uint64_t noise_seed = 0;
  SelectionFreeze* freeze = nullptr;
};

struct ForwardResult {
  ad::Var probs;
  SelectionTrace trace;
};

/// rho = softmax(GATv2 over the decision neighborhood), one row per node.
ad::Var decision_probs(ad::Var h, const GraphContext& ctx, Gatv2Layer& phi, double dropout, ad::Rng& rng,
                       bool training);

/// Masked GATv2 over the union graph: edge (v, u) counts for v iff one of its relations lies in
/// v's selected type. `selection` is n x |lattice| (one-hot rows in the forward pass).
ad::Var representation_update(ad::Var h, const GraphContext& ctx, ad::Var selection, Gatv2Layer& psi,
                              double dropout, ad::Rng& rng, bool training);
ad::Var representation_update(ad::Var h, const GraphContext& ctx, std::span<const std::size_t> selection,
                              Gatv2Layer& psi, double dropout, ad::Rng& rng, bool training);

ForwardResult model_forward(ad::Tape& tape, const GraphContext& ctx, const ad::Matrix& features, GraphModel& model,
                            const TrainConfig& cfg, const ForwardOptions& options);

/// lambda1 * mean CE + lambda2 * mean |y - sum_c c p_c| over the labeled nodes.
ad::Var dhgat_loss(ad::Var probs, std::span<const int> labels, std::span<const NodeId> labeled, double lambda1,
                   double lambda2);

std::vector<int> label_values(std::span<const OrdinalLabel> labels);

}  // namespace dhgat
