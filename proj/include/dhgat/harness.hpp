#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dhgat/hgraph.hpp"
#include "dhgat/model.hpp"

namespace dhgat {

// ---- splits -----------------------------------------------------------------------

struct SplitSpec {
  double labeled_fraction = 0.3;
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Disjoint, exhaustive, each list sorted ascending.
struct Split {
  std::vector<NodeId> labeled;
  std::vector<NodeId> unlabeled;
};

/// Stratified: per class, round(fraction * class size) seeded picks are labeled.
/// Throws ValidationError when a non-empty class (or, unstratified, the whole set) would get none.
Split make_split(std::span<const int> labels, const SplitSpec& spec);

// ---- metrics ------------------------------------------------------------------------

using Confusion = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;

struct Metrics {
  std::size_t count = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  /// Recall per class; 0 for classes with no evaluated nodes.
  std::array<double, kNumClasses> per_class_accuracy{};
  std::array<std::int64_t, kNumClasses> support{};
  Confusion confusion{};  ///< rows = true class, cols = predicted
  /// Mean |true - argmax| on the ordinal scale.
  double ordinal_mae = 0.0;
};

/// Argmax (lowest index on ties) of each listed row against `labels` (indexed by node id).
Metrics evaluate_predictions(const ad::Matrix& probs, std::span<const int> labels, std::span<const NodeId> ids);

nlohmann::json to_json(const Metrics& m);
void write_confusion_csv(std::ostream& out, const Metrics& m);

// ---- training -------------------------------------------------------------------------

/// Histogram of chosen lattice indices per layer.
struct TraceSummary {
  std::vector<std::string> type_names;
  std::vector<std::vector<std::int64_t>> counts;  // [layer][type]
};

TraceSummary summarize_trace(const SelectionTrace& trace, const NeighborhoodLattice& lattice,
                             const RelationRegistry& registry);

struct RunRecord {
  nlohmann::json config;
  std::uint64_t seed = 0;
  ModelKind kind = ModelKind::Dhgat;
  std::vector<double> loss_curve;
  Metrics metrics;        ///< unlabeled nodes
  Metrics train_metrics;  ///< labeled nodes
  TraceSummary trace;     ///< eval-mode selections after training (DHGAT only)
  double wall_seconds = 0.0;

  /// Timing is left out unless asked for, so repeated runs serialize identically.
  nlohmann::json to_json(bool include_timing = false) const;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct TrainHooks {
  /// Called after each optimizer step with that epoch's training-mode selections.
  std::function<void(int epoch, const SelectionTrace&)> on_epoch;
};

struct TrainOutput {
  GraphModel model;
  RunRecord record;
  SelectionTrace final_trace;  ///< eval mode
  ad::Matrix probs;            ///< eval mode, n x 6
};

/// Full-batch training for cfg.epochs epochs; the loss reads only `split.labeled`.
/// Throws TrainingError (with epoch and parameter norms) on a non-finite loss.
TrainOutput train_model(ModelKind kind, const GraphContext& ctx, const ad::Matrix& features,
                        std::span<const int> labels, const Split& split, const TrainConfig& cfg,
                        const TrainHooks& hooks = {});

/// Eval-mode forward pass with the given parameters.
ForwardResult predict(ad::Tape& tape, const GraphContext& ctx, const ad::Matrix& features, GraphModel& model,
                      const TrainConfig& cfg);

void write_loss_csv(std::ostream& out, std::span<const double> curve);
/// epoch,layer,node,chosen_type,rho_0..rho_{T-1}
void write_trace_header(std::ostream& out, std::size_t lattice_size);
void write_trace_rows(std::ostream& out, int epoch, const SelectionTrace& trace);

/// Re-read a trace CSV and histogram chosen types of the last epoch it contains.
struct TraceCsvSummary {
  int epoch = -1;
  std::size_t lattice_size = 0;
  std::vector<std::vector<std::int64_t>> counts;  // [layer][type]
  std::vector<std::vector<double>> mean_rho;      // [layer][type]
};
TraceCsvSummary summarize_trace_csv(std::istream& in);

// ---- sweeps -------------------------------------------------------------------------------

struct SweepCell {
  ModelKind kind = ModelKind::Dhgat;
  std::vector<std::string> relations;
  double lambda1 = 1.0;
  double lambda2 = 0.25;
  double fraction = 0.3;

  std::string label() const;
};

struct SweepAxes {
  std::vector<std::vector<std::string>> relation_subsets;
  /// (lambda1, lambda2) pairs; (0, 0) is rejected.
  std::vector<std::pair<double, double>> lambdas;
  std::vector<double> fractions;
  std::vector<ModelKind> models;
};

/// Unordered pairs of `names` in lexicographic index order.
std::vector<std::vector<std::string>> relation_pairs(const std::vector<std::string>& names);
/// values x values without (0, 0).
std::vector<std::pair<double, double>> lambda_grid(const std::vector<double>& values);

/// Cartesian product; an empty axis falls back to the single base value. Throws ConfigError if
/// every axis is empty or a lambda pair is (0, 0).
std::vector<SweepCell> expand_sweep(const SweepAxes& axes, const std::vector<std::string>& base_relations,
                                    const TrainConfig& base, const SplitSpec& base_split,
                                    ModelKind base_kind = ModelKind::Dhgat);

struct CellSummary {
  SweepCell cell;
  std::vector<RunRecord> runs;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double f1_mean = 0.0;
  double f1_std = 0.0;
};

/// Mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);
void aggregate(CellSummary& cell);

using GraphBuilder = std::function<HeteroGraph(const std::vector<std::string>& relations)>;
using RunCallback = std::function<void(const SweepCell&, int repeat, const RunRecord&)>;

/// Repeat r of every cell uses model seed base.seed + r and split seed base_split.seed + r,
/// so cells are compared on identical splits.
std::vector<CellSummary> run_sweep(const std::vector<SweepCell>& cells, const GraphBuilder& build,
                                   const ad::Matrix& features, std::span<const int> labels, const TrainConfig& base,
                                   const SplitSpec& base_split, int repeats, const RunCallback& on_run = {});

/// One row per cell with "mean±std" accuracy and macro-F1 plus the raw numbers.
void write_sweep_csv(std::ostream& out, const std::vector<CellSummary>& cells);

}  // namespace dhgat
