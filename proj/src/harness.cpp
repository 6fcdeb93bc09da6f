#include "dhgat/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dhgat/errors.hpp"
#include "dhgat/optim.hpp"

namespace dhgat {

// ---- splits -----------------------------------------------------------------------

void SplitSpec::validate() const {
  if (!(labeled_fraction > 0.0 && labeled_fraction < 1.0)) {
    throw ConfigError("labeled_fraction: must lie in (0, 1), got " + std::to_string(labeled_fraction));
  }
}

namespace {

void shuffle(std::vector<NodeId>& ids, ad::Rng& rng) {
  // Fisher-Yates driven by uniform01 so the permutation is the same on every standard library.
  for (std::size_t i = ids.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(ad::uniform01(rng) * static_cast<double>(i));
    std::swap(ids[i - 1], ids[std::min(j, i - 1)]);
  }
}

}  // namespace

Split make_split(std::span<const int> labels, const SplitSpec& spec) {
  spec.validate();
  if (labels.empty()) throw ValidationError("make_split: no nodes");
  ad::Rng rng(ad::derive_seed(spec.seed, "split"));
  std::vector<char> is_labeled(labels.size(), 0);

  auto take = [&](std::vector<NodeId>& ids, const std::string& what) {
    const auto count = static_cast<std::size_t>(std::llround(spec.labeled_fraction * static_cast<double>(ids.size())));
    if (count == 0) {
      throw ValidationError("make_split: fraction " + std::to_string(spec.labeled_fraction) + " labels no node of " +
                            what + " (" + std::to_string(ids.size()) + " nodes)");
    }
    shuffle(ids, rng);
    for (std::size_t i = 0; i < count; ++i) is_labeled[ids[i]] = 1;
  };

  if (spec.stratified) {
    std::array<std::vector<NodeId>, kNumClasses> by_class;
    for (std::size_t v = 0; v < labels.size(); ++v) {
      const int y = labels[v];
      if (y < 0 || y >= kNumClasses) throw ValidationError("make_split: label out of range at node " + std::to_string(v));
      by_class[static_cast<std::size_t>(y)].push_back(static_cast<NodeId>(v));
    }
    for (int c = 0; c < kNumClasses; ++c) {
      auto& ids = by_class[static_cast<std::size_t>(c)];
      if (!ids.empty()) take(ids, "class " + std::string(kLabelNames[static_cast<std::size_t>(c)]));
    }
  } else {
    std::vector<NodeId> all(labels.size());
    std::iota(all.begin(), all.end(), NodeId{0});
    take(all, "the dataset");
  }

  Split split;
  for (std::size_t v = 0; v < labels.size(); ++v) {
    (is_labeled[v] ? split.labeled : split.unlabeled).push_back(static_cast<NodeId>(v));
  }
  if (split.unlabeled.empty()) throw ValidationError("make_split: no unlabeled nodes left");
  return split;
}

// ---- metrics ------------------------------------------------------------------------

Metrics evaluate_predictions(const ad::Matrix& probs, std::span<const int> labels, std::span<const NodeId> ids) {
  if (ids.empty()) throw ValidationError("evaluate_predictions: no nodes to evaluate");
  if (probs.cols() != kNumClasses) throw ShapeError("evaluate_predictions: expected 6 class columns");
  Metrics m;
  m.count = ids.size();
  double abs_err = 0.0;
  for (NodeId v : ids) {
    if (v >= probs.rows() || v >= labels.size()) throw ValidationError("evaluate_predictions: node id out of range");
    const int y = labels[v];
    if (y < 0 || y >= kNumClasses) throw ValidationError("evaluate_predictions: label out of range");
    ad::Index pred = 0;
    for (ad::Index c = 1; c < kNumClasses; ++c) {
      if (probs(v, c) > probs(v, pred)) pred = c;
    }
    ++m.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(pred)];
    abs_err += std::abs(static_cast<double>(y) - static_cast<double>(pred));
  }
  std::int64_t correct = 0;
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::int64_t tp = m.confusion[c][c];
    std::int64_t row = 0;
    std::int64_t col = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      row += m.confusion[c][k];
      col += m.confusion[k][c];
    }
    correct += tp;
    m.support[c] = row;
    m.per_class_accuracy[c] = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    if (row + col > 0) f1_sum += 2.0 * static_cast<double>(tp) / static_cast<double>(row + col);
  }
  const auto n = static_cast<double>(m.count);
  m.accuracy = static_cast<double>(correct) / n;
  m.macro_f1 = f1_sum / kNumClasses;
  m.ordinal_mae = abs_err / n;
  return m;
}

nlohmann::json to_json(const Metrics& m) {
  nlohmann::json j;
  j["count"] = m.count;
  j["accuracy"] = m.accuracy;
  j["macro_f1"] = m.macro_f1;
  j["ordinal_mae"] = m.ordinal_mae;
  nlohmann::json per_class = nlohmann::json::object();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    per_class[std::string(kLabelNames[c])] = {{"accuracy", m.per_class_accuracy[c]}, {"support", m.support[c]}};
  }
  j["per_class"] = per_class;
  j["confusion"] = m.confusion;
  return j;
}

void write_confusion_csv(std::ostream& out, const Metrics& m) {
  out << "true\\predicted";
  for (auto name : kLabelNames) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    out << kLabelNames[r];
    for (std::size_t c = 0; c < kNumClasses; ++c) out << ',' << m.confusion[r][c];
    out << '\n';
  }
}

// ---- training -------------------------------------------------------------------------

TraceSummary summarize_trace(const SelectionTrace& trace, const NeighborhoodLattice& lattice,
                             const RelationRegistry& registry) {
  TraceSummary s;
  for (std::size_t t = 0; t < lattice.size(); ++t) s.type_names.push_back(lattice.describe(t, registry));
  for (const auto& layer : trace.chosen) {
    std::vector<std::int64_t> counts(lattice.size(), 0);
    for (std::size_t choice : layer) ++counts.at(choice);
    s.counts.push_back(std::move(counts));
  }
  return s;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["layers"] = cfg.layers;
  j["hidden"] = cfg.hidden;
  j["heads"] = cfg.heads;
  j["mlp_hidden"] = cfg.mlp_hidden;
  j["lr"] = cfg.lr;
  j["dropout"] = cfg.dropout;
  j["weight_decay"] = cfg.weight_decay;
  j["epochs"] = cfg.epochs;
  j["lambda1"] = cfg.lambda1;
  j["lambda2"] = cfg.lambda2;
  j["tau"] = cfg.tau;
  j["tau_final"] = cfg.tau_final ? nlohmann::json(*cfg.tau_final) : nlohmann::json(nullptr);
  j["decision_relations"] = cfg.decision_relations;
  j["lattice"] = cfg.lattice == LatticeMode::Full ? "full" : "restricted";
  j["forced_selection"] = cfg.forced_selection ? nlohmann::json(*cfg.forced_selection) : nlohmann::json(nullptr);
  j["seed"] = cfg.seed;
  return j;
}

nlohmann::json RunRecord::to_json(bool include_timing) const {
  nlohmann::json j;
  j["model"] = std::string(model_kind_name(kind));
  j["seed"] = seed;
  j["config"] = config;
  j["loss_curve"] = loss_curve;
  j["metrics"] = dhgat::to_json(metrics);
  j["train_metrics"] = dhgat::to_json(train_metrics);
  if (!trace.counts.empty()) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& counts : trace.counts) {
      nlohmann::json layer = nlohmann::json::object();
      for (std::size_t t = 0; t < counts.size(); ++t) layer[trace.type_names[t]] = counts[t];
      layers.push_back(layer);
    }
    j["selection_counts"] = layers;
  }
  if (include_timing) j["wall_seconds"] = wall_seconds;
  return j;
}

namespace {

std::string parameter_norms(GraphModel& model) {
  std::ostringstream out;
  out << std::setprecision(6);
  bool first = true;
  for (const auto* p : model.parameters()) {
    out << (first ? "" : ", ") << p->name() << "=" << p->value().norm();
    first = false;
  }
  return out.str();
}

}  // namespace

ForwardResult predict(ad::Tape& tape, const GraphContext& ctx, const ad::Matrix& features, GraphModel& model,
                      const TrainConfig& cfg) {
  ForwardOptions opts;
  opts.training = false;
  opts.tau = cfg.tau;
  return model_forward(tape, ctx, features, model, cfg, opts);
}

TrainOutput train_model(ModelKind kind, const GraphContext& ctx, const ad::Matrix& features,
                        std::span<const int> labels, const Split& split, const TrainConfig& cfg,
                        const TrainHooks& hooks) {
  cfg.validate();
  if (labels.size() != ctx.num_nodes()) throw ShapeError("train_model: one label per node required");
  const auto start = std::chrono::steady_clock::now();

  TrainOutput out{GraphModel::create(kind, static_cast<int>(features.cols()), ctx.lattice.size(), cfg), {}, {}, {}};
  GraphModel& model = out.model;
  ad::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.weight_decay = cfg.weight_decay;
  ad::Adam adam(model.trainable(cfg), adam_cfg);

  RunRecord& rec = out.record;
  rec.kind = kind;
  rec.seed = cfg.seed;
  rec.config = to_json(cfg);
  rec.config["model"] = std::string(model_kind_name(kind));
  rec.loss_curve.reserve(static_cast<std::size_t>(cfg.epochs));

  const std::uint64_t noise_base = ad::derive_seed(cfg.seed, "train");
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    ForwardOptions opts;
    opts.training = true;
    opts.tau = cfg.tau_at(epoch);
    opts.noise_seed = ad::derive_seed(noise_base, static_cast<std::uint64_t>(epoch));
    auto fwd = model_forward(tape, ctx, features, model, cfg, opts);
    ad::Var loss = dhgat_loss(fwd.probs, labels, split.labeled, cfg.lambda1, cfg.lambda2);
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + "; parameter norms: " +
                          parameter_norms(model));
    }
    rec.loss_curve.push_back(value);
    tape.backward(loss);
    adam.step();
    if (hooks.on_epoch) hooks.on_epoch(epoch, fwd.trace);
  }

  ad::Tape tape;
  auto fwd = predict(tape, ctx, features, model, cfg);
  out.probs = fwd.probs.value();
  out.final_trace = std::move(fwd.trace);
  rec.metrics = evaluate_predictions(out.probs, labels, split.unlabeled);
  rec.train_metrics = evaluate_predictions(out.probs, labels, split.labeled);
  if (kind == ModelKind::Dhgat) rec.trace = summarize_trace(out.final_trace, ctx.lattice, ctx.graph->registry());
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void write_loss_csv(std::ostream& out, std::span<const double> curve) {
  out << "epoch,loss\n" << std::setprecision(17);
  for (std::size_t e = 0; e < curve.size(); ++e) out << e << ',' << curve[e] << '\n';
}

void write_trace_header(std::ostream& out, std::size_t lattice_size) {
  out << "epoch,layer,node,chosen_type";
  for (std::size_t t = 0; t < lattice_size; ++t) out << ",rho_" << t;
  out << '\n';
}

void write_trace_rows(std::ostream& out, int epoch, const SelectionTrace& trace) {
  const auto old = out.precision(9);
  for (std::size_t l = 0; l < trace.chosen.size(); ++l) {
    const auto& rho = trace.rho[l];
    for (std::size_t v = 0; v < trace.chosen[l].size(); ++v) {
      out << epoch << ',' << l << ',' << v << ',' << trace.chosen[l][v];
      for (ad::Index t = 0; t < rho.cols(); ++t) out << ',' << rho(static_cast<ad::Index>(v), t);
      out << '\n';
    }
  }
  out.precision(old);
}

TraceCsvSummary summarize_trace_csv(std::istream& in) {
  TraceCsvSummary s;
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("epoch,layer,node,chosen_type")) {
    throw ParseError("trace csv: missing 'epoch,layer,node,chosen_type' header");
  }
  s.lattice_size = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) - 3;
  std::vector<std::vector<double>> rho_sum;
  std::vector<std::int64_t> rows_per_layer;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() != 4 + s.lattice_size) throw ParseError("trace csv row " + std::to_string(row) + ": wrong field count");
    int epoch = 0;
    std::size_t layer = 0;
    std::size_t chosen = 0;
    try {
      epoch = std::stoi(fields[0]);
      layer = std::stoul(fields[1]);
      chosen = std::stoul(fields[3]);
    } catch (const std::exception&) {
      throw ParseError("trace csv row " + std::to_string(row) + ": bad integer");
    }
    if (chosen >= s.lattice_size) throw ParseError("trace csv row " + std::to_string(row) + ": chosen type out of range");
    if (epoch != s.epoch) {
      if (epoch < s.epoch) throw ParseError("trace csv row " + std::to_string(row) + ": epochs must not decrease");
      s.epoch = epoch;
      s.counts.clear();
      rho_sum.clear();
      rows_per_layer.clear();
    }
    if (layer >= s.counts.size()) {
      s.counts.resize(layer + 1, std::vector<std::int64_t>(s.lattice_size, 0));
      rho_sum.resize(layer + 1, std::vector<double>(s.lattice_size, 0.0));
      rows_per_layer.resize(layer + 1, 0);
    }
    ++s.counts[layer][chosen];
    ++rows_per_layer[layer];
    for (std::size_t t = 0; t < s.lattice_size; ++t) rho_sum[layer][t] += std::stod(fields[4 + t]);
  }
  for (std::size_t l = 0; l < rho_sum.size(); ++l) {
    for (auto& x : rho_sum[l]) x /= std::max<std::int64_t>(rows_per_layer[l], 1);
  }
  s.mean_rho = std::move(rho_sum);
  return s;
}

// ---- sweeps -------------------------------------------------------------------------------

std::string SweepCell::label() const {
  std::ostringstream out;
  out << model_kind_name(kind) << '/';
  for (std::size_t i = 0; i < relations.size(); ++i) out << (i ? "+" : "") << relations[i];
  out << "/l1=" << lambda1 << ",l2=" << lambda2 << "/frac=" << fraction;
  return out.str();
}

std::vector<std::vector<std::string>> relation_pairs(const std::vector<std::string>& names) {
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i + 1; j < names.size(); ++j) out.push_back({names[i], names[j]});
  }
  return out;
}

std::vector<std::pair<double, double>> lambda_grid(const std::vector<double>& values) {
  std::vector<std::pair<double, double>> out;
  for (double a : values) {
    for (double b : values) {
      if (a == 0.0 && b == 0.0) continue;
      out.emplace_back(a, b);
    }
  }
  return out;
}

std::vector<SweepCell> expand_sweep(const SweepAxes& axes, const std::vector<std::string>& base_relations,
                                    const TrainConfig& base, const SplitSpec& base_split, ModelKind base_kind) {
  if (axes.relation_subsets.empty() && axes.lambdas.empty() && axes.fractions.empty() && axes.models.empty()) {
    throw ConfigError("sweep: at least one axis must be non-empty");
  }
  auto models = axes.models.empty() ? std::vector<ModelKind>{base_kind} : axes.models;
  auto subsets = axes.relation_subsets.empty() ? std::vector<std::vector<std::string>>{base_relations}
                                               : axes.relation_subsets;
  auto lambdas = axes.lambdas.empty() ? std::vector<std::pair<double, double>>{{base.lambda1, base.lambda2}}
                                      : axes.lambdas;
  auto fractions = axes.fractions.empty() ? std::vector<double>{base_split.labeled_fraction} : axes.fractions;
  for (const auto& [a, b] : lambdas) {
    if (a < 0 || b < 0 || (a == 0 && b == 0)) throw ConfigError("sweep: lambda pair must be >= 0 and not (0, 0)");
  }
  for (double f : fractions) {
    if (!(f > 0 && f < 1)) throw ConfigError("sweep: fractions must lie in (0, 1)");
  }
  for (const auto& s : subsets) {
    if (s.empty()) throw ConfigError("sweep: relation subsets must be non-empty");
  }
  std::vector<SweepCell> cells;
  for (auto kind : models) {
    for (const auto& rels : subsets) {
      for (const auto& [l1, l2] : lambdas) {
        for (double f : fractions) cells.push_back(SweepCell{kind, rels, l1, l2, f});
      }
    }
  }
  return cells;
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : values) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

void aggregate(CellSummary& cell) {
  std::vector<double> acc;
  std::vector<double> f1;
  for (const auto& r : cell.runs) {
    acc.push_back(r.metrics.accuracy);
    f1.push_back(r.metrics.macro_f1);
  }
  std::tie(cell.accuracy_mean, cell.accuracy_std) = mean_std(acc);
  std::tie(cell.f1_mean, cell.f1_std) = mean_std(f1);
}

std::vector<CellSummary> run_sweep(const std::vector<SweepCell>& cells, const GraphBuilder& build,
                                   const ad::Matrix& features, std::span<const int> labels, const TrainConfig& base,
                                   const SplitSpec& base_split, int repeats, const RunCallback& on_run) {
  if (cells.empty()) throw ConfigError("sweep: no cells");
  if (repeats < 1) throw ConfigError("sweep: repeats must be >= 1");
  std::vector<CellSummary> out;
  for (const auto& cell : cells) {
    const HeteroGraph graph = build(cell.relations);
    TrainConfig cfg = base;
    cfg.lambda1 = cell.lambda1;
    cfg.lambda2 = cell.lambda2;
    // A decision neighborhood naming relations outside this cell falls back to the cell's union.
    for (const auto& r : cfg.decision_relations) {
      if (!graph.registry().contains(r)) {
        cfg.decision_relations.clear();
        break;
      }
    }
    const GraphContext ctx = GraphContext::build(graph, cfg);
    CellSummary summary{cell, {}, 0, 0, 0, 0};
    for (int r = 0; r < repeats; ++r) {
      cfg.seed = base.seed + static_cast<std::uint64_t>(r);
      SplitSpec split_spec = base_split;
      split_spec.labeled_fraction = cell.fraction;
      split_spec.seed = base_split.seed + static_cast<std::uint64_t>(r);
      const Split split = make_split(labels, split_spec);
      auto result = train_model(cell.kind, ctx, features, labels, split, cfg);
      result.record.config["relations"] = cell.relations;
      result.record.config["labeled_fraction"] = cell.fraction;
      result.record.config["split_seed"] = split_spec.seed;
      if (on_run) on_run(cell, r, result.record);
      summary.runs.push_back(std::move(result.record));
    }
    aggregate(summary);
    out.push_back(std::move(summary));
  }
  return out;
}

namespace {

std::string pm(double mean, double sd) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << mean << "±" << sd;
  return out.str();
}

}  // namespace

void write_sweep_csv(std::ostream& out, const std::vector<CellSummary>& cells) {
  out << "model,relations,lambda1,lambda2,fraction,repeats,accuracy,macro_f1,accuracy_mean,accuracy_std,f1_mean,"
         "f1_std\n";
  const auto old = out.precision(10);
  for (const auto& c : cells) {
    std::string rels;
    for (std::size_t i = 0; i < c.cell.relations.size(); ++i) rels += (i ? "+" : "") + c.cell.relations[i];
    out << model_kind_name(c.cell.kind) << ',' << rels << ',' << c.cell.lambda1 << ',' << c.cell.lambda2 << ','
        << c.cell.fraction << ',' << c.runs.size() << ',' << pm(c.accuracy_mean, c.accuracy_std) << ','
        << pm(c.f1_mean, c.f1_std) << ',' << c.accuracy_mean << ',' << c.accuracy_std << ',' << c.f1_mean << ','
        << c.f1_std << '\n';
  }
  out.precision(old);
}

}  // namespace dhgat
