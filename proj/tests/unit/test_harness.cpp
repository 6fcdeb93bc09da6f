#include <doctest.h>

#include <map>
#include <numeric>
#include <sstream>

#include "dhgat/checks.hpp"
#include "dhgat/errors.hpp"
#include "dhgat/harness.hpp"
#include "dhgat/synthetic.hpp"

using namespace dhgat;
using ad::Matrix;

namespace {

std::vector<int> balanced_labels(int per_class) {
  std::vector<int> out;
  for (int c = 0; c < kNumClasses; ++c) out.insert(out.end(), static_cast<std::size_t>(per_class), c);
  return out;
}

TrainConfig quick_config(int epochs) {
  TrainConfig cfg;
  cfg.hidden = {16, 8};
  cfg.heads = 2;
  cfg.mlp_hidden = {8};
  cfg.dropout = 0.2;
  cfg.lr = 0.01;
  cfg.epochs = epochs;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

// ---- splits ------------------------------------------------------------------------

TEST_CASE("stratified split labels round(fraction * size) per class") {
  std::vector<int> labels;
  const std::array<int, 6> sizes{10, 23, 7, 40, 13, 17};
  for (int c = 0; c < 6; ++c) labels.insert(labels.end(), static_cast<std::size_t>(sizes[c]), c);
  for (double f : {0.1, 0.3, 0.5}) {
    const auto split = make_split(labels, {.labeled_fraction = f, .stratified = true, .seed = 4});
    CHECK(split.labeled.size() + split.unlabeled.size() == labels.size());
    CHECK(std::is_sorted(split.labeled.begin(), split.labeled.end()));
    CHECK(std::is_sorted(split.unlabeled.begin(), split.unlabeled.end()));
    std::vector<NodeId> both;
    std::set_intersection(split.labeled.begin(), split.labeled.end(), split.unlabeled.begin(), split.unlabeled.end(),
                          std::back_inserter(both));
    CHECK(both.empty());
    std::array<int, 6> got{};
    for (auto v : split.labeled) ++got[static_cast<std::size_t>(labels[v])];
    for (int c = 0; c < 6; ++c) {
      if (f * sizes[c] < 0.5) continue;
      CHECK(std::abs(static_cast<double>(got[c]) / sizes[c] - f) <= 1.0 / sizes[c]);
    }
    if (f == 0.3) {
      CHECK(split.labeled == make_split(labels, {.labeled_fraction = f, .seed = 4}).labeled);
      CHECK(split.labeled != make_split(labels, {.labeled_fraction = f, .seed = 5}).labeled);
    }
  }
}

TEST_CASE("split guards") {
  const auto labels = balanced_labels(3);
  CHECK_THROWS_AS(make_split(labels, {.labeled_fraction = 0.1}), ValidationError);
  CHECK_THROWS_AS(make_split(labels, {.labeled_fraction = 0.0}), ConfigError);
  CHECK_THROWS_AS(make_split(labels, {.labeled_fraction = 1.0}), ConfigError);
  const auto unstrat = make_split(labels, {.labeled_fraction = 0.25, .stratified = false, .seed = 1});
  CHECK(unstrat.labeled.size() == 5);  // round(4.5) away from zero
}

// ---- metrics -----------------------------------------------------------------------------

TEST_CASE("metrics on perfect predictions") {
  const auto labels = balanced_labels(2);
  Matrix p = Matrix::Zero(12, 6);
  for (std::size_t v = 0; v < 12; ++v) p(static_cast<ad::Index>(v), labels[v]) = 1.0;
  std::vector<NodeId> ids(12);
  std::iota(ids.begin(), ids.end(), NodeId{0});
  const auto m = evaluate_predictions(p, labels, ids);
  CHECK(m.accuracy == 1.0);
  CHECK(m.macro_f1 == 1.0);
  CHECK(m.ordinal_mae == 0.0);
  for (int c = 0; c < 6; ++c) CHECK(m.confusion[c][c] == 2);
}

TEST_CASE("predicting class 0 everywhere on a balanced set") {
  const auto labels = balanced_labels(5);
  Matrix p = Matrix::Constant(30, 6, 0.1);
  p.col(0).setConstant(0.5);
  std::vector<NodeId> ids(30);
  std::iota(ids.begin(), ids.end(), NodeId{0});
  const auto m = evaluate_predictions(p, labels, ids);
  CHECK(std::abs(m.accuracy - 1.0 / 6.0) < 1e-15);
  CHECK(std::abs(m.macro_f1 - (2.0 / 7.0) / 6.0) < 1e-15);
  CHECK(std::abs(m.macro_f1 - 0.0476) < 1e-4);
  CHECK(std::abs(m.ordinal_mae - 2.5) < 1e-15);
  std::int64_t total = 0;
  for (int r = 0; r < 6; ++r) {
    std::int64_t row = 0;
    for (int c = 0; c < 6; ++c) row += m.confusion[r][c];
    CHECK(row == m.support[r]);
    total += row;
  }
  CHECK(total == 30);
  CHECK(m.per_class_accuracy[0] == 1.0);
  CHECK(m.per_class_accuracy[3] == 0.0);
}

TEST_CASE("ties go to the lowest class and only listed ids count") {
  const std::vector<int> labels{2, 4, 1};
  Matrix p = Matrix::Constant(3, 6, 1.0 / 6.0);
  const std::vector<NodeId> ids{0, 2};
  const auto m = evaluate_predictions(p, labels, ids);
  CHECK(m.count == 2);
  CHECK(m.confusion[2][0] == 1);
  CHECK(m.confusion[1][0] == 1);
  std::ostringstream csv;
  write_confusion_csv(csv, m);
  CHECK(csv.str().find("true\\pred") != std::string::npos);
}

// ---- training -----------------------------------------------------------------------------

TEST_CASE("training on a toy problem lowers the loss and fits the labeled nodes") {
  const auto toy = make_toy_problem(60, 8, 2);
  auto cfg = quick_config(120);
  const auto ctx = GraphContext::build(toy.graph, cfg);
  Split split{toy.labeled, {}};
  for (NodeId v = 0; v < 60; ++v) {
    if (!std::binary_search(toy.labeled.begin(), toy.labeled.end(), v)) split.unlabeled.push_back(v);
  }
  const auto out = train_model(ModelKind::Dhgat, ctx, toy.features, toy.labels, split, cfg);
  const auto& curve = out.record.loss_curve;
  REQUIRE(curve.size() == 120);
  const double head = std::accumulate(curve.begin(), curve.begin() + 10, 0.0) / 10;
  const double tail = std::accumulate(curve.end() - 10, curve.end(), 0.0) / 10;
  CHECK(tail < 0.5 * head);
  CHECK(out.record.train_metrics.accuracy > 0.9);
  CHECK(out.final_trace.chosen.size() == 2);
}

TEST_CASE("labels of unlabeled nodes never influence training") {
  auto planted = make_planted_graph({.nodes = 60, .seed = 3});
  const auto cfg = quick_config(15);
  const auto ctx = GraphContext::build(planted.graph, cfg);
  const auto split = make_split(planted.labels, {.labeled_fraction = 0.3, .seed = 1});
  auto poisoned = planted.labels;
  for (auto v : split.unlabeled) poisoned[v] = (poisoned[v] + 3) % kNumClasses;
  for (auto kind : {ModelKind::Dhgat, ModelKind::Gatv2, ModelKind::Gcn}) {
    std::vector<std::vector<std::vector<std::size_t>>> ta;
    std::vector<std::vector<std::vector<std::size_t>>> tb;
    const auto a = train_model(kind, ctx, planted.features, planted.labels, split, cfg,
                               {[&](int, const SelectionTrace& t) { ta.push_back(t.chosen); }});
    const auto b = train_model(kind, ctx, planted.features, poisoned, split, cfg,
                               {[&](int, const SelectionTrace& t) { tb.push_back(t.chosen); }});
    CHECK(a.record.loss_curve == b.record.loss_curve);
    CHECK(a.probs == b.probs);
    CHECK(ta == tb);
    CHECK(a.record.train_metrics.accuracy == b.record.train_metrics.accuracy);
  }
}

TEST_CASE("forced-union DHGAT trains exactly like GATv2") {
  auto planted = make_planted_graph({.nodes = 48, .seed = 6});
  auto cfg = quick_config(20);
  cfg.lambda2 = 0.0;
  auto ctx = GraphContext::build(planted.graph, cfg);
  cfg.forced_selection = ctx.full_union_index();
  const auto split = make_split(planted.labels, {.labeled_fraction = 0.5, .seed = 2});
  const auto dh = train_model(ModelKind::Dhgat, ctx, planted.features, planted.labels, split, cfg);
  const auto gat = train_model(ModelKind::Gatv2, ctx, planted.features, planted.labels, split, cfg);
  REQUIRE(dh.record.loss_curve.size() == gat.record.loss_curve.size());
  for (std::size_t e = 0; e < dh.record.loss_curve.size(); ++e) {
    CHECK(std::abs(dh.record.loss_curve[e] - gat.record.loss_curve[e]) < 1e-9);
  }
}

TEST_CASE("seeded runs repeat bit for bit") {
  auto planted = make_planted_graph({.nodes = 48, .seed = 8});
  const auto cfg = quick_config(10);
  const auto ctx = GraphContext::build(planted.graph, cfg);
  const auto split = make_split(planted.labels, {.labeled_fraction = 0.5, .seed = 2});
  const auto a = train_model(ModelKind::Dhgat, ctx, planted.features, planted.labels, split, cfg);
  const auto b = train_model(ModelKind::Dhgat, ctx, planted.features, planted.labels, split, cfg);
  CHECK(a.record.to_json().dump() == b.record.to_json().dump());
  CHECK(a.probs == b.probs);
  auto other = cfg;
  other.seed = 6;
  const auto c = train_model(ModelKind::Dhgat, ctx, planted.features, planted.labels, split, other);
  CHECK(c.record.loss_curve != a.record.loss_curve);
  CHECK_FALSE(a.record.to_json().contains("wall_seconds"));
  CHECK(a.record.to_json(true).contains("wall_seconds"));
}

// ---- traces ---------------------------------------------------------------------------------

TEST_CASE("trace csv round trip keeps the last epoch") {
  SelectionTrace t0;
  t0.chosen = {{0, 1, 1}};
  t0.rho = {Matrix{{0.5, 0.5}, {0.2, 0.8}, {0.4, 0.6}}};
  SelectionTrace t1;
  t1.chosen = {{1, 1, 0}, {1, 0, 0}};
  t1.rho = {Matrix{{0.1, 0.9}, {0.3, 0.7}, {0.6, 0.4}}, Matrix{{0.25, 0.75}, {0.5, 0.5}, {1.0, 0.0}}};
  std::stringstream ss;
  write_trace_header(ss, 2);
  write_trace_rows(ss, 0, t0);
  write_trace_rows(ss, 4, t1);
  const auto s = summarize_trace_csv(ss);
  CHECK(s.epoch == 4);
  CHECK(s.lattice_size == 2);
  CHECK(s.counts == std::vector<std::vector<std::int64_t>>{{1, 2}, {2, 1}});
  CHECK(std::abs(s.mean_rho[0][1] - 2.0 / 3.0) < 1e-9);
  CHECK(std::abs(s.mean_rho[1][0] - 1.75 / 3.0) < 1e-9);

  std::istringstream bad("node,rho\n");
  CHECK_THROWS_AS(summarize_trace_csv(bad), ParseError);
}

TEST_CASE("trace summary counts chosen types per layer") {
  const RelationRegistry reg({"a", "b"});
  const auto lat = enumerate_lattice(reg, LatticeMode::Full);
  SelectionTrace t;
  t.chosen = {{3, 3, 1, 0}, {1, 1, 1, 2}};
  t.rho = {Matrix::Constant(4, 4, 0.25), Matrix::Constant(4, 4, 0.25)};
  const auto s = summarize_trace(t, lat, reg);
  CHECK(s.type_names == std::vector<std::string>{"{}", "{a}", "{b}", "{a,b}"});
  CHECK(s.counts[0] == std::vector<std::int64_t>{1, 1, 0, 2});
  CHECK(s.counts[1] == std::vector<std::int64_t>{0, 3, 1, 0});
}

// ---- sweeps ---------------------------------------------------------------------------------

TEST_CASE("sweep expansion sizes") {
  const auto pairs = relation_pairs({"speaker", "context", "subject", "job-title"});
  CHECK(pairs.size() == 6);
  CHECK(pairs.front() == std::vector<std::string>{"speaker", "context"});
  const auto grid = lambda_grid({0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(grid.size() == 24);
  CHECK(std::find(grid.begin(), grid.end(), std::pair{0.0, 0.0}) == grid.end());

  const TrainConfig base;
  const SplitSpec split;
  SweepAxes axes;
  axes.lambdas = grid;
  CHECK(expand_sweep(axes, {"speaker", "context"}, base, split).size() == 24);
  axes.relation_subsets = pairs;
  axes.models = {ModelKind::Dhgat, ModelKind::Gcn};
  const auto cells = expand_sweep(axes, {}, base, split);
  CHECK(cells.size() == 2 * 6 * 24);
  CHECK(cells.front().label() == "dhgat/speaker+context/l1=0,l2=0.25/frac=0.3");

  CHECK_THROWS_AS(expand_sweep({}, {"speaker"}, base, split), ConfigError);
  SweepAxes zero;
  zero.lambdas = {{0.0, 0.0}};
  CHECK_THROWS_AS(expand_sweep(zero, {"speaker"}, base, split), ConfigError);
}

TEST_CASE("aggregate recomputes mean and population std") {
  CellSummary cell;
  const std::vector<double> acc{0.5, 0.7, 0.6, 0.4};
  for (double a : acc) {
    RunRecord r;
    r.metrics.accuracy = a;
    r.metrics.macro_f1 = a / 2;
    cell.runs.push_back(r);
  }
  aggregate(cell);
  CHECK(std::abs(cell.accuracy_mean - 0.55) < 1e-15);
  CHECK(std::abs(cell.accuracy_std - std::sqrt(0.0125)) < 1e-15);
  CHECK(std::abs(cell.f1_mean - 0.275) < 1e-15);
  CHECK(std::abs(cell.f1_std - std::sqrt(0.0125) / 2) < 1e-15);
  const std::vector<double> one{0.3};
  CHECK(mean_std(one) == std::pair{0.3, 0.0});
}

TEST_CASE("small sweep runs every cell on shared splits") {
  auto planted = make_planted_graph({.nodes = 36, .seed = 9});
  auto cfg = quick_config(4);
  cfg.decision_relations = {"rel2"};
  SweepAxes axes;
  axes.relation_subsets = {{"rel1"}, {"rel1", "rel2"}};
  axes.models = {ModelKind::Dhgat, ModelKind::Gcn};
  const SplitSpec split{.labeled_fraction = 0.5, .seed = 3};
  const auto cells = expand_sweep(axes, {}, cfg, split);
  auto build = [&](const std::vector<std::string>& rels) {
    std::vector<std::pair<std::string, std::vector<Edge>>> lists;
    for (const auto& r : rels) {
      const auto& adj = planted.graph.relation(r);
      std::vector<Edge> edges;
      for (NodeId v = 0; v < adj.num_nodes(); ++v) {
        for (NodeId u : adj.neighbors(v)) edges.emplace_back(v, u);
      }
      lists.emplace_back(r, edges);
    }
    return HeteroGraph::from_edge_lists(planted.graph.num_nodes(), lists);
  };
  int calls = 0;
  const auto out = run_sweep(cells, build, planted.features, planted.labels, cfg, split, 2,
                             [&](const SweepCell&, int, const RunRecord&) { ++calls; });
  CHECK(calls == 8);
  REQUIRE(out.size() == 4);
  for (const auto& c : out) {
    CHECK(c.runs.size() == 2);
    CHECK(c.runs[0].seed == 5);
    CHECK(c.runs[1].seed == 6);
  }
  std::ostringstream csv;
  write_sweep_csv(csv, out);
  const std::string text = csv.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  CHECK(text.find("±") != std::string::npos);
}
