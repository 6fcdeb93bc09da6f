// dhgat: build graphs, train and evaluate models, run sweeps and gradient checks.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "dhgat/checkpoint.hpp"
#include "dhgat/checks.hpp"
#include "dhgat/config.hpp"
#include "dhgat/errors.hpp"
#include "dhgat/harness.hpp"

namespace fs = std::filesystem;
using namespace dhgat;

namespace {

struct Common {
  std::string config;
  std::string output;
  std::vector<std::string> sets;
};

Overrides parse_overrides(const std::vector<std::string>& sets) {
  Overrides out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects section.key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

// Precedence for the output directory: --output, then DHGAT_OUTPUT_DIR, then [output] dir.
ExperimentConfig resolve(const Common& c) {
  auto cfg = load_config(c.config, parse_overrides(c.sets));
  if (const char* env = std::getenv("DHGAT_OUTPUT_DIR"); env != nullptr && *env != '\0') cfg.output_dir = env;
  if (!c.output.empty()) cfg.output_dir = c.output;
  fs::create_directories(cfg.output_dir);
  return cfg;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) { open_out(path) << j.dump(2) << '\n'; }

void echo_config(const ExperimentConfig& cfg, const std::string& command) {
  auto out = open_out(cfg.output_dir / (command + ".config.ini"));
  out << "# resolved configuration for `dhgat " << command << "`\n" << to_ini(cfg);
}

struct Prepared {
  Dataset data;
  HeteroGraph graph;
};

Prepared prepare(const ExperimentConfig& cfg) {
  Prepared p{load_dataset(cfg), {}};
  p.graph = build_graph(cfg, p.data, cfg.relations);
  return p;
}

nlohmann::json graph_stats(const HeteroGraph& g) {
  nlohmann::json rels = nlohmann::json::object();
  for (std::size_t r = 0; r < g.num_relations(); ++r) rels[g.registry().name(r)] = g.relation(r).num_edges() / 2;
  return {{"nodes", g.num_nodes()},
          {"relations", rels},
          {"union_edges", edges_for_type(g, g.full_type()).num_edges() / 2}};
}

int cmd_build_graph(const Common& c) {
  const auto cfg = resolve(c);
  echo_config(cfg, "build-graph");
  const auto p = prepare(cfg);
  {
    auto out = open_out(cfg.output_dir / "graph.txt");
    write_graph(out, p.graph);
  }
  const auto stats = graph_stats(p.graph);
  write_json(cfg.output_dir / "graph_stats.json", stats);
  std::cout << stats.dump(2) << '\n';
  return 0;
}

int cmd_train(const Common& c, int trace_every) {
  const auto cfg = resolve(c);
  echo_config(cfg, "train");
  const auto p = prepare(cfg);
  const GraphContext ctx = GraphContext::build(p.graph, cfg.train);
  const Split split = make_split(p.data.labels, cfg.split);

  std::ofstream trace;
  TrainHooks hooks;
  if (cfg.model == ModelKind::Dhgat) {
    trace = open_out(cfg.output_dir / "trace.csv");
    write_trace_header(trace, ctx.lattice.size());
    if (trace_every > 0) {
      hooks.on_epoch = [&](int epoch, const SelectionTrace& t) {
        if (epoch % trace_every == 0) write_trace_rows(trace, epoch, t);
      };
    }
  }
  auto result = train_model(cfg.model, ctx, p.data.features.values, p.data.labels, split, cfg.train, hooks);
  if (cfg.model == ModelKind::Dhgat) write_trace_rows(trace, cfg.train.epochs, result.final_trace);

  result.record.config["relations"] = cfg.relations;
  result.record.config["labeled_fraction"] = cfg.split.labeled_fraction;
  result.record.config["split_seed"] = cfg.split.seed;
  write_json(cfg.output_dir / "run.json", result.record.to_json(true));
  write_json(cfg.output_dir / "metrics.json", to_json(result.record.metrics));
  {
    auto out = open_out(cfg.output_dir / "loss.csv");
    write_loss_csv(out, result.record.loss_curve);
  }
  {
    auto out = open_out(cfg.output_dir / "confusion.csv");
    write_confusion_csv(out, result.record.metrics);
  }
  const auto params = result.model.parameters();
  std::vector<const ad::Parameter*> cparams(params.begin(), params.end());
  ad::save_checkpoint(cfg.output_dir / "checkpoint.bin", cparams, config_hash(cfg), cfg.train.seed);

  std::cout << std::fixed << std::setprecision(4) << model_kind_name(cfg.model) << ": accuracy "
            << result.record.metrics.accuracy << ", macro-F1 " << result.record.metrics.macro_f1 << " on "
            << result.record.metrics.count << " unlabeled nodes\n";
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& checkpoint_path, bool ignore_hash) {
  const auto cfg = resolve(c);
  echo_config(cfg, "evaluate");
  const auto ckpt = ad::load_checkpoint(checkpoint_path);
  if (!ignore_hash && ckpt.config_hash != config_hash(cfg)) {
    throw ConfigError("checkpoint was trained under a different config (pass --ignore-config-hash to override)");
  }
  const auto p = prepare(cfg);
  const GraphContext ctx = GraphContext::build(p.graph, cfg.train);
  const Split split = make_split(p.data.labels, cfg.split);
  auto model = GraphModel::create(cfg.model, static_cast<int>(p.data.features.dim()), ctx.lattice.size(), cfg.train);
  auto params = model.parameters();
  ad::restore_parameters(ckpt, params);
  ad::Tape tape;
  auto fwd = predict(tape, ctx, p.data.features.values, model, cfg.train);
  const auto metrics = evaluate_predictions(fwd.probs.value(), p.data.labels, split.unlabeled);
  write_json(cfg.output_dir / "eval_metrics.json", to_json(metrics));
  {
    auto out = open_out(cfg.output_dir / "eval_confusion.csv");
    write_confusion_csv(out, metrics);
  }
  std::cout << std::fixed << std::setprecision(4) << "accuracy " << metrics.accuracy << ", macro-F1 "
            << metrics.macro_f1 << " on " << metrics.count << " unlabeled nodes\n";
  return 0;
}

int cmd_sweep(const Common& c) {
  const auto cfg = resolve(c);
  echo_config(cfg, "sweep");
  if (cfg.sweep.empty()) throw ConfigError("sweep: set at least one of sweep.relation_subsets, sweep.lambda_values, "
                                           "sweep.fractions, sweep.models");
  const auto data = load_dataset(cfg);
  const auto cells = expand_sweep(cfg.sweep.axes(), cfg.relations, cfg.train, cfg.split, cfg.model);
  const fs::path runs_dir = cfg.output_dir / "runs";
  fs::create_directories(runs_dir);
  std::size_t cell_index = 0;
  const SweepCell* last = nullptr;
  auto on_run = [&](const SweepCell& cell, int repeat, const RunRecord& rec) {
    if (last != &cell) {
      if (last != nullptr) ++cell_index;
      last = &cell;
    }
    std::ostringstream name;
    name << "cell" << std::setw(3) << std::setfill('0') << cell_index << "_seed" << repeat << ".json";
    write_json(runs_dir / name.str(), rec.to_json(true));
    std::cout << cell.label() << " repeat " << repeat << ": accuracy " << std::fixed << std::setprecision(4)
              << rec.metrics.accuracy << '\n';
  };
  auto builder = [&](const std::vector<std::string>& rels) { return build_graph(cfg, data, rels); };
  const auto summary = run_sweep(cells, builder, data.features.values, data.labels, cfg.train, cfg.split,
                                 cfg.sweep.repeats, on_run);
  {
    auto out = open_out(cfg.output_dir / "sweep.csv");
    write_sweep_csv(out, summary);
  }
  write_sweep_csv(std::cout, summary);
  return 0;
}

int cmd_gradcheck(const std::string& output, double tolerance, std::uint64_t seed) {
  fs::path dir = output;
  if (dir.empty()) {
    const char* env = std::getenv("DHGAT_OUTPUT_DIR");
    dir = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
  }
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "gradcheck.config.ini");
    out << "# resolved configuration for `dhgat gradcheck`\n[gradcheck]\ntolerance = " << tolerance
        << "\nseed = " << seed << '\n';
  }
  const auto checks = run_gradient_suite(tolerance, seed);
  const auto report = to_json(checks);
  write_json(dir / "gradcheck.json", report);
  for (const auto& ch : checks) {
    std::cout << (ch.report.passed ? "PASS " : "FAIL ") << std::left << std::setw(24) << ch.name
              << " max_rel_error=" << std::scientific << std::setprecision(3) << ch.report.max_rel_error << '\n';
  }
  return report["passed"].get<bool>() ? 0 : 1;
}

int cmd_inspect_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  const auto s = summarize_trace_csv(in);
  std::cout << "epoch " << s.epoch << ", " << s.lattice_size << " neighborhood types\n";
  for (std::size_t l = 0; l < s.counts.size(); ++l) {
    std::cout << "layer " << l << '\n';
    std::int64_t total = 0;
    for (auto x : s.counts[l]) total += x;
    for (std::size_t t = 0; t < s.lattice_size; ++t) {
      std::cout << "  type " << t << ": chosen " << s.counts[l][t] << " (" << std::fixed << std::setprecision(1)
                << 100.0 * static_cast<double>(s.counts[l][t]) / static_cast<double>(std::max<std::int64_t>(total, 1))
                << "%), mean rho " << std::setprecision(4) << s.mean_rho[l][t] << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous graph attention with per-node neighborhood selection"};
  app.require_subcommand(1);

  auto add_common = [](CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config, "INI experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", c.output, "Output directory (overrides DHGAT_OUTPUT_DIR and [output] dir)");
    sub->add_option("--set", c.sets, "Override a config key, e.g. --set train.epochs=50");
  };

  Common build_c, train_c, eval_c, sweep_c;
  auto* build = app.add_subcommand("build-graph", "Build the heterogeneous graph and export it");
  add_common(build, build_c);

  auto* train = app.add_subcommand("train", "Train a model and write metrics, curves and a checkpoint");
  add_common(train, train_c);
  int trace_every = 0;
  train->add_option("--trace-every", trace_every, "Also record training selections every N epochs");

  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on the unlabeled nodes");
  add_common(eval, eval_c);
  std::string checkpoint;
  bool ignore_hash = false;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  eval->add_flag("--ignore-config-hash", ignore_hash, "Accept a checkpoint trained under another config");

  auto* sweep = app.add_subcommand("sweep", "Run the configured sweep grid");
  add_common(sweep, sweep_c);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks on toy graphs");
  std::string grad_out;
  double tolerance = 1e-4;
  std::uint64_t grad_seed = 7;
  grad->add_option("-o,--output", grad_out, "Output directory");
  grad->add_option("--tolerance", tolerance, "Maximum relative error");
  grad->add_option("--seed", grad_seed, "Seed for the toy graph and parameters");

  auto* inspect = app.add_subcommand("inspect-trace", "Summarize a selection trace CSV");
  std::string trace_path;
  inspect->add_option("trace", trace_path, "trace.csv written by train")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build) return cmd_build_graph(build_c);
    if (*train) return cmd_train(train_c, trace_every);
    if (*eval) return cmd_evaluate(eval_c, checkpoint, ignore_hash);
    if (*sweep) return cmd_sweep(sweep_c);
    if (*grad) return cmd_gradcheck(grad_out, tolerance, grad_seed);
    if (*inspect) return cmd_inspect_trace(trace_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
