#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dhgat/embed.hpp"
#include "dhgat/harness.hpp"
#include "dhgat/hgraph.hpp"
#include "dhgat/liar.hpp"
#include "dhgat/model.hpp"
#include "dhgat/synthetic.hpp"

namespace dhgat {

enum class DataSource { Liar, Planted };
enum class EmbeddingSource { File, Fallback };

struct RelationOptions {
  std::optional<std::size_t> max_degree;
  int k = 10;  ///< knn only
};

struct SweepSpec {
  std::vector<std::vector<std::string>> relation_subsets;
  std::vector<double> lambda_values;  ///< expanded to a grid without (0, 0)
  std::vector<double> fractions;
  std::vector<ModelKind> models;
  int repeats = 10;

  bool empty() const { return relation_subsets.empty() && lambda_values.empty() && fractions.empty() && models.empty(); }
  SweepAxes axes() const;
};

/// Everything one run needs. Serialized as INI with sections data, planted, embedding,
/// graph, relation.<name>, model, train, split, sweep and output.
struct ExperimentConfig {
  DataSource source = DataSource::Liar;
  std::vector<std::filesystem::path> dataset;
  PlantedSpec planted;

  EmbeddingSource embedding = EmbeddingSource::Fallback;
  std::filesystem::path embedding_path;
  int embedding_dim = 300;
  std::uint64_t embedding_seed = 0;

  std::vector<std::string> relations;
  /// Party and state values are shared by thousands of records, so they start capped.
  std::map<std::string, RelationOptions> relation_options{{"party", {100, 10}}, {"state", {100, 10}}};
  std::optional<std::size_t> max_degree;  ///< cap for relations without their own
  std::uint64_t graph_seed = 0;

  ModelKind model = ModelKind::Dhgat;
  TrainConfig train;
  SplitSpec split;
  SweepSpec sweep;

  std::filesystem::path output_dir = "runs";

  /// Throws ConfigError naming the offending key.
  void validate(bool check_files = true) const;
  RelationOptions options_for(const std::string& relation) const;
};

/// Canonical relation spelling ("job_title" -> "job-title"); "knn" stays as is.
std::string canonical_relation(const std::string& name, DataSource source);

/// "section.key" (or "relation.<name>.key") = value, applied after the file.
using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Parse INI text. Relative paths are resolved against `base_dir`. Unknown sections or keys throw.
/// Does not validate; load_config does.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {},
                              const Overrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});
/// Every field with defaults filled; parse_config(to_ini(c)) reproduces c.
std::string to_ini(const ExperimentConfig& cfg);
/// Hash of the resolved config, ignoring the output directory.
std::uint64_t config_hash(const ExperimentConfig& cfg);

// ---- pipeline --------------------------------------------------------------------------

struct Dataset {
  std::vector<NewsRecord> records;  ///< empty for planted data
  std::vector<int> labels;
  EmbeddingMatrix features;
  std::optional<PlantedGraph> planted;
};

Dataset load_dataset(const ExperimentConfig& cfg);
/// Heterogeneous graph over the dataset using the named relations in the given order.
HeteroGraph build_graph(const ExperimentConfig& cfg, const Dataset& data, const std::vector<std::string>& relations);

}  // namespace dhgat
