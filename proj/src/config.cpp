#include "dhgat/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dhgat/errors.hpp"

namespace dhgat {

namespace {

namespace pt = boost::property_tree;

const std::set<std::string> kLiarRelations = {"speaker", "context", "subject", "party", "job-title", "state", "knn"};
const std::set<std::string> kPlantedRelations = {"rel1", "rel2"};

// "knn-7" carries its own k; plain "knn" takes k from [relation.knn].
std::optional<int> knn_suffix(const std::string& name) {
  if (!name.starts_with("knn-") || name.size() == 4) return std::nullopt;
  int k = 0;
  auto [ptr, ec] = std::from_chars(name.data() + 4, name.data() + name.size(), k);
  if (ec != std::errc() || ptr != name.data() + name.size() || k < 1) return std::nullopt;
  return k;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto t = trim(s);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  }
  return v;
}

std::int64_t to_int(const std::string& key, const std::string& s) {
  std::int64_t v = 0;
  const auto t = trim(s);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected an integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  const auto t = trim(s);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  const auto t = trim(s);
  if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
  if (t == "false" || t == "no" || t == "0" || t == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

bool is_none(const std::string& s) {
  const auto t = trim(s);
  return t.empty() || t == "none";
}

std::optional<std::size_t> to_cap(const std::string& key, const std::string& s) {
  if (is_none(s)) return std::nullopt;
  const auto v = to_int(key, s);
  if (v < 1) throw ConfigError(key + ": must be >= 1 or none");
  return static_cast<std::size_t>(v);
}

std::vector<int> to_int_list(const std::string& key, const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split_list(s, ',')) out.push_back(static_cast<int>(to_int(key, item)));
  return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s, ',')) out.push_back(to_double(key, item));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
std::string join(const std::vector<T>& xs, const std::string& sep, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? sep : "") + f(xs[i]);
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(trim(p));
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return (base / path).lexically_normal();
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value,
                                  const std::filesystem::path& base)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.source",
       [](auto& c, auto& k, auto& v, auto&) {
         const auto t = trim(v);
         if (t == "liar") c.source = DataSource::Liar;
         else if (t == "planted") c.source = DataSource::Planted;
         else throw ConfigError(k + ": expected liar or planted, got '" + v + "'");
       }},
      {"data.files",
       [](auto& c, auto&, auto& v, auto& base) {
         c.dataset.clear();
         for (const auto& f : split_list(v, ',')) c.dataset.push_back(resolve(base, f));
       }},
      {"planted.nodes", [](auto& c, auto& k, auto& v, auto&) { c.planted.nodes = static_cast<std::size_t>(to_u64(k, v)); }},
      {"planted.classes", [](auto& c, auto& k, auto& v, auto&) { c.planted.classes = static_cast<int>(to_int(k, v)); }},
      {"planted.feature_dim",
       [](auto& c, auto& k, auto& v, auto&) { c.planted.feature_dim = static_cast<int>(to_int(k, v)); }},
      {"planted.signal", [](auto& c, auto& k, auto& v, auto&) { c.planted.signal = to_double(k, v); }},
      {"planted.noise", [](auto& c, auto& k, auto& v, auto&) { c.planted.noise = to_double(k, v); }},
      {"planted.homophilous_degree",
       [](auto& c, auto& k, auto& v, auto&) { c.planted.homophilous_degree = static_cast<int>(to_int(k, v)); }},
      {"planted.noise_degree",
       [](auto& c, auto& k, auto& v, auto&) { c.planted.noise_degree = static_cast<int>(to_int(k, v)); }},
      {"planted.seed", [](auto& c, auto& k, auto& v, auto&) { c.planted.seed = to_u64(k, v); }},
      {"embedding.source",
       [](auto& c, auto& k, auto& v, auto&) {
         const auto t = trim(v);
         if (t == "file") c.embedding = EmbeddingSource::File;
         else if (t == "fallback") c.embedding = EmbeddingSource::Fallback;
         else throw ConfigError(k + ": expected file or fallback, got '" + v + "'");
       }},
      {"embedding.path", [](auto& c, auto&, auto& v, auto& base) { c.embedding_path = resolve(base, v); }},
      {"embedding.dim", [](auto& c, auto& k, auto& v, auto&) { c.embedding_dim = static_cast<int>(to_int(k, v)); }},
      {"embedding.seed", [](auto& c, auto& k, auto& v, auto&) { c.embedding_seed = to_u64(k, v); }},
      {"graph.relations", [](auto& c, auto&, auto& v, auto&) { c.relations = split_list(v, ','); }},
      {"graph.max_degree", [](auto& c, auto& k, auto& v, auto&) { c.max_degree = to_cap(k, v); }},
      {"graph.seed", [](auto& c, auto& k, auto& v, auto&) { c.graph_seed = to_u64(k, v); }},
      {"graph.lattice", [](auto& c, auto&, auto& v, auto&) { c.train.lattice = parse_lattice_mode(trim(v)); }},
      {"model.kind", [](auto& c, auto&, auto& v, auto&) { c.model = parse_model_kind(trim(v)); }},
      {"model.layers", [](auto& c, auto& k, auto& v, auto&) { c.train.layers = static_cast<int>(to_int(k, v)); }},
      {"model.hidden", [](auto& c, auto& k, auto& v, auto&) { c.train.hidden = to_int_list(k, v); }},
      {"model.heads", [](auto& c, auto& k, auto& v, auto&) { c.train.heads = static_cast<int>(to_int(k, v)); }},
      {"model.mlp_hidden", [](auto& c, auto& k, auto& v, auto&) { c.train.mlp_hidden = to_int_list(k, v); }},
      {"model.dropout", [](auto& c, auto& k, auto& v, auto&) { c.train.dropout = to_double(k, v); }},
      {"train.lr", [](auto& c, auto& k, auto& v, auto&) { c.train.lr = to_double(k, v); }},
      {"train.weight_decay", [](auto& c, auto& k, auto& v, auto&) { c.train.weight_decay = to_double(k, v); }},
      {"train.epochs", [](auto& c, auto& k, auto& v, auto&) { c.train.epochs = static_cast<int>(to_int(k, v)); }},
      {"train.lambda1", [](auto& c, auto& k, auto& v, auto&) { c.train.lambda1 = to_double(k, v); }},
      {"train.lambda2", [](auto& c, auto& k, auto& v, auto&) { c.train.lambda2 = to_double(k, v); }},
      {"train.tau", [](auto& c, auto& k, auto& v, auto&) { c.train.tau = to_double(k, v); }},
      {"train.tau_final",
       [](auto& c, auto& k, auto& v, auto&) {
         c.train.tau_final = is_none(v) ? std::nullopt : std::optional<double>(to_double(k, v));
       }},
      {"train.seed", [](auto& c, auto& k, auto& v, auto&) { c.train.seed = to_u64(k, v); }},
      {"train.decision_relations",
       [](auto& c, auto&, auto& v, auto&) { c.train.decision_relations = split_list(v, ','); }},
      {"train.forced_selection",
       [](auto& c, auto& k, auto& v, auto&) {
         c.train.forced_selection =
             is_none(v) ? std::nullopt : std::optional<std::size_t>(static_cast<std::size_t>(to_u64(k, v)));
       }},
      {"split.labeled_fraction", [](auto& c, auto& k, auto& v, auto&) { c.split.labeled_fraction = to_double(k, v); }},
      {"split.stratified", [](auto& c, auto& k, auto& v, auto&) { c.split.stratified = to_bool(k, v); }},
      {"split.seed", [](auto& c, auto& k, auto& v, auto&) { c.split.seed = to_u64(k, v); }},
      {"sweep.relation_subsets",
       [](auto& c, auto& k, auto& v, auto&) {
         c.sweep.relation_subsets.clear();
         const auto t = trim(v);
         if (t.starts_with("pairs:")) {
           c.sweep.relation_subsets = relation_pairs(split_list(t.substr(6), ','));
           if (c.sweep.relation_subsets.empty()) throw ConfigError(k + ": pairs: needs at least two relations");
           return;
         }
         for (const auto& subset : split_list(t, ';')) c.sweep.relation_subsets.push_back(split_list(subset, '+'));
       }},
      {"sweep.lambda_values", [](auto& c, auto& k, auto& v, auto&) { c.sweep.lambda_values = to_double_list(k, v); }},
      {"sweep.fractions", [](auto& c, auto& k, auto& v, auto&) { c.sweep.fractions = to_double_list(k, v); }},
      {"sweep.models",
       [](auto& c, auto&, auto& v, auto&) {
         c.sweep.models.clear();
         for (const auto& m : split_list(v, ',')) c.sweep.models.push_back(parse_model_kind(m));
       }},
      {"sweep.repeats", [](auto& c, auto& k, auto& v, auto&) { c.sweep.repeats = static_cast<int>(to_int(k, v)); }},
      {"output.dir", [](auto& c, auto&, auto& v, auto& base) { c.output_dir = resolve(base, v); }},
  };
  return table;
}

// Field names used in TrainConfig / SplitSpec messages mapped onto their INI sections.
std::string section_of(const std::string& field) {
  static const std::map<std::string, std::string> kSections = {
      {"layers", "model"}, {"hidden", "model"},      {"heads", "model"},         {"mlp_hidden", "model"},
      {"dropout", "model"}, {"labeled_fraction", "split"}, {"lambda", "train"},
  };
  auto it = kSections.find(field);
  return it == kSections.end() ? "train" : it->second;
}

template <class F>
void with_prefix(const std::string& section, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    const std::string field = colon == std::string::npos ? msg : msg.substr(0, colon);
    const std::string sec = section.empty() ? section_of(field) : section;
    throw ConfigError(sec + "." + msg);
  }
}

}  // namespace

SweepAxes SweepSpec::axes() const {
  SweepAxes a;
  a.relation_subsets = relation_subsets;
  if (!lambda_values.empty()) a.lambdas = lambda_grid(lambda_values);
  a.fractions = fractions;
  a.models = models;
  return a;
}

std::string canonical_relation(const std::string& name, DataSource source) {
  if (source == DataSource::Planted || name == "knn" || knn_suffix(name)) return name;
  try {
    return std::string(attribute_name(parse_attribute(name)));
  } catch (const ConfigError&) {
    return name;
  }
}

RelationOptions ExperimentConfig::options_for(const std::string& relation) const {
  auto it = relation_options.find(relation);
  RelationOptions opts = it == relation_options.end() ? RelationOptions{} : it->second;
  if (!opts.max_degree) opts.max_degree = max_degree;
  return opts;
}

void ExperimentConfig::validate(bool check_files) const {
  const auto& allowed = source == DataSource::Liar ? kLiarRelations : kPlantedRelations;
  auto check_relation = [&](const std::string& key, const std::string& r) {
    if (!allowed.contains(r) && !(source == DataSource::Liar && knn_suffix(r))) {
      std::string names;
      for (const auto& a : allowed) names += (names.empty() ? "" : ", ") + a;
      throw ConfigError(key + ": unknown relation '" + r + "' (expected one of " + names +
                        (source == DataSource::Liar ? ", knn-<k>)" : ")"));
    }
  };
  if (relations.empty()) throw ConfigError("graph.relations: at least one relation is required");
  std::set<std::string> seen;
  for (const auto& r : relations) {
    check_relation("graph.relations", r);
    if (!seen.insert(r).second) throw ConfigError("graph.relations: duplicate relation '" + r + "'");
  }
  for (const auto& [name, opts] : relation_options) {
    if (source == DataSource::Liar) check_relation("relation." + name, name);
    if (opts.k < 1) throw ConfigError("relation." + name + ".k: must be >= 1");
  }
  for (const auto& r : train.decision_relations) {
    if (!seen.contains(r)) throw ConfigError("train.decision_relations: '" + r + "' is not in graph.relations");
  }
  for (const auto& subset : sweep.relation_subsets) {
    if (subset.empty()) throw ConfigError("sweep.relation_subsets: empty subset");
    for (const auto& r : subset) check_relation("sweep.relation_subsets", r);
  }
  for (double f : sweep.fractions) {
    if (!(f > 0 && f < 1)) throw ConfigError("sweep.fractions: values must lie in (0, 1)");
  }
  for (double l : sweep.lambda_values) {
    if (!(l >= 0)) throw ConfigError("sweep.lambda_values: values must be >= 0");
  }
  if (!sweep.lambda_values.empty() && lambda_grid(sweep.lambda_values).empty()) {
    throw ConfigError("sweep.lambda_values: grid has no pair other than (0, 0)");
  }
  if (sweep.repeats < 1) throw ConfigError("sweep.repeats: must be >= 1");

  if (source == DataSource::Liar) {
    if (dataset.empty()) throw ConfigError("data.files: at least one LIAR TSV file is required");
    if (embedding == EmbeddingSource::File && embedding_path.empty()) {
      throw ConfigError("embedding.path: required when embedding.source = file");
    }
    if (embedding == EmbeddingSource::Fallback && embedding_dim < 8) {
      throw ConfigError("embedding.dim: must be >= 8");
    }
    if (check_files) {
      for (const auto& f : dataset) {
        if (!std::filesystem::is_regular_file(f)) throw ConfigError("data.files: no such file '" + f.string() + "'");
      }
      if (embedding == EmbeddingSource::File && !std::filesystem::is_regular_file(embedding_path)) {
        throw ConfigError("embedding.path: no such file '" + embedding_path.string() + "'");
      }
    }
  } else {
    with_prefix("planted", [&] { planted.validate(); });
  }
  with_prefix("", [&] { train.validate(); });
  with_prefix("split", [&] { split.validate(); });
}

namespace {

void apply_setting(ExperimentConfig& cfg, const std::string& full, const std::string& value,
                   const std::filesystem::path& base_dir) {
  if (full.starts_with("relation.")) {
    const auto dot = full.rfind('.');
    if (dot <= 9) throw ConfigError(full + ": expected relation.<name>.<key>");
    auto& opts = cfg.relation_options[full.substr(9, dot - 9)];
    const std::string key = full.substr(dot + 1);
    if (key == "max_degree") opts.max_degree = to_cap(full, value);
    else if (key == "k") opts.k = static_cast<int>(to_int(full, value));
    else throw ConfigError(full + ": unknown key");
    return;
  }
  const auto& table = setters();
  auto it = table.find(full);
  if (it == table.end()) throw ConfigError(full + ": unknown key");
  it->second(cfg, full, value, base_dir);
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir, const Overrides& overrides) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(section + ": keys must live inside a [section]");
    }
    for (const auto& [key, node] : body) apply_setting(cfg, section + "." + key, node.data(), base_dir);
  }
  for (const auto& [key, value] : overrides) apply_setting(cfg, key, value, std::filesystem::current_path());
  // Canonicalize once the data source is known, whatever order the sections came in.
  for (auto& r : cfg.relations) r = canonical_relation(r, cfg.source);
  for (auto& r : cfg.train.decision_relations) r = canonical_relation(r, cfg.source);
  for (auto& subset : cfg.sweep.relation_subsets) {
    for (auto& r : subset) r = canonical_relation(r, cfg.source);
  }
  std::map<std::string, RelationOptions> canon;
  for (auto& [name, opts] : cfg.relation_options) canon[canonical_relation(name, cfg.source)] = opts;
  cfg.relation_options = std::move(canon);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  auto cfg = parse_config(in, std::filesystem::absolute(path).parent_path(), overrides);
  cfg.validate();
  return cfg;
}

std::string to_ini(const ExperimentConfig& c) {
  const std::function<std::string(const int&)> int_str = [](const int& x) { return std::to_string(x); };
  const std::function<std::string(const double&)> dbl_str = [](const double& x) { return fmt(x); };
  const std::function<std::string(const std::string&)> id = [](const std::string& s) { return s; };
  auto cap = [](const std::optional<std::size_t>& m) { return m ? std::to_string(*m) : std::string("none"); };

  std::ostringstream o;
  o << "[data]\n";
  o << "source = " << (c.source == DataSource::Liar ? "liar" : "planted") << '\n';
  std::vector<std::string> files;
  for (const auto& f : c.dataset) files.push_back(f.string());
  o << "files = " << join(files, ", ", id) << "\n\n";

  o << "[planted]\n";
  o << "nodes = " << c.planted.nodes << '\n';
  o << "classes = " << c.planted.classes << '\n';
  o << "feature_dim = " << c.planted.feature_dim << '\n';
  o << "signal = " << fmt(c.planted.signal) << '\n';
  o << "noise = " << fmt(c.planted.noise) << '\n';
  o << "homophilous_degree = " << c.planted.homophilous_degree << '\n';
  o << "noise_degree = " << c.planted.noise_degree << '\n';
  o << "seed = " << c.planted.seed << "\n\n";

  o << "[embedding]\n";
  o << "source = " << (c.embedding == EmbeddingSource::File ? "file" : "fallback") << '\n';
  o << "path = " << c.embedding_path.string() << '\n';
  o << "dim = " << c.embedding_dim << '\n';
  o << "seed = " << c.embedding_seed << "\n\n";

  o << "[graph]\n";
  o << "relations = " << join(c.relations, ", ", id) << '\n';
  o << "max_degree = " << cap(c.max_degree) << '\n';
  o << "seed = " << c.graph_seed << '\n';
  o << "lattice = " << (c.train.lattice == LatticeMode::Full ? "full" : "restricted") << "\n\n";

  for (const auto& [name, opts] : c.relation_options) {
    o << "[relation." << name << "]\n";
    o << "max_degree = " << cap(opts.max_degree) << '\n';
    o << "k = " << opts.k << "\n\n";
  }

  o << "[model]\n";
  o << "kind = " << model_kind_name(c.model) << '\n';
  o << "layers = " << c.train.layers << '\n';
  o << "hidden = " << join(c.train.hidden, ", ", int_str) << '\n';
  o << "heads = " << c.train.heads << '\n';
  o << "mlp_hidden = " << join(c.train.mlp_hidden, ", ", int_str) << '\n';
  o << "dropout = " << fmt(c.train.dropout) << "\n\n";

  o << "[train]\n";
  o << "lr = " << fmt(c.train.lr) << '\n';
  o << "weight_decay = " << fmt(c.train.weight_decay) << '\n';
  o << "epochs = " << c.train.epochs << '\n';
  o << "lambda1 = " << fmt(c.train.lambda1) << '\n';
  o << "lambda2 = " << fmt(c.train.lambda2) << '\n';
  o << "tau = " << fmt(c.train.tau) << '\n';
  o << "tau_final = " << (c.train.tau_final ? fmt(*c.train.tau_final) : "none") << '\n';
  o << "seed = " << c.train.seed << '\n';
  o << "decision_relations = " << join(c.train.decision_relations, ", ", id) << '\n';
  o << "forced_selection = " << cap(c.train.forced_selection) << "\n\n";

  o << "[split]\n";
  o << "labeled_fraction = " << fmt(c.split.labeled_fraction) << '\n';
  o << "stratified = " << (c.split.stratified ? "true" : "false") << '\n';
  o << "seed = " << c.split.seed << "\n\n";

  o << "[sweep]\n";
  const std::function<std::string(const std::vector<std::string>&)> plus = [&](const std::vector<std::string>& s) {
    return join(s, "+", id);
  };
  o << "relation_subsets = " << join(c.sweep.relation_subsets, "; ", plus) << '\n';
  o << "lambda_values = " << join(c.sweep.lambda_values, ", ", dbl_str) << '\n';
  o << "fractions = " << join(c.sweep.fractions, ", ", dbl_str) << '\n';
  std::vector<std::string> models;
  for (auto m : c.sweep.models) models.emplace_back(model_kind_name(m));
  o << "models = " << join(models, ", ", id) << '\n';
  o << "repeats = " << c.sweep.repeats << "\n\n";

  o << "[output]\n";
  o << "dir = " << c.output_dir.string() << '\n';
  return o.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.output_dir.clear();
  return ad::derive_seed(0, to_ini(c));
}

// ---- pipeline --------------------------------------------------------------------------

Dataset load_dataset(const ExperimentConfig& cfg) {
  Dataset d;
  if (cfg.source == DataSource::Planted) {
    d.planted = make_planted_graph(cfg.planted);
    d.labels = d.planted->labels;
    d.features.values = d.planted->features;
    return d;
  }
  d.records = parse_liar_files(cfg.dataset);
  if (d.records.empty()) throw ValidationError("dataset: no records in " + std::to_string(cfg.dataset.size()) + " file(s)");
  d.labels = label_values(labels_of(d.records));
  d.features = cfg.embedding == EmbeddingSource::File
                   ? load_embedding_table(cfg.embedding_path, d.records)
                   : fallback_hash_embed(d.records, cfg.embedding_dim, cfg.embedding_seed);
  return d;
}

HeteroGraph build_graph(const ExperimentConfig& cfg, const Dataset& data, const std::vector<std::string>& relations) {
  if (relations.empty()) throw ConfigError("graph.relations: at least one relation is required");
  std::vector<std::pair<std::string, std::vector<Edge>>> lists;
  if (data.planted) {
    for (const auto& r : relations) {
      const Csr& rel = data.planted->graph.relation(r);
      std::vector<Edge> edges;
      for (NodeId v = 0; v < rel.num_nodes(); ++v) {
        for (NodeId u : rel.neighbors(v)) {
          if (v < u) edges.emplace_back(v, u);
        }
      }
      lists.emplace_back(r, std::move(edges));
    }
    return HeteroGraph::from_edge_lists(data.labels.size(), lists);
  }
  for (const auto& r : relations) {
    const auto opts = cfg.options_for(r);
    if (r == "knn" || knn_suffix(r)) {
      lists.emplace_back(r, build_knn_relation(data.features, knn_suffix(r).value_or(opts.k)));
    } else {
      lists.emplace_back(r, build_attribute_relation(data.records, parse_attribute(r), opts.max_degree, cfg.graph_seed));
    }
  }
  return HeteroGraph::from_edge_lists(data.records.size(), lists);
}

}  // namespace dhgat
