#include "dhgat/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "dhgat/errors.hpp"
#include "dhgat/liar.hpp"

namespace dhgat {

void PlantedSpec::validate() const {
  if (classes < 2 || classes > kNumClasses) throw ConfigError("planted: classes must lie in [2, 6]");
  if (nodes < static_cast<std::size_t>(2 * classes)) throw ConfigError("planted: need at least two nodes per class");
  if (feature_dim < 1) throw ConfigError("planted: feature_dim must be >= 1");
  if (!(noise >= 0) || !(signal >= 0)) throw ConfigError("planted: signal and noise must be >= 0");
  if (homophilous_degree < 0 || noise_degree < 0) throw ConfigError("planted: degrees must be >= 0");
}

namespace {

double gaussian(ad::Rng& rng) {
  // Box-Muller on the portable uniform source.
  const double u1 = std::max(ad::uniform01(rng), 1e-300);
  const double u2 = ad::uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t pick(std::size_t bound, ad::Rng& rng) {
  return std::min(static_cast<std::size_t>(ad::uniform01(rng) * static_cast<double>(bound)), bound - 1);
}

}  // namespace

PlantedGraph make_planted_graph(const PlantedSpec& spec) {
  spec.validate();
  const std::size_t n = spec.nodes;
  ad::Rng rng(ad::derive_seed(spec.seed, "planted"));
  PlantedGraph out;
  out.labels.resize(n);
  std::vector<std::vector<NodeId>> members(static_cast<std::size_t>(spec.classes));
  for (std::size_t v = 0; v < n; ++v) {
    out.labels[v] = static_cast<int>(v % static_cast<std::size_t>(spec.classes));
    members[static_cast<std::size_t>(out.labels[v])].push_back(static_cast<NodeId>(v));
  }

  ad::Matrix centroids(spec.classes, spec.feature_dim);
  for (ad::Index i = 0; i < centroids.size(); ++i) centroids.data()[i] = gaussian(rng);
  centroids.rowwise().normalize();
  out.features.resize(static_cast<ad::Index>(n), spec.feature_dim);
  for (std::size_t v = 0; v < n; ++v) {
    const auto row = static_cast<ad::Index>(v);
    for (ad::Index d = 0; d < spec.feature_dim; ++d) {
      out.features(row, d) = spec.signal * centroids(out.labels[v], d) + spec.noise * gaussian(rng);
    }
  }

  // Each node proposes half its target degree; symmetrizing roughly doubles it back.
  std::vector<Edge> homo;
  std::vector<Edge> noise_edges;
  const int homo_picks = (spec.homophilous_degree + 1) / 2;
  const int noise_picks = (spec.noise_degree + 1) / 2;
  for (std::size_t v = 0; v < n; ++v) {
    const auto& same = members[static_cast<std::size_t>(out.labels[v])];
    for (int i = 0; i < homo_picks; ++i) {
      const NodeId u = same[pick(same.size(), rng)];
      if (u != v) homo.emplace_back(static_cast<NodeId>(v), u);
    }
    for (int i = 0; i < noise_picks; ++i) {
      const auto u = static_cast<NodeId>(pick(n, rng));
      if (u != v) noise_edges.emplace_back(static_cast<NodeId>(v), u);
    }
  }
  out.graph = HeteroGraph::from_edge_lists(n, {{"rel1", std::move(homo)}, {"rel2", std::move(noise_edges)}});
  return out;
}

}  // namespace dhgat
