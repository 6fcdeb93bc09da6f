#pragma once

#include <cstdint>
#include <vector>

#include "dhgat/hgraph.hpp"
#include "dhgat/tensor.hpp"

namespace dhgat {

/// Two-relation graph with planted structure: "rel1" only joins nodes of the same class,
/// "rel2" joins uniformly random pairs regardless of class. Features carry a weak class
/// centroid buried in Gaussian noise, so labels are recoverable mainly by pooling over rel1.
struct PlantedSpec {
  std::size_t nodes = 200;
  int classes = 6;
  int feature_dim = 16;
  double signal = 0.6;  ///< centroid scale
  double noise = 1.0;   ///< per-coordinate noise std
  int homophilous_degree = 6;
  int noise_degree = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PlantedGraph {
  HeteroGraph graph;
  ad::Matrix features;
  std::vector<int> labels;
};

PlantedGraph make_planted_graph(const PlantedSpec& spec);

}  // namespace dhgat
