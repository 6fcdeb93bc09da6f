#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dhgat/gradcheck.hpp"
#include "dhgat/hgraph.hpp"

namespace dhgat {

/// Small two-relation instance for gradient checks and smoke runs.
struct ToyProblem {
  HeteroGraph graph;
  ad::Matrix features;
  std::vector<int> labels;
  std::vector<NodeId> labeled;  ///< every other node
};

ToyProblem make_toy_problem(std::size_t nodes, int feature_dim, std::uint64_t seed);

struct NamedCheck {
  std::string name;
  ad::GradCheckReport report;
};

/// Finite-difference checks of every layer kind, the edge-selection path and the end-to-end
/// loss of all three models (DHGAT with its Gumbel draws and hard selections frozen).
std::vector<NamedCheck> run_gradient_suite(double tolerance, std::uint64_t seed);

nlohmann::json to_json(const std::vector<NamedCheck>& checks);

}  // namespace dhgat
