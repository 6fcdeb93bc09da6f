#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace dhgat {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Compressed neighbor lists: neighbors of v are targets[offsets[v] .. offsets[v+1]).
/// Lists built through `from_edges` are strictly sorted and never contain v itself.
struct Csr {
  std::vector<std::size_t> offsets{0};
  std::vector<NodeId> targets;

  std::size_t num_nodes() const { return offsets.size() - 1; }
  std::size_t num_edges() const { return targets.size(); }
  std::size_t degree(NodeId v) const { return offsets[v + 1] - offsets[v]; }
  std::span<const NodeId> neighbors(NodeId v) const {
    return {targets.data() + offsets[v], targets.data() + offsets[v + 1]};
  }

  static Csr empty(std::size_t n) {
    Csr c;
    c.offsets.assign(n + 1, 0);
    return c;
  }

  /// Symmetrize by union, drop self-loops, sort and deduplicate.
  static Csr from_edges(std::size_t n, std::span<const Edge> edges);

  friend bool operator==(const Csr&, const Csr&) = default;
};

}  // namespace dhgat
