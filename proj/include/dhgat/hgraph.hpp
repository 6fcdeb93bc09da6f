#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dhgat/csr.hpp"
#include "dhgat/liar.hpp"

namespace dhgat {

/// Speaker-profile fields that can induce a relation.
enum class Attribute { Speaker, Context, Subject, Party, JobTitle, State };

/// Accepts "speaker", "context", "subject", "party", "job-title", "state" and the
/// LIAR column spellings ("party_affiliation", "job_title", "state_info", ...).
Attribute parse_attribute(std::string_view name);
std::string_view attribute_name(Attribute a);

/// Ordered, duplicate-free relation names; relation id = position.
class RelationRegistry {
 public:
  RelationRegistry() = default;
  explicit RelationRegistry(const std::vector<std::string>& names);

  std::size_t add(std::string name);
  std::size_t id(std::string_view name) const;  ///< throws ConfigError for unknown names
  bool contains(std::string_view name) const;
  const std::string& name(std::size_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Subset of relation ids, bit i = relation i.
struct NeighborhoodType {
  std::uint32_t mask = 0;

  bool contains(std::size_t relation) const { return (mask >> relation) & 1U; }
  bool empty() const { return mask == 0; }
  friend bool operator==(NeighborhoodType, NeighborhoodType) = default;
};

class HeteroGraph {
 public:
  HeteroGraph() = default;
  HeteroGraph(std::size_t n, RelationRegistry registry, std::vector<Csr> relations);

  /// Build from per-relation undirected edge lists (symmetrized, deduplicated, self-loops dropped).
  static HeteroGraph from_edge_lists(std::size_t n, const std::vector<std::pair<std::string, std::vector<Edge>>>& rels);

  std::size_t num_nodes() const { return n_; }
  std::size_t num_relations() const { return relations_.size(); }
  const RelationRegistry& registry() const { return registry_; }
  const Csr& relation(std::size_t id) const { return relations_.at(id); }
  const Csr& relation(std::string_view name) const { return relations_.at(registry_.id(name)); }
  NeighborhoodType full_type() const;
  /// Type built from relation names; throws ConfigError on unknown names.
  NeighborhoodType type_of(const std::vector<std::string>& names) const;

 private:
  std::size_t n_ = 0;
  RelationRegistry registry_;
  std::vector<Csr> relations_;
};

enum class LatticeMode { Full, Restricted };

LatticeMode parse_lattice_mode(std::string_view name);

/// Candidate neighborhood types; index 0 is always the empty type.
class NeighborhoodLattice {
 public:
  NeighborhoodLattice() = default;
  explicit NeighborhoodLattice(std::vector<NeighborhoodType> types);

  std::size_t size() const { return types_.size(); }
  const NeighborhoodType& operator[](std::size_t i) const { return types_.at(i); }
  const std::vector<NeighborhoodType>& types() const { return types_; }
  std::vector<std::uint32_t> masks() const;
  std::optional<std::size_t> index_of(NeighborhoodType t) const;
  /// "{speaker,context}" style label.
  std::string describe(std::size_t i, const RelationRegistry& registry) const;

 private:
  std::vector<NeighborhoodType> types_;
};

/// Full: all 2^|R| subsets ordered by (popcount, mask). Restricted: empty, singletons, full union.
NeighborhoodLattice enumerate_lattice(const RelationRegistry& registry, LatticeMode mode);

/// Union of the relations in `type`; the empty type yields no edges.
Csr edges_for_type(const HeteroGraph& g, NeighborhoodType type);

/// Sorted union of v's neighbors over the relations in `type`. Never contains v.
std::vector<NodeId> active_neighbors(const HeteroGraph& g, NodeId v, NeighborhoodType type);

/// Union adjacency over `type` with, per edge, the bitset of relations that connect the pair.
struct TypedAdjacency {
  Csr adj;
  std::vector<std::uint32_t> edge_masks;
};
TypedAdjacency typed_union(const HeteroGraph& g, NeighborhoodType type);

/// Edges between records sharing a non-empty attribute value (for subject: intersecting
/// subject sets). Nodes above `max_degree` keep a seeded uniform sample of that many
/// neighbors before the result is re-symmetrized by union. Returns (u < v) pairs.
std::vector<Edge> build_attribute_relation(const std::vector<NewsRecord>& records, Attribute attribute,
                                           std::optional<std::size_t> max_degree, std::uint64_t seed);

// Text export: "n <count>", then per relation "relation <name>" followed by "edge u v" lines (u < v).
void write_graph(std::ostream& out, const HeteroGraph& g);
HeteroGraph read_graph(std::istream& in);

}  // namespace dhgat
