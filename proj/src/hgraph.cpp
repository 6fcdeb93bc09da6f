#include "dhgat/hgraph.hpp"

#include <algorithm>
#include <bit>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "dhgat/errors.hpp"
#include "dhgat/tensor.hpp"

namespace dhgat {

Csr Csr::from_edges(std::size_t n, std::span<const Edge> edges) {
  Csr c;
  c.offsets.assign(n + 1, 0);
  for (const auto& [u, v] : edges) {
    if (u >= n || v >= n) {
      throw ValidationError("edge (" + std::to_string(u) + ", " + std::to_string(v) + ") outside " +
                            std::to_string(n) + " nodes");
    }
    if (u == v) continue;
    ++c.offsets[u + 1];
    ++c.offsets[v + 1];
  }
  for (std::size_t i = 0; i < n; ++i) c.offsets[i + 1] += c.offsets[i];
  c.targets.resize(c.offsets[n]);
  std::vector<std::size_t> fill(c.offsets.begin(), c.offsets.end() - 1);
  for (const auto& [u, v] : edges) {
    if (u == v) continue;
    c.targets[fill[u]++] = v;
    c.targets[fill[v]++] = u;
  }
  // Sort and deduplicate each row, compacting in place.
  std::size_t write = 0;
  std::size_t row_start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t row_end = c.offsets[i + 1];
    auto first = c.targets.begin() + static_cast<std::ptrdiff_t>(row_start);
    auto last = c.targets.begin() + static_cast<std::ptrdiff_t>(row_end);
    std::sort(first, last);
    last = std::unique(first, last);
    const auto len = static_cast<std::size_t>(last - first);
    std::copy(first, last, c.targets.begin() + static_cast<std::ptrdiff_t>(write));
    c.offsets[i] = write;
    write += len;
    row_start = row_end;
  }
  c.offsets[n] = write;
  c.targets.resize(write);
  c.targets.shrink_to_fit();
  return c;
}

// ---- attributes ---------------------------------------------------------------

Attribute parse_attribute(std::string_view name) {
  static const std::map<std::string, Attribute, std::less<>> kNames = {
      {"speaker", Attribute::Speaker},     {"context", Attribute::Context},
      {"subject", Attribute::Subject},     {"party", Attribute::Party},
      {"party-affiliation", Attribute::Party}, {"party_affiliation", Attribute::Party},
      {"job-title", Attribute::JobTitle},  {"job_title", Attribute::JobTitle},
      {"state", Attribute::State},         {"state_info", Attribute::State},
      {"state-info", Attribute::State},
  };
  auto it = kNames.find(name);
  if (it == kNames.end()) throw ConfigError("unknown attribute '" + std::string(name) + "'");
  return it->second;
}

std::string_view attribute_name(Attribute a) {
  switch (a) {
    case Attribute::Speaker: return "speaker";
    case Attribute::Context: return "context";
    case Attribute::Subject: return "subject";
    case Attribute::Party: return "party";
    case Attribute::JobTitle: return "job-title";
    case Attribute::State: return "state";
  }
  return "?";
}

// ---- registry / graph -----------------------------------------------------------

RelationRegistry::RelationRegistry(const std::vector<std::string>& names) {
  for (const auto& n : names) add(n);
}

std::size_t RelationRegistry::add(std::string name) {
  if (name.empty()) throw ConfigError("relation name must be non-empty");
  if (index_.contains(name)) throw ConfigError("duplicate relation '" + name + "'");
  if (names_.size() >= 31) throw ConfigError("at most 31 relations are supported");
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  return names_.size() - 1;
}

std::size_t RelationRegistry::id(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown relation '" + std::string(name) + "'");
  return it->second;
}

bool RelationRegistry::contains(std::string_view name) const { return index_.contains(std::string(name)); }

HeteroGraph::HeteroGraph(std::size_t n, RelationRegistry registry, std::vector<Csr> relations)
    : n_(n), registry_(std::move(registry)), relations_(std::move(relations)) {
  if (registry_.size() == 0) throw ConfigError("a heterogeneous graph needs at least one relation");
  if (relations_.size() != registry_.size()) throw ValidationError("relation count differs from registry size");
  for (const auto& r : relations_) {
    if (r.num_nodes() != n_) throw ValidationError("relation adjacency has the wrong node count");
  }
}

HeteroGraph HeteroGraph::from_edge_lists(std::size_t n,
                                         const std::vector<std::pair<std::string, std::vector<Edge>>>& rels) {
  RelationRegistry reg;
  std::vector<Csr> adj;
  for (const auto& [name, edges] : rels) {
    reg.add(name);
    adj.push_back(Csr::from_edges(n, edges));
  }
  return HeteroGraph(n, std::move(reg), std::move(adj));
}

NeighborhoodType HeteroGraph::full_type() const {
  return NeighborhoodType{static_cast<std::uint32_t>((1ULL << relations_.size()) - 1)};
}

NeighborhoodType HeteroGraph::type_of(const std::vector<std::string>& names) const {
  NeighborhoodType t;
  for (const auto& n : names) t.mask |= 1U << registry_.id(n);
  return t;
}

// ---- lattice ---------------------------------------------------------------------

LatticeMode parse_lattice_mode(std::string_view name) {
  if (name == "full") return LatticeMode::Full;
  if (name == "restricted") return LatticeMode::Restricted;
  throw ConfigError("unknown lattice mode '" + std::string(name) + "' (expected full or restricted)");
}

NeighborhoodLattice::NeighborhoodLattice(std::vector<NeighborhoodType> types) : types_(std::move(types)) {
  if (types_.empty() || !types_[0].empty()) throw ValidationError("lattice must start with the empty type");
  for (std::size_t i = 0; i < types_.size(); ++i) {
    for (std::size_t j = i + 1; j < types_.size(); ++j) {
      if (types_[i] == types_[j]) throw ValidationError("lattice types must be distinct");
    }
  }
}

std::vector<std::uint32_t> NeighborhoodLattice::masks() const {
  std::vector<std::uint32_t> out;
  out.reserve(types_.size());
  for (const auto& t : types_) out.push_back(t.mask);
  return out;
}

std::optional<std::size_t> NeighborhoodLattice::index_of(NeighborhoodType t) const {
  auto it = std::find(types_.begin(), types_.end(), t);
  if (it == types_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - types_.begin());
}

std::string NeighborhoodLattice::describe(std::size_t i, const RelationRegistry& registry) const {
  std::string out = "{";
  bool first = true;
  for (std::size_t r = 0; r < registry.size(); ++r) {
    if (!types_.at(i).contains(r)) continue;
    if (!first) out += ',';
    out += registry.name(r);
    first = false;
  }
  return out + "}";
}

NeighborhoodLattice enumerate_lattice(const RelationRegistry& registry, LatticeMode mode) {
  const std::size_t r = registry.size();
  if (r == 0) throw ConfigError("lattice needs at least one relation");
  std::vector<NeighborhoodType> types;
  const auto full = static_cast<std::uint32_t>((1ULL << r) - 1);
  if (mode == LatticeMode::Full) {
    if (r > 16) throw ConfigError("full lattice over " + std::to_string(r) + " relations is too large");
    for (std::uint32_t m = 0; m <= full; ++m) types.push_back({m});
    std::stable_sort(types.begin(), types.end(), [](NeighborhoodType a, NeighborhoodType b) {
      const int pa = std::popcount(a.mask);
      const int pb = std::popcount(b.mask);
      return pa != pb ? pa < pb : a.mask < b.mask;
    });
  } else {
    types.push_back({0});
    for (std::size_t i = 0; i < r; ++i) types.push_back({1U << i});
    if (r > 1) types.push_back({full});
  }
  return NeighborhoodLattice(std::move(types));
}

// ---- neighbor views ----------------------------------------------------------------

TypedAdjacency typed_union(const HeteroGraph& g, NeighborhoodType type) {
  const std::size_t n = g.num_nodes();
  TypedAdjacency out;
  out.adj.offsets.assign(n + 1, 0);
  std::vector<std::pair<NodeId, std::uint32_t>> row;
  for (std::size_t v = 0; v < n; ++v) {
    row.clear();
    for (std::size_t r = 0; r < g.num_relations(); ++r) {
      if (!type.contains(r)) continue;
      for (NodeId u : g.relation(r).neighbors(static_cast<NodeId>(v))) row.emplace_back(u, 1U << r);
    }
    std::sort(row.begin(), row.end());
    for (std::size_t i = 0; i < row.size();) {
      std::uint32_t mask = 0;
      std::size_t j = i;
      for (; j < row.size() && row[j].first == row[i].first; ++j) mask |= row[j].second;
      out.adj.targets.push_back(row[i].first);
      out.edge_masks.push_back(mask);
      i = j;
    }
    out.adj.offsets[v + 1] = out.adj.targets.size();
  }
  return out;
}

Csr edges_for_type(const HeteroGraph& g, NeighborhoodType type) {
  if (type.mask >> g.num_relations() != 0) throw ConfigError("neighborhood type refers to unknown relations");
  return typed_union(g, type).adj;
}

std::vector<NodeId> active_neighbors(const HeteroGraph& g, NodeId v, NeighborhoodType type) {
  if (v >= g.num_nodes()) {
    throw ValidationError("node " + std::to_string(v) + " outside graph of " + std::to_string(g.num_nodes()));
  }
  std::vector<NodeId> out;
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    if (!type.contains(r)) continue;
    const auto nb = g.relation(r).neighbors(v);
    out.insert(out.end(), nb.begin(), nb.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---- attribute relations -------------------------------------------------------------

std::vector<Edge> build_attribute_relation(const std::vector<NewsRecord>& records, Attribute attribute,
                                           std::optional<std::size_t> max_degree, std::uint64_t seed) {
  if (records.empty()) throw ConfigError("attribute relation needs at least one record");
  // value -> member nodes, in node order
  std::unordered_map<std::string, std::vector<NodeId>> groups;
  std::vector<std::vector<const std::vector<NodeId>*>> member_of(records.size());
  auto values_of = [&](const NewsRecord& r) -> std::vector<const std::string*> {
    switch (attribute) {
      case Attribute::Speaker: return {&r.speaker};
      case Attribute::Context: return {&r.context};
      case Attribute::Party: return {&r.party};
      case Attribute::JobTitle: return {&r.job_title};
      case Attribute::State: return {&r.state};
      case Attribute::Subject: {
        std::vector<const std::string*> out;
        for (const auto& s : r.subject) out.push_back(&s);
        return out;
      }
    }
    return {};
  };
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto* v : values_of(records[i])) {
      if (!v->empty()) groups[*v].push_back(static_cast<NodeId>(i));
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto* v : values_of(records[i])) {
      if (!v->empty()) member_of[i].push_back(&groups.at(*v));
    }
  }

  ad::Rng rng(ad::derive_seed(seed, attribute_name(attribute)));
  std::vector<Edge> edges;
  std::vector<NodeId> nbrs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    nbrs.clear();
    for (const auto* group : member_of[i]) nbrs.insert(nbrs.end(), group->begin(), group->end());
    if (member_of[i].size() > 1) {
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    std::erase(nbrs, static_cast<NodeId>(i));
    if (max_degree && nbrs.size() > *max_degree) {
      // Partial Fisher-Yates: the first max_degree slots become a uniform sample.
      for (std::size_t k = 0; k < *max_degree; ++k) {
        const auto j = k + static_cast<std::size_t>(ad::uniform01(rng) * static_cast<double>(nbrs.size() - k));
        std::swap(nbrs[k], nbrs[std::min(j, nbrs.size() - 1)]);
      }
      nbrs.resize(*max_degree);
    }
    const auto u = static_cast<NodeId>(i);
    for (NodeId v : nbrs) {
      // Keep each uncapped pair once; capped samples may be one-sided and are merged below.
      if (!max_degree && v < u) continue;
      edges.emplace_back(std::min(u, v), std::max(u, v));
    }
  }
  if (max_degree) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  }
  return edges;
}

// ---- text export -------------------------------------------------------------------

void write_graph(std::ostream& out, const HeteroGraph& g) {
  out << "n " << g.num_nodes() << '\n';
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    out << "relation " << g.registry().name(r) << '\n';
    const Csr& adj = g.relation(r);
    for (std::size_t v = 0; v < adj.num_nodes(); ++v) {
      for (NodeId u : adj.neighbors(static_cast<NodeId>(v))) {
        if (v < u) out << "edge " << v << ' ' << u << '\n';
      }
    }
  }
}

HeteroGraph read_graph(std::istream& in) {
  std::optional<std::size_t> n;
  std::vector<std::pair<std::string, std::vector<Edge>>> rels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    auto fail = [&](const std::string& why) {
      throw ParseError("graph file line " + std::to_string(line_no) + ": " + why);
    };
    if (kind == "n") {
      std::size_t count = 0;
      if (!(ls >> count)) fail("bad node count");
      n = count;
    } else if (kind == "relation") {
      std::string name;
      if (!(ls >> name)) fail("missing relation name");
      rels.emplace_back(name, std::vector<Edge>{});
    } else if (kind == "edge") {
      if (!n) fail("edge before node count");
      if (rels.empty()) fail("edge before any relation");
      std::uint64_t u = 0;
      std::uint64_t v = 0;
      if (!(ls >> u >> v)) fail("bad edge");
      if (u >= *n || v >= *n) fail("edge endpoint out of range");
      rels.back().second.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    } else {
      fail("unknown record '" + kind + "'");
    }
  }
  if (!n) throw ParseError("graph file has no node count");
  return HeteroGraph::from_edge_lists(*n, rels);
}

}  // namespace dhgat
