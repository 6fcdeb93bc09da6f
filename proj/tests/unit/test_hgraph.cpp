#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "dhgat/errors.hpp"
#include "dhgat/hgraph.hpp"
#include "oracles.hpp"

using namespace dhgat;

namespace {

std::vector<NewsRecord> fixture() { return parse_liar_tsv(std::string(DHGAT_TEST_DATA) + "/liar_sample.tsv"); }

HeteroGraph random_graph(std::size_t n, std::size_t relations, double density, std::uint64_t seed) {
  ad::Rng rng(seed);
  std::vector<std::pair<std::string, std::vector<Edge>>> rels;
  for (std::size_t r = 0; r < relations; ++r) {
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v = u + 1; v < n; ++v) {
        if (ad::uniform01(rng) < density) edges.emplace_back(u, v);
      }
    }
    rels.emplace_back("r" + std::to_string(r), std::move(edges));
  }
  return HeteroGraph::from_edge_lists(n, rels);
}

bool has_edge(const std::vector<Edge>& edges, NodeId a, NodeId b) {
  return std::find(edges.begin(), edges.end(), Edge{std::min(a, b), std::max(a, b)}) != edges.end();
}

}  // namespace

TEST_CASE("full lattice over two relations is ordered by size then mask") {
  const RelationRegistry reg({"job-title", "speaker"});
  const auto lat = enumerate_lattice(reg, LatticeMode::Full);
  REQUIRE(lat.size() == 4);
  CHECK(lat.masks() == std::vector<std::uint32_t>{0b00, 0b01, 0b10, 0b11});
  CHECK(lat.describe(0, reg) == "{}");
  CHECK(lat.describe(1, reg) == "{job-title}");
  CHECK(lat.describe(2, reg) == "{speaker}");
  CHECK(lat.describe(3, reg) == "{job-title,speaker}");
}

TEST_CASE("lattice sizes") {
  for (std::size_t r = 1; r <= 6; ++r) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < r; ++i) names.push_back("r" + std::to_string(i));
    const RelationRegistry reg(names);
    const auto full = enumerate_lattice(reg, LatticeMode::Full);
    CHECK(full.size() == (std::size_t{1} << r));
    CHECK(full[0].empty());
    for (std::size_t i = 1; i < full.size(); ++i) {
      CHECK(std::popcount(full[i - 1].mask) <= std::popcount(full[i].mask));
    }
    const auto restricted = enumerate_lattice(reg, LatticeMode::Restricted);
    CHECK(restricted.size() == (r == 1 ? 2 : r + 2));
    CHECK(restricted[restricted.size() - 1].mask == full[full.size() - 1].mask);
  }
  CHECK(enumerate_lattice(RelationRegistry({"a", "b", "c"}), LatticeMode::Full).size() == 8);
  CHECK(enumerate_lattice(RelationRegistry({"a", "b", "c", "d"}), LatticeMode::Restricted).size() == 6);
  CHECK_THROWS_AS(enumerate_lattice(RelationRegistry{}, LatticeMode::Full), ConfigError);
  CHECK_THROWS_AS(parse_lattice_mode("partial"), ConfigError);
}

TEST_CASE("registry rejects duplicates and unknown names") {
  RelationRegistry reg({"party", "state"});
  CHECK(reg.id("state") == 1);
  CHECK_THROWS_AS(reg.add("party"), ConfigError);
  CHECK_THROWS_AS(reg.id("speaker"), ConfigError);
  CHECK_THROWS_AS(reg.add(""), ConfigError);
}

TEST_CASE("edges_for_type is the union of member relations") {
  const auto g = random_graph(30, 3, 0.15, 3);
  const auto lat = enumerate_lattice(g.registry(), LatticeMode::Full);
  for (const auto& t : lat.types()) {
    std::set<Edge> expect;
    for (std::size_t r = 0; r < 3; ++r) {
      if (!t.contains(r)) continue;
      const auto& adj = g.relation(r);
      for (NodeId v = 0; v < 30; ++v) {
        for (NodeId u : adj.neighbors(v)) expect.emplace(v, u);
      }
    }
    const auto csr = edges_for_type(g, t);
    std::set<Edge> got;
    for (NodeId v = 0; v < 30; ++v) {
      for (NodeId u : csr.neighbors(v)) got.emplace(v, u);
    }
    CHECK(got == expect);
  }
  CHECK(edges_for_type(g, {}).num_edges() == 0);
  CHECK_THROWS_AS(edges_for_type(g, {0b1000}), ConfigError);
}

TEST_CASE("active_neighbors matches brute force and is monotone in the type") {
  const auto g = random_graph(50, 3, 0.08, 8);
  const auto lat = enumerate_lattice(g.registry(), LatticeMode::Full);
  for (NodeId v = 0; v < 50; ++v) {
    for (const auto& t : lat.types()) {
      const auto got = active_neighbors(g, v, t);
      CHECK(got == oracle::brute_neighbors(g, v, t.mask));
      CHECK(std::find(got.begin(), got.end(), v) == got.end());
      for (const auto& s : lat.types()) {
        if ((s.mask & t.mask) != s.mask) continue;
        const auto sub = active_neighbors(g, v, s);
        CHECK(std::includes(got.begin(), got.end(), sub.begin(), sub.end()));
      }
    }
  }
  CHECK_THROWS_AS(active_neighbors(g, 50, g.full_type()), ValidationError);
}

TEST_CASE("typed_union records which relations connect each pair") {
  const auto g = HeteroGraph::from_edge_lists(4, {{"a", {{0, 1}, {1, 2}}}, {"b", {{0, 1}, {2, 3}}}});
  const auto tu = typed_union(g, g.full_type());
  REQUIRE(tu.adj.neighbors(0).size() == 1);
  CHECK(tu.edge_masks[tu.adj.offsets[0]] == 0b11);
  const auto n1 = tu.adj.neighbors(1);
  REQUIRE(n1.size() == 2);
  CHECK(tu.edge_masks[tu.adj.offsets[1] + 1] == 0b01);
  CHECK(tu.edge_masks[tu.adj.offsets[2] + 1] == 0b10);
}

TEST_CASE("attribute relations on the two example records") {
  const auto all = fixture();
  const std::vector<NewsRecord> two(all.begin(), all.begin() + 2);
  CHECK(build_attribute_relation(two, Attribute::Party, std::nullopt, 0) == std::vector<Edge>{{0, 1}});
  CHECK(build_attribute_relation(two, Attribute::Speaker, std::nullopt, 0).empty());
  CHECK(build_attribute_relation(two, Attribute::JobTitle, std::nullopt, 0).empty());
}

TEST_CASE("attribute relations on the fixture") {
  const auto recs = fixture();
  const auto speaker = build_attribute_relation(recs, Attribute::Speaker, std::nullopt, 0);
  CHECK(has_edge(speaker, 0, 2));
  CHECK(has_edge(speaker, 4, 5));
  CHECK(has_edge(speaker, 6, 7));  // normalized spellings of one name
  CHECK(speaker.size() == 3);
  // Empty state values never connect.
  const auto state = build_attribute_relation(recs, Attribute::State, std::nullopt, 0);
  CHECK_FALSE(has_edge(state, 6, 7));
  const auto party = build_attribute_relation(recs, Attribute::Party, std::nullopt, 0);
  CHECK(has_edge(party, 0, 1));
  CHECK(has_edge(party, 3, 4));
  CHECK_FALSE(has_edge(party, 0, 3));
  for (const auto& [u, v] : party) CHECK(u < v);
  CHECK(std::is_sorted(party.begin(), party.end()));
}

TEST_CASE("degree cap keeps the relation symmetric and is seeded") {
  std::vector<NewsRecord> recs(40);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    recs[i].id = std::to_string(i);
    recs[i].party = i < 30 ? "a" : "b";
  }
  const auto capped = build_attribute_relation(recs, Attribute::Party, 5, 7);
  CHECK(capped == build_attribute_relation(recs, Attribute::Party, 5, 7));
  CHECK(capped != build_attribute_relation(recs, Attribute::Party, 5, 8));
  const auto csr = Csr::from_edges(recs.size(), capped);
  for (NodeId v = 0; v < 40; ++v) {
    CHECK(csr.degree(v) >= 5);
    for (NodeId u : csr.neighbors(v)) {
      CHECK((u < 30) == (v < 30));
      const auto back = csr.neighbors(u);
      CHECK(std::binary_search(back.begin(), back.end(), v));
    }
  }
  CHECK(build_attribute_relation(recs, Attribute::Party, std::nullopt, 0).size() == 30 * 29 / 2 + 10 * 9 / 2);
}

TEST_CASE("subject relation links intersecting subject sets") {
  std::vector<NewsRecord> recs(3);
  recs[0].subject = {"tax", "jobs"};
  recs[1].subject = {"jobs"};
  recs[2].subject = {"crime"};
  CHECK(build_attribute_relation(recs, Attribute::Subject, std::nullopt, 0) == std::vector<Edge>{{0, 1}});
  CHECK(parse_attribute("party_affiliation") == Attribute::Party);
  CHECK(parse_attribute("job_title") == Attribute::JobTitle);
  CHECK(parse_attribute("job-title") == Attribute::JobTitle);
  CHECK_THROWS_AS(parse_attribute("barely_true_counts"), ConfigError);
}

TEST_CASE("graph text round trip") {
  const auto g = random_graph(20, 2, 0.2, 4);
  std::stringstream ss;
  write_graph(ss, g);
  const auto h = read_graph(ss);
  REQUIRE(h.num_nodes() == g.num_nodes());
  CHECK(h.registry().names() == g.registry().names());
  for (std::size_t r = 0; r < 2; ++r) CHECK(h.relation(r) == g.relation(r));
  std::istringstream bad("n 3\nedge 0 1\n");
  CHECK_THROWS(read_graph(bad));
}
