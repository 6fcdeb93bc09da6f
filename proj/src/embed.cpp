#include "dhgat/embed.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>

#include "dhgat/errors.hpp"

namespace dhgat {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  char sep = ' ';
  if (line.find('\t') != std::string_view::npos) {
    sep = '\t';
  } else if (line.find(',') != std::string_view::npos) {
    sep = ',';
  }
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) pos = line.size();
    auto field = line.substr(start, pos - start);
    if (sep != ' ' || !field.empty()) out.push_back(field);
    start = pos + 1;
  }
  return out;
}

EmbeddingMatrix load_binary(std::ifstream& in, const std::filesystem::path& path, std::size_t expected_rows) {
  static_assert(std::endian::native == std::endian::little, "binary embeddings assume a little-endian host");
  std::uint32_t n = 0;
  std::uint32_t dim = 0;
  if (!in.read(reinterpret_cast<char*>(&n), 4) || !in.read(reinterpret_cast<char*>(&dim), 4)) {
    throw ParseError(path.string() + ": truncated EMB1 header");
  }
  if (n != expected_rows) {
    throw ValidationError(path.string() + ": EMB1 file has " + std::to_string(n) + " rows, corpus has " +
                          std::to_string(expected_rows));
  }
  std::vector<float> buf(static_cast<std::size_t>(n) * dim);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)))) {
    throw ParseError(path.string() + ": truncated EMB1 payload");
  }
  EmbeddingMatrix x{ad::Matrix(n, dim)};
  for (std::size_t i = 0; i < buf.size(); ++i) {
    if (!std::isfinite(buf[i])) throw ValidationError(path.string() + ": non-finite value in EMB1 payload");
    x.values.data()[i] = buf[i];
  }
  return x;
}

}  // namespace

EmbeddingMatrix load_embedding_table(const std::filesystem::path& path, const std::vector<NewsRecord>& records) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open embedding file " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::memcmp(magic, "EMB1", 4) == 0) return load_binary(in, path, records.size());
  in.clear();
  in.seekg(0);

  std::unordered_map<std::string, ad::Index> row_of;
  for (std::size_t i = 0; i < records.size(); ++i) row_of.emplace(records[i].id, static_cast<ad::Index>(i));

  ad::Matrix values;
  std::vector<bool> seen(records.size(), false);
  ad::Index dim = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() < 2) throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": no values");
    // Rows for ids outside the corpus (including a "count dim" header) are ignored.
    auto it = row_of.find(std::string(fields[0]));
    if (it == row_of.end()) continue;
    const auto row_dim = static_cast<ad::Index>(fields.size() - 1);
    if (dim < 0) {
      dim = row_dim;
      values = ad::Matrix::Zero(static_cast<ad::Index>(records.size()), dim);
    } else if (row_dim != dim) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": dimension " +
                       std::to_string(row_dim) + " differs from " + std::to_string(dim));
    }
    if (seen[static_cast<std::size_t>(it->second)]) {
      throw ValidationError(path.string() + ": duplicate id '" + std::string(fields[0]) + "'");
    }
    seen[static_cast<std::size_t>(it->second)] = true;
    for (ad::Index c = 0; c < dim; ++c) {
      auto f = fields[static_cast<std::size_t>(c + 1)];
      while (!f.empty() && std::isspace(static_cast<unsigned char>(f.front()))) f.remove_prefix(1);
      while (!f.empty() && std::isspace(static_cast<unsigned char>(f.back()))) f.remove_suffix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": bad value '" + std::string(f) +
                         "'");
      }
      values(it->second, c) = v;
    }
  }

  std::vector<std::string> missing;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!seen[i]) missing.push_back(records[i].id);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << path.string() << ": missing embeddings for " << missing.size() << " id(s):";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 20); ++i) msg << ' ' << missing[i];
    if (missing.size() > 20) msg << " ...";
    throw ValidationError(msg.str());
  }
  return EmbeddingMatrix{std::move(values)};
}

void save_embedding_binary(const std::filesystem::path& path, const EmbeddingMatrix& x) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out.write("EMB1", 4);
  const auto n = static_cast<std::uint32_t>(x.rows());
  const auto dim = static_cast<std::uint32_t>(x.dim());
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  for (ad::Index i = 0; i < x.values.size(); ++i) {
    const auto f = static_cast<float>(x.values.data()[i]);
    out.write(reinterpret_cast<const char*>(&f), 4);
  }
}

ad::Matrix hash_embed_text(std::string_view text, int dim, std::uint64_t seed) {
  if (dim < 8) throw ConfigError("fallback embedding dimension must be >= 8, got " + std::to_string(dim));
  ad::Matrix row = ad::Matrix::Zero(1, dim);
  auto add_feature = [&](std::string_view feature) {
    const std::uint64_t h = ad::derive_seed(seed, fnv1a(feature));
    const auto idx = static_cast<ad::Index>(h % static_cast<std::uint64_t>(dim));
    row(0, idx) += (h >> 63) != 0 ? 1.0 : -1.0;
  };

  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    add_feature("w:" + token);
    const std::string padded = "<" + token + ">";
    for (std::size_t n = 3; n <= 5; ++n) {
      for (std::size_t i = 0; i + n <= padded.size(); ++i) add_feature(std::string_view(padded).substr(i, n));
    }
    token.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();

  double norm = row.norm();
  if (norm == 0.0) {
    add_feature(text);
    norm = row.norm();
  }
  if (norm == 0.0) {
    // Every feature cancelled out; fall back to a fixed basis vector.
    row(0, static_cast<ad::Index>(ad::derive_seed(seed, fnv1a(text)) % static_cast<std::uint64_t>(dim))) = 1.0;
    norm = 1.0;
  }
  return row / norm;
}

EmbeddingMatrix fallback_hash_embed(const std::vector<NewsRecord>& records, int dim, std::uint64_t seed) {
  if (dim < 8) throw ConfigError("fallback embedding dimension must be >= 8, got " + std::to_string(dim));
  EmbeddingMatrix x{ad::Matrix(static_cast<ad::Index>(records.size()), dim)};
  for (std::size_t i = 0; i < records.size(); ++i) {
    x.values.row(static_cast<ad::Index>(i)) = hash_embed_text(records[i].statement, dim, seed);
  }
  return x;
}

std::vector<std::vector<NodeId>> knn_neighbors(const EmbeddingMatrix& x, int k) {
  const ad::Index n = x.rows();
  if (k <= 0 || k >= n) {
    throw ConfigError("knn: k must satisfy 1 <= k < n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }
  ad::Matrix unit = x.values;
  for (ad::Index i = 0; i < n; ++i) {
    const double norm = unit.row(i).norm();
    if (norm > 0) unit.row(i) /= norm;
  }

  std::vector<std::vector<NodeId>> result(static_cast<std::size_t>(n));
  constexpr ad::Index kBlock = 256;
  std::vector<NodeId> cand(static_cast<std::size_t>(n - 1));
  for (ad::Index b = 0; b < n; b += kBlock) {
    const ad::Index rows = std::min(kBlock, n - b);
    ad::Matrix sims = unit.middleRows(b, rows) * unit.transpose();
    for (ad::Index r = 0; r < rows; ++r) {
      const ad::Index i = b + r;
      std::size_t c = 0;
      for (ad::Index j = 0; j < n; ++j) {
        if (j != i) cand[c++] = static_cast<NodeId>(j);
      }
      auto better = [&](NodeId a, NodeId bb) {
        const double sa = sims(r, a);
        const double sb = sims(r, bb);
        return sa != sb ? sa > sb : a < bb;
      };
      std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end(), better);
      std::sort(cand.begin(), cand.begin() + k, better);
      result[static_cast<std::size_t>(i)].assign(cand.begin(), cand.begin() + k);
    }
  }
  return result;
}

std::vector<Edge> build_knn_relation(const EmbeddingMatrix& x, int k) {
  auto nbrs = knn_neighbors(x, k);
  std::vector<Edge> edges;
  edges.reserve(nbrs.size() * static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    for (NodeId j : nbrs[i]) {
      const auto u = static_cast<NodeId>(i);
      edges.emplace_back(std::min(u, j), std::max(u, j));
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace dhgat
