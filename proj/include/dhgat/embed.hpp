#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "dhgat/csr.hpp"
#include "dhgat/liar.hpp"
#include "dhgat/tensor.hpp"

namespace dhgat {

/// Text features, one row per record in corpus order.
struct EmbeddingMatrix {
  ad::Matrix values;

  ad::Index rows() const { return values.rows(); }
  ad::Index dim() const { return values.cols(); }
};

/// Load precomputed vectors. Text files carry `id<sep>v1<sep>v2...` rows where the
/// separator is a tab, a comma, or spaces; binary files start with "EMB1" followed by
/// u32 n, u32 dim and little-endian f32 rows already in record order.
EmbeddingMatrix load_embedding_table(const std::filesystem::path& path, const std::vector<NewsRecord>& records);

void save_embedding_binary(const std::filesystem::path& path, const EmbeddingMatrix& x);

/// Signed feature hashing over word tokens and their character 3..5-grams, L2-normalized.
ad::Matrix hash_embed_text(std::string_view text, int dim, std::uint64_t seed);

/// Deterministic stand-in for pre-trained vectors. Requires dim >= 8.
EmbeddingMatrix fallback_hash_embed(const std::vector<NewsRecord>& records, int dim, std::uint64_t seed);

/// For every node, its k most cosine-similar other nodes (ties to the lower index), best first.
std::vector<std::vector<NodeId>> knn_neighbors(const EmbeddingMatrix& x, int k);

/// Undirected KNN relation: directed k-NN edges symmetrized by union, as sorted (u < v) pairs.
std::vector<Edge> build_knn_relation(const EmbeddingMatrix& x, int k);

}  // namespace dhgat
