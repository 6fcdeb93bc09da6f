#pragma once
// Dense, loop-based reference implementations. Slow on purpose: nothing here shares
// code with the sparse kernels under test.

#include <algorithm>
#include <cmath>
#include <vector>

#include "dhgat/hgraph.hpp"
#include "dhgat/tensor.hpp"

namespace oracle {

using dhgat::ad::Matrix;
using Dense = std::vector<std::vector<double>>;

inline double leaky(double x, double slope = 0.2) { return x > 0 ? x : slope * x; }
inline double elu(double x) { return x > 0 ? x : std::expm1(x); }

inline Matrix dense_adjacency(const dhgat::Csr& adj) {
  const auto n = static_cast<Eigen::Index>(adj.num_nodes());
  Matrix a = Matrix::Zero(n, n);
  for (dhgat::NodeId v = 0; v < n; ++v) {
    for (auto u : adj.neighbors(v)) a(v, u) = 1.0;
  }
  return a;
}

/// GATv2 pre-activation output. weight(v, u) scales exp(score) for u != v; the self term
/// always has weight 1. A zero weight removes the edge.
inline Matrix gatv2(const Matrix& h, const Matrix& w, const Matrix& attn, int heads, const Matrix& weight) {
  const Matrix z = h * w;
  const auto n = h.rows();
  const auto hd = z.cols() / heads;
  Matrix out = Matrix::Zero(n, z.cols());
  for (int k = 0; k < heads; ++k) {
    for (Eigen::Index v = 0; v < n; ++v) {
      std::vector<double> s(static_cast<std::size_t>(n), 0.0);
      std::vector<double> wt(static_cast<std::size_t>(n), 0.0);
      double mx = -1e300;
      for (Eigen::Index u = 0; u < n; ++u) {
        wt[u] = u == v ? 1.0 : weight(v, u);
        if (wt[u] == 0.0) continue;
        double score = 0;
        for (Eigen::Index d = 0; d < hd; ++d) score += attn(k, d) * leaky(z(v, k * hd + d) + z(u, k * hd + d));
        s[u] = score;
        mx = std::max(mx, score);
      }
      double denom = 0;
      for (Eigen::Index u = 0; u < n; ++u) {
        if (wt[u] != 0.0) denom += wt[u] * std::exp(s[u] - mx);
      }
      for (Eigen::Index u = 0; u < n; ++u) {
        if (wt[u] == 0.0) continue;
        const double alpha = wt[u] * std::exp(s[u] - mx) / denom;
        for (Eigen::Index d = 0; d < hd; ++d) out(v, k * hd + d) += alpha * z(u, k * hd + d);
      }
    }
  }
  return out;
}

inline Matrix elu(const Matrix& x) {
  Matrix y = x;
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = elu(y.data()[i]);
  return y;
}

/// elu(D^-1/2 (A + I) D^-1/2 H W + b)
inline Matrix gcn(const Matrix& h, const Matrix& w, const Matrix& b, const Matrix& adjacency) {
  const auto n = adjacency.rows();
  Matrix a = adjacency + Matrix::Identity(n, n);
  Eigen::VectorXd dinv = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  Matrix norm = dinv.asDiagonal() * a * dinv.asDiagonal();
  Matrix out = norm * h * w;
  out.rowwise() += b.row(0);
  return elu(out);
}

inline Matrix softmax_rows(const Matrix& x) {
  Matrix y = x;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    y.row(i).array() -= y.row(i).maxCoeff();
    y.row(i) = y.row(i).array().exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

/// Mask where (v, u) is set iff u is adjacent to v in a relation of masks[v].
inline Matrix per_node_mask(const dhgat::HeteroGraph& g, const std::vector<std::uint32_t>& masks) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Matrix m = Matrix::Zero(n, n);
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    const Matrix a = dense_adjacency(g.relation(r));
    for (Eigen::Index v = 0; v < n; ++v) {
      if ((masks[v] >> r) & 1U) m.row(v) = m.row(v).cwiseMax(a.row(v));
    }
  }
  return m;
}

inline std::vector<dhgat::NodeId> brute_neighbors(const dhgat::HeteroGraph& g, dhgat::NodeId v, std::uint32_t mask) {
  std::vector<dhgat::NodeId> out;
  for (dhgat::NodeId u = 0; u < g.num_nodes(); ++u) {
    if (u == v) continue;
    for (std::size_t r = 0; r < g.num_relations(); ++r) {
      if (!((mask >> r) & 1U)) continue;
      const auto nb = g.relation(r).neighbors(v);
      if (std::find(nb.begin(), nb.end(), u) != nb.end()) {
        out.push_back(u);
        break;
      }
    }
  }
  return out;
}

}  // namespace oracle
