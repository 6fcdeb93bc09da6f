#pragma once

// Reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every primitive applied during a forward pass together with a
// closure that maps the output gradient onto the inputs. Parameters live
// outside the tape; `Tape::backward` adds the final gradients into them.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dhgat/csr.hpp"

namespace dhgat::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits, identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Derive an independent seed from a base seed and a stream tag (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

class Parameter {
 public:
  Parameter(std::string name, Matrix value);

  const std::string& name() const { return name_; }
  const Matrix& value() const { return value_; }
  Matrix& value() { return value_; }
  const Matrix& grad() const { return grad_; }
  Matrix& grad() { return grad_; }

  /// True once a backward pass has reached this parameter since the last zero_grad.
  bool has_grad() const { return has_grad_; }
  void zero_grad();
  void accumulate(const Matrix& g);

 private:
  std::string name_;
  Matrix value_;
  Matrix grad_;
  bool has_grad_ = false;
};

/// Glorot/Xavier uniform init: U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(Index rows, Index cols, Rng& rng);

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(const Matrix& grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var leaf(Parameter& param);

  /// Record a primitive's output. `backward` runs only when some parent requires grad.
  Var record(Matrix value, std::span<const Var> parents, Backward backward);

  /// Seed d(out)/d(out) = 1 for a 1x1 output and propagate to all leaves.
  void backward(Var scalar);

  /// Gradient buffer of `v`, zero-initialized on first use; nullptr when v needs no grad.
  Matrix* grad_target(Var v);

  const Matrix& value_of(std::size_t id) const { return nodes_[id]->value; }
  bool requires_grad_of(std::size_t id) const { return nodes_[id]->requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool grad_live = false;
    Backward backward;
    Parameter* param = nullptr;
  };

  std::vector<std::unique_ptr<Node>> nodes_;
};

// ---- primitives -----------------------------------------------------------
// Every primitive validates shapes and throws ShapeError naming itself.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// x (n x c) + bias (1 x c) broadcast over rows.
Var add_row_broadcast(Var x, Var bias);
/// x (n x c) scaled row-wise by col (n x 1).
Var mul_col_broadcast(Var x, Var col);
Var scale(Var x, double factor);
Var add_constant(Var x, const Matrix& c);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var x, Index start, Index count);
Var leaky_relu(Var x, double slope = 0.2);
Var elu(Var x, double alpha = 1.0);
Var exp(Var x);
Var abs(Var x);
/// log(max(x, eps)); inputs at or below eps receive zero gradient.
Var log_clamped(Var x, double eps = 1e-10);
Var softmax_rows(Var x);
/// Softmax over entries where mask(i, j) is true; masked outputs are exactly 0.
/// Every row needs at least one unmasked entry.
Var masked_softmax_rows(Var x, const BoolMatrix& mask);
/// Inverted dropout: retained entries are scaled by 1 / (1 - rate). Identity when !training or rate == 0.
Var dropout(Var x, double rate, Rng& rng, bool training);
Var gather_rows(Var x, std::span<const Index> rows);
/// out[segment[i]] += x[i]; out has `num_segments` rows.
Var segment_sum(Var x, std::span<const Index> segment, Index num_segments);
Var sum_all(Var x);
Var mean_all(Var x);
/// Mean over `rows` of -log(max(probs[r, labels[r]], eps)). labels is indexed by node id.
Var cross_entropy(Var probs, std::span<const int> labels, std::span<const Index> rows, double eps = 1e-10);

/// Straight-through estimator. Forward value is hard + (soft - soft_reference),
/// which is exactly `hard` when soft_reference equals soft's value; the backward
/// pass hands the incoming gradient to `soft` unchanged.
Var straight_through(Var soft, const Matrix& hard, const Matrix& soft_reference);

// ---- graph kernels ----------------------------------------------------------
// These keep a pointer to `adj` for the backward pass; it must outlive the tape.

struct AttentionResult {
  Var output;  ///< n x (heads * head_dim), pre-activation
  /// Per head, attention weights laid out as [self, neighbors(v)...] for each v in CSR order,
  /// i.e. entry (adj.offsets[v] + v + j) for j = 0 (self) .. degree(v).
  Matrix alpha;
};

/// GATv2 scoring and aggregation over adj plus an implicit self-loop.
/// z: n x (heads * head_dim) transformed features; attn: heads x head_dim.
/// score(v, u) = attn_k . leaky_relu(z_v + z_u), weights are a softmax over
/// {v} U adj(v). When `edge_weight` (num_edges x 1, CSR order) is given, the
/// softmax becomes w e^s / sum(w e^s) with the self weight fixed at 1, so
/// binary weights reproduce masked attention exactly.
AttentionResult gatv2_attention(Var z, Var attn, const Csr& adj, int heads, std::optional<Var> edge_weight = {},
                                double slope = 0.2);

/// out_v = self_coeff[v] * z_v + sum_e edge_coeff[e] * z_{target(e)} over v's CSR row.
Var sparse_aggregate(Var z, const Csr& adj, std::span<const double> self_coeff, std::span<const double> edge_coeff);

/// w_e = sum_g selection(v_e, g) * [type_masks[g] & edge_masks[e] != 0] for every CSR edge e of node v_e.
Var edge_selection_weights(Var selection, const Csr& adj, std::span<const std::uint32_t> edge_masks,
                           std::span<const std::uint32_t> type_masks);

}  // namespace dhgat::ad
