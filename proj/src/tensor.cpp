#include "dhgat/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dhgat/errors.hpp"

namespace dhgat::ad {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    shape_fail(op, "operand shapes differ (" + shape_str(a.value()) + " vs " + shape_str(b.value()) + ")");
  }
}

void require_same_tape(const char* op, Var a, Var b) {
  if (&a.tape() != &b.tape()) shape_fail(op, "operands recorded on different tapes");
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return derive_seed(base, h);
}

// ---- Parameter --------------------------------------------------------------

Parameter::Parameter(std::string name, Matrix value)
    : name_(std::move(name)), value_(std::move(value)), grad_(Matrix::Zero(value_.rows(), value_.cols())) {}

void Parameter::zero_grad() {
  grad_.setZero();
  has_grad_ = false;
}

void Parameter::accumulate(const Matrix& g) {
  if (g.rows() != value_.rows() || g.cols() != value_.cols()) {
    throw ShapeError("Parameter " + name_ + ": gradient shape " + shape_str(g) + " != value shape " +
                     shape_str(value_));
  }
  grad_ += g;
  has_grad_ = true;
}

Matrix glorot_uniform(Index rows, Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform01(rng) - 1.0) * bound;
  return m;
}

// ---- Var / Tape -------------------------------------------------------------

const Matrix& Var::value() const { return tape_->value_of(id_); }
bool Var::requires_grad() const { return tape_->requires_grad_of(id_); }

Var Tape::constant(Matrix value) {
  auto node = std::make_unique<Node>();
  node->value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Parameter& param) {
  auto node = std::make_unique<Node>();
  node->value = param.value();
  node->requires_grad = true;
  node->param = &param;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward backward) {
  auto node = std::make_unique<Node>();
  node->value = std::move(value);
  for (const auto& p : parents) {
    if (&p.tape() != this) throw ShapeError("Tape::record: parent belongs to another tape");
    node->requires_grad = node->requires_grad || p.requires_grad();
  }
  if (node->requires_grad) node->backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Matrix* Tape::grad_target(Var v) {
  auto& node = *nodes_[v.id()];
  if (!node.requires_grad) return nullptr;
  if (!node.grad_live) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    node.grad_live = true;
  }
  return &node.grad;
}

void Tape::backward(Var scalar) {
  if (&scalar.tape() != this) throw ShapeError("Tape::backward: output belongs to another tape");
  if (scalar.rows() != 1 || scalar.cols() != 1) {
    throw ShapeError("Tape::backward: output must be 1x1, got " + shape_str(scalar.value()));
  }
  if (!scalar.requires_grad()) return;
  for (auto& n : nodes_) {
    n->grad_live = false;
    n->grad.resize(0, 0);
  }
  *grad_target(scalar) = Matrix::Constant(1, 1, 1.0);

  for (std::size_t i = scalar.id() + 1; i-- > 0;) {
    auto& node = *nodes_[i];
    if (!node.grad_live) continue;
    if (node.param != nullptr) {
      node.param->accumulate(node.grad);
    } else if (node.backward) {
      node.backward(node.grad, *this);
    }
    // Free intermediate gradients as soon as they are consumed.
    node.grad.resize(0, 0);
    node.grad_live = false;
  }
}

// ---- elementwise and linear algebra -----------------------------------------

Var matmul(Var a, Var b) {
  require_same_tape("matmul", a, b);
  if (a.cols() != b.rows()) {
    shape_fail("matmul", "inner dimensions differ (" + shape_str(a.value()) + " * " + shape_str(b.value()) + ")");
  }
  Matrix out = a.value() * b.value();
  Var parents[] = {a, b};
  return a.tape().record(std::move(out), parents, [a, b](const Matrix& g, Tape& t) {
    if (auto* ga = t.grad_target(a)) ga->noalias() += g * b.value().transpose();
    if (auto* gb = t.grad_target(b)) gb->noalias() += a.value().transpose() * g;
  });
}

Var add(Var a, Var b) {
  require_same_tape("add", a, b);
  require_same_shape("add", a, b);
  Var parents[] = {a, b};
  return a.tape().record(a.value() + b.value(), parents, [a, b](const Matrix& g, Tape& t) {
    if (auto* ga = t.grad_target(a)) *ga += g;
    if (auto* gb = t.grad_target(b)) *gb += g;
  });
}

Var sub(Var a, Var b) {
  require_same_tape("sub", a, b);
  require_same_shape("sub", a, b);
  Var parents[] = {a, b};
  return a.tape().record(a.value() - b.value(), parents, [a, b](const Matrix& g, Tape& t) {
    if (auto* ga = t.grad_target(a)) *ga += g;
    if (auto* gb = t.grad_target(b)) *gb -= g;
  });
}

Var mul(Var a, Var b) {
  require_same_tape("mul", a, b);
  require_same_shape("mul", a, b);
  Var parents[] = {a, b};
  return a.tape().record(a.value().cwiseProduct(b.value()), parents, [a, b](const Matrix& g, Tape& t) {
    if (auto* ga = t.grad_target(a)) *ga += g.cwiseProduct(b.value());
    if (auto* gb = t.grad_target(b)) *gb += g.cwiseProduct(a.value());
  });
}

Var add_row_broadcast(Var x, Var bias) {
  require_same_tape("add_row_broadcast", x, bias);
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    shape_fail("add_row_broadcast", "bias must be 1x" + std::to_string(x.cols()) + ", got " + shape_str(bias.value()));
  }
  Matrix out = x.value().rowwise() + bias.value().row(0);
  Var parents[] = {x, bias};
  return x.tape().record(std::move(out), parents, [x, bias](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) *gx += g;
    if (auto* gb = t.grad_target(bias)) *gb += g.colwise().sum();
  });
}

Var mul_col_broadcast(Var x, Var col) {
  require_same_tape("mul_col_broadcast", x, col);
  if (col.cols() != 1 || col.rows() != x.rows()) {
    shape_fail("mul_col_broadcast",
               "column must be " + std::to_string(x.rows()) + "x1, got " + shape_str(col.value()));
  }
  Matrix out = x.value().array().colwise() * col.value().col(0).array();
  Var parents[] = {x, col};
  return x.tape().record(std::move(out), parents, [x, col](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) *gx += (g.array().colwise() * col.value().col(0).array()).matrix();
    if (auto* gc = t.grad_target(col)) *gc += g.cwiseProduct(x.value()).rowwise().sum();
  });
}

Var scale(Var x, double factor) {
  Var parents[] = {x};
  return x.tape().record(x.value() * factor, parents, [x, factor](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) *gx += g * factor;
  });
}

Var add_constant(Var x, const Matrix& c) {
  if (c.rows() != x.rows() || c.cols() != x.cols()) {
    shape_fail("add_constant", "constant shape " + shape_str(c) + " != operand shape " + shape_str(x.value()));
  }
  Var parents[] = {x};
  return x.tape().record(x.value() + c, parents, [x](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) *gx += g;
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) shape_fail("concat_cols", "no operands");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const auto& p : parts) {
    require_same_tape("concat_cols", parts[0], p);
    if (p.rows() != rows) shape_fail("concat_cols", "row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [saved](const Matrix& g, Tape& t) {
    Index offset = 0;
    for (const auto& p : saved) {
      if (auto* gp = t.grad_target(p)) *gp += g.middleCols(offset, p.cols());
      offset += p.cols();
    }
  });
}

Var slice_cols(Var x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    shape_fail("slice_cols", "range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                                 ") outside " + std::to_string(x.cols()) + " columns");
  }
  Var parents[] = {x};
  return x.tape().record(x.value().middleCols(start, count), parents, [x, start, count](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) gx->middleCols(start, count) += g;
  });
}

Var leaky_relu(Var x, double slope) {
  Matrix out = x.value().unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
  Var parents[] = {x};
  return x.tape().record(std::move(out), parents, [x, slope](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) {
      *gx += g.binaryExpr(x.value(), [slope](double gv, double v) { return v > 0 ? gv : slope * gv; });
    }
  });
}

Var elu(Var x, double alpha) {
  Matrix out = x.value().unaryExpr([alpha](double v) { return v > 0 ? v : alpha * std::expm1(v); });
  Var parents[] = {x};
  return x.tape().record(std::move(out), parents, [x, alpha](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) {
      *gx += g.binaryExpr(x.value(), [alpha](double gv, double v) { return v > 0 ? gv : gv * alpha * std::exp(v); });
    }
  });
}

Var exp(Var x) {
  Matrix out = x.value().array().exp().matrix();
  Var parents[] = {x};
  auto saved = std::make_shared<Matrix>(out);
  return x.tape().record(std::move(out), parents, [x, saved](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) *gx += g.cwiseProduct(*saved);
  });
}

Var abs(Var x) {
  Var parents[] = {x};
  return x.tape().record(x.value().cwiseAbs(), parents, [x](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) {
      *gx += g.binaryExpr(x.value(), [](double gv, double v) { return v > 0 ? gv : (v < 0 ? -gv : 0.0); });
    }
  });
}

Var log_clamped(Var x, double eps) {
  Matrix out = x.value().unaryExpr([eps](double v) { return std::log(std::max(v, eps)); });
  Var parents[] = {x};
  return x.tape().record(std::move(out), parents, [x, eps](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) {
      *gx += g.binaryExpr(x.value(), [eps](double gv, double v) { return v > eps ? gv / v : 0.0; });
    }
  });
}

namespace {

Matrix softmax_backward(const Matrix& y, const Matrix& g) {
  Matrix gy = g.cwiseProduct(y);
  Eigen::VectorXd dot = gy.rowwise().sum();
  Matrix out = gy;
  out -= (y.array().colwise() * dot.array()).matrix();
  return out;
}

}  // namespace

Var softmax_rows(Var x) {
  const Matrix& in = x.value();
  if (in.cols() == 0) shape_fail("softmax_rows", "zero columns");
  Matrix out(in.rows(), in.cols());
  for (Index i = 0; i < in.rows(); ++i) {
    const double m = in.row(i).maxCoeff();
    out.row(i) = (in.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  auto saved = std::make_shared<Matrix>(out);
  Var parents[] = {x};
  return x.tape().record(std::move(out), parents, [x, saved](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) *gx += softmax_backward(*saved, g);
  });
}

Var masked_softmax_rows(Var x, const BoolMatrix& mask) {
  const Matrix& in = x.value();
  if (mask.rows() != in.rows() || mask.cols() != in.cols()) {
    shape_fail("masked_softmax_rows", "mask shape differs from operand " + shape_str(in));
  }
  Matrix out = Matrix::Zero(in.rows(), in.cols());
  for (Index i = 0; i < in.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < in.cols(); ++j) {
      if (mask(i, j)) m = std::max(m, in(i, j));
    }
    if (!std::isfinite(m)) shape_fail("masked_softmax_rows", "row " + std::to_string(i) + " is fully masked");
    double sum = 0.0;
    for (Index j = 0; j < in.cols(); ++j) {
      if (mask(i, j)) {
        out(i, j) = std::exp(in(i, j) - m);
        sum += out(i, j);
      }
    }
    out.row(i) /= sum;
  }
  auto saved = std::make_shared<Matrix>(out);
  Var parents[] = {x};
  return x.tape().record(std::move(out), parents, [x, saved](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) *gx += softmax_backward(*saved, g);
  });
}

Var dropout(Var x, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) shape_fail("dropout", "rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep = 1.0 - rate;
  auto mask = std::make_shared<Matrix>(x.rows(), x.cols());
  for (Index i = 0; i < mask->size(); ++i) mask->data()[i] = uniform01(rng) < keep ? 1.0 / keep : 0.0;
  Var parents[] = {x};
  return x.tape().record(x.value().cwiseProduct(*mask), parents, [x, mask](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) *gx += g.cwiseProduct(*mask);
  });
}

Var gather_rows(Var x, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) {
      shape_fail("gather_rows", "row index " + std::to_string(rows[i]) + " outside " + std::to_string(x.rows()));
    }
    out.row(static_cast<Index>(i)) = x.value().row(rows[i]);
  }
  auto idx = std::make_shared<std::vector<Index>>(rows.begin(), rows.end());
  Var parents[] = {x};
  return x.tape().record(std::move(out), parents, [x, idx](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) {
      for (std::size_t i = 0; i < idx->size(); ++i) gx->row((*idx)[i]) += g.row(static_cast<Index>(i));
    }
  });
}

Var segment_sum(Var x, std::span<const Index> segment, Index num_segments) {
  if (static_cast<Index>(segment.size()) != x.rows()) {
    shape_fail("segment_sum", "segment ids (" + std::to_string(segment.size()) + ") must match rows (" +
                                  std::to_string(x.rows()) + ")");
  }
  Matrix out = Matrix::Zero(num_segments, x.cols());
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] < 0 || segment[i] >= num_segments) {
      shape_fail("segment_sum", "segment id " + std::to_string(segment[i]) + " out of range");
    }
    out.row(segment[i]) += x.value().row(static_cast<Index>(i));
  }
  auto seg = std::make_shared<std::vector<Index>>(segment.begin(), segment.end());
  Var parents[] = {x};
  return x.tape().record(std::move(out), parents, [x, seg](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) {
      for (std::size_t i = 0; i < seg->size(); ++i) gx->row(static_cast<Index>(i)) += g.row((*seg)[i]);
    }
  });
}

Var sum_all(Var x) {
  Var parents[] = {x};
  return x.tape().record(Matrix::Constant(1, 1, x.value().sum()), parents, [x](const Matrix& g, Tape& t) {
    if (auto* gx = t.grad_target(x)) gx->array() += g(0, 0);
  });
}

Var mean_all(Var x) {
  if (x.value().size() == 0) shape_fail("mean_all", "empty operand");
  return scale(sum_all(x), 1.0 / static_cast<double>(x.value().size()));
}

Var cross_entropy(Var probs, std::span<const int> labels, std::span<const Index> rows, double eps) {
  if (rows.empty()) shape_fail("cross_entropy", "no rows selected");
  if (static_cast<Index>(labels.size()) != probs.rows()) {
    shape_fail("cross_entropy", "labels (" + std::to_string(labels.size()) + ") must match rows (" +
                                    std::to_string(probs.rows()) + ")");
  }
  const Matrix& p = probs.value();
  double total = 0.0;
  for (Index r : rows) {
    if (r < 0 || r >= p.rows()) shape_fail("cross_entropy", "row index out of range");
    const int c = labels[static_cast<std::size_t>(r)];
    if (c < 0 || c >= p.cols()) shape_fail("cross_entropy", "label out of range");
    total -= std::log(std::max(p(r, c), eps));
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  auto saved_rows = std::make_shared<std::vector<Index>>(rows.begin(), rows.end());
  auto saved_labels = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  Var parents[] = {probs};
  return probs.tape().record(
      Matrix::Constant(1, 1, total * inv_n), parents,
      [probs, saved_rows, saved_labels, inv_n, eps](const Matrix& g, Tape& t) {
        auto* gp = t.grad_target(probs);
        if (gp == nullptr) return;
        const Matrix& pv = probs.value();
        for (Index r : *saved_rows) {
          const int c = (*saved_labels)[static_cast<std::size_t>(r)];
          if (pv(r, c) > eps) (*gp)(r, c) -= g(0, 0) * inv_n / pv(r, c);
        }
      });
}

Var straight_through(Var soft, const Matrix& hard, const Matrix& soft_reference) {
  if (hard.rows() != soft.rows() || hard.cols() != soft.cols() || soft_reference.rows() != soft.rows() ||
      soft_reference.cols() != soft.cols()) {
    shape_fail("straight_through", "hard/reference shapes must match soft " + shape_str(soft.value()));
  }
  Matrix out = hard + (soft.value() - soft_reference);
  Var parents[] = {soft};
  return soft.tape().record(std::move(out), parents, [soft](const Matrix& g, Tape& t) {
    if (auto* gs = t.grad_target(soft)) *gs += g;
  });
}

// ---- graph kernels ----------------------------------------------------------

AttentionResult gatv2_attention(Var z, Var attn, const Csr& adj, int heads, std::optional<Var> edge_weight,
                                double slope) {
  require_same_tape("gatv2_attention", z, attn);
  const Index n = z.rows();
  if (static_cast<Index>(adj.num_nodes()) != n) {
    shape_fail("gatv2_attention", "graph has " + std::to_string(adj.num_nodes()) + " nodes, features have " +
                                      std::to_string(n) + " rows");
  }
  if (heads <= 0 || z.cols() % heads != 0) shape_fail("gatv2_attention", "feature width not divisible by heads");
  const Index dh = z.cols() / heads;
  if (attn.rows() != heads || attn.cols() != dh) {
    shape_fail("gatv2_attention", "attention vector must be " + std::to_string(heads) + "x" + std::to_string(dh) +
                                      ", got " + shape_str(attn.value()));
  }
  const Matrix* w = nullptr;
  if (edge_weight) {
    require_same_tape("gatv2_attention", z, *edge_weight);
    if (edge_weight->rows() != static_cast<Index>(adj.num_edges()) || edge_weight->cols() != 1) {
      shape_fail("gatv2_attention", "edge weights must be " + std::to_string(adj.num_edges()) + "x1");
    }
    w = &edge_weight->value();
  }

  const Matrix& zv = z.value();
  const Matrix& av = attn.value();
  const std::size_t slots = adj.num_edges() + static_cast<std::size_t>(n);
  auto alpha = std::make_shared<Matrix>(static_cast<Index>(slots), heads);
  // e^{s - m} / sum(w e^{s - m}) per slot, needed for edge-weight gradients.
  auto expo = std::make_shared<Matrix>(w ? static_cast<Index>(slots) : 0, heads);
  Matrix out = Matrix::Zero(n, z.cols());

  auto score = [&](Index v, Index u, Index k) {
    double s = 0.0;
    const double* zvk = zv.row(v).data() + k * dh;
    const double* zuk = zv.row(u).data() + k * dh;
    const double* ak = av.row(k).data();
    for (Index c = 0; c < dh; ++c) {
      const double x = zvk[c] + zuk[c];
      s += ak[c] * (x > 0 ? x : slope * x);
    }
    return s;
  };

  std::vector<double> scores;
  for (Index v = 0; v < n; ++v) {
    const auto nbrs = adj.neighbors(static_cast<NodeId>(v));
    const std::size_t base = adj.offsets[static_cast<std::size_t>(v)] + static_cast<std::size_t>(v);
    const std::size_t e0 = adj.offsets[static_cast<std::size_t>(v)];
    scores.resize(nbrs.size() + 1);
    for (Index k = 0; k < heads; ++k) {
      scores[0] = score(v, v, k);
      double m = scores[0];
      for (std::size_t j = 0; j < nbrs.size(); ++j) {
        scores[j + 1] = score(v, nbrs[j], k);
        if (w == nullptr || (*w)(static_cast<Index>(e0 + j), 0) != 0.0) m = std::max(m, scores[j + 1]);
      }
      double denom = 0.0;
      for (std::size_t j = 0; j <= nbrs.size(); ++j) {
        double e = std::exp(scores[j] - m);
        if (w != nullptr) {
          (*expo)(static_cast<Index>(base + j), k) = e;
          if (j > 0) e *= (*w)(static_cast<Index>(e0 + j - 1), 0);
        }
        (*alpha)(static_cast<Index>(base + j), k) = e;
        denom += e;
      }
      for (std::size_t j = 0; j <= nbrs.size(); ++j) {
        const Index slot = static_cast<Index>(base + j);
        (*alpha)(slot, k) /= denom;
        if (w != nullptr) (*expo)(slot, k) /= denom;
        const Index u = j == 0 ? v : static_cast<Index>(nbrs[j - 1]);
        out.row(v).segment(k * dh, dh) += (*alpha)(slot, k) * zv.row(u).segment(k * dh, dh);
      }
    }
  }

  std::vector<Var> parents{z, attn};
  if (edge_weight) parents.push_back(*edge_weight);
  const Csr* graph = &adj;
  auto backward = [z, attn, edge_weight, graph, heads, dh, slope, alpha, expo](const Matrix& g, Tape& t) {
    const Csr& a = *graph;
    Matrix* gz = t.grad_target(z);
    Matrix* ga = t.grad_target(attn);
    Matrix* gw = edge_weight ? t.grad_target(*edge_weight) : nullptr;
    const Matrix& zv = z.value();
    const Matrix& av = attn.value();
    const Index n = zv.rows();
    std::vector<double> dalpha;
    for (Index v = 0; v < n; ++v) {
      const auto nbrs = a.neighbors(static_cast<NodeId>(v));
      const std::size_t base = a.offsets[static_cast<std::size_t>(v)] + static_cast<std::size_t>(v);
      const std::size_t e0 = a.offsets[static_cast<std::size_t>(v)];
      dalpha.resize(nbrs.size() + 1);
      for (Index k = 0; k < heads; ++k) {
        const auto gout = g.row(v).segment(k * dh, dh);
        double weighted = 0.0;
        for (std::size_t j = 0; j <= nbrs.size(); ++j) {
          const Index u = j == 0 ? v : static_cast<Index>(nbrs[j - 1]);
          const double al = (*alpha)(static_cast<Index>(base + j), k);
          dalpha[j] = gout.dot(zv.row(u).segment(k * dh, dh));
          weighted += al * dalpha[j];
          if (gz != nullptr) gz->row(u).segment(k * dh, dh) += al * gout;
        }
        for (std::size_t j = 0; j <= nbrs.size(); ++j) {
          const Index slot = static_cast<Index>(base + j);
          const double centered = dalpha[j] - weighted;
          if (gw != nullptr && j > 0) (*gw)(static_cast<Index>(e0 + j - 1), 0) += (*expo)(slot, k) * centered;
          const double ds = (*alpha)(slot, k) * centered;
          if (ds == 0.0) continue;
          const Index u = j == 0 ? v : static_cast<Index>(nbrs[j - 1]);
          const double* zvk = zv.row(v).data() + k * dh;
          const double* zuk = zv.row(u).data() + k * dh;
          const double* ak = av.row(k).data();
          for (Index c = 0; c < dh; ++c) {
            const double x = zvk[c] + zuk[c];
            const bool pos = x > 0;
            if (ga != nullptr) (*ga)(k, c) += ds * (pos ? x : slope * x);
            if (gz != nullptr) {
              const double dx = ds * ak[c] * (pos ? 1.0 : slope);
              (*gz)(v, k * dh + c) += dx;
              (*gz)(u, k * dh + c) += dx;
            }
          }
        }
      }
    }
  };
  Var output = z.tape().record(std::move(out), parents, std::move(backward));
  return {output, *alpha};
}

Var sparse_aggregate(Var z, const Csr& adj, std::span<const double> self_coeff, std::span<const double> edge_coeff) {
  const Index n = z.rows();
  if (static_cast<Index>(adj.num_nodes()) != n || static_cast<Index>(self_coeff.size()) != n ||
      edge_coeff.size() != adj.num_edges()) {
    shape_fail("sparse_aggregate", "graph, coefficients and features disagree on size");
  }
  const Matrix& zv = z.value();
  Matrix out(n, z.cols());
  for (Index v = 0; v < n; ++v) {
    out.row(v) = self_coeff[static_cast<std::size_t>(v)] * zv.row(v);
    const std::size_t e0 = adj.offsets[static_cast<std::size_t>(v)];
    const auto nbrs = adj.neighbors(static_cast<NodeId>(v));
    for (std::size_t j = 0; j < nbrs.size(); ++j) out.row(v) += edge_coeff[e0 + j] * zv.row(nbrs[j]);
  }
  auto sc = std::make_shared<std::vector<double>>(self_coeff.begin(), self_coeff.end());
  auto ec = std::make_shared<std::vector<double>>(edge_coeff.begin(), edge_coeff.end());
  const Csr* graph = &adj;
  Var parents[] = {z};
  return z.tape().record(std::move(out), parents, [z, graph, sc, ec](const Matrix& g, Tape& t) {
    auto* gz = t.grad_target(z);
    if (gz == nullptr) return;
    const Csr& a = *graph;
    for (Index v = 0; v < g.rows(); ++v) {
      gz->row(v) += (*sc)[static_cast<std::size_t>(v)] * g.row(v);
      const std::size_t e0 = a.offsets[static_cast<std::size_t>(v)];
      const auto nbrs = a.neighbors(static_cast<NodeId>(v));
      for (std::size_t j = 0; j < nbrs.size(); ++j) gz->row(nbrs[j]) += (*ec)[e0 + j] * g.row(v);
    }
  });
}

Var edge_selection_weights(Var selection, const Csr& adj, std::span<const std::uint32_t> edge_masks,
                           std::span<const std::uint32_t> type_masks) {
  if (selection.rows() != static_cast<Index>(adj.num_nodes()) ||
      selection.cols() != static_cast<Index>(type_masks.size()) || edge_masks.size() != adj.num_edges()) {
    shape_fail("edge_selection_weights", "selection must be nodes x types and masks must cover every edge");
  }
  const Matrix& s = selection.value();
  const auto types = static_cast<Index>(type_masks.size());
  Matrix out(static_cast<Index>(adj.num_edges()), 1);
  for (std::size_t v = 0; v < adj.num_nodes(); ++v) {
    for (std::size_t e = adj.offsets[v]; e < adj.offsets[v + 1]; ++e) {
      double acc = 0.0;
      for (Index gi = 0; gi < types; ++gi) {
        if ((type_masks[static_cast<std::size_t>(gi)] & edge_masks[e]) != 0) acc += s(static_cast<Index>(v), gi);
      }
      out(static_cast<Index>(e), 0) = acc;
    }
  }
  auto em = std::make_shared<std::vector<std::uint32_t>>(edge_masks.begin(), edge_masks.end());
  auto tm = std::make_shared<std::vector<std::uint32_t>>(type_masks.begin(), type_masks.end());
  const Csr* graph = &adj;
  Var parents[] = {selection};
  return selection.tape().record(std::move(out), parents, [selection, graph, em, tm](const Matrix& g, Tape& t) {
    auto* gs = t.grad_target(selection);
    if (gs == nullptr) return;
    const Csr& a = *graph;
    for (std::size_t v = 0; v < a.num_nodes(); ++v) {
      for (std::size_t e = a.offsets[v]; e < a.offsets[v + 1]; ++e) {
        for (std::size_t gi = 0; gi < tm->size(); ++gi) {
          if (((*tm)[gi] & (*em)[e]) != 0) (*gs)(static_cast<Index>(v), static_cast<Index>(gi)) += g(static_cast<Index>(e), 0);
        }
      }
    }
  });
}

}  // namespace dhgat::ad
