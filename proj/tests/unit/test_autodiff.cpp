#include <doctest.h>

#include <filesystem>

#include "dhgat/checkpoint.hpp"
#include "dhgat/errors.hpp"
#include "dhgat/gradcheck.hpp"
#include "dhgat/optim.hpp"
#include "dhgat/tensor.hpp"

using namespace dhgat;
using namespace dhgat::ad;

namespace {

Matrix filled(Index r, Index c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * uniform01(rng);
  return m;
}

}  // namespace

TEST_CASE("sum of squares has gradient 2x") {
  Parameter x("x", Matrix{{1.0, 2.0, 3.0}});
  Tape tape;
  Var v = tape.leaf(x);
  Var y = sum_all(mul(v, v));
  CHECK(y.value()(0, 0) == 14.0);
  tape.backward(y);
  CHECK(x.grad() == Matrix{{2.0, 4.0, 6.0}});
}

TEST_CASE("dot product x.x at (1,1,1)") {
  Parameter x("x", Matrix::Ones(1, 3));
  Tape tape;
  Var v = tape.leaf(x);
  Var y = matmul(v, tape.constant(Matrix::Ones(3, 1)));
  Var s = sum_all(mul(v, v));
  CHECK(y.value()(0, 0) == 3.0);
  tape.backward(s);
  CHECK(x.grad().sum() == 6.0);
}

TEST_CASE("masked softmax with one open entry is one-hot with zero gradient") {
  Parameter x("x", Matrix{{0.3, -2.0, 5.0}});
  BoolMatrix mask(1, 3);
  mask << false, true, false;
  Tape tape;
  Var p = masked_softmax_rows(tape.leaf(x), mask);
  CHECK(p.value() == Matrix{{0.0, 1.0, 0.0}});
  tape.backward(sum_all(mul(p, tape.constant(Matrix{{1.0, 2.0, 3.0}}))));
  CHECK(x.grad().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matmul, elu and softmax chain passes a gradient check") {
  Parameter w("w", filled(4, 3, 1));
  Parameter b("b", filled(1, 3, 2));
  const Matrix xin = filled(5, 4, 3);
  const Matrix target = filled(5, 3, 4, 0.0, 1.0);
  auto expr = [&](Tape& t) {
    Var h = add_row_broadcast(matmul(t.constant(xin), t.leaf(w)), t.leaf(b));
    Var p = softmax_rows(elu(h));
    return mean_all(mul(p, t.constant(target)));
  };
  std::vector<Parameter*> ps{&w, &b};
  const auto report = grad_check(expr, ps, 1e-7);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-7);
}

TEST_CASE("every primitive passes a gradient check") {
  Parameter a("a", filled(3, 4, 5));
  Parameter c("c", filled(3, 1, 6, 0.5, 1.5));
  Parameter pos("pos", filled(3, 4, 7, 0.2, 2.0));
  BoolMatrix mask = BoolMatrix::Constant(3, 4, true);
  mask(0, 1) = false;
  mask(2, 3) = false;
  const std::vector<Index> rows{2, 0, 2};
  const std::vector<Index> seg{1, 0, 1};
  const std::vector<int> labels{1, 3, 0};
  const std::vector<Index> ce_rows{0, 2};
  auto expr = [&](Tape& t) {
    Var x = t.leaf(a);
    std::vector<Var> parts{x, scale(x, -0.5)};
    Var cat = concat_cols(parts);
    Var s = slice_cols(cat, 2, 4);
    Var q = add(sub(leaky_relu(s), exp(scale(x, 0.3))), abs(x));
    Var r = mul_col_broadcast(q, t.leaf(c));
    Var lg = log_clamped(t.leaf(pos));
    Var m = masked_softmax_rows(add(r, lg), mask);
    Var g = segment_sum(gather_rows(m, rows), seg, 2);
    Var ce = cross_entropy(softmax_rows(x), labels, ce_rows);
    return add(add(sum_all(mul(g, g)), ce), mean_all(add_constant(r, Matrix::Ones(3, 4))));
  };
  std::vector<Parameter*> ps{&a, &c, &pos};
  const auto report = grad_check(expr, ps, 1e-6);
  CHECK_MESSAGE(report.passed, "worst " << report.worst_param << " rel " << report.max_rel_error);
}

TEST_CASE("gradients are linear in the loss") {
  Parameter w("w", filled(3, 2, 9));
  const Matrix xin = filled(4, 3, 10);
  auto grad_of = [&](double k) {
    w.zero_grad();
    Tape t;
    t.backward(scale(sum_all(elu(matmul(t.constant(xin), t.leaf(w)))), k));
    return Matrix(w.grad());
  };
  const Matrix g1 = grad_of(1.0);
  const Matrix g3 = grad_of(3.0);
  CHECK((g3 - 3.0 * g1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("straight-through forward is the hard value and backward passes through") {
  Parameter s("s", Matrix{{0.2, 0.7, 0.1}});
  Tape t;
  Var v = t.leaf(s);
  const Matrix hard{{0.0, 1.0, 0.0}};
  Var st = straight_through(v, hard, s.value());
  CHECK(st.value() == hard);
  t.backward(sum_all(mul(st, t.constant(Matrix{{1.0, 2.0, 3.0}}))));
  CHECK(s.grad() == Matrix{{1.0, 2.0, 3.0}});
}

TEST_CASE("dropout scales survivors and is the identity in eval") {
  Parameter x("x", Matrix::Ones(200, 50));
  Rng rng(1);
  Tape t;
  Var d = dropout(t.leaf(x), 0.25, rng, true);
  std::size_t kept = 0;
  for (Index i = 0; i < d.value().size(); ++i) {
    const double v = d.value().data()[i];
    CHECK((v == 0.0 || std::abs(v - 1.0 / 0.75) < 1e-15));
    if (v != 0.0) ++kept;
  }
  CHECK(std::abs(static_cast<double>(kept) / 10000.0 - 0.75) < 0.02);
  Var e = dropout(t.leaf(x), 0.25, rng, false);
  CHECK(e.value() == x.value());
  Var z = dropout(t.leaf(x), 0.0, rng, true);
  CHECK(z.value() == x.value());
}

TEST_CASE("shape mismatches throw") {
  Tape t;
  Var a = t.constant(Matrix::Ones(2, 3));
  Var b = t.constant(Matrix::Ones(2, 3));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(add(a, t.constant(Matrix::Ones(3, 2))), ShapeError);
  CHECK_THROWS_AS(add_row_broadcast(a, t.constant(Matrix::Ones(1, 2))), ShapeError);
  CHECK_THROWS_AS(t.backward(a), ShapeError);
  Parameter p("p", Matrix::Ones(2, 2));
  CHECK_THROWS_AS(p.accumulate(Matrix::Ones(1, 2)), ShapeError);
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, std::uint64_t{2}) != derive_seed(2, std::uint64_t{2}));
}

TEST_CASE("adam: zero gradient with no decay leaves parameters unchanged") {
  Parameter p("p", Matrix{{1.0, -2.0}});
  Adam opt({&p}, {.lr = 0.1, .weight_decay = 0.0});
  p.accumulate(Matrix::Zero(1, 2));
  opt.step();
  CHECK(p.value() == Matrix{{1.0, -2.0}});
}

TEST_CASE("adam: first step moves by lr against the gradient sign") {
  Parameter p("p", Matrix{{1.0, -2.0, 0.5}});
  Adam opt({&p}, {.lr = 0.01, .weight_decay = 0.0});
  p.accumulate(Matrix{{3.0, -0.2, 40.0}});
  opt.step();
  CHECK(std::abs(p.value()(0, 0) - 0.99) < 1e-6);
  CHECK(std::abs(p.value()(0, 1) - (-1.99)) < 1e-6);
  CHECK(std::abs(p.value()(0, 2) - 0.49) < 1e-6);
  CHECK_FALSE(p.has_grad());
}

TEST_CASE("adam: decay is decoupled from the gradient") {
  Parameter p("p", Matrix{{2.0}});
  Adam opt({&p}, {.lr = 0.1, .weight_decay = 0.5});
  p.accumulate(Matrix::Zero(1, 1));
  opt.step();
  CHECK(std::abs(p.value()(0, 0) - 2.0 * (1.0 - 0.1 * 0.5)) < 1e-15);
}

TEST_CASE("adam: a parameter without gradient is an error") {
  Parameter p("p", Matrix::Ones(1, 1));
  Adam opt({&p}, {});
  CHECK_THROWS_AS(opt.step(), ValidationError);
}

TEST_CASE("adam minimizes a quadratic") {
  Parameter p("p", Matrix{{3.0, -4.0}});
  Adam opt({&p}, {.lr = 0.05, .weight_decay = 0.0});
  for (int i = 0; i < 2000; ++i) {
    Tape t;
    Var v = t.leaf(p);
    t.backward(sum_all(mul(v, v)));
    opt.step();
  }
  CHECK(p.value().cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("gradient check on a quadratic is near exact and restores values") {
  Parameter p("p", filled(3, 3, 12));
  const Matrix before = p.value();
  std::vector<Parameter*> ps{&p};
  auto expr = [&](Tape& t) {
    Var v = t.leaf(p);
    return sum_all(mul(v, v));
  };
  const auto report = grad_check(expr, ps, 1e-8);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-8);
  CHECK(report.coords_checked == 9);
  CHECK(p.value() == before);
}

TEST_CASE("gradient check flags a wrong backward") {
  Parameter p("p", filled(2, 2, 13));
  std::vector<Parameter*> ps{&p};
  auto expr = [&](Tape& t) {
    Var v = t.leaf(p);
    Var wrong = t.record(v.value().array().square().matrix(), std::span<const Var>(&v, 1),
                         [v](const Matrix& g, Tape& tape) {
                           if (Matrix* target = tape.grad_target(v)) *target += g;  // should be 2x * g
                         });
    return sum_all(wrong);
  };
  CHECK_FALSE(grad_check(expr, ps, 1e-4).passed);
}

TEST_CASE("checkpoint round trip") {
  Parameter a("a", filled(2, 3, 14));
  Parameter b("b", filled(1, 4, 15));
  const auto path = std::filesystem::temp_directory_path() / "dhgat_ckpt.bin";
  std::vector<const Parameter*> cps{&a, &b};
  save_checkpoint(path, cps, 0xabc, 42);
  const auto ck = load_checkpoint(path);
  CHECK(ck.config_hash == 0xabc);
  CHECK(ck.seed == 42);
  Parameter a2("a", Matrix::Zero(2, 3));
  Parameter b2("b", Matrix::Zero(1, 4));
  std::vector<Parameter*> targets{&a2, &b2};
  restore_parameters(ck, targets);
  CHECK(a2.value() == a.value());
  CHECK(b2.value() == b.value());

  Parameter wrong("a", Matrix::Zero(3, 3));
  std::vector<Parameter*> bad{&wrong};
  CHECK_THROWS_AS(restore_parameters(ck, bad), ShapeError);
  Parameter missing("c", Matrix::Zero(1, 1));
  std::vector<Parameter*> absent{&missing};
  CHECK_THROWS_AS(restore_parameters(ck, absent), ValidationError);

  std::filesystem::resize_file(path, 30);
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
}
