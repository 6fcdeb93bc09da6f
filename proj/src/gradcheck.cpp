#include "dhgat/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

namespace dhgat::ad {

namespace {

double evaluate(const ScalarExpression& expression) {
  Tape tape;
  return expression(tape).value()(0, 0);
}

}  // namespace

GradCheckReport grad_check(const ScalarExpression& expression, std::span<Parameter* const> params, double tolerance,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = tolerance;

  for (auto* p : params) p->zero_grad();
  std::vector<Matrix> analytic;
  {
    Tape tape;
    Var out = expression(tape);
    tape.backward(out);
  }
  for (auto* p : params) {
    analytic.push_back(p->grad());
    p->zero_grad();
  }

  // (parameter, flat index) pairs to probe.
  std::vector<std::pair<std::size_t, Index>> coords;
  std::size_t total = 0;
  for (const auto* p : params) total += static_cast<std::size_t>(p->value().size());
  if (total <= options.max_coords) {
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      for (Index i = 0; i < params[pi]->value().size(); ++i) coords.emplace_back(pi, i);
    }
  } else {
    Rng rng(options.seed);
    std::vector<std::size_t> flat(total);
    std::iota(flat.begin(), flat.end(), 0);
    for (std::size_t i = 0; i < options.max_coords; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(total - i));
      std::swap(flat[i], flat[std::min(j, total - 1)]);
    }
    flat.resize(options.max_coords);
    std::sort(flat.begin(), flat.end());
    std::size_t pi = 0;
    std::size_t start = 0;
    for (auto f : flat) {
      while (f >= start + static_cast<std::size_t>(params[pi]->value().size())) {
        start += static_cast<std::size_t>(params[pi]->value().size());
        ++pi;
      }
      coords.emplace_back(pi, static_cast<Index>(f - start));
    }
  }

  for (const auto& [pi, idx] : coords) {
    double& x = params[pi]->value().data()[idx];
    const double saved = x;
    x = saved + options.step;
    const double plus = evaluate(expression);
    x = saved - options.step;
    const double minus = evaluate(expression);
    x = saved;

    const double numeric = (plus - minus) / (2.0 * options.step);
    const double a = analytic[pi].data()[idx];
    const double abs_err = std::abs(a - numeric);
    const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), options.denom_floor});
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel_err > report.max_rel_error || !std::isfinite(rel_err)) {
      report.max_rel_error = std::isfinite(rel_err) ? rel_err : INFINITY;
      report.worst_param = params[pi]->name();
      report.worst_index = idx;
    }
    ++report.coords_checked;
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace dhgat::ad
