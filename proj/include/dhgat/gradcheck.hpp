#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "dhgat/tensor.hpp"

namespace dhgat::ad {

struct GradCheckOptions {
  double step = 1e-5;
  /// Above this many coordinates a seeded sample of this size is checked instead.
  std::size_t max_coords = 10000;
  std::uint64_t seed = 0;
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double denom_floor = 1e-2;
};

struct GradCheckReport {
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_param;
  Index worst_index = -1;
  bool passed = true;
};

/// Builds a scalar expression on the given tape. Parameters must enter via tape.leaf().
using ScalarExpression = std::function<Var(Tape&)>;

/// Compare reverse-mode gradients against central finite differences.
/// Parameter values are restored afterwards; gradients are left zeroed.
GradCheckReport grad_check(const ScalarExpression& expression, std::span<Parameter* const> params, double tolerance,
                           const GradCheckOptions& options = {});

}  // namespace dhgat::ad
