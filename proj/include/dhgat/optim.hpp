#pragma once

#include <cstdint>
#include <vector>

#include "dhgat/tensor.hpp"

namespace dhgat::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

/// Adam with decoupled weight decay and bias correction:
///   theta <- theta * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  /// Applies one update to every parameter, then zeroes their gradients.
  /// Throws ValidationError if a parameter was not reached by backward.
  void step();

  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  const std::vector<Parameter*>& params() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  AdamConfig config_;
  std::int64_t step_ = 0;
};

}  // namespace dhgat::ad
