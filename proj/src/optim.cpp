#include "dhgat/optim.hpp"

#include <cmath>

#include "dhgat/errors.hpp"

namespace dhgat::ad {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  first_.reserve(params_.size());
  second_.reserve(params_.size());
  for (const auto* p : params_) {
    first_.push_back(Matrix::Zero(p->value().rows(), p->value().cols()));
    second_.push_back(Matrix::Zero(p->value().rows(), p->value().cols()));
  }
}

void Adam::step() {
  for (const auto* p : params_) {
    if (!p->has_grad()) throw ValidationError("adam step: parameter '" + p->name() + "' has no gradient");
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  const double decay = 1.0 - config_.lr * config_.weight_decay;

  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    auto& m = first_[i];
    auto& v = second_[i];
    const Matrix& g = p.grad();
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    p.value() *= decay;
    p.value().array() -= config_.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config_.eps);
    p.zero_grad();
  }
}

}  // namespace dhgat::ad
