#include "sam/optimizer.hpp"

#include <cmath>
#include <string>

#include "sam/error.hpp"

namespace sam {

RmsProp::RmsProp(Index size, const RmsPropConfig& config)
    : config_(config), mean_square_(Vector::Zero(size)), velocity_(Vector::Zero(size)) {
  require(config.learning_rate > 0.0, "rmsprop: learning rate must be positive");
  require(config.decay >= 0.0 && config.decay < 1.0, "rmsprop: decay must lie in [0, 1)");
  require(config.momentum >= 0.0 && config.momentum < 1.0, "rmsprop: momentum must lie in [0, 1)");
  require(config.epsilon > 0.0, "rmsprop: epsilon must be positive");
}

void RmsProp::load_state(const Vector& mean_square, const Vector& velocity) {
  require(mean_square.size() == mean_square_.size() && velocity.size() == velocity_.size(),
          "rmsprop: state size mismatch");
  mean_square_ = mean_square;
  velocity_ = velocity;
}

void RmsProp::update(Vector& params, const Vector& grads) {
  require(params.size() == mean_square_.size() && grads.size() == params.size(),
          "rmsprop: shape mismatch");
  for (Index k = 0; k < grads.size(); ++k) {
    if (!std::isfinite(grads[k])) {
      throw ContractError("rmsprop: non-finite gradient at parameter " + std::to_string(k) + " (" +
                          std::to_string(grads[k]) + ")");
    }
  }
  const double rho = config_.decay;
  const double mu = config_.momentum;
  mean_square_ = rho * mean_square_ + (1.0 - rho) * grads.cwiseAbs2();
  velocity_ = mu * velocity_ +
              (1.0 - mu) * grads.cwiseQuotient((mean_square_.array() + config_.epsilon).sqrt().matrix());
  params -= config_.learning_rate * velocity_;
}

double clip_global_norm(Vector& grads, double max_norm) {
  const double n = grads.norm();
  if (max_norm > 0.0 && n > max_norm) grads *= max_norm / n;
  return n;
}

}  // namespace sam
