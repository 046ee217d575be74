#pragma once

#include "sam/dense.hpp"

namespace sam {

struct RmsPropConfig {
  double learning_rate = 1e-5;
  double decay = 0.9;
  double epsilon = 1e-6;
  double momentum = 0.9;
};

// ms <- decay * ms + (1 - decay) * g^2
// v  <- momentum * v + (1 - momentum) * g / sqrt(ms + epsilon)
// p  <- p - lr * v
// Under a constant gradient the step tends to lr * sign(g).
class RmsProp {
 public:
  RmsProp() = default;
  RmsProp(Index size, const RmsPropConfig& config);

  const RmsPropConfig& config() const { return config_; }
  const Vector& mean_square() const { return mean_square_; }
  const Vector& velocity() const { return velocity_; }
  void load_state(const Vector& mean_square, const Vector& velocity);

  // Throws on a non-finite gradient, naming the first bad index.
  void update(Vector& params, const Vector& grads);

 private:
  RmsPropConfig config_;
  Vector mean_square_;
  Vector velocity_;
};

// Scales grads so their global L2 norm is at most max_norm; returns the norm
// before clipping.
double clip_global_norm(Vector& grads, double max_norm);

}  // namespace sam
