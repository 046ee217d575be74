#pragma once

#include <cstdint>
#include <vector>

#include "sam/dense.hpp"

namespace sam {

struct ControllerShape {
  Index input = 10;   // external input width
  Index output = 8;   // output logits
  Index hidden = 100;
  Index heads = 1;
  Index word = 32;
  bool read_modes = false;  // three extra logits per head (content / forward / backward)

  Index lstm_input() const { return input + heads * word; }
  Index head_interface() const { return 2 * word + 3 + (read_modes ? 3 : 0); }
  Index interface_size() const { return heads * head_interface(); }
};

// Offsets of each block inside the flat parameter vector.
struct ParamLayout {
  Index gate_input = 0;     // 4H x (X + R*M)
  Index gate_hidden = 0;    // 4H x H
  Index gate_bias = 0;      // 4H
  Index interface_w = 0;    // I x H
  Index interface_b = 0;    // I
  Index output_w = 0;       // Y x (H + R*M)
  Index output_b = 0;       // Y
  Index total = 0;
};

ParamLayout make_layout(const ControllerShape& shape);

struct LstmState {
  Vector h;
  Vector c;
};

struct LstmCache {
  Vector input;
  Vector h_prev;
  Vector c_prev;
  Vector i, f, g, o;  // post-activation gates
  Vector c;
  Vector tanh_c;
  Vector h;
};

struct HeadInterface {
  Vector query;
  Vector word;
  double alpha = 0.0;
  double gamma = 0.0;
  double beta = 1.0;
  double mode[3] = {1.0, 0.0, 0.0};
  // Pre-squash values, needed by the backward pass.
  double alpha_logit = 0.0;
  double gamma_logit = 0.0;
  double beta_logit = 0.0;
};

struct HeadInterfaceGrad {
  Vector d_query;
  Vector d_word;
  double d_alpha = 0.0;
  double d_gamma = 0.0;
  double d_beta = 0.0;
  double d_mode[3] = {0.0, 0.0, 0.0};
};

inline constexpr double kBetaFloor = 1e-6;

double logistic(double x);
double softplus(double x);

class Controller {
 public:
  Controller() = default;
  explicit Controller(const ControllerShape& shape);

  const ControllerShape& shape() const { return shape_; }
  const ParamLayout& layout() const { return layout_; }
  Index parameter_count() const { return layout_.total; }

  // Uniform(-scale, scale) weights, zero biases, forget-gate bias 1.
  Vector init_params(std::uint64_t seed, double scale = 0.1) const;

  LstmState zero_state() const;

  LstmCache lstm_forward(const Vector& params, const Vector& input, const LstmState& prev) const;
  // Accumulates parameter grads; returns d input and writes d h_prev / d c_prev.
  Vector lstm_backward(const Vector& params, const LstmCache& cache, const Vector& d_h,
                       const Vector& d_c, Vector& grads, Vector& d_h_prev, Vector& d_c_prev) const;

  std::vector<HeadInterface> interface_forward(const Vector& params, const Vector& h) const;
  // Returns d h.
  Vector interface_backward(const Vector& params, const Vector& h,
                            const std::vector<HeadInterface>& heads,
                            const std::vector<HeadInterfaceGrad>& d_heads, Vector& grads) const;

  // y = W [h; r_1; ...; r_R] + b
  Vector output_forward(const Vector& params, const Vector& h, const std::vector<Vector>& reads) const;
  // Returns d h; adds into d_reads.
  Vector output_backward(const Vector& params, const Vector& h, const std::vector<Vector>& reads,
                         const Vector& d_y, Vector& grads, std::vector<Vector>& d_reads) const;

 private:
  ControllerShape shape_;
  ParamLayout layout_;
};

}  // namespace sam
