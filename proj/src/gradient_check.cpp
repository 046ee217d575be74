#include "sam/gradient_check.hpp"

#include <cmath>
#include <sstream>

namespace sam {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport gradient_check(Model& model, const Vector& params, const Episode& ep,
                               const GradCheckOptions& o) {
  Vector grads = Vector::Zero(model.parameter_count());
  model.run(params, ep, &grads);
  if (o.corrupt) grads = -grads;
  model.freeze_directions(true);

  const double floor = o.floor_fraction * grads.cwiseAbs().maxCoeff();
  GradCheckReport r;
  Vector p = params;
  auto loss_at = [&](Index k, double delta) {
    const double keep = p[k];
    p[k] = keep + delta;
    const double l = model.run(p, ep).loss;
    p[k] = keep;
    return l;
  };
  for (Index k = 0; k < p.size(); k += std::max<Index>(1, o.stride)) {
    const double h = o.epsilon;
    double numeric = 0.0;
    if (o.five_point) {
      numeric = (-loss_at(k, 2 * h) + 8 * loss_at(k, h) - 8 * loss_at(k, -h) + loss_at(k, -2 * h)) /
                (12 * h);
    } else {
      numeric = (loss_at(k, h) - loss_at(k, -h)) / (2 * h);
    }
    const double e = relative_error(grads[k], numeric, floor);
    ++r.checked;
    if (e > r.max_relative_error || r.worst_parameter < 0) {
      r.max_relative_error = e;
      r.worst_parameter = k;
      r.worst_analytic = grads[k];
      r.worst_numeric = numeric;
    }
  }
  model.freeze_directions(false);
  r.passed = r.max_relative_error <= o.tolerance;
  return r;
}

std::string describe(const GradCheckReport& r, const ParamLayout& l) {
  const char* block = "?";
  const Index k = r.worst_parameter;
  if (k >= l.output_b) block = "output bias";
  else if (k >= l.output_w) block = "output weights";
  else if (k >= l.interface_b) block = "interface bias";
  else if (k >= l.interface_w) block = "interface weights";
  else if (k >= l.gate_bias) block = "gate bias";
  else if (k >= l.gate_hidden) block = "recurrent weights";
  else if (k >= 0) block = "input weights";
  std::ostringstream s;
  s << (r.passed ? "PASS" : "FAIL") << " max_rel_err=" << r.max_relative_error << " checked="
    << r.checked << " worst=" << k << " (" << block << ") analytic=" << r.worst_analytic
    << " numeric=" << r.worst_numeric;
  return s.str();
}

}  // namespace sam
