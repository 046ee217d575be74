#pragma once

#include <string>

#include "sam/model.hpp"

namespace sam {

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-5;
  // Errors are measured relative to max(|analytic|, |numeric|, floor), with
  // floor = floor_fraction * max |analytic gradient|.
  double floor_fraction = 1e-3;
  // Fourth-order five-point stencil instead of central differences.
  bool five_point = false;
  // Check every `stride`-th parameter (1 = all).
  Index stride = 1;
  // Negates the analytic gradient, to prove the check can fail.
  bool corrupt = false;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  Index worst_parameter = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  Index checked = 0;
  bool passed = false;
};

double relative_error(double analytic, double numeric, double floor);

// Central differences of the episode loss against the analytic gradient.
// The model's memory is left as it was.
GradCheckReport gradient_check(Model& model, const Vector& params, const Episode& ep,
                               const GradCheckOptions& options = {});

std::string describe(const GradCheckReport& r, const ParamLayout& layout);

}  // namespace sam
