#pragma once

#include <cstdint>
#include <deque>
#include <random>

#include "sam/dense.hpp"

namespace sam {

struct CurriculumConfig {
  double threshold = 0.01;  // bits per answer step
  Index patience = 100;     // window length, in observed losses
  Index initial_level = 1;
};

// Exponential curriculum: h doubles whenever the mean of the last `patience`
// losses is below the threshold; levels are drawn uniformly from {0..h}.
class Curriculum {
 public:
  Curriculum() : Curriculum(CurriculumConfig{}) {}
  explicit Curriculum(const CurriculumConfig& config);

  const CurriculumConfig& config() const { return config_; }
  Index level() const { return h_; }
  const std::deque<double>& window() const { return window_; }
  Index observed_at_level() const { return observed_at_level_; }

  // Records one loss; returns true if h doubled.
  bool observe(double loss);

  Index sample(std::mt19937_64& rng) const;

  void restore(Index h, std::deque<double> window, Index observed_at_level);

 private:
  CurriculumConfig config_;
  Index h_ = 1;
  std::deque<double> window_;
  Index observed_at_level_ = 0;
};

}  // namespace sam
