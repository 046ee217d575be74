#include "sam/curriculum.hpp"

#include <numeric>

#include "sam/error.hpp"

namespace sam {

Curriculum::Curriculum(const CurriculumConfig& config) : config_(config), h_(config.initial_level) {
  require(config.initial_level >= 1, "curriculum: initial level must be >= 1");
  require(config.patience >= 1, "curriculum: patience must be >= 1");
}

bool Curriculum::observe(double loss) {
  ++observed_at_level_;
  window_.push_back(loss);
  if (static_cast<Index>(window_.size()) > config_.patience) window_.pop_front();
  if (static_cast<Index>(window_.size()) < config_.patience) return false;
  const double mean =
      std::accumulate(window_.begin(), window_.end(), 0.0) / static_cast<double>(window_.size());
  if (!(mean < config_.threshold)) return false;
  h_ *= 2;
  window_.clear();
  observed_at_level_ = 0;
  return true;
}

Index Curriculum::sample(std::mt19937_64& rng) const {
  return static_cast<Index>(rng() % static_cast<std::uint64_t>(h_ + 1));
}

void Curriculum::restore(Index h, std::deque<double> window, Index observed_at_level) {
  require(h >= 1, "curriculum: level must be >= 1");
  h_ = h;
  window_ = std::move(window);
  observed_at_level_ = observed_at_level;
}

}  // namespace sam
