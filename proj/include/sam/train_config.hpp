#pragma once

#include <cstdint>
#include <string>

#include "sam/curriculum.hpp"
#include "sam/model.hpp"
#include "sam/optimizer.hpp"
#include "sam/tasks.hpp"

namespace sam {

struct TrainConfig {
  TaskKind task = TaskKind::kCopy;
  ModelKind model = ModelKind::kSam;
  std::uint64_t seed = 1;

  RmsPropConfig optimizer;
  Index minibatch = 8;
  Index workers = 8;
  double grad_clip = 10.0;
  double init_scale = 0.1;

  bool curriculum = false;
  CurriculumConfig curriculum_config;
  Index min_level = 1;   // fixed-range sampling when the curriculum is off
  Index max_level = 20;
  Index stop_level = 0;  // stop once the curriculum has moved past this level (0 = never)

  Index minibatches = 20000;
  double stop_below = 0.0;  // stop when the windowed bits/step drops below this (0 = never)
  Index stop_window = 100;

  Index bits = 8;
  Index item_words = 1;

  Index hidden = 100;
  MemoryConfig memory;
  Index links = 8;

  Index log_every = 1;
  Index checkpoint_every = 1000;
};

// key = value lines, '#' comments. Unknown keys and bad values raise
// InputError naming the field.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);
// Applies a single "key=value" override.
void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string to_text(const TrainConfig& cfg);
void validate(const TrainConfig& cfg);

ModelConfig model_config(const TrainConfig& cfg);

}  // namespace sam
