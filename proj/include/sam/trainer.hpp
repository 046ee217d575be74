#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>

#include "sam/snapshot.hpp"
#include "sam/train_config.hpp"

namespace sam {

// Deterministic seed for sample `index` of minibatch `minibatch`.
std::uint64_t episode_seed(std::uint64_t seed, Index minibatch, Index index);

struct MinibatchRecord {
  Index minibatch = 0;  // 1-based count of completed minibatches
  Index episodes = 0;
  Index level = 0;
  Index curriculum_level = 0;
  double loss = 0.0;       // mean bits per answer step
  double bit_error = 0.0;  // fraction of answer bits wrong
  double wall_time = 0.0;  // seconds since the run (or its first segment) started
  double journal_bytes = 0.0;
  double grad_norm = 0.0;
};

std::string to_ndjson(const MinibatchRecord& r);

struct TrainSummary {
  Index minibatches = 0;
  bool reached_target = false;
  bool reached_level = false;
  double window_loss = 0.0;  // mean bits/step over the stop window
  Index curriculum_level = 0;
};

class Trainer {
 public:
  // `out_dir` empty: no files are written.
  Trainer(const TrainConfig& config, std::string out_dir = "");

  const TrainConfig& config() const { return config_; }
  const Vector& params() const { return params_; }
  const RmsProp& optimizer() const { return optimizer_; }
  const Curriculum& curriculum() const { return curriculum_; }
  Index completed() const { return next_minibatch_; }

  // Runs until the configured budget or a stop condition; `limit` caps the
  // number of minibatches run by this call (-1 = no cap).
  TrainSummary run(Index limit = -1);

  // Called after every minibatch, under the update lock.
  void on_minibatch(std::function<void(const MinibatchRecord&)> f) { callback_ = std::move(f); }

  Container checkpoint() const;
  void save_checkpoint(const std::string& path) const;
  // Restores parameters, optimizer, curriculum and counters. The metrics
  // stream in out_dir is truncated to what the checkpoint had seen.
  void resume(const Container& c);

  std::string metrics_path() const;
  std::string checkpoint_path() const;

 private:
  struct Batch {
    Index minibatch;
    Index level;
    Vector params;
  };

  bool stop_reached() const;
  Index sample_level(Index minibatch) const;
  void append_metrics(const MinibatchRecord& r);

  TrainConfig config_;
  std::string out_dir_;
  ModelConfig model_config_;
  Vector params_;
  RmsProp optimizer_;
  Curriculum curriculum_;
  Index next_minibatch_ = 0;
  std::deque<double> recent_;
  std::uint64_t metrics_offset_ = 0;
  double elapsed_ = 0.0;
  std::function<void(const MinibatchRecord&)> callback_;
};

struct EvalRow {
  Index level = 0;
  double mean_bit_error = 0.0;  // fraction of answer bits wrong
  double std_error = 0.0;       // standard error of that mean over episodes
  Index episodes = 0;
};

// Evaluation only: parameters are not touched.
EvalRow evaluate(const ModelConfig& model, const Vector& params, TaskKind task, Index level,
                 Index bits, Index item_words, Index episodes, std::uint64_t seed);

}  // namespace sam
