#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sam/controller.hpp"
#include "sam/linkage.hpp"
#include "sam/memory_backward.hpp"
#include "sam/memory_state.hpp"
#include "sam/tasks.hpp"

namespace sam {

enum class ModelKind {
  kSam,       // sparse reads / writes through the index, LRU usage
  kDam,       // dense reads / writes, discounted usage
  kNtmDense,  // as kDam, journaling a full memory copy per step
  kSdnc,      // kSam plus sparse temporal linkage
  kDncDense,  // kDam plus full-width linkage
  kLstm,      // controller only, no memory
};

const char* to_string(ModelKind k);
ModelKind parse_model(const std::string& s);

struct ModelConfig {
  ModelKind kind = ModelKind::kSam;
  Index input = 10;
  Index output = 8;
  Index hidden = 100;
  MemoryConfig memory;
  Index links = 8;
  LinkageRule link_rule = LinkageRule::kDnc;
};

// Fills in the memory / linkage settings implied by the model kind.
ModelConfig make_model_config(ModelKind kind, Index input, Index output, Index hidden,
                              MemoryConfig memory);

ControllerShape controller_shape(const ModelConfig& cfg);

struct EpisodeResult {
  double loss = 0.0;         // masked sigmoid cross-entropy, nats
  double loss_bits = 0.0;    // same, in bits
  Index answer_steps = 0;
  double bit_errors = 0.0;
  double journal_bytes = 0.0;  // mean per step
  Matrix outputs;              // T x Y probabilities

  double bits_per_step() const {
    return answer_steps > 0 ? loss_bits / static_cast<double>(answer_steps) : 0.0;
  }
};

// One replica: controller shape, memory, linkage and per-episode caches.
// Parameters live outside so several replicas can share them.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const Controller& controller() const { return controller_; }
  Index parameter_count() const { return controller_.parameter_count(); }
  bool has_memory() const { return memory_.has_value(); }
  MemoryState& memory() { return *memory_; }
  const MemoryState& memory() const { return *memory_; }
  const std::vector<Linkage>& linkages() const { return linkages_; }

  Vector init_params(std::uint64_t seed) const { return controller_.init_params(seed); }

  // Fresh zero memory, usage and linkage.
  void reset();

  // Forward over the episode; with `grads` also the backward pass (grads are
  // accumulated). Either way the memory is rolled back to where it started.
  EpisodeResult run(const Vector& params, const Episode& ep, Vector* grads = nullptr);

  // While frozen, runs reuse the forward / backward link weights recorded by
  // the last run instead of computing them, so finite differences see the
  // same stop-gradient as the backward pass.
  void freeze_directions(bool on);

  // Final read weights of step t of the last run, one per head.
  const std::vector<SparseWeights>& step_reads(Index t) const {
    return caches_[static_cast<std::size_t>(t)].read_w;
  }

 private:
  struct StepCache {
    LstmCache lstm;
    std::vector<HeadInterface> iface;
    std::vector<ContentRead> content;
    std::vector<DirectionalWeights> directions;
    std::vector<LinkageUndo> link_undo;
    std::vector<SparseWeights> read_w;
    std::vector<Vector> reads;
  };

  void forward_step(const Vector& params, const Vector& x, Index t, const LstmState& state,
                    EpisodeResult& result);
  void rewind(std::size_t steps);

  ModelConfig config_;
  Controller controller_;
  std::optional<MemoryState> memory_;
  std::vector<Linkage> linkages_;
  MemoryGrad d_memory_;
  std::vector<StepCache> caches_;
  std::vector<std::vector<DirectionalWeights>> frozen_;
  bool frozen_on_ = false;
};

}  // namespace sam
