#include "sam/model.hpp"

#include <cmath>
#include <numbers>

#include "sam/error.hpp"

namespace sam {

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kSam: return "sam";
    case ModelKind::kDam: return "dam";
    case ModelKind::kNtmDense: return "ntm-dense";
    case ModelKind::kSdnc: return "sdnc";
    case ModelKind::kDncDense: return "dnc-dense";
    case ModelKind::kLstm: return "lstm";
  }
  return "?";
}

ModelKind parse_model(const std::string& s) {
  for (ModelKind k : {ModelKind::kSam, ModelKind::kDam, ModelKind::kNtmDense, ModelKind::kSdnc,
                      ModelKind::kDncDense, ModelKind::kLstm}) {
    if (s == to_string(k)) return k;
  }
  throw InputError("unknown model '" + s + "' (sam | dam | ntm-dense | sdnc | dnc-dense | lstm)");
}

namespace {

bool uses_linkage(ModelKind k) { return k == ModelKind::kSdnc || k == ModelKind::kDncDense; }

}  // namespace

ModelConfig make_model_config(ModelKind kind, Index input, Index output, Index hidden,
                              MemoryConfig memory) {
  ModelConfig c;
  c.kind = kind;
  c.input = input;
  c.output = output;
  c.hidden = hidden;
  switch (kind) {
    case ModelKind::kSam:
    case ModelKind::kSdnc:
      memory.dense = false;
      memory.usage = UsageMode::kLru;
      memory.checkpoint_journal = false;
      break;
    case ModelKind::kDam:
    case ModelKind::kNtmDense:
    case ModelKind::kDncDense:
      memory.dense = true;
      memory.usage = UsageMode::kDiscounted;
      memory.checkpoint_journal = kind == ModelKind::kNtmDense;
      memory.reads = memory.slots;
      break;
    case ModelKind::kLstm:
      break;
  }
  if (kind == ModelKind::kDncDense) c.links = memory.slots;
  c.memory = memory;
  return c;
}

ControllerShape controller_shape(const ModelConfig& cfg) {
  ControllerShape s;
  s.input = cfg.input;
  s.output = cfg.output;
  s.hidden = cfg.hidden;
  s.heads = cfg.kind == ModelKind::kLstm ? 0 : cfg.memory.heads;
  s.word = cfg.memory.word_size;
  s.read_modes = uses_linkage(cfg.kind);
  return s;
}

Model::Model(const ModelConfig& config) : config_(config), controller_(controller_shape(config)) {
  reset();
}

void Model::reset() {
  if (config_.kind == ModelKind::kLstm) return;
  memory_.reset();
  memory_.emplace(config_.memory);
  linkages_.clear();
  if (uses_linkage(config_.kind)) {
    const LinkageConfig lc{config_.links, config_.memory.reads, config_.link_rule};
    for (Index j = 0; j < config_.memory.heads; ++j) linkages_.emplace_back(config_.memory.slots, lc);
  }
  if (d_memory_.slots() != config_.memory.slots || d_memory_.word_size() != config_.memory.word_size) {
    d_memory_ = MemoryGrad(config_.memory.slots, config_.memory.word_size);
  }
}

void Model::freeze_directions(bool on) {
  frozen_on_ = false;
  frozen_.clear();
  if (!on) return;
  for (const StepCache& c : caches_) frozen_.push_back(c.directions);
  frozen_on_ = true;
}

void Model::forward_step(const Vector& params, const Vector& x, Index t, const LstmState& state,
                         EpisodeResult& result) {
  StepCache& c = caches_[static_cast<std::size_t>(t)];
  const StepCache* prev = t > 0 ? &caches_[static_cast<std::size_t>(t - 1)] : nullptr;
  const ControllerShape& sh = controller_.shape();
  const Index heads = sh.heads;
  Vector u(sh.lstm_input());
  u.head(sh.input) = x;
  for (Index j = 0; j < heads; ++j) {
    u.segment(sh.input + j * sh.word, sh.word) =
        prev ? prev->reads[static_cast<std::size_t>(j)] : Vector::Zero(sh.word);
  }
  c.lstm = controller_.lstm_forward(params, u, state);
  c.reads.assign(static_cast<std::size_t>(heads), Vector());
  if (!memory_) return;

  MemoryState& mem = *memory_;
  const Index n = mem.slots();
  c.iface = controller_.interface_forward(params, c.lstm.h);
  const std::vector<Index> lru = lru_slots(mem, heads);
  auto prev_read = [&](Index j) {
    return prev ? prev->read_w[static_cast<std::size_t>(j)] : SparseWeights(n);
  };

  std::vector<HeadWrite> writes;
  writes.reserve(static_cast<std::size_t>(heads));
  for (Index j = 0; j < heads; ++j) {
    const HeadInterface& hi = c.iface[static_cast<std::size_t>(j)];
    writes.push_back(make_head_write(n, hi.alpha, hi.gamma, prev_read(j),
                                     lru[static_cast<std::size_t>(j)], hi.word));
  }
  apply_write(mem, std::move(writes));

  std::size_t link_bytes = 0;
  c.link_undo.clear();
  for (std::size_t j = 0; j < linkages_.size(); ++j) {
    c.link_undo.push_back(linkages_[j].update(mem.journal().back().heads[j].weights));
    for (const auto& row : c.link_undo.back().rows) {
      link_bytes += sizeof(Index) + row.entries.size() * sizeof(SparseRowMatrix<double>::Entry);
    }
    link_bytes += static_cast<std::size_t>(c.link_undo.back().precedence.nnz()) *
                  sizeof(SparseWeights::Entry);
  }

  c.content.assign(static_cast<std::size_t>(heads), ContentRead());
  c.read_w.assign(static_cast<std::size_t>(heads), SparseWeights());
  c.directions.clear();
  for (Index j = 0; j < heads; ++j) {
    const auto js = static_cast<std::size_t>(j);
    const HeadInterface& hi = c.iface[js];
    c.content[js] = content_weights(mem, hi.query, hi.beta);
    SparseWeights w = c.content[js].sparse(n);
    if (!linkages_.empty()) {
      if (frozen_on_) {
        require(t < static_cast<Index>(frozen_.size()), "freeze_directions: episode is longer than the recording");
        c.directions.push_back(frozen_[static_cast<std::size_t>(t)][js]);
      } else {
        c.directions.push_back(linkages_[js].directional(prev_read(j)));
      }
      w = read_mode_mix(w, c.directions.back().forward, c.directions.back().backward, hi.mode,
                        mem.config().reads);
    }
    c.reads[js] = sparse_read(mem, w);
    c.read_w[js] = std::move(w);
  }
  commit_access(mem, c.read_w);
  result.journal_bytes += static_cast<double>(mem.journal().back().bytes() + link_bytes);
}

void Model::rewind(std::size_t steps) {
  if (!memory_) return;
  for (std::size_t k = steps; k-- > 0;) {
    for (std::size_t j = linkages_.size(); j-- > 0;) linkages_[j].undo(caches_[k].link_undo[j]);
    revert_write(*memory_);
  }
}

EpisodeResult Model::run(const Vector& params, const Episode& ep, Vector* grads) {
  const ControllerShape& sh = controller_.shape();
  require(ep.inputs.cols() == sh.input, "run_episode: input width does not match the model");
  require(ep.targets.cols() == sh.output, "run_episode: target width does not match the model");
  require(params.size() == parameter_count(), "run_episode: parameter vector has the wrong size");
  if (grads) require(grads->size() == parameter_count(), "run_episode: gradient vector has the wrong size");
  if (memory_) require(memory_->journal().empty(), "run_episode: memory has uncommitted steps");

  const Index steps = ep.steps();
  EpisodeResult result;
  result.outputs.resize(steps, sh.output);
  result.answer_steps = ep.answer_steps();
  if (static_cast<Index>(caches_.size()) < steps) caches_.resize(static_cast<std::size_t>(steps));

  LstmState state = controller_.zero_state();
  for (Index t = 0; t < steps; ++t) {
    StepCache& c = caches_[static_cast<std::size_t>(t)];
    forward_step(params, ep.inputs.row(t).transpose(), t, state, result);
    state = {c.lstm.h, c.lstm.c};
    const Vector y = controller_.output_forward(params, c.lstm.h, c.reads);
    for (Index b = 0; b < sh.output; ++b) {
      result.outputs(t, b) = logistic(y[b]);
      const double m = ep.mask[t];
      if (m != 0.0) result.loss += m * (softplus(y[b]) - ep.targets(t, b) * y[b]);
    }
  }
  result.loss_bits = result.loss / std::numbers::ln2;
  result.bit_errors = bit_error(result.outputs, ep);
  if (steps > 0) result.journal_bytes /= static_cast<double>(steps);

  if (!grads) {
    rewind(static_cast<std::size_t>(steps));
    return result;
  }

  const Index heads = sh.heads;
  const std::size_t hs = static_cast<std::size_t>(heads);
  Vector dh_next = Vector::Zero(sh.hidden);
  Vector dc_next = Vector::Zero(sh.hidden);
  std::vector<Vector> d_reads_next(hs, Vector::Zero(sh.word));
  std::vector<SparseWeights> d_prev_next;
  if (memory_) {
    d_prev_next.assign(hs, SparseWeights(memory_->slots()));
    d_memory_.clear();
  }
  Vector dh_prev;
  Vector dc_prev;

  for (Index t = steps; t-- > 0;) {
    StepCache& c = caches_[static_cast<std::size_t>(t)];
    const Vector dy = ep.mask[t] * (result.outputs.row(t) - ep.targets.row(t)).transpose();
    std::vector<Vector> d_reads = d_reads_next;
    Vector dh = dh_next + controller_.output_backward(params, c.lstm.h, c.reads, dy, *grads, d_reads);

    if (memory_) {
      MemoryState& mem = *memory_;
      const Index n = mem.slots();
      std::vector<HeadInterfaceGrad> d_iface(hs);
      for (std::size_t j = 0; j < hs; ++j) {
        const HeadInterface& hi = c.iface[j];
        SparseWeights dw = read_word_backward(mem, c.read_w[j], d_reads[j], d_memory_);
        dw = combine(1.0, dw, 1.0, d_prev_next[j]);
        SparseWeights d_content = dw;
        if (!linkages_.empty()) {
          const ModeMixGrad mg =
              read_mode_mix_backward(c.content[j].sparse(n), c.directions[j].forward,
                                     c.directions[j].backward, hi.mode, mem.config().reads, dw);
          d_content = mg.d_content;
          for (int k = 0; k < 3; ++k) d_iface[j].d_mode[k] = mg.d_mode[k];
        }
        std::vector<double> dc(c.content[j].slots.size());
        for (std::size_t k = 0; k < dc.size(); ++k) dc[k] = d_content[c.content[j].slots[k]];
        ContentGrad cg = content_backward(mem, c.content[j], hi.query, hi.beta, dc, d_memory_);
        d_iface[j].d_query = std::move(cg.d_query);
        d_iface[j].d_beta = cg.d_beta;
      }
      auto wg = write_backward(mem, mem.journal().back(), d_memory_);
      for (std::size_t j = 0; j < hs; ++j) {
        d_iface[j].d_alpha = wg[j].d_alpha;
        d_iface[j].d_gamma = wg[j].d_gamma;
        d_iface[j].d_word = std::move(wg[j].d_word);
        d_prev_next[j] = std::move(wg[j].d_prev_read);
      }
      for (std::size_t j = linkages_.size(); j-- > 0;) linkages_[j].undo(c.link_undo[j]);
      revert_write(mem);
      dh += controller_.interface_backward(params, c.lstm.h, c.iface, d_iface, *grads);
    }

    const Vector du =
        controller_.lstm_backward(params, c.lstm, dh, dc_next, *grads, dh_prev, dc_prev);
    dh_next = dh_prev;
    dc_next = dc_prev;
    for (Index j = 0; j < heads; ++j) {
      d_reads_next[static_cast<std::size_t>(j)] = du.segment(sh.input + j * sh.word, sh.word);
    }
  }
  return result;
}

}  // namespace sam
