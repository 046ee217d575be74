#include "sam/memory_state.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sam/error.hpp"
#include "sam/kernels.hpp"

namespace sam {

void validate(const MemoryConfig& c) {
  require(c.slots >= 1 && c.word_size >= 1 && c.heads >= 1, "MemoryConfig: sizes must be positive");
  require(c.reads >= 1 && c.reads <= c.slots, "MemoryConfig: need 1 <= K <= N");
  require(c.heads <= c.slots, "MemoryConfig: more heads than slots");
  require(c.delta > 0.0 && c.delta < 1.0, "MemoryConfig: delta must lie in (0, 1)");
  require(c.discount > 0.0 && c.discount < 1.0, "MemoryConfig: discount must lie in (0, 1)");
}

std::size_t WriteJournalEntry::bytes() const {
  return capacity_bytes > 0 ? capacity_bytes : payload_bytes();
}

std::size_t WriteJournalEntry::payload_bytes() const {
  std::size_t b = sizeof(step) + sizeof(ann_mark);
  for (const HeadWrite& h : heads) {
    b += 2 * sizeof(double) + sizeof(Index);
    b += static_cast<std::size_t>(h.prev_read.nnz() + h.weights.nnz()) *
         sizeof(SparseWeights::Entry);
    b += static_cast<std::size_t>(h.word.size()) * sizeof(double);
  }
  b += erased.size() * sizeof(Index);
  b += touched.size() * sizeof(Index) + saved_rows.size() * sizeof(double);
  b += static_cast<std::size_t>(checkpoint.size()) * sizeof(double);
  b += ring_undo.size() * sizeof(UsageRing::Undo);
  b += access_undo.size() * sizeof(std::pair<Index, Index>);
  b += static_cast<std::size_t>(saved_usage.size()) * sizeof(double);
  b += ann_op_bytes;
  return b;
}

MemoryState::MemoryState(const MemoryConfig& config)
    : config_(config),
      words_(Matrix::Zero(config.slots, config.word_size)),
      index_(config.slots, config.word_size, config.ann),
      ring_(config.slots),
      usage_(Vector::Zero(config.slots)),
      last_access_(static_cast<std::size_t>(config.slots), 0) {
  validate(config_);
  index_.set_undo_logging(true);
}

void MemoryState::load(const Matrix& words) {
  require(journal_.empty(), "MemoryState::load: journal must be empty");
  require(words.rows() == slots() && words.cols() == word_size(), "MemoryState::load: shape mismatch");
  words_ = words;
  if (!config_.dense) {
    index_ = AnnIndex::build(words_, config_.ann);
    index_.set_undo_logging(true);
  }
}

void MemoryState::load_usage(const Vector& usage, const std::vector<Index>& last_access,
                             const std::vector<Index>& ring_order, Index step) {
  require(journal_.empty(), "MemoryState::load_usage: journal must be empty");
  require(usage.size() == slots() && static_cast<Index>(last_access.size()) == slots(),
          "MemoryState::load_usage: shape mismatch");
  usage_ = usage;
  last_access_ = last_access;
  ring_.assign_order(ring_order);
  step_ = step;
}

void MemoryState::commit() {
  journal_.clear();
  index_.clear_log();
}

SparseWeights ContentRead::sparse(Index dim) const {
  std::vector<SparseWeights::Entry> e;
  e.reserve(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) e.push_back({slots[k], weights[k]});
  return SparseWeights::from_entries(dim, std::move(e));
}

namespace {

void softmax_in_place(std::vector<double>& z) {
  if (z.empty()) return;
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

}  // namespace

ContentRead content_weights(const MemoryState& state, ConstVectorRef query, double beta) {
  require(query.size() == state.word_size(), "content_weights: query length != word size");
  ContentRead out;
  const Matrix& m = state.words();
  if (state.config().dense) {
    out.slots.resize(static_cast<std::size_t>(state.slots()));
    out.similarities.resize(out.slots.size());
    const double qn = query.norm();
    const Vector dots = m * query;
    for (Index s = 0; s < state.slots(); ++s) {
      out.slots[static_cast<std::size_t>(s)] = s;
      out.similarities[static_cast<std::size_t>(s)] =
          dots[s] / (qn * m.row(s).norm() + kCosineEpsilon);
    }
  } else {
    const auto nn = state.index().query(query, state.config().reads);
    for (const Neighbor& n : nn) out.slots.push_back(n.slot);
    std::sort(out.slots.begin(), out.slots.end());
    for (Index s : out.slots) {
      out.similarities.push_back(cosine_similarity(query, m.row(s).transpose()));
    }
  }
  out.weights.resize(out.similarities.size());
  for (std::size_t k = 0; k < out.weights.size(); ++k) out.weights[k] = beta * out.similarities[k];
  softmax_in_place(out.weights);
  return out;
}

Vector sparse_read(const MemoryState& state, const SparseWeights& weights) {
  return sparse_weighted_sum(weights, state.words());
}

Index lru_indicator(const MemoryState& state) { return lru_slots(state, 1).front(); }

std::vector<Index> lru_slots(const MemoryState& state, Index count) {
  require(count >= 1 && count <= state.slots(), "lru_slots: bad count");
  if (state.config().usage == UsageMode::kLru) return state.ring().front(count);
  std::vector<Index> order(static_cast<std::size_t>(state.slots()));
  for (Index s = 0; s < state.slots(); ++s) order[static_cast<std::size_t>(s)] = s;
  const Vector& u = state.discounted_usage();
  std::partial_sort(order.begin(), order.begin() + count, order.end(),
                    [&](Index a, Index b) { return u[a] != u[b] ? u[a] < u[b] : a < b; });
  order.resize(static_cast<std::size_t>(count));
  return order;
}

SparseWeights write_weights(Index slots, double alpha, double gamma, const SparseWeights& prev_read,
                            Index lru_slot) {
  require(prev_read.dim() == slots, "write_weights: prev_read dimension mismatch");
  require(lru_slot >= 0 && lru_slot < slots, "write_weights: LRU slot out of range");
  std::vector<SparseWeights::Entry> e;
  e.reserve(static_cast<std::size_t>(prev_read.nnz() + 1));
  for (const auto& p : prev_read) e.push_back({p.index, alpha * gamma * p.value});
  e.push_back({lru_slot, alpha * (1.0 - gamma)});
  return SparseWeights::from_entries(slots, std::move(e), prev_read.nnz() + 1);
}

SparseWeights write_weights(const MemoryState& state, double alpha, double gamma,
                            const SparseWeights& prev_read) {
  return write_weights(state.slots(), alpha, gamma, prev_read, lru_indicator(state));
}

HeadWrite make_head_write(Index slots, double alpha, double gamma, SparseWeights prev_read,
                          Index lru_slot, Vector word) {
  HeadWrite h;
  h.alpha = alpha;
  h.gamma = gamma;
  h.lru_slot = lru_slot;
  h.weights = write_weights(slots, alpha, gamma, prev_read, lru_slot);
  h.prev_read = std::move(prev_read);
  h.word = std::move(word);
  return h;
}

namespace {

// Every sparse step is stored in a record sized for the worst case: each
// head writes at most K + 1 rows and reads K, so nothing depends on N.
void reserve_sparse_record(const MemoryState& state, WriteJournalEntry& entry) {
  const MemoryConfig& cfg = state.config();
  const auto heads = static_cast<std::size_t>(cfg.heads);
  const auto k = static_cast<std::size_t>(cfg.reads);
  const auto m = static_cast<std::size_t>(cfg.word_size);
  const std::size_t rows = heads * (k + 1);
  const std::size_t accesses = heads * (2 * k + 1);
  entry.erased.reserve(heads);
  entry.touched.reserve(rows);
  entry.saved_rows.reserve(rows * m);
  entry.ring_undo.reserve(accesses);
  entry.access_undo.reserve(accesses);
  const std::size_t head_bytes = 2 * sizeof(double) + sizeof(Index) +
                                 (2 * k + 1) * sizeof(SparseWeights::Entry) + m * sizeof(double);
  entry.capacity_bytes = sizeof(entry.step) + sizeof(entry.ann_mark) + heads * head_bytes +
                         entry.erased.capacity() * sizeof(Index) + entry.touched.capacity() * sizeof(Index) +
                         entry.saved_rows.capacity() * sizeof(double) +
                         entry.ring_undo.capacity() * sizeof(UsageRing::Undo) +
                         entry.access_undo.capacity() * sizeof(std::pair<Index, Index>) +
                         state.index().log_bytes_bound(rows);
}

}  // namespace

const WriteJournalEntry& apply_write(MemoryState& state, std::vector<HeadWrite> heads) {
  const MemoryConfig& cfg = state.config_;
  require(static_cast<Index>(heads.size()) == cfg.heads, "apply_write: wrong number of heads");
  require(state.journal_.empty() || state.journal_.back().access_committed,
          "apply_write: previous step's access was never committed");
  for (const HeadWrite& h : heads) {
    require(h.weights.dim() == cfg.slots && h.word.size() == cfg.word_size,
            "apply_write: head write has the wrong shape");
    require(h.lru_slot >= 0 && h.lru_slot < cfg.slots, "apply_write: LRU slot out of range");
  }

  WriteJournalEntry entry;
  entry.step = ++state.step_;
  entry.ann_mark = state.index_.log_size();
  if (!cfg.dense && !cfg.checkpoint_journal) reserve_sparse_record(state, entry);

  for (const HeadWrite& h : heads) entry.erased.push_back(h.lru_slot);
  std::sort(entry.erased.begin(), entry.erased.end());
  entry.erased.erase(std::unique(entry.erased.begin(), entry.erased.end()), entry.erased.end());

  std::vector<Index> touched = entry.erased;
  for (const HeadWrite& h : heads) {
    for (const auto& e : h.weights) touched.push_back(e.index);
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

  Matrix& m = state.words_;
  if (cfg.checkpoint_journal) {
    entry.checkpoint = m;
  } else {
    entry.saved_rows.resize(touched.size() * static_cast<std::size_t>(cfg.word_size));
    for (std::size_t k = 0; k < touched.size(); ++k) {
      std::memcpy(entry.saved_rows.data() + k * static_cast<std::size_t>(cfg.word_size),
                  m.row(touched[k]).data(), sizeof(double) * static_cast<std::size_t>(cfg.word_size));
    }
  }

  for (Index e : entry.erased) m.row(e).setZero();
  for (const HeadWrite& h : heads) sparse_outer_add(m, h.weights, h.word);

  if (!cfg.dense) {
    for (Index s : touched) state.index_.insert(s, m.row(s).transpose());
  }
  entry.ann_op_bytes = state.index_.log_op_bytes(entry.ann_mark);
  if (entry.capacity_bytes > 0) {
    require(entry.touched.size() <= entry.touched.capacity() && entry.saved_rows.size() <= entry.saved_rows.capacity(),
            "apply_write: step record overflow");
  }
  entry.touched = std::move(touched);
  entry.heads = std::move(heads);
  state.journal_.push_back(std::move(entry));
  return state.journal_.back();
}

void commit_access(MemoryState& state, std::span<const SparseWeights> reads) {
  require(!state.journal_.empty() && !state.journal_.back().access_committed,
          "commit_access: no uncommitted write for this step");
  WriteJournalEntry& entry = state.journal_.back();
  const MemoryConfig& cfg = state.config_;

  SparseWeights access(cfg.slots);
  for (const HeadWrite& h : entry.heads) access = combine(1.0, access, 1.0, h.weights);
  for (const SparseWeights& r : reads) {
    require(r.dim() == cfg.slots, "commit_access: read weights dimension mismatch");
    access = combine(1.0, access, 1.0, r);
  }

  if (cfg.usage == UsageMode::kDiscounted) {
    entry.saved_usage = state.usage_;
    state.usage_ *= cfg.discount;
    for (const auto& e : access) state.usage_[e.index] += e.value;
  } else {
    for (const auto& e : access) {
      if (e.value <= cfg.delta) continue;
      auto& last = state.last_access_[static_cast<std::size_t>(e.index)];
      entry.access_undo.emplace_back(e.index, last);
      last = entry.step;
      entry.ring_undo.push_back(state.ring_.touch(e.index));
    }
  }
  entry.access_committed = true;
  require(entry.capacity_bytes == 0 || entry.payload_bytes() <= entry.capacity_bytes,
          "commit_access: step record overflow");
}

void revert_write(MemoryState& state) {
  require(!state.journal_.empty(), "revert_write: journal is empty");
  WriteJournalEntry& entry = state.journal_.back();
  require(entry.step == state.step_, "revert_write: journal out of sync with step counter");
  const MemoryConfig& cfg = state.config_;

  if (entry.access_committed) {
    if (cfg.usage == UsageMode::kDiscounted) {
      state.usage_ = entry.saved_usage;
    } else {
      for (auto it = entry.ring_undo.rbegin(); it != entry.ring_undo.rend(); ++it) state.ring_.undo(*it);
      for (auto it = entry.access_undo.rbegin(); it != entry.access_undo.rend(); ++it) {
        state.last_access_[static_cast<std::size_t>(it->first)] = it->second;
      }
    }
  }
  state.index_.rollback(entry.ann_mark);
  if (cfg.checkpoint_journal) {
    state.words_ = entry.checkpoint;
  } else {
    for (std::size_t k = 0; k < entry.touched.size(); ++k) {
      std::memcpy(state.words_.row(entry.touched[k]).data(),
                  entry.saved_rows.data() + k * static_cast<std::size_t>(cfg.word_size),
                  sizeof(double) * static_cast<std::size_t>(cfg.word_size));
    }
  }
  --state.step_;
  state.journal_.pop_back();
}

void revert_write(MemoryState& state, const WriteJournalEntry& entry) {
  require(!state.journal().empty() && &entry == &state.journal().back(),
          "revert_write: entries must be reverted most recent first");
  revert_write(state);
}

namespace {

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
};

}  // namespace

std::uint64_t state_hash(const MemoryState& state, const Matrix& probes, Index k) {
  Fnv1a f;
  f.bytes(state.words().data(), sizeof(double) * static_cast<std::size_t>(state.words().size()));
  f.bytes(state.discounted_usage().data(),
          sizeof(double) * static_cast<std::size_t>(state.discounted_usage().size()));
  f.bytes(state.last_access().data(), sizeof(Index) * state.last_access().size());
  f.bytes(state.ring().next_links().data(), sizeof(Index) * state.ring().next_links().size());
  f.bytes(state.ring().prev_links().data(), sizeof(Index) * state.ring().prev_links().size());
  f.value(state.ring().head());
  f.value(state.step());
  if (!state.config().dense) {
    f.value(state.index().live_count());
    f.value(state.index().insertions_since_rebuild());
    for (Index p = 0; p < probes.rows(); ++p) {
      for (const Neighbor& n : state.index().query(probes.row(p).transpose(), k)) {
        f.value(n.slot);
        f.value(n.similarity);
      }
    }
  }
  return f.h;
}

}  // namespace sam
