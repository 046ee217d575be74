#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sam/ann_index.hpp"
#include "sam/dense.hpp"
#include "sam/sparse_vector.hpp"
#include "sam/usage_ring.hpp"

namespace sam {

enum class UsageMode {
  kDiscounted,  // time-discounted sum of access weights (dense comparator)
  kLru,         // steps since the last access above delta, kept in a ring
};

struct MemoryConfig {
  Index slots = 128;
  Index word_size = 32;
  Index reads = 4;  // K, nonzeros per content read
  Index heads = 4;
  UsageMode usage = UsageMode::kLru;
  double delta = 0.005;
  double discount = 0.99;
  // Full-N softmax reads and writes, no index (the dense comparator).
  bool dense = false;
  // Journal a full copy of the memory every step instead of the touched rows.
  bool checkpoint_journal = false;
  AnnConfig ann;
};

void validate(const MemoryConfig& config);

// One head's write for a step: w = alpha * (gamma * prev_read + (1 - gamma) * e_lru).
struct HeadWrite {
  double alpha = 0.0;
  double gamma = 0.0;
  Index lru_slot = 0;
  SparseWeights prev_read;
  SparseWeights weights;
  Vector word;
};

struct WriteJournalEntry {
  Index step = 0;
  std::vector<HeadWrite> heads;
  std::vector<Index> erased;
  // Rows as they were before this step, row-major, one per touched slot.
  std::vector<Index> touched;
  std::vector<double> saved_rows;
  Matrix checkpoint;
  std::size_t ann_mark = 0;
  std::size_t ann_op_bytes = 0;
  bool access_committed = false;
  std::vector<UsageRing::Undo> ring_undo;
  std::vector<std::pair<Index, Index>> access_undo;  // (slot, previous last-access step)
  Vector saved_usage;
  // Fixed record size reserved for a sparse step (0 for dense steps).
  std::size_t capacity_bytes = 0;

  // Bytes of the step record: the fixed capacity for sparse steps, the
  // payload otherwise.
  std::size_t bytes() const;
  std::size_t payload_bytes() const;
};

class MemoryState {
 public:
  explicit MemoryState(const MemoryConfig& config);

  const MemoryConfig& config() const { return config_; }
  Index slots() const { return config_.slots; }
  Index word_size() const { return config_.word_size; }

  const Matrix& words() const { return words_; }
  const AnnIndex& index() const { return index_; }
  const UsageRing& ring() const { return ring_; }
  const Vector& discounted_usage() const { return usage_; }
  const std::vector<Index>& last_access() const { return last_access_; }
  Index step() const { return step_; }
  const std::vector<WriteJournalEntry>& journal() const { return journal_; }

  // Replaces the contents wholesale (prefill / snapshot restore). The journal
  // must be empty.
  void load(const Matrix& words);
  void load_usage(const Vector& usage, const std::vector<Index>& last_access,
                  const std::vector<Index>& ring_order, Index step);

  // Drops the journal; the current contents become the new baseline.
  void commit();

 private:
  friend const WriteJournalEntry& apply_write(MemoryState&, std::vector<HeadWrite>);
  friend void commit_access(MemoryState&, std::span<const SparseWeights>);
  friend void revert_write(MemoryState&);

  MemoryConfig config_;
  Matrix words_;
  AnnIndex index_;
  UsageRing ring_;
  Vector usage_;
  std::vector<Index> last_access_;
  Index step_ = 0;
  std::vector<WriteJournalEntry> journal_;
};

// Content addressing over the K most similar slots (all N in dense mode).
// Slots are in increasing order; `weights` is a softmax of beta * similarity
// over exactly those slots.
struct ContentRead {
  std::vector<Index> slots;
  std::vector<double> similarities;
  std::vector<double> weights;

  bool empty() const { return slots.empty(); }
  SparseWeights sparse(Index dim) const;
};

ContentRead content_weights(const MemoryState& state, ConstVectorRef query, double beta);

Vector sparse_read(const MemoryState& state, const SparseWeights& weights);

// Least recently used slot (lowest index on ties).
Index lru_indicator(const MemoryState& state);
// The `count` least recently used slots, least recent first.
std::vector<Index> lru_slots(const MemoryState& state, Index count);

SparseWeights write_weights(Index slots, double alpha, double gamma, const SparseWeights& prev_read,
                            Index lru_slot);
SparseWeights write_weights(const MemoryState& state, double alpha, double gamma,
                            const SparseWeights& prev_read);

HeadWrite make_head_write(Index slots, double alpha, double gamma, SparseWeights prev_read,
                          Index lru_slot, Vector word);

// Erases every head's LRU row, adds each head's outer product, keeps the
// index in sync and journals enough to undo it.
const WriteJournalEntry& apply_write(MemoryState& state, std::vector<HeadWrite> heads);

// Usage / ring update for the step just written, from the write weights and
// the given read weights (all heads). Must follow apply_write exactly once.
void commit_access(MemoryState& state, std::span<const SparseWeights> reads);

// Undoes the most recent journal entry.
void revert_write(MemoryState& state);
void revert_write(MemoryState& state, const WriteJournalEntry& entry);

// FNV-1a over memory, usage, ring links, step and the index's answers to
// each probe row (top-k slots and similarities).
std::uint64_t state_hash(const MemoryState& state, const Matrix& probes, Index k);

}  // namespace sam
