#pragma once

#include <span>
#include <vector>

#include "sam/memory_state.hpp"

namespace sam {

// dL/dM accumulator. Backed by a dense N x M buffer allocated once, but only
// rows that were actually touched are tracked and cleared, so per-step cost
// stays independent of N.
class MemoryGrad {
 public:
  MemoryGrad() = default;
  MemoryGrad(Index slots, Index word_size);

  Index slots() const { return buffer_.rows(); }
  Index word_size() const { return buffer_.cols(); }

  // Mutable row; marks it as touched.
  Eigen::Block<Matrix, 1, Eigen::Dynamic, true> row(Index slot);
  Eigen::Block<const Matrix, 1, Eigen::Dynamic, true> crow(Index slot) const {
    return buffer_.row(slot);
  }
  bool touched(Index slot) const { return flags_[static_cast<std::size_t>(slot)] != 0; }
  const std::vector<Index>& touched_rows() const { return touched_; }

  void zero_row(Index slot);
  void clear();
  Matrix to_dense() const { return buffer_; }

 private:
  Matrix buffer_;
  std::vector<char> flags_;
  std::vector<Index> touched_;
};

// Result of a pure content read: r = sum_k w_k M(s_k) with w = softmax(beta * cos(q, M(s_k))).
struct SparseReadResult {
  ContentRead content;
  SparseWeights weights;
  Vector word;
  Vector query;
  double beta = 1.0;
};

SparseReadResult content_read(const MemoryState& state, ConstVectorRef query, double beta);

// r = sum_i w(i) M(i): accumulates w(i) * dr into dM and returns dL/dw(i) = M(i) . dr.
SparseWeights read_word_backward(const MemoryState& state, const SparseWeights& weights,
                                 ConstVectorRef d_read, MemoryGrad& d_memory);

struct ContentGrad {
  Vector d_query;
  double d_beta = 0.0;
};

// Backward through the softmax-over-retained-slots and the cosine similarity.
// `d_weights` is aligned with `read.slots`.
ContentGrad content_backward(const MemoryState& state, const ContentRead& read,
                             ConstVectorRef query, double beta, std::span<const double> d_weights,
                             MemoryGrad& d_memory);

struct ReadGrad {
  Vector d_query;
  double d_beta = 0.0;
  SparseWeights d_weights;
  MemoryGrad d_memory;
};

// Full backward of a content read at the current memory contents.
ReadGrad read_backward(const MemoryState& state, const SparseReadResult& result,
                       ConstVectorRef d_read);

struct HeadWriteGrad {
  double d_alpha = 0.0;
  double d_gamma = 0.0;
  Vector d_word;
  SparseWeights d_prev_read;
};

// Backward through one step's erase + add. `d_memory` holds dL/dM_t on entry
// and dL/dM_{t-1} (erased rows cleared) on return. The memory must currently
// be at the entry's step.
std::vector<HeadWriteGrad> write_backward(const MemoryState& state, const WriteJournalEntry& entry,
                                          MemoryGrad& d_memory);

// d cos(q, m) / dq and / dm for cos = q.m / (|q||m| + eps).
void cosine_gradients(ConstVectorRef q, ConstVectorRef m, Vector& dq, Vector& dm);

}  // namespace sam
