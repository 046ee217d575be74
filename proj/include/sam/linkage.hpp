#pragma once

#include <vector>

#include "sam/sparse_row_matrix.hpp"
#include "sam/sparse_vector.hpp"

namespace sam {

enum class LinkageRule {
  // L(i,j) <- (1 - w(i) - w(j)) L(i,j) + w(i) p(j), diagonal kept at zero.
  kDnc,
  // N(i,j) <- (1 - w(i)) N(i,j) + w(i) p(j), and the mirrored P update.
  kRowDecay,
};

struct LinkageConfig {
  Index links = 8;  // nonzeros kept per row of N, P and in p
  Index reads = 4;  // K for the directional weights
  LinkageRule rule = LinkageRule::kDnc;
};

struct LinkageUndo {
  struct SavedRow {
    bool forward;  // true: a row of N, false: a row of P
    Index row;
    std::vector<SparseRowMatrix<double>::Entry> entries;
  };
  std::vector<SavedRow> rows;
  SparseWeights precedence;
};

struct DirectionalWeights {
  SparseWeights forward;
  SparseWeights backward;
};

// Sparse temporal links between write locations. N approximates L (row i
// lists what i was written after), P approximates its transpose.
class Linkage {
 public:
  Linkage() = default;
  Linkage(Index slots, const LinkageConfig& config);

  Index slots() const { return forward_.rows(); }
  const LinkageConfig& config() const { return config_; }
  const SparseRowMatrix<double>& forward_links() const { return forward_; }
  const SparseRowMatrix<double>& backward_links() const { return backward_; }
  const SparseWeights& precedence() const { return precedence_; }

  // Updates N and P with the step's write weights (using the old
  // precedence), then the precedence itself.
  LinkageUndo update(const SparseWeights& write);
  void undo(const LinkageUndo& u);

  // f = N w, b = P w, each truncated to K and renormalized.
  DirectionalWeights directional(const SparseWeights& prev_read) const;

  void reset();

  // Entries examined by the most recent update.
  std::size_t last_touched() const { return last_touched_; }

 private:
  LinkageConfig config_;
  SparseRowMatrix<double> forward_;
  SparseRowMatrix<double> backward_;
  SparseWeights precedence_;
  std::size_t last_touched_ = 0;
};

SparseWeights precedence_update(const SparseWeights& precedence, const SparseWeights& write,
                                Index links);

// Convex mix of content, forward and backward weights, truncated to K and
// renormalized.
SparseWeights read_mode_mix(const SparseWeights& content, const SparseWeights& forward,
                            const SparseWeights& backward, const double mode[3], Index reads);

struct ModeMixGrad {
  SparseWeights d_content;
  double d_mode[3] = {0.0, 0.0, 0.0};
};

// Backward of read_mode_mix with the forward and backward weights held fixed.
ModeMixGrad read_mode_mix_backward(const SparseWeights& content, const SparseWeights& forward,
                                   const SparseWeights& backward, const double mode[3], Index reads,
                                   const SparseWeights& d_out);

}  // namespace sam
