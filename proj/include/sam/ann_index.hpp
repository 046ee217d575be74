#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sam/dense.hpp"

namespace sam {

enum class AnnBackend { kExact, kKdForest, kLsh };
enum class AnnMetric { kCosine, kEuclidean };

std::string to_string(AnnBackend b);
AnnBackend parse_ann_backend(const std::string& s);

struct AnnConfig {
  AnnBackend backend = AnnBackend::kExact;
  AnnMetric metric = AnnMetric::kCosine;
  int kd_trees = 4;
  int kd_checks = 32;
  int lsh_tables = 8;
  int lsh_bits = 8;
  // Hamming radius of extra buckets probed per table (0 = exact bucket only).
  int lsh_probe_radius = 2;
  // 0 means "one full rebuild every `slots` insertions".
  Index rebuild_interval = 0;
  std::uint64_t seed = 0x5a3c9e1d2b7f4061ULL;
};

struct Neighbor {
  Index slot;
  double similarity;
  bool operator==(const Neighbor&) const = default;
};

inline constexpr double kCosineEpsilon = 1e-8;

// q.m / (|q| |m| + eps); the similarity used everywhere memory is addressed.
double cosine_similarity(ConstVectorRef q, ConstVectorRef m);

namespace detail {
class AnnBackendImpl;
struct AnnStore;
struct AnnUndoLog;
}  // namespace detail

// Online nearest-neighbour index over the rows of a slot-addressed memory.
//
// Every backend keeps its own copy of the indexed vectors, so the index stays
// valid while the memory it mirrors is being edited. Removals are lazy: a slot
// is marked dead and its tree leaves / bucket entries are skipped until the
// next rebuild. Similarities are always computed exactly on the stored
// vectors; backends only decide which slots get scored.
//
// With undo logging enabled every mutation (including rebuilds) is recorded
// and `rollback(mark)` restores the index to the exact structure it had when
// `log_size()` returned `mark`.
class AnnIndex {
 public:
  AnnIndex(Index slots, Index dim, const AnnConfig& config);
  AnnIndex(const AnnIndex& other);
  AnnIndex& operator=(const AnnIndex& other);
  AnnIndex(AnnIndex&&) noexcept;
  AnnIndex& operator=(AnnIndex&&) noexcept;
  ~AnnIndex();

  // Indexes every row of `rows` (zero rows are skipped under the cosine metric).
  static AnnIndex build(const Matrix& rows, const AnnConfig& config);

  // Up to k live slots, most similar first; ties go to the lower slot.
  std::vector<Neighbor> query(ConstVectorRef q, Index k) const;

  // (Re)indexes `slot` with vector v. Under the cosine metric a zero vector
  // just removes the slot.
  void insert(Index slot, ConstVectorRef v);
  // No-op when the slot is not indexed.
  void remove(Index slot);
  void rebuild();

  Index slots() const;
  Index dim() const;
  Index live_count() const;
  bool contains(Index slot) const;
  const AnnConfig& config() const { return config_; }
  Index rebuild_interval() const;
  Index insertions_since_rebuild() const;
  std::size_t rebuild_count() const;

  void set_undo_logging(bool on);
  bool undo_logging() const;
  std::size_t log_size() const;
  void rollback(std::size_t mark);
  void clear_log();
  // Bytes held by per-operation undo records since `mark`.
  std::size_t log_op_bytes(std::size_t mark = 0) const;
  // Bytes held by pre-rebuild structures retained for rollback.
  std::size_t log_retained_bytes() const;
  // Upper bound on log_op_bytes growth over `inserts` insertions.
  std::size_t log_bytes_bound(std::size_t inserts) const;

 private:
  void maybe_rebuild();

  AnnConfig config_;
  std::unique_ptr<detail::AnnStore> store_;
  std::unique_ptr<detail::AnnBackendImpl> backend_;
  std::unique_ptr<detail::AnnUndoLog> log_;
};

// Fraction of the exact top-k recovered by `approx`, per query averaged.
double recall_at_k(const std::vector<std::vector<Neighbor>>& approx,
                   const std::vector<std::vector<Neighbor>>& exact);

}  // namespace sam
