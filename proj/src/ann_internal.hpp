#pragma once

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "sam/ann_index.hpp"

namespace sam::detail {

struct AnnStore {
  AnnMetric metric = AnnMetric::kCosine;
  Matrix rows;
  Vector norms;
  std::vector<std::uint8_t> live;
  std::vector<std::uint32_t> generation;
  Index live_count = 0;
  Index insertions = 0;
  std::size_t rebuilds = 0;

  Index slots() const { return rows.rows(); }
  Index dim() const { return rows.cols(); }

  bool valid(Index slot, std::uint32_t gen) const {
    return live[static_cast<std::size_t>(slot)] != 0 &&
           generation[static_cast<std::size_t>(slot)] == gen;
  }

  // Coordinate in the space the trees and hyperplanes live in: unit vectors
  // for the cosine metric, raw vectors for the euclidean one.
  double coord(Index slot, Index d) const {
    return metric == AnnMetric::kCosine ? rows(slot, d) / norms[slot] : rows(slot, d);
  }

  std::vector<Index> live_slots() const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(live_count));
    for (Index s = 0; s < slots(); ++s) {
      if (live[static_cast<std::size_t>(s)]) out.push_back(s);
    }
    return out;
  }
};

struct PreparedQuery {
  Vector raw;
  Vector nav;  // unit vector (cosine) or raw copy (euclidean)
  double norm = 0.0;
};

PreparedQuery prepare_query(const AnnStore& store, ConstVectorRef q);

// Squared euclidean distance in navigation space.
double nav_distance(const AnnStore& store, const PreparedQuery& q, Index slot);

double similarity(const AnnStore& store, const PreparedQuery& q, Index slot);

struct KdNode {
  // dim < 0 marks a leaf holding (slot, generation).
  std::int32_t dim = -1;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t generation = 0;
  std::int64_t slot = -1;
  double split = 0.0;
};

struct SlotRecord {
  Index slot;
  std::uint8_t live;
  std::uint32_t generation;
  double norm;
  Index insertions;
  bool has_row;
  std::size_t row_offset;
};

struct KdRecord {
  std::int32_t tree;
  std::int32_t node;  // -1 when only the root pointer changed
  KdNode old_node;
  std::int32_t old_size;
  std::int32_t old_root;
};

struct LshRecord {
  std::int32_t table;
  std::uint64_t code;
};

class AnnBackendImpl;

struct RebuildRecord {
  std::shared_ptr<AnnBackendImpl> old_backend;
  Index insertions;
  std::size_t rebuilds;
  std::size_t retained_bytes;
};

using UndoRecord = std::variant<SlotRecord, KdRecord, LshRecord, RebuildRecord>;

struct AnnUndoLog {
  bool enabled = false;
  std::vector<UndoRecord> records;
  std::vector<double> rows;
  std::size_t retained_bytes = 0;
};

class AnnBackendImpl {
 public:
  virtual ~AnnBackendImpl() = default;
  virtual std::unique_ptr<AnnBackendImpl> clone() const = 0;
  virtual void build(const AnnStore& store) = 0;
  // Called after the store holds the new vector for `slot`.
  virtual void insert(const AnnStore& store, Index slot, AnnUndoLog* log) = 0;
  // Appends candidate slots (unique, currently valid) worth scoring for a top-k query.
  virtual void search(const AnnStore& store, const PreparedQuery& q, Index k,
                      std::vector<Index>& candidates) const = 0;
  virtual void undo(const KdRecord&) {}
  virtual void undo(const LshRecord&) {}
  virtual std::size_t storage_bytes() const = 0;
  // Backend undo records appended by one insert.
  virtual std::size_t records_per_insert() const = 0;
};

std::unique_ptr<AnnBackendImpl> make_exact_backend();
std::unique_ptr<AnnBackendImpl> make_kd_forest_backend(const AnnConfig& config, Index dim);
std::unique_ptr<AnnBackendImpl> make_lsh_backend(const AnnConfig& config, Index dim);

}  // namespace sam::detail
