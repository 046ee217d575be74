#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "sam/dense.hpp"
#include "sam/error.hpp"

namespace sam {

// Compressed-sparse-row matrix with a fixed per-row capacity. Row i owns the
// slice [row_offsets[i], row_offsets[i] + row_lengths[i]) of the column-index
// and value arrays, so replacing a row never shifts the other rows.
template <typename Scalar>
class SparseRowMatrix {
 public:
  struct Entry {
    Index col;
    Scalar value;
  };

  SparseRowMatrix() = default;
  SparseRowMatrix(Index rows, Index cols, Index row_capacity)
      : rows_(rows), cols_(cols), row_capacity_(row_capacity) {
    require(rows >= 0 && cols >= 0 && row_capacity >= 1, "SparseRowMatrix: bad shape");
    row_offsets_.resize(static_cast<std::size_t>(rows + 1));
    for (Index i = 0; i <= rows; ++i) row_offsets_[static_cast<std::size_t>(i)] = i * row_capacity;
    row_lengths_.assign(static_cast<std::size_t>(rows), 0);
    col_indices_.assign(static_cast<std::size_t>(rows * row_capacity), 0);
    values_.assign(static_cast<std::size_t>(rows * row_capacity), Scalar(0));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index row_capacity() const { return row_capacity_; }

  Index nnz() const {
    return std::accumulate(row_lengths_.begin(), row_lengths_.end(), Index(0));
  }
  Index row_nnz(Index i) const { return row_lengths_[check_row(i)]; }

  std::span<const Index> row_offsets() const { return row_offsets_; }
  std::span<const Index> row_cols(Index i) const {
    const auto r = check_row(i);
    return {col_indices_.data() + row_offsets_[r], static_cast<std::size_t>(row_lengths_[r])};
  }
  std::span<const Scalar> row_values(Index i) const {
    const auto r = check_row(i);
    return {values_.data() + row_offsets_[r], static_cast<std::size_t>(row_lengths_[r])};
  }

  std::vector<Entry> row(Index i) const {
    auto c = row_cols(i);
    auto v = row_values(i);
    std::vector<Entry> out(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) out[k] = {c[k], v[k]};
    return out;
  }

  Scalar coeff(Index i, Index j) const {
    auto c = row_cols(i);
    auto it = std::lower_bound(c.begin(), c.end(), j);
    if (it == c.end() || *it != j) return Scalar(0);
    return row_values(i)[static_cast<std::size_t>(it - c.begin())];
  }

  // Entries must be sorted by column, in range, nonzero, and within capacity.
  void assign_row(Index i, std::span<const Entry> entries) {
    const auto r = check_row(i);
    require(static_cast<Index>(entries.size()) <= row_capacity_,
            "SparseRowMatrix::assign_row: row capacity exceeded");
    const Index base = row_offsets_[r];
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const Entry& e = entries[k];
      require(e.col >= 0 && e.col < cols_, "SparseRowMatrix::assign_row: column out of range");
      require(k == 0 || entries[k - 1].col < e.col, "SparseRowMatrix::assign_row: unsorted row");
      require(e.value != Scalar(0), "SparseRowMatrix::assign_row: explicit zero");
      col_indices_[static_cast<std::size_t>(base) + k] = e.col;
      values_[static_cast<std::size_t>(base) + k] = e.value;
    }
    row_lengths_[r] = static_cast<Index>(entries.size());
  }

  void clear_row(Index i) { row_lengths_[check_row(i)] = 0; }

  // Adds v at (i, j), then keeps the row's `row_capacity` largest entries.
  void add(Index i, Index j, Scalar v) {
    std::vector<Entry> r = row(i);
    auto it = std::lower_bound(r.begin(), r.end(), j,
                               [](const Entry& e, Index col) { return e.col < col; });
    if (it != r.end() && it->col == j) {
      it->value += v;
    } else {
      r.insert(it, Entry{j, v});
    }
    std::erase_if(r, [](const Entry& e) { return e.value == Scalar(0); });
    keep_largest(r, row_capacity_);
    assign_row(i, r);
  }

  void truncate_row(Index i, Index k) {
    std::vector<Entry> r = row(i);
    keep_largest(r, k);
    assign_row(i, r);
  }

  // Keeps the k largest values of a column-sorted row (ties to the lower column).
  static void keep_largest(std::vector<Entry>& r, Index k) {
    if (static_cast<Index>(r.size()) <= k) return;
    std::nth_element(r.begin(), r.begin() + k, r.end(), [](const Entry& a, const Entry& b) {
      return a.value != b.value ? a.value > b.value : a.col < b.col;
    });
    r.resize(static_cast<std::size_t>(k));
    std::sort(r.begin(), r.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
  }

  DenseMatrix<Scalar> to_dense() const {
    DenseMatrix<Scalar> d = DenseMatrix<Scalar>::Zero(rows_, cols_);
    for (Index i = 0; i < rows_; ++i) {
      auto c = row_cols(i);
      auto v = row_values(i);
      for (std::size_t k = 0; k < c.size(); ++k) d(i, c[k]) = v[k];
    }
    return d;
  }

  bool check_invariants() const {
    for (Index i = 0; i < rows_; ++i) {
      const Index len = row_lengths_[static_cast<std::size_t>(i)];
      if (len < 0 || len > row_capacity_) return false;
      if (row_offsets_[static_cast<std::size_t>(i + 1)] - row_offsets_[static_cast<std::size_t>(i)] !=
          row_capacity_)
        return false;
      auto c = row_cols(i);
      auto v = row_values(i);
      for (std::size_t k = 0; k < c.size(); ++k) {
        if (c[k] < 0 || c[k] >= cols_ || v[k] == Scalar(0)) return false;
        if (k > 0 && c[k - 1] >= c[k]) return false;
      }
    }
    return true;
  }

  std::size_t storage_bytes() const {
    return row_offsets_.size() * sizeof(Index) + row_lengths_.size() * sizeof(Index) +
           col_indices_.size() * sizeof(Index) + values_.size() * sizeof(Scalar);
  }

 private:
  std::size_t check_row(Index i) const {
    require(i >= 0 && i < rows_, "SparseRowMatrix: row out of range");
    return static_cast<std::size_t>(i);
  }

  Index rows_ = 0;
  Index cols_ = 0;
  Index row_capacity_ = 1;
  std::vector<Index> row_offsets_;
  std::vector<Index> row_lengths_;
  std::vector<Index> col_indices_;
  std::vector<Scalar> values_;
};

}  // namespace sam
