#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include "sam/dense.hpp"
#include "sam/error.hpp"

namespace sam {

// A K-sparse addressing vector over `dim` slots. Entries are kept sorted by
// index with no stored zeros, so iteration order is deterministic.
template <typename Scalar>
class SparseVector {
 public:
  struct Entry {
    Index index;
    Scalar value;
    bool operator==(const Entry&) const = default;
  };

  static constexpr Index kUnbounded = std::numeric_limits<Index>::max();

  SparseVector() = default;
  explicit SparseVector(Index dim, Index capacity = kUnbounded) : dim_(dim), capacity_(capacity) {
    require(dim >= 0 && capacity >= 0, "SparseVector: negative dim or capacity");
  }

  // Duplicated indices are summed; zeros are dropped.
  static SparseVector from_entries(Index dim, std::vector<Entry> entries,
                                   Index capacity = kUnbounded) {
    SparseVector out(dim, capacity);
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.index < b.index; });
    for (const Entry& e : entries) {
      require(e.index >= 0 && e.index < dim, "SparseVector: index out of range");
      if (!out.entries_.empty() && out.entries_.back().index == e.index) {
        out.entries_.back().value += e.value;
      } else {
        out.entries_.push_back(e);
      }
    }
    out.compact();
    require(out.nnz() <= capacity, "SparseVector: capacity exceeded");
    return out;
  }

  static SparseVector one_hot(Index dim, Index i, Scalar value = Scalar(1)) {
    SparseVector out(dim);
    out.set(i, value);
    return out;
  }

  static SparseVector from_dense(const DenseVector<Scalar>& v, Index capacity = kUnbounded) {
    SparseVector out(v.size(), capacity);
    for (Index i = 0; i < v.size(); ++i) {
      if (v[i] != Scalar(0)) out.entries_.push_back({i, v[i]});
    }
    require(out.nnz() <= capacity, "SparseVector: capacity exceeded");
    return out;
  }

  Index dim() const { return dim_; }
  Index nnz() const { return static_cast<Index>(entries_.size()); }
  Index capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }

  std::span<const Entry> entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  Scalar operator[](Index i) const {
    auto it = lower(i);
    return (it != entries_.end() && it->index == i) ? it->value : Scalar(0);
  }

  bool contains(Index i) const {
    auto it = lower(i);
    return it != entries_.end() && it->index == i;
  }

  void set(Index i, Scalar value) {
    require(i >= 0 && i < dim_, "SparseVector::set: index out of range");
    auto it = lower(i);
    if (it != entries_.end() && it->index == i) {
      if (value == Scalar(0)) {
        entries_.erase(it);
      } else {
        it->value = value;
      }
      return;
    }
    if (value == Scalar(0)) return;
    require(nnz() < capacity_, "SparseVector::set: capacity exceeded");
    entries_.insert(it, Entry{i, value});
  }

  void add(Index i, Scalar value) { set(i, (*this)[i] + value); }

  Scalar sum() const {
    Scalar s(0);
    for (const Entry& e : entries_) s += e.value;
    return s;
  }

  void scale(Scalar s) {
    for (Entry& e : entries_) e.value *= s;
    compact();
  }

  // Divides by the entry sum; a zero-sum vector is left untouched.
  void normalize() {
    const Scalar s = sum();
    if (s != Scalar(0)) {
      for (Entry& e : entries_) e.value /= s;
    }
  }

  // Keeps the k largest values (ties go to the lower index).
  void truncate_top(Index k) {
    if (nnz() <= k) return;
    std::vector<Entry> by_value = entries_;
    std::nth_element(by_value.begin(), by_value.begin() + k, by_value.end(), larger_first);
    by_value.resize(static_cast<std::size_t>(k));
    std::sort(by_value.begin(), by_value.end(),
              [](const Entry& a, const Entry& b) { return a.index < b.index; });
    entries_ = std::move(by_value);
  }

  void compact() {
    std::erase_if(entries_, [](const Entry& e) { return e.value == Scalar(0); });
  }

  void clear() { entries_.clear(); }

  void set_capacity(Index capacity) {
    require(nnz() <= capacity, "SparseVector::set_capacity: below current nnz");
    capacity_ = capacity;
  }

  DenseVector<Scalar> to_dense() const {
    DenseVector<Scalar> v = DenseVector<Scalar>::Zero(dim_);
    for (const Entry& e : entries_) v[e.index] = e.value;
    return v;
  }

  bool check_invariants() const {
    if (nnz() > capacity_) return false;
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const Entry& e = entries_[k];
      if (e.index < 0 || e.index >= dim_ || e.value == Scalar(0)) return false;
      if (k > 0 && entries_[k - 1].index >= e.index) return false;
    }
    return true;
  }

  bool operator==(const SparseVector& other) const {
    return dim_ == other.dim_ && entries_ == other.entries_;
  }

  static bool larger_first(const Entry& a, const Entry& b) {
    return a.value != b.value ? a.value > b.value : a.index < b.index;
  }

 private:
  typename std::vector<Entry>::const_iterator lower(Index i) const {
    return std::lower_bound(entries_.begin(), entries_.end(), i,
                            [](const Entry& e, Index j) { return e.index < j; });
  }
  typename std::vector<Entry>::iterator lower(Index i) {
    return std::lower_bound(entries_.begin(), entries_.end(), i,
                            [](const Entry& e, Index j) { return e.index < j; });
  }

  Index dim_ = 0;
  Index capacity_ = kUnbounded;
  std::vector<Entry> entries_;
};

// a * x + b * y, merged in index order.
template <typename Scalar>
SparseVector<Scalar> combine(Scalar a, const SparseVector<Scalar>& x, Scalar b,
                             const SparseVector<Scalar>& y) {
  require(x.dim() == y.dim(), "combine: dimension mismatch");
  std::vector<typename SparseVector<Scalar>::Entry> merged;
  merged.reserve(static_cast<std::size_t>(x.nnz() + y.nnz()));
  auto xi = x.begin();
  auto yi = y.begin();
  while (xi != x.end() || yi != y.end()) {
    if (yi == y.end() || (xi != x.end() && xi->index < yi->index)) {
      merged.push_back({xi->index, a * xi->value});
      ++xi;
    } else if (xi == x.end() || yi->index < xi->index) {
      merged.push_back({yi->index, b * yi->value});
      ++yi;
    } else {
      merged.push_back({xi->index, a * xi->value + b * yi->value});
      ++xi;
      ++yi;
    }
  }
  return SparseVector<Scalar>::from_entries(x.dim(), std::move(merged));
}

using SparseWeights = SparseVector<double>;

}  // namespace sam
