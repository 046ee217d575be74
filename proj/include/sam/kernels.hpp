#pragma once

#include <vector>

#include "sam/dense.hpp"
#include "sam/error.hpp"
#include "sam/sparse_vector.hpp"

namespace sam {

// Row-write instrumentation, per thread. Tests reset and read it.
struct KernelCounters {
  std::size_t row_writes = 0;
};

inline KernelCounters& kernel_counters() {
  thread_local KernelCounters counters;
  return counters;
}

// sum_i w(i) * M(i) over the nonzeros of w; cost nnz(w) * cols.
template <typename Scalar>
DenseVector<Scalar> sparse_weighted_sum(const SparseVector<Scalar>& w,
                                        const DenseMatrix<Scalar>& memory) {
  require(w.dim() == memory.rows(), "sparse_weighted_sum: dimension mismatch");
  DenseVector<Scalar> out = DenseVector<Scalar>::Zero(memory.cols());
  for (const auto& e : w) out.noalias() += e.value * memory.row(e.index).transpose();
  return out;
}

enum class Sign : int { kMinus = -1, kPlus = 1 };

// M(i) += sign * w(i) * a for each nonzero i. Returns the touched rows.
template <typename Scalar, typename Derived>
std::vector<Index> sparse_outer_add(DenseMatrix<Scalar>& memory, const SparseVector<Scalar>& w,
                                    const Eigen::MatrixBase<Derived>& a, Sign sign = Sign::kPlus) {
  require(w.dim() == memory.rows(), "sparse_outer_add: dimension mismatch");
  require(a.size() == memory.cols(), "sparse_outer_add: word size mismatch");
  std::vector<Index> touched;
  touched.reserve(static_cast<std::size_t>(w.nnz()));
  const Scalar s = static_cast<Scalar>(static_cast<int>(sign));
  for (const auto& e : w) {
    memory.row(e.index) += (s * e.value) * a.transpose();
    touched.push_back(e.index);
  }
  kernel_counters().row_writes += touched.size();
  return touched;
}

// Zeroes row i and hands back what was there.
template <typename Scalar>
DenseVector<Scalar> row_zero(DenseMatrix<Scalar>& memory, Index i) {
  require(i >= 0 && i < memory.rows(), "row_zero: row out of range");
  DenseVector<Scalar> evicted = memory.row(i).transpose();
  memory.row(i).setZero();
  return evicted;
}

}  // namespace sam
