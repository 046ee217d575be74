#include "sam/memory_backward.hpp"

#include <algorithm>

#include "sam/error.hpp"

namespace sam {

MemoryGrad::MemoryGrad(Index slots, Index word_size)
    : buffer_(Matrix::Zero(slots, word_size)), flags_(static_cast<std::size_t>(slots), 0) {}

Eigen::Block<Matrix, 1, Eigen::Dynamic, true> MemoryGrad::row(Index slot) {
  auto& f = flags_[static_cast<std::size_t>(slot)];
  if (!f) {
    f = 1;
    touched_.push_back(slot);
  }
  return buffer_.row(slot);
}

void MemoryGrad::zero_row(Index slot) {
  if (touched(slot)) buffer_.row(slot).setZero();
}

void MemoryGrad::clear() {
  for (Index s : touched_) {
    buffer_.row(s).setZero();
    flags_[static_cast<std::size_t>(s)] = 0;
  }
  touched_.clear();
}

void cosine_gradients(ConstVectorRef q, ConstVectorRef m, Vector& dq, Vector& dm) {
  const double qn = q.norm();
  const double mn = m.norm();
  const double dot = q.dot(m);
  const double denom = qn * mn + kCosineEpsilon;
  const double c = dot / (denom * denom);
  dq = m / denom;
  dm = q / denom;
  if (qn > 0.0) dq -= (c * mn / qn) * q;
  if (mn > 0.0) dm -= (c * qn / mn) * m;
}

SparseReadResult content_read(const MemoryState& state, ConstVectorRef query, double beta) {
  SparseReadResult r;
  r.content = content_weights(state, query, beta);
  r.weights = r.content.sparse(state.slots());
  r.word = sparse_read(state, r.weights);
  r.query = query;
  r.beta = beta;
  return r;
}

SparseWeights read_word_backward(const MemoryState& state, const SparseWeights& weights,
                                 ConstVectorRef d_read, MemoryGrad& d_memory) {
  require(weights.dim() == state.slots(), "read_word_backward: weights dimension mismatch");
  require(d_read.size() == state.word_size(), "read_word_backward: gradient length mismatch");
  std::vector<SparseWeights::Entry> dw;
  dw.reserve(static_cast<std::size_t>(weights.nnz()));
  const Matrix& m = state.words();
  for (const auto& e : weights) {
    dw.push_back({e.index, m.row(e.index).dot(d_read.transpose())});
    d_memory.row(e.index) += e.value * d_read.transpose();
  }
  return SparseWeights::from_entries(state.slots(), std::move(dw));
}

ContentGrad content_backward(const MemoryState& state, const ContentRead& read,
                             ConstVectorRef query, double beta, std::span<const double> d_weights,
                             MemoryGrad& d_memory) {
  require(d_weights.size() == read.slots.size(), "content_backward: gradient not aligned with read");
  ContentGrad g;
  g.d_query = Vector::Zero(query.size());
  if (read.empty()) return g;

  double mean = 0.0;
  for (std::size_t k = 0; k < read.weights.size(); ++k) mean += read.weights[k] * d_weights[k];

  const Matrix& m = state.words();
  const double qn = query.norm();
  for (std::size_t k = 0; k < read.slots.size(); ++k) {
    const double dz = read.weights[k] * (d_weights[k] - mean);
    if (dz == 0.0) continue;
    g.d_beta += dz * read.similarities[k];
    const double ds = beta * dz;
    const Index s = read.slots[k];
    const auto row = m.row(s);
    const double mn = row.norm();
    const double dot = row.dot(query.transpose());
    const double denom = qn * mn + kCosineEpsilon;
    const double c = dot / (denom * denom);
    g.d_query.noalias() += (ds / denom) * row.transpose();
    if (qn > 0.0) g.d_query.noalias() -= (ds * c * mn / qn) * query;
    auto dm = d_memory.row(s);
    dm.noalias() += (ds / denom) * query.transpose();
    if (mn > 0.0) dm.noalias() -= (ds * c * qn / mn) * row;
  }
  return g;
}

ReadGrad read_backward(const MemoryState& state, const SparseReadResult& result,
                       ConstVectorRef d_read) {
  ReadGrad g;
  g.d_memory = MemoryGrad(state.slots(), state.word_size());
  g.d_weights = read_word_backward(state, result.weights, d_read, g.d_memory);
  std::vector<double> dw(result.content.slots.size());
  for (std::size_t k = 0; k < dw.size(); ++k) dw[k] = g.d_weights[result.content.slots[k]];
  ContentGrad cg =
      content_backward(state, result.content, result.query, result.beta, dw, g.d_memory);
  g.d_query = std::move(cg.d_query);
  g.d_beta = cg.d_beta;
  return g;
}

std::vector<HeadWriteGrad> write_backward(const MemoryState& state, const WriteJournalEntry& entry,
                                          MemoryGrad& d_memory) {
  require(entry.step == state.step(), "write_backward: memory is not at the entry's step");
  std::vector<HeadWriteGrad> grads;
  grads.reserve(entry.heads.size());
  for (const HeadWrite& h : entry.heads) {
    HeadWriteGrad g;
    g.d_word = Vector::Zero(h.word.size());
    for (const auto& e : h.weights) {
      if (d_memory.touched(e.index)) g.d_word.noalias() += e.value * d_memory.crow(e.index).transpose();
    }
    auto dw = [&](Index slot) {
      return d_memory.touched(slot) ? d_memory.crow(slot).dot(h.word.transpose()) : 0.0;
    };
    const double dw_lru = dw(h.lru_slot);
    double d_alpha = (1.0 - h.gamma) * dw_lru;
    double d_gamma = -h.alpha * dw_lru;
    std::vector<SparseWeights::Entry> d_prev;
    d_prev.reserve(static_cast<std::size_t>(h.prev_read.nnz()));
    for (const auto& p : h.prev_read) {
      const double d = dw(p.index);
      d_alpha += h.gamma * p.value * d;
      d_gamma += h.alpha * p.value * d;
      d_prev.push_back({p.index, h.alpha * h.gamma * d});
    }
    g.d_alpha = d_alpha;
    g.d_gamma = d_gamma;
    g.d_prev_read = SparseWeights::from_entries(state.slots(), std::move(d_prev));
    grads.push_back(std::move(g));
  }
  for (Index e : entry.erased) d_memory.zero_row(e);
  return grads;
}

}  // namespace sam
