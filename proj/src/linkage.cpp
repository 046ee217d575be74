#include "sam/linkage.hpp"

#include <algorithm>

#include "sam/error.hpp"

namespace sam {

namespace {

using LinkEntry = SparseRowMatrix<double>::Entry;

struct RowPlan {
  Index row;
  std::vector<LinkEntry> entries;
};

// New contents for every row of `a` that the step changes. `a` stores L
// (forward) or its transpose; `b` is the other one and is used to find the
// rows holding a given column.
std::vector<RowPlan> plan_rows(const SparseRowMatrix<double>& a, const SparseRowMatrix<double>& b,
                               const SparseWeights& w, const SparseWeights& p, bool forward,
                               LinkageRule rule, Index links, std::size_t& touched) {
  const bool dnc = rule == LinkageRule::kDnc;
  const bool decay_row = forward || dnc;
  const bool decay_col = !forward || dnc;

  std::vector<std::pair<Index, Index>> cand;
  if (decay_row) {
    for (const auto& e : w) {
      for (Index c : a.row_cols(e.index)) cand.emplace_back(e.index, c);
    }
  }
  if (decay_col) {
    for (const auto& e : w) {
      for (Index r : b.row_cols(e.index)) cand.emplace_back(r, e.index);
    }
  }
  for (const auto& we : w) {
    for (const auto& pe : p) {
      if (forward) {
        cand.emplace_back(we.index, pe.index);
      } else {
        cand.emplace_back(pe.index, we.index);
      }
    }
  }
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  touched += cand.size();

  std::vector<RowPlan> plans;
  std::size_t k = 0;
  while (k < cand.size()) {
    const Index r = cand[k].first;
    RowPlan plan{r, {}};
    auto cols = a.row_cols(r);
    auto vals = a.row_values(r);
    std::size_t e = 0;
    auto emit = [&](Index c, double v) {
      if (c != r && v != 0.0) plan.entries.push_back({c, v});
    };
    for (; k < cand.size() && cand[k].first == r; ++k) {
      const Index c = cand[k].second;
      for (; e < cols.size() && cols[e] < c; ++e) emit(cols[e], vals[e]);
      double old = 0.0;
      if (e < cols.size() && cols[e] == c) old = vals[e++];
      double factor = 1.0;
      if (decay_row) factor -= w[r];
      if (decay_col) factor -= w[c];
      const double add = forward ? w[r] * p[c] : w[c] * p[r];
      emit(c, factor * old + add);
    }
    for (; e < cols.size(); ++e) emit(cols[e], vals[e]);
    SparseRowMatrix<double>::keep_largest(plan.entries, links);
    plans.push_back(std::move(plan));
  }
  return plans;
}

}  // namespace

Linkage::Linkage(Index slots, const LinkageConfig& config)
    : config_(config),
      forward_(slots, slots, config.links),
      backward_(slots, slots, config.links),
      precedence_(slots) {
  require(config.links >= 1, "Linkage: need at least one link per row");
  require(config.reads >= 1, "Linkage: need K >= 1");
}

SparseWeights precedence_update(const SparseWeights& precedence, const SparseWeights& write,
                                Index links) {
  SparseWeights p = combine(1.0 - write.sum(), precedence, 1.0, write);
  p.truncate_top(links);
  return p;
}

LinkageUndo Linkage::update(const SparseWeights& write) {
  require(write.dim() == slots(), "Linkage::update: write weights dimension mismatch");
  last_touched_ = 0;
  auto fwd = plan_rows(forward_, backward_, write, precedence_, true, config_.rule, config_.links,
                       last_touched_);
  auto bwd = plan_rows(backward_, forward_, write, precedence_, false, config_.rule, config_.links,
                       last_touched_);
  LinkageUndo u;
  u.precedence = precedence_;
  for (auto& plan : fwd) {
    u.rows.push_back({true, plan.row, forward_.row(plan.row)});
    forward_.assign_row(plan.row, plan.entries);
  }
  for (auto& plan : bwd) {
    u.rows.push_back({false, plan.row, backward_.row(plan.row)});
    backward_.assign_row(plan.row, plan.entries);
  }
  precedence_ = precedence_update(precedence_, write, config_.links);
  return u;
}

void Linkage::undo(const LinkageUndo& u) {
  for (auto it = u.rows.rbegin(); it != u.rows.rend(); ++it) {
    (it->forward ? forward_ : backward_).assign_row(it->row, it->entries);
  }
  precedence_ = u.precedence;
}

DirectionalWeights Linkage::directional(const SparseWeights& prev_read) const {
  require(prev_read.dim() == slots(), "Linkage::directional: dimension mismatch");
  std::vector<SparseWeights::Entry> f;
  std::vector<SparseWeights::Entry> b;
  for (const auto& e : prev_read) {
    auto pc = backward_.row_cols(e.index);
    auto pv = backward_.row_values(e.index);
    for (std::size_t k = 0; k < pc.size(); ++k) f.push_back({pc[k], pv[k] * e.value});
    auto nc = forward_.row_cols(e.index);
    auto nv = forward_.row_values(e.index);
    for (std::size_t k = 0; k < nc.size(); ++k) b.push_back({nc[k], nv[k] * e.value});
  }
  DirectionalWeights out{SparseWeights::from_entries(slots(), std::move(f)),
                         SparseWeights::from_entries(slots(), std::move(b))};
  out.forward.truncate_top(config_.reads);
  out.forward.normalize();
  out.backward.truncate_top(config_.reads);
  out.backward.normalize();
  return out;
}

void Linkage::reset() {
  for (Index i = 0; i < slots(); ++i) {
    forward_.clear_row(i);
    backward_.clear_row(i);
  }
  precedence_.clear();
}

SparseWeights read_mode_mix(const SparseWeights& content, const SparseWeights& forward,
                            const SparseWeights& backward, const double mode[3], Index reads) {
  SparseWeights v = combine(mode[0], content, mode[1], forward);
  v = combine(1.0, v, mode[2], backward);
  v.truncate_top(reads);
  v.normalize();
  return v;
}

ModeMixGrad read_mode_mix_backward(const SparseWeights& content, const SparseWeights& forward,
                                   const SparseWeights& backward, const double mode[3], Index reads,
                                   const SparseWeights& d_out) {
  SparseWeights v = combine(mode[0], content, mode[1], forward);
  v = combine(1.0, v, mode[2], backward);
  v.truncate_top(reads);
  const double total = v.sum();
  ModeMixGrad g;
  g.d_content = SparseWeights(content.dim());
  if (total == 0.0) return g;
  double dot = 0.0;
  for (const auto& e : v) dot += e.value / total * d_out[e.index];
  std::vector<SparseWeights::Entry> dc;
  for (const auto& e : v) {
    const double dv = (d_out[e.index] - dot) / total;
    const double c = content[e.index];
    g.d_mode[0] += dv * c;
    g.d_mode[1] += dv * forward[e.index];
    g.d_mode[2] += dv * backward[e.index];
    if (c != 0.0) dc.push_back({e.index, mode[0] * dv});
  }
  g.d_content = SparseWeights::from_entries(content.dim(), std::move(dc));
  return g;
}

}  // namespace sam
