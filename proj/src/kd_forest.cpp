// Randomized k-d forest in the FLANN style: each tree splits on a dimension
// drawn at random from the few highest-variance ones, queries share one
// best-bin-first queue across trees, and `kd_checks` bounds how many stored
// vectors get compared against the query.

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <unordered_set>

#include "ann_internal.hpp"
#include "sam/error.hpp"

namespace sam::detail {
namespace {

constexpr int kSampleForVariance = 100;
constexpr int kRandomDimCandidates = 5;

struct Tree {
  std::vector<KdNode> nodes;
  std::int32_t root = -1;
};

struct Branch {
  double bound;
  std::int32_t tree;
  std::int32_t node;
  bool operator>(const Branch& o) const { return bound > o.bound; }
};

class KdForest final : public AnnBackendImpl {
 public:
  KdForest(const AnnConfig& config, Index dim)
      : trees_(static_cast<std::size_t>(config.kd_trees)),
        checks_(config.kd_checks),
        dim_(dim),
        rng_(config.seed ^ 0x9b1c5d3e7a2f4c11ULL) {}

  std::unique_ptr<AnnBackendImpl> clone() const override {
    return std::make_unique<KdForest>(*this);
  }

  void build(const AnnStore& store) override {
    std::vector<Index> live = store.live_slots();
    for (Tree& t : trees_) {
      t.nodes.clear();
      t.nodes.reserve(live.size() * 2);
      std::vector<Index> order = live;
      t.root = live.empty() ? -1 : build_node(store, t, order, 0, order.size());
    }
  }

  void insert(const AnnStore& store, Index slot, AnnUndoLog* log) override {
    for (std::size_t ti = 0; ti < trees_.size(); ++ti) insert_into(store, ti, slot, log);
  }

  void search(const AnnStore& store, const PreparedQuery& q, Index k,
              std::vector<Index>& candidates) const override {
    Search s{store, q, static_cast<std::size_t>(k), {}, {}, 0, {}};
    for (std::size_t ti = 0; ti < trees_.size(); ++ti) {
      if (trees_[ti].root >= 0) descend(s, static_cast<std::int32_t>(ti), trees_[ti].root, 0.0);
    }
    while (!s.heap.empty() && (s.checks < checks_ || s.best.size() < s.k)) {
      const Branch b = s.heap.top();
      s.heap.pop();
      if (s.best.size() == s.k && b.bound > s.best.back().first) break;
      descend(s, b.tree, b.node, b.bound);
    }
    for (const auto& [d, slot] : s.best) candidates.push_back(slot);
  }

  void undo(const KdRecord& r) override {
    Tree& t = trees_[static_cast<std::size_t>(r.tree)];
    if (r.node >= 0) t.nodes[static_cast<std::size_t>(r.node)] = r.old_node;
    t.nodes.resize(static_cast<std::size_t>(r.old_size));
    t.root = r.old_root;
  }

  std::size_t records_per_insert() const override { return trees_.size(); }

  std::size_t storage_bytes() const override {
    std::size_t b = 0;
    for (const Tree& t : trees_) b += t.nodes.size() * sizeof(KdNode);
    return b;
  }

 private:
  struct Search {
    const AnnStore& store;
    const PreparedQuery& q;
    std::size_t k;
    std::priority_queue<Branch, std::vector<Branch>, std::greater<>> heap;
    std::unordered_set<Index> seen;
    int checks;
    // (distance, slot) ascending, at most k long.
    std::vector<std::pair<double, Index>> best;
  };

  static double query_coord(const PreparedQuery& q, Index d) { return q.nav[d]; }

  void descend(Search& s, std::int32_t tree, std::int32_t node, double mindist) const {
    const Tree& t = trees_[static_cast<std::size_t>(tree)];
    while (true) {
      if (s.best.size() == s.k && mindist > s.best.back().first) return;
      const KdNode& n = t.nodes[static_cast<std::size_t>(node)];
      if (n.dim < 0) {
        visit_leaf(s, n);
        return;
      }
      const double diff = query_coord(s.q, n.dim) - n.split;
      const std::int32_t near = diff < 0.0 ? n.left : n.right;
      const std::int32_t far = diff < 0.0 ? n.right : n.left;
      const double far_bound = mindist + diff * diff;
      if (s.best.size() < s.k || far_bound <= s.best.back().first) {
        s.heap.push({far_bound, tree, far});
      }
      node = near;
    }
  }

  void visit_leaf(Search& s, const KdNode& leaf) const {
    if (!s.store.valid(leaf.slot, leaf.generation)) return;
    if (s.checks >= checks_ && s.best.size() == s.k) return;
    if (!s.seen.insert(leaf.slot).second) return;
    ++s.checks;
    const double d = nav_distance(s.store, s.q, leaf.slot);
    const std::pair<double, Index> item{d, leaf.slot};
    if (s.best.size() == s.k && !(item < s.best.back())) return;
    s.best.insert(std::upper_bound(s.best.begin(), s.best.end(), item), item);
    if (s.best.size() > s.k) s.best.pop_back();
  }

  std::int32_t push_leaf(Tree& t, const AnnStore& store, Index slot) {
    KdNode leaf;
    leaf.slot = slot;
    leaf.generation = store.generation[static_cast<std::size_t>(slot)];
    t.nodes.push_back(leaf);
    return static_cast<std::int32_t>(t.nodes.size() - 1);
  }

  std::int32_t build_node(const AnnStore& store, Tree& t, std::vector<Index>& idx, std::size_t lo,
                          std::size_t hi) {
    if (hi - lo == 1) return push_leaf(t, store, idx[lo]);
    const auto [dim, split] = choose_split(store, idx, lo, hi);
    auto mid_it = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                 idx.begin() + static_cast<std::ptrdiff_t>(hi),
                                 [&](Index s) { return store.coord(s, dim) < split; });
    std::size_t mid = static_cast<std::size_t>(mid_it - idx.begin());
    double cut = split;
    if (mid == lo || mid == hi) {
      // Degenerate mean split: fall back to the median along the same dimension.
      mid = lo + (hi - lo) / 2;
      std::nth_element(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                       idx.begin() + static_cast<std::ptrdiff_t>(mid),
                       idx.begin() + static_cast<std::ptrdiff_t>(hi), [&](Index a, Index b) {
                         return store.coord(a, dim) < store.coord(b, dim);
                       });
      cut = store.coord(idx[mid], dim);
    }
    const auto self = static_cast<std::int32_t>(t.nodes.size());
    t.nodes.emplace_back();
    const std::int32_t left = build_node(store, t, idx, lo, mid);
    const std::int32_t right = build_node(store, t, idx, mid, hi);
    KdNode& n = t.nodes[static_cast<std::size_t>(self)];
    n.dim = static_cast<std::int32_t>(dim);
    n.split = cut;
    n.left = left;
    n.right = right;
    return self;
  }

  std::pair<Index, double> choose_split(const AnnStore& store, const std::vector<Index>& idx,
                                        std::size_t lo, std::size_t hi) {
    const std::size_t count = std::min<std::size_t>(hi - lo, kSampleForVariance);
    Vector mean = Vector::Zero(dim_);
    Vector sq = Vector::Zero(dim_);
    for (std::size_t i = 0; i < count; ++i) {
      const Index s = idx[lo + i];
      for (Index d = 0; d < dim_; ++d) {
        const double c = store.coord(s, d);
        mean[d] += c;
        sq[d] += c * c;
      }
    }
    mean /= static_cast<double>(count);
    Vector var = sq / static_cast<double>(count) - mean.cwiseProduct(mean);
    std::vector<Index> dims(static_cast<std::size_t>(dim_));
    for (Index d = 0; d < dim_; ++d) dims[static_cast<std::size_t>(d)] = d;
    const auto top = std::min<std::size_t>(kRandomDimCandidates, dims.size());
    std::partial_sort(dims.begin(), dims.begin() + static_cast<std::ptrdiff_t>(top), dims.end(),
                      [&](Index a, Index b) { return var[a] != var[b] ? var[a] > var[b] : a < b; });
    std::uniform_int_distribution<std::size_t> pick(0, top - 1);
    const Index d = dims[pick(rng_)];
    return {d, mean[d]};
  }

  void insert_into(const AnnStore& store, std::size_t ti, Index slot, AnnUndoLog* log) {
    Tree& t = trees_[ti];
    const auto old_size = static_cast<std::int32_t>(t.nodes.size());
    if (t.root < 0) {
      if (log) log->records.emplace_back(KdRecord{static_cast<std::int32_t>(ti), -1, {}, old_size, t.root});
      t.root = push_leaf(t, store, slot);
      return;
    }
    std::int32_t node = t.root;
    while (t.nodes[static_cast<std::size_t>(node)].dim >= 0) {
      const KdNode& n = t.nodes[static_cast<std::size_t>(node)];
      node = store.coord(slot, n.dim) < n.split ? n.left : n.right;
    }
    const KdNode old = t.nodes[static_cast<std::size_t>(node)];
    if (log) log->records.emplace_back(KdRecord{static_cast<std::int32_t>(ti), node, old, old_size, t.root});
    if (!store.valid(old.slot, old.generation) || old.slot == slot) {
      // Stale leaf: reuse it in place.
      KdNode& leaf = t.nodes[static_cast<std::size_t>(node)];
      leaf.slot = slot;
      leaf.generation = store.generation[static_cast<std::size_t>(slot)];
      return;
    }
    // Split the occupied leaf on the dimension where the two points differ most.
    Index best_dim = 0;
    double best_span = -1.0;
    for (Index d = 0; d < dim_; ++d) {
      const double span = std::abs(store.coord(old.slot, d) - store.coord(slot, d));
      if (span > best_span) {
        best_span = span;
        best_dim = d;
      }
    }
    const double a = store.coord(old.slot, best_dim);
    const double b = store.coord(slot, best_dim);
    const std::int32_t existing = push_leaf(t, store, old.slot);
    t.nodes[static_cast<std::size_t>(existing)].generation = old.generation;
    const std::int32_t fresh = push_leaf(t, store, slot);
    KdNode& n = t.nodes[static_cast<std::size_t>(node)];
    n.dim = static_cast<std::int32_t>(best_dim);
    n.slot = -1;
    if (a == b) {
      n.split = a;
      n.left = existing;
      n.right = fresh;
    } else {
      n.split = 0.5 * (a + b);
      n.left = a < b ? existing : fresh;
      n.right = a < b ? fresh : existing;
    }
  }

  std::vector<Tree> trees_;
  int checks_;
  Index dim_;
  std::mt19937_64 rng_;
};

}  // namespace

std::unique_ptr<AnnBackendImpl> make_kd_forest_backend(const AnnConfig& config, Index dim) {
  return std::make_unique<KdForest>(config, dim);
}

}  // namespace sam::detail
