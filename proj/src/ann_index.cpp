#include "sam/ann_index.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ann_internal.hpp"
#include "sam/error.hpp"

namespace sam {

std::string to_string(AnnBackend b) {
  switch (b) {
    case AnnBackend::kExact: return "exact";
    case AnnBackend::kKdForest: return "kd-forest";
    case AnnBackend::kLsh: return "lsh";
  }
  return "?";
}

AnnBackend parse_ann_backend(const std::string& s) {
  if (s == "exact") return AnnBackend::kExact;
  if (s == "kd-forest" || s == "kd") return AnnBackend::kKdForest;
  if (s == "lsh") return AnnBackend::kLsh;
  throw InputError("unknown ANN backend '" + s + "'");
}

double cosine_similarity(ConstVectorRef q, ConstVectorRef m) {
  return q.dot(m) / (q.norm() * m.norm() + kCosineEpsilon);
}

namespace detail {

PreparedQuery prepare_query(const AnnStore& store, ConstVectorRef q) {
  PreparedQuery p;
  p.raw = q;
  p.norm = q.norm();
  if (store.metric == AnnMetric::kCosine && p.norm > 0.0) {
    p.nav = q / p.norm;
  } else {
    p.nav = q;
  }
  return p;
}

double nav_distance(const AnnStore& store, const PreparedQuery& q, Index slot) {
  if (store.metric == AnnMetric::kCosine) {
    const double denom = q.norm * store.norms[slot];
    const double c = denom > 0.0 ? q.raw.dot(store.rows.row(slot).transpose()) / denom : 0.0;
    return 2.0 - 2.0 * c;
  }
  return (q.raw - store.rows.row(slot).transpose()).squaredNorm();
}

double similarity(const AnnStore& store, const PreparedQuery& q, Index slot) {
  if (store.metric == AnnMetric::kCosine) {
    return q.raw.dot(store.rows.row(slot).transpose()) /
           (q.norm * store.norms[slot] + kCosineEpsilon);
  }
  return -(q.raw - store.rows.row(slot).transpose()).norm();
}

namespace {

class ExactBackend final : public AnnBackendImpl {
 public:
  std::unique_ptr<AnnBackendImpl> clone() const override {
    return std::make_unique<ExactBackend>(*this);
  }
  void build(const AnnStore&) override {}
  void insert(const AnnStore&, Index, AnnUndoLog*) override {}
  void search(const AnnStore& store, const PreparedQuery&, Index,
              std::vector<Index>& candidates) const override {
    for (Index s = 0; s < store.slots(); ++s) {
      if (store.live[static_cast<std::size_t>(s)]) candidates.push_back(s);
    }
  }
  std::size_t storage_bytes() const override { return 0; }
  std::size_t records_per_insert() const override { return 0; }
};

}  // namespace

std::unique_ptr<AnnBackendImpl> make_exact_backend() { return std::make_unique<ExactBackend>(); }

}  // namespace detail

namespace {

std::unique_ptr<detail::AnnBackendImpl> make_backend(const AnnConfig& config, Index dim) {
  switch (config.backend) {
    case AnnBackend::kExact: return detail::make_exact_backend();
    case AnnBackend::kKdForest: return detail::make_kd_forest_backend(config, dim);
    case AnnBackend::kLsh: return detail::make_lsh_backend(config, dim);
  }
  throw ContractError("unknown ANN backend");
}

void validate(const AnnConfig& config) {
  if (config.backend == AnnBackend::kKdForest) {
    require(config.kd_trees >= 1 && config.kd_checks >= 1,
            "AnnConfig: kd-forest needs kd_trees >= 1 and kd_checks >= 1");
  }
  if (config.backend == AnnBackend::kLsh) {
    require(config.metric == AnnMetric::kCosine,
            "AnnConfig: the hyperplane LSH backend requires the cosine metric");
    require(config.lsh_tables >= 1 && config.lsh_bits >= 1 && config.lsh_bits <= 64,
            "AnnConfig: lsh needs tables >= 1 and 1 <= bits <= 64");
    require(config.lsh_probe_radius >= 0 && config.lsh_probe_radius <= 2,
            "AnnConfig: lsh probe radius must be 0, 1 or 2");
  }
  require(config.rebuild_interval >= 0, "AnnConfig: rebuild interval must be >= 1");
}

bool neighbor_before(const Neighbor& a, const Neighbor& b) {
  return a.similarity != b.similarity ? a.similarity > b.similarity : a.slot < b.slot;
}

}  // namespace

AnnIndex::AnnIndex(Index slots, Index dim, const AnnConfig& config)
    : config_(config),
      store_(std::make_unique<detail::AnnStore>()),
      log_(std::make_unique<detail::AnnUndoLog>()) {
  require(slots >= 1 && dim >= 1, "AnnIndex: slots and dim must be positive");
  validate(config_);
  store_->metric = config_.metric;
  store_->rows = Matrix::Zero(slots, dim);
  store_->norms = Vector::Zero(slots);
  store_->live.assign(static_cast<std::size_t>(slots), 0);
  store_->generation.assign(static_cast<std::size_t>(slots), 0);
  backend_ = make_backend(config_, dim);
  backend_->build(*store_);
}

AnnIndex::AnnIndex(const AnnIndex& other)
    : config_(other.config_),
      store_(std::make_unique<detail::AnnStore>(*other.store_)),
      backend_(other.backend_->clone()),
      log_(std::make_unique<detail::AnnUndoLog>(*other.log_)) {}

AnnIndex& AnnIndex::operator=(const AnnIndex& other) {
  if (this != &other) {
    AnnIndex copy(other);
    *this = std::move(copy);
  }
  return *this;
}

AnnIndex::AnnIndex(AnnIndex&&) noexcept = default;
AnnIndex& AnnIndex::operator=(AnnIndex&&) noexcept = default;
AnnIndex::~AnnIndex() = default;

AnnIndex AnnIndex::build(const Matrix& rows, const AnnConfig& config) {
  require(rows.rows() >= 1 && rows.cols() >= 1, "ann_build: rows must be nonempty");
  AnnIndex index(rows.rows(), rows.cols(), config);
  auto& st = *index.store_;
  for (Index s = 0; s < rows.rows(); ++s) {
    const double n = rows.row(s).norm();
    if (config.metric == AnnMetric::kCosine && n == 0.0) continue;
    st.rows.row(s) = rows.row(s);
    st.norms[s] = n;
    st.live[static_cast<std::size_t>(s)] = 1;
    ++st.live_count;
  }
  index.backend_->build(st);
  return index;
}

std::vector<Neighbor> AnnIndex::query(ConstVectorRef q, Index k) const {
  require(q.size() == dim(), "ann_query: query length does not match word size");
  require(k >= 1, "ann_query: k must be >= 1");
  std::vector<Neighbor> out;
  if (store_->live_count == 0) return out;
  const detail::PreparedQuery pq = detail::prepare_query(*store_, q);
  std::vector<Index> candidates;
  if (store_->live_count <= k) {
    candidates = store_->live_slots();
  } else {
    backend_->search(*store_, pq, k, candidates);
  }
  out.reserve(candidates.size());
  for (Index s : candidates) out.push_back({s, detail::similarity(*store_, pq, s)});
  const auto keep = std::min<std::size_t>(out.size(), static_cast<std::size_t>(k));
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(),
                    neighbor_before);
  out.resize(keep);
  return out;
}

void AnnIndex::insert(Index slot, ConstVectorRef v) {
  require(slot >= 0 && slot < slots(), "ann_insert: slot out of range");
  require(v.size() == dim(), "ann_insert: vector length does not match word size");
  auto& st = *store_;
  const double n = v.norm();
  if (config_.metric == AnnMetric::kCosine && n == 0.0) {
    remove(slot);
    return;
  }
  const auto s = static_cast<std::size_t>(slot);
  if (log_->enabled) {
    const std::size_t offset = log_->rows.size();
    log_->rows.insert(log_->rows.end(), st.rows.row(slot).data(),
                      st.rows.row(slot).data() + st.dim());
    log_->records.emplace_back(detail::SlotRecord{slot, st.live[s], st.generation[s], st.norms[slot],
                                                  st.insertions, true, offset});
  }
  if (!st.live[s]) ++st.live_count;
  st.live[s] = 1;
  ++st.generation[s];
  st.rows.row(slot) = v.transpose();
  st.norms[slot] = n;
  ++st.insertions;
  backend_->insert(st, slot, log_->enabled ? log_.get() : nullptr);
  maybe_rebuild();
}

void AnnIndex::remove(Index slot) {
  require(slot >= 0 && slot < slots(), "ann_remove: slot out of range");
  auto& st = *store_;
  const auto s = static_cast<std::size_t>(slot);
  if (!st.live[s]) return;
  if (log_->enabled) {
    log_->records.emplace_back(detail::SlotRecord{slot, st.live[s], st.generation[s], st.norms[slot],
                                                  st.insertions, false, 0});
  }
  st.live[s] = 0;
  --st.live_count;
}

void AnnIndex::maybe_rebuild() {
  if (store_->insertions >= rebuild_interval()) rebuild();
}

void AnnIndex::rebuild() {
  auto& st = *store_;
  if (log_->enabled) {
    const std::size_t bytes = backend_->storage_bytes();
    log_->records.emplace_back(detail::RebuildRecord{
        std::shared_ptr<detail::AnnBackendImpl>(backend_->clone()), st.insertions, st.rebuilds,
        bytes});
    log_->retained_bytes += bytes;
  }
  backend_->build(st);
  st.insertions = 0;
  ++st.rebuilds;
}

Index AnnIndex::slots() const { return store_->slots(); }
Index AnnIndex::dim() const { return store_->dim(); }
Index AnnIndex::live_count() const { return store_->live_count; }
bool AnnIndex::contains(Index slot) const {
  return slot >= 0 && slot < slots() && store_->live[static_cast<std::size_t>(slot)] != 0;
}
Index AnnIndex::rebuild_interval() const {
  return config_.rebuild_interval > 0 ? config_.rebuild_interval : slots();
}
Index AnnIndex::insertions_since_rebuild() const { return store_->insertions; }
std::size_t AnnIndex::rebuild_count() const { return store_->rebuilds; }

void AnnIndex::set_undo_logging(bool on) {
  if (!on) clear_log();
  log_->enabled = on;
}
bool AnnIndex::undo_logging() const { return log_->enabled; }
std::size_t AnnIndex::log_size() const { return log_->records.size(); }

void AnnIndex::rollback(std::size_t mark) {
  require(mark <= log_->records.size(), "AnnIndex::rollback: mark beyond log");
  auto& st = *store_;
  while (log_->records.size() > mark) {
    detail::UndoRecord rec = std::move(log_->records.back());
    log_->records.pop_back();
    if (auto* r = std::get_if<detail::SlotRecord>(&rec)) {
      const auto s = static_cast<std::size_t>(r->slot);
      if (st.live[s] && !r->live) --st.live_count;
      if (!st.live[s] && r->live) ++st.live_count;
      st.live[s] = r->live;
      st.generation[s] = r->generation;
      st.norms[r->slot] = r->norm;
      st.insertions = r->insertions;
      if (r->has_row) {
        for (Index d = 0; d < st.dim(); ++d) {
          st.rows(r->slot, d) = log_->rows[r->row_offset + static_cast<std::size_t>(d)];
        }
        log_->rows.resize(r->row_offset);
      }
    } else if (auto* k = std::get_if<detail::KdRecord>(&rec)) {
      backend_->undo(*k);
    } else if (auto* l = std::get_if<detail::LshRecord>(&rec)) {
      backend_->undo(*l);
    } else if (auto* b = std::get_if<detail::RebuildRecord>(&rec)) {
      backend_ = b->old_backend->clone();
      st.insertions = b->insertions;
      st.rebuilds = b->rebuilds;
      log_->retained_bytes -= b->retained_bytes;
    }
  }
}

void AnnIndex::clear_log() {
  log_->records.clear();
  log_->rows.clear();
  log_->retained_bytes = 0;
}

std::size_t AnnIndex::log_op_bytes(std::size_t mark) const {
  std::size_t bytes = 0;
  for (std::size_t i = mark; i < log_->records.size(); ++i) {
    bytes += sizeof(detail::UndoRecord);
    if (const auto* r = std::get_if<detail::SlotRecord>(&log_->records[i]); r && r->has_row) {
      bytes += static_cast<std::size_t>(dim()) * sizeof(double);
    }
  }
  return bytes;
}

std::size_t AnnIndex::log_retained_bytes() const { return log_->retained_bytes; }

std::size_t AnnIndex::log_bytes_bound(std::size_t inserts) const {
  const auto interval = static_cast<std::size_t>(rebuild_interval());
  const std::size_t per_insert = (1 + backend_->records_per_insert()) * sizeof(detail::UndoRecord) +
                                 static_cast<std::size_t>(dim()) * sizeof(double);
  return inserts * per_insert + (inserts / interval + 1) * sizeof(detail::UndoRecord);
}

double recall_at_k(const std::vector<std::vector<Neighbor>>& approx,
                   const std::vector<std::vector<Neighbor>>& exact) {
  require(approx.size() == exact.size(), "recall_at_k: query count mismatch");
  if (exact.empty()) return 1.0;
  double total = 0.0;
  for (std::size_t q = 0; q < exact.size(); ++q) {
    if (exact[q].empty()) {
      total += 1.0;
      continue;
    }
    std::unordered_set<Index> truth;
    for (const auto& n : exact[q]) truth.insert(n.slot);
    std::size_t hits = 0;
    for (const auto& n : approx[q]) hits += truth.count(n.slot);
    total += static_cast<double>(hits) / static_cast<double>(exact[q].size());
  }
  return total / static_cast<double>(exact.size());
}

}  // namespace sam
