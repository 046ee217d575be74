// Random-hyperplane LSH: a table key is the sign pattern of the vector against
// `lsh_bits` Gaussian directions; tables are OR-amplified and, optionally,
// buckets within a small Hamming radius of the query key are probed too.

#include <random>
#include <unordered_map>
#include <unordered_set>

#include "ann_internal.hpp"

namespace sam::detail {
namespace {

struct Entry {
  Index slot;
  std::uint32_t generation;
};

class LshIndex final : public AnnBackendImpl {
 public:
  LshIndex(const AnnConfig& config, Index dim)
      : tables_(static_cast<std::size_t>(config.lsh_tables)),
        bits_(config.lsh_bits),
        radius_(config.lsh_probe_radius) {
    std::mt19937_64 rng(config.seed ^ 0x2f6d8b4a1c9e7053ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    planes_.resize(config.lsh_tables * config.lsh_bits, dim);
    for (Index r = 0; r < planes_.rows(); ++r) {
      for (Index c = 0; c < planes_.cols(); ++c) planes_(r, c) = gauss(rng);
    }
  }

  std::unique_ptr<AnnBackendImpl> clone() const override {
    return std::make_unique<LshIndex>(*this);
  }

  void build(const AnnStore& store) override {
    for (auto& t : tables_) t.clear();
    for (Index s : store.live_slots()) insert(store, s, nullptr);
  }

  void insert(const AnnStore& store, Index slot, AnnUndoLog* log) override {
    const Vector v = store.rows.row(slot).transpose();
    const std::uint32_t gen = store.generation[static_cast<std::size_t>(slot)];
    for (std::size_t t = 0; t < tables_.size(); ++t) {
      const std::uint64_t code = hash(v, t);
      tables_[t][code].push_back({slot, gen});
      if (log) log->records.emplace_back(LshRecord{static_cast<std::int32_t>(t), code});
    }
  }

  void search(const AnnStore& store, const PreparedQuery& q, Index,
              std::vector<Index>& candidates) const override {
    std::unordered_set<Index> seen;
    auto probe = [&](const Bucket& table, std::uint64_t code) {
      auto it = table.find(code);
      if (it == table.end()) return;
      for (const Entry& e : it->second) {
        if (store.valid(e.slot, e.generation) && seen.insert(e.slot).second) {
          candidates.push_back(e.slot);
        }
      }
    };
    for (std::size_t t = 0; t < tables_.size(); ++t) {
      const std::uint64_t code = hash(q.raw, t);
      probe(tables_[t], code);
      if (radius_ >= 1) {
        for (int i = 0; i < bits_; ++i) {
          probe(tables_[t], code ^ (std::uint64_t{1} << i));
          if (radius_ >= 2) {
            for (int j = i + 1; j < bits_; ++j) {
              probe(tables_[t], code ^ (std::uint64_t{1} << i) ^ (std::uint64_t{1} << j));
            }
          }
        }
      }
    }
  }

  void undo(const LshRecord& r) override {
    auto& table = tables_[static_cast<std::size_t>(r.table)];
    auto it = table.find(r.code);
    it->second.pop_back();
    if (it->second.empty()) table.erase(it);
  }

  std::size_t records_per_insert() const override { return tables_.size(); }

  std::size_t storage_bytes() const override {
    std::size_t b = 0;
    for (const auto& t : tables_) {
      for (const auto& [code, bucket] : t) b += sizeof(code) + bucket.size() * sizeof(Entry);
    }
    return b;
  }

 private:
  using Bucket = std::unordered_map<std::uint64_t, std::vector<Entry>>;

  std::uint64_t hash(const Vector& v, std::size_t table) const {
    std::uint64_t code = 0;
    const Index base = static_cast<Index>(table) * bits_;
    for (int b = 0; b < bits_; ++b) {
      if (planes_.row(base + b).dot(v.transpose()) >= 0.0) code |= std::uint64_t{1} << b;
    }
    return code;
  }

  std::vector<Bucket> tables_;
  int bits_;
  int radius_;
  Matrix planes_;
};

}  // namespace

std::unique_ptr<AnnBackendImpl> make_lsh_backend(const AnnConfig& config, Index dim) {
  return std::make_unique<LshIndex>(config, dim);
}

}  // namespace sam::detail
