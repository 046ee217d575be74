#pragma once

#include <cstddef>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "sam/model.hpp"

namespace sam {

enum class BenchModel { kSamExact, kSamAnn, kDam, kNtmDense, kSdnc, kDncDense };

const char* to_string(BenchModel m);
BenchModel parse_bench_model(const std::string& s);
bool is_dense(BenchModel m);

// Live / peak heap bytes, supplied by whoever owns the allocator hooks.
struct AllocationProbe {
  std::function<std::size_t()> live;
  std::function<std::size_t()> peak;
  std::function<void()> reset_peak;  // peak := live
};

struct BenchConfig {
  std::vector<BenchModel> models{BenchModel::kSamAnn, BenchModel::kDam};
  std::vector<Index> slots{1024, 2048, 4096, 8192, 16384};
  Index steps = 100;
  Index minibatch = 8;         // episodes per timed pass
  Index memory_minibatch = 1;  // episodes in the allocation-tracked pass
  Index trials = 5;
  Index warmup = 1;
  Index hidden = 100;
  Index word_size = 32;
  Index heads = 4;
  Index reads = 4;
  Index links = 8;
  Index dense_ceiling = 16384;  // dam / ntm-dense above this are skipped
  Index dnc_ceiling = 256;      // dnc-dense keeps an N x N link table per head
  std::uint64_t seed = 1;
  AllocationProbe probe;
};

struct BenchResult {
  BenchModel model = BenchModel::kSamAnn;
  Index slots = 0;
  bool skipped = false;
  std::string reason;
  double ms_per_pass = 0.0;  // median forward + backward of one minibatch
  double journal_bytes_per_step = 0.0;
  double peak_bytes = 0.0;  // heap growth during one pass, 0 without a probe
  std::vector<double> trial_ms;
};

ModelConfig bench_model_config(BenchModel m, Index slots, const BenchConfig& cfg);
Episode bench_episode(Index steps, Index bits, std::uint64_t seed);

BenchResult bench_one(BenchModel m, Index slots, const BenchConfig& cfg);
std::vector<BenchResult> run_bench(const BenchConfig& cfg,
                                   const std::function<void(const BenchResult&)>& on_row = {});

extern const char* const kBenchCsvHeader;
void write_csv_row(std::ostream& out, const BenchResult& r);

// Least-squares slope of log(y) on log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sam
