#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "sam/bench.hpp"
#include "sam/error.hpp"

using namespace sam;

namespace {

BenchConfig tiny() {
  BenchConfig c;
  c.steps = 10;
  c.minibatch = 1;
  c.trials = 5;
  c.warmup = 0;
  c.hidden = 8;
  c.word_size = 8;
  c.heads = 1;
  c.reads = 4;
  c.dense_ceiling = 512;
  c.dnc_ceiling = 64;
  return c;
}

}  // namespace

TEST_CASE("model names round trip and unknown names are input errors") {
  for (BenchModel m : {BenchModel::kSamExact, BenchModel::kSamAnn, BenchModel::kDam,
                       BenchModel::kNtmDense, BenchModel::kSdnc, BenchModel::kDncDense}) {
    CHECK(parse_bench_model(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_bench_model("lstm-only"), InputError);
}

TEST_CASE("each row is a median of positive trials") {
  BenchConfig c = tiny();
  c.models = {BenchModel::kSamAnn, BenchModel::kSamExact, BenchModel::kDam, BenchModel::kSdnc};
  c.slots = {64, 128};
  const auto rows = run_bench(c);
  REQUIRE(rows.size() == 8);
  for (const BenchResult& r : rows) {
    CHECK_FALSE(r.skipped);
    CHECK(r.trial_ms.size() == 5);
    CHECK(r.ms_per_pass > 0.0);
    CHECK(r.journal_bytes_per_step > 0.0);
    std::vector<double> sorted = r.trial_ms;
    std::sort(sorted.begin(), sorted.end());
    CHECK(r.ms_per_pass == sorted[2]);
  }
}

TEST_CASE("dense models above the ceiling are skipped, sparse ones are not") {
  BenchConfig c = tiny();
  c.models = {BenchModel::kDam, BenchModel::kNtmDense, BenchModel::kDncDense, BenchModel::kSamAnn};
  c.slots = {1024};
  const auto rows = run_bench(c);
  CHECK(rows[0].skipped);
  CHECK(rows[1].skipped);
  CHECK(rows[2].skipped);
  CHECK_FALSE(rows[3].skipped);
  CHECK(rows[0].reason.find("512") != std::string::npos);
  CHECK(rows[2].reason.find("64") != std::string::npos);
}

TEST_CASE("sparse journal bytes are constant in N, dense bytes carry the N x M checkpoint") {
  BenchConfig c = tiny();
  c.trials = 1;
  c.models = {BenchModel::kSamAnn, BenchModel::kDam};
  c.slots = {128, 256, 512};
  const auto rows = run_bench(c);
  CHECK(rows[0].journal_bytes_per_step == rows[1].journal_bytes_per_step);
  CHECK(rows[1].journal_bytes_per_step == rows[2].journal_bytes_per_step);
  for (int i = 3; i < 6; ++i) {
    const double checkpoint = static_cast<double>(rows[static_cast<std::size_t>(i)].slots * c.word_size * 8);
    CHECK(rows[static_cast<std::size_t>(i)].journal_bytes_per_step >= checkpoint);
  }
  std::vector<double> n;
  std::vector<double> b;
  for (int i = 3; i < 6; ++i) {
    n.push_back(static_cast<double>(rows[static_cast<std::size_t>(i)].slots));
    b.push_back(rows[static_cast<std::size_t>(i)].journal_bytes_per_step);
  }
  CHECK(loglog_slope(n, b) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("allocation probe measures growth above the live baseline") {
  std::size_t live = 1000;
  std::size_t peak = 0;
  int resets = 0;
  BenchConfig c = tiny();
  c.trials = 1;
  c.probe.live = [&] { return live; };
  c.probe.peak = [&] { return live + 4096; };
  c.probe.reset_peak = [&] {
    ++resets;
    peak = live;
  };
  const BenchResult r = bench_one(BenchModel::kSamAnn, 64, c);
  CHECK(resets == 1);
  CHECK(peak == live);
  CHECK(r.peak_bytes == 4096.0);
  CHECK(bench_one(BenchModel::kSamAnn, 64, tiny()).peak_bytes == 0.0);
}

TEST_CASE("log-log slope of exact power laws") {
  const std::vector<double> x{1, 2, 4, 8, 16};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 0.25));
  CHECK(loglog_slope(x, y) == doctest::Approx(0.25).epsilon(1e-12));
  y.clear();
  for (double v : x) y.push_back(7.0 * v);
  CHECK(loglog_slope(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), ContractError);
}

TEST_CASE("csv header and row formatting are pinned") {
  CHECK(std::string(kBenchCsvHeader) == "schema,model,slots,status,ms_per_pass,journal_bytes_per_step,peak_bytes");
  BenchResult ok;
  ok.model = BenchModel::kSamAnn;
  ok.slots = 1024;
  ok.ms_per_pass = 12.5;
  ok.journal_bytes_per_step = 4096;
  ok.peak_bytes = 123456789;
  BenchResult skip;
  skip.model = BenchModel::kDam;
  skip.slots = 131072;
  skip.skipped = true;
  std::ostringstream out;
  write_csv_row(out, ok);
  write_csv_row(out, skip);
  CHECK(out.str() == "1,sam-ann,1024,ok,12.5,4096,123456789\n1,dam,131072,skipped,,,\n");
}
