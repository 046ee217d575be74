#include "sam/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <new>
#include <random>

#include "sam/error.hpp"

namespace sam {

namespace {

constexpr Index kBenchBits = 8;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Matrix random_rows(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

}  // namespace

const char* to_string(BenchModel m) {
  switch (m) {
    case BenchModel::kSamExact: return "sam-exact";
    case BenchModel::kSamAnn: return "sam-ann";
    case BenchModel::kDam: return "dam";
    case BenchModel::kNtmDense: return "ntm-dense";
    case BenchModel::kSdnc: return "sdnc";
    case BenchModel::kDncDense: return "dnc-dense";
  }
  return "?";
}

BenchModel parse_bench_model(const std::string& s) {
  for (BenchModel m : {BenchModel::kSamExact, BenchModel::kSamAnn, BenchModel::kDam,
                       BenchModel::kNtmDense, BenchModel::kSdnc, BenchModel::kDncDense}) {
    if (s == to_string(m)) return m;
  }
  throw InputError("unknown bench model '" + s +
                   "' (expected sam-exact, sam-ann, dam, ntm-dense, sdnc or dnc-dense)");
}

bool is_dense(BenchModel m) {
  return m == BenchModel::kDam || m == BenchModel::kNtmDense || m == BenchModel::kDncDense;
}

ModelConfig bench_model_config(BenchModel m, Index slots, const BenchConfig& cfg) {
  MemoryConfig mem;
  mem.slots = slots;
  mem.word_size = cfg.word_size;
  mem.heads = cfg.heads;
  mem.reads = cfg.reads;
  mem.ann.backend = m == BenchModel::kSamAnn ? AnnBackend::kKdForest : AnnBackend::kExact;
  mem.ann.seed = cfg.seed;
  ModelKind kind = ModelKind::kSam;
  switch (m) {
    case BenchModel::kSamExact:
    case BenchModel::kSamAnn: kind = ModelKind::kSam; break;
    case BenchModel::kDam: kind = ModelKind::kDam; break;
    case BenchModel::kNtmDense: kind = ModelKind::kNtmDense; break;
    case BenchModel::kSdnc: kind = ModelKind::kSdnc; break;
    case BenchModel::kDncDense: kind = ModelKind::kDncDense; break;
  }
  ModelConfig mc = make_model_config(kind, task_input_width(kBenchBits), task_output_width(kBenchBits),
                                     cfg.hidden, mem);
  if (kind == ModelKind::kSdnc) mc.links = cfg.links;
  return mc;
}

Episode bench_episode(Index steps, Index bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Episode ep;
  ep.inputs = Matrix::Zero(steps, task_input_width(bits));
  ep.targets.resize(steps, bits);
  ep.mask = Vector::Ones(steps);
  for (Index t = 0; t < steps; ++t) {
    for (Index b = 0; b < bits; ++b) {
      ep.inputs(t, b) = static_cast<double>(rng() & 1U);
      ep.targets(t, b) = static_cast<double>(rng() & 1U);
    }
  }
  return ep;
}

BenchResult bench_one(BenchModel m, Index slots, const BenchConfig& cfg) {
  BenchResult r;
  r.model = m;
  r.slots = slots;
  const Index ceiling = m == BenchModel::kDncDense ? cfg.dnc_ceiling : cfg.dense_ceiling;
  if (is_dense(m) && slots > ceiling) {
    r.skipped = true;
    r.reason = "above dense ceiling " + std::to_string(ceiling);
    return r;
  }
  require(cfg.trials >= 1 && cfg.minibatch >= 1 && cfg.steps >= 1, "bench: bad trial shape");
  try {
    Model model(bench_model_config(m, slots, cfg));
    model.reset();
    model.memory().load(random_rows(slots, cfg.word_size, cfg.seed));
    const Vector params = model.init_params(cfg.seed);
    Vector grads = Vector::Zero(params.size());
    const Episode ep = bench_episode(cfg.steps, kBenchBits, cfg.seed + 1);

    auto pass = [&](Index episodes) {
      double journal = 0.0;
      for (Index e = 0; e < episodes; ++e) journal = model.run(params, ep, &grads).journal_bytes;
      return journal;
    };

    for (Index w = 0; w < cfg.warmup; ++w) pass(cfg.minibatch);
    for (Index t = 0; t < cfg.trials; ++t) {
      const auto start = std::chrono::steady_clock::now();
      pass(cfg.minibatch);
      const auto stop = std::chrono::steady_clock::now();
      r.trial_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
    r.ms_per_pass = median(r.trial_ms);

    if (cfg.probe.live && cfg.probe.peak && cfg.probe.reset_peak) {
      const std::size_t before = cfg.probe.live();
      cfg.probe.reset_peak();
      r.journal_bytes_per_step = pass(cfg.memory_minibatch);
      r.peak_bytes = static_cast<double>(cfg.probe.peak() - before);
    } else {
      r.journal_bytes_per_step = pass(cfg.memory_minibatch);
    }
  } catch (const std::bad_alloc&) {
    r = BenchResult{};
    r.model = m;
    r.slots = slots;
    r.skipped = true;
    r.reason = "out of memory";
  }
  return r;
}

std::vector<BenchResult> run_bench(const BenchConfig& cfg,
                                   const std::function<void(const BenchResult&)>& on_row) {
  std::vector<BenchResult> rows;
  for (BenchModel m : cfg.models) {
    for (Index n : cfg.slots) {
      rows.push_back(bench_one(m, n, cfg));
      if (on_row) on_row(rows.back());
    }
  }
  return rows;
}

const char* const kBenchCsvHeader =
    "schema,model,slots,status,ms_per_pass,journal_bytes_per_step,peak_bytes";

void write_csv_row(std::ostream& out, const BenchResult& r) {
  out << "1," << to_string(r.model) << ',' << r.slots << ',';
  if (r.skipped) {
    out << "skipped,,,\n";
    return;
  }
  const auto old = out.precision(10);
  out << "ok," << r.ms_per_pass << ',' << r.journal_bytes_per_step << ',' << r.peak_bytes << '\n';
  out.precision(old);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "loglog_slope: need two or more points");
  const auto n = static_cast<Index>(x.size());
  Matrix a(n, 2);
  Vector b(n);
  for (Index i = 0; i < n; ++i) {
    require(x[static_cast<std::size_t>(i)] > 0 && y[static_cast<std::size_t>(i)] > 0,
            "loglog_slope: values must be positive");
    a(i, 0) = std::log(x[static_cast<std::size_t>(i)]);
    a(i, 1) = 1.0;
    b[i] = std::log(y[static_cast<std::size_t>(i)]);
  }
  const Vector fit = a.colPivHouseholderQr().solve(b);
  return fit[0];
}

}  // namespace sam
