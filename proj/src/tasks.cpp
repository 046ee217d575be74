#include "sam/tasks.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "sam/error.hpp"
#include "sam/snapshot.hpp"

namespace sam {

namespace {

// Bits and reals straight from the engine so episodes do not depend on the
// standard library's distribution implementations.
struct TaskRng {
  std::mt19937_64 engine;
  explicit TaskRng(std::uint64_t seed) : engine(seed) {}
  double bit() { return static_cast<double>(engine() >> 63); }
  double unit() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
  Index below(Index n) { return static_cast<Index>(engine() % static_cast<std::uint64_t>(n)); }
};

Vector random_word(TaskRng& rng, Index bits) {
  Vector w(bits);
  for (Index b = 0; b < bits; ++b) w[b] = rng.bit();
  return w;
}

void check(const TaskConfig& cfg) {
  require(cfg.level >= 1, "task level must be >= 1");
  require(cfg.bits >= 1, "task word width must be >= 1");
  require(cfg.item_words >= 1, "recall item length must be >= 1");
}

Episode empty_episode(Index steps, Index bits) {
  return {Matrix::Zero(steps, task_input_width(bits)), Matrix::Zero(steps, task_output_width(bits)),
          Vector::Zero(steps)};
}

}  // namespace

const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kCopy: return "copy";
    case TaskKind::kRecall: return "recall";
    case TaskKind::kSort: return "sort";
  }
  return "?";
}

TaskKind parse_task(const std::string& s) {
  if (s == "copy") return TaskKind::kCopy;
  if (s == "recall") return TaskKind::kRecall;
  if (s == "sort") return TaskKind::kSort;
  throw InputError("unknown task '" + s + "' (copy | recall | sort)");
}

Index Episode::answer_steps() const {
  Index n = 0;
  for (Index t = 0; t < mask.size(); ++t) n += mask[t] != 0.0;
  return n;
}

Index sort_outputs(Index n) { return std::max<Index>(1, (4 * n) / 5); }

Episode gen_copy(const TaskConfig& cfg) {
  check(cfg);
  TaskRng rng(cfg.seed);
  const Index len = cfg.level;
  const Index w = cfg.bits;
  Episode ep = empty_episode(2 * len + 1, w);
  for (Index t = 0; t < len; ++t) {
    const Vector word = random_word(rng, w);
    ep.inputs.row(t).head(w) = word.transpose();
    ep.targets.row(len + 1 + t) = word.transpose();
    ep.mask[len + 1 + t] = 1.0;
  }
  ep.inputs(len, w) = 1.0;
  return ep;
}

Episode gen_recall(const TaskConfig& cfg) {
  check(cfg);
  TaskRng rng(cfg.seed);
  const Index pairs = cfg.level;
  const Index w = cfg.bits;
  const Index iw = cfg.item_words;
  require(w * iw >= 62 || pairs <= (Index{1} << (w * iw)), "recall: more pairs than distinct keys");
  std::vector<Matrix> keys;
  std::vector<Matrix> values;
  std::set<std::vector<double>> seen;
  while (static_cast<Index>(keys.size()) < pairs) {
    Matrix k(iw, w);
    for (Index r = 0; r < iw; ++r) k.row(r) = random_word(rng, w).transpose();
    std::vector<double> flat(k.data(), k.data() + k.size());
    if (!seen.insert(flat).second) continue;
    Matrix v(iw, w);
    for (Index r = 0; r < iw; ++r) v.row(r) = random_word(rng, w).transpose();
    keys.push_back(std::move(k));
    values.push_back(std::move(v));
  }
  const Index cue = rng.below(pairs);

  Episode ep = empty_episode(2 * pairs * iw + 2 * iw, w);
  Index t = 0;
  for (Index p = 0; p < pairs; ++p) {
    for (Index r = 0; r < iw; ++r, ++t) {
      ep.inputs.row(t).head(w) = keys[static_cast<std::size_t>(p)].row(r);
      ep.inputs(t, w) = 1.0;
    }
    for (Index r = 0; r < iw; ++r, ++t) {
      ep.inputs.row(t).head(w) = values[static_cast<std::size_t>(p)].row(r);
    }
  }
  for (Index r = 0; r < iw; ++r, ++t) {
    ep.inputs.row(t).head(w) = keys[static_cast<std::size_t>(cue)].row(r);
    ep.inputs(t, w + 1) = 1.0;
  }
  for (Index r = 0; r < iw; ++r, ++t) {
    ep.targets.row(t) = values[static_cast<std::size_t>(cue)].row(r);
    ep.mask[t] = 1.0;
  }
  return ep;
}

Episode gen_sort(const TaskConfig& cfg) {
  check(cfg);
  TaskRng rng(cfg.seed);
  const Index n = cfg.level;
  const Index m = sort_outputs(n);
  const Index w = cfg.bits;
  std::vector<Vector> keys;
  std::vector<double> prio;
  std::set<double> used;
  while (static_cast<Index>(keys.size()) < n) {
    Vector k = random_word(rng, w);
    const double p = 2.0 * rng.unit() - 1.0;
    if (!used.insert(p).second) continue;
    keys.push_back(std::move(k));
    prio.push_back(p);
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return prio[static_cast<std::size_t>(a)] > prio[static_cast<std::size_t>(b)];
  });

  Episode ep = empty_episode(n + 1 + m, w);
  for (Index i = 0; i < n; ++i) {
    ep.inputs.row(i).head(w) = keys[static_cast<std::size_t>(i)].transpose();
    ep.inputs(i, w + 1) = prio[static_cast<std::size_t>(i)];
  }
  ep.inputs(n, w) = 1.0;
  for (Index j = 0; j < m; ++j) {
    ep.targets.row(n + 1 + j) = keys[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])].transpose();
    ep.mask[n + 1 + j] = 1.0;
  }
  return ep;
}

Episode generate(const TaskConfig& cfg) {
  switch (cfg.kind) {
    case TaskKind::kCopy: return gen_copy(cfg);
    case TaskKind::kRecall: return gen_recall(cfg);
    case TaskKind::kSort: return gen_sort(cfg);
  }
  throw ContractError("generate: unknown task");
}

double bit_error(const Matrix& outputs, const Episode& ep) {
  require(outputs.rows() == ep.targets.rows() && outputs.cols() == ep.targets.cols(),
          "bit_error: outputs and targets differ in shape");
  double err = 0.0;
  for (Index t = 0; t < outputs.rows(); ++t) {
    if (ep.mask[t] == 0.0) continue;
    Index wrong = 0;
    for (Index b = 0; b < outputs.cols(); ++b) {
      wrong += (outputs(t, b) > 0.5) != (ep.targets(t, b) > 0.5);
    }
    err += ep.mask[t] * static_cast<double>(wrong);
  }
  return err;
}

Container export_episode(const Episode& ep) {
  Container c("episode");
  c.put_matrix("inputs", ep.inputs);
  c.put_matrix("targets", ep.targets);
  c.put_vector("mask", ep.mask);
  return c;
}

Episode import_episode(const Container& c) {
  if (c.kind() != "episode") throw InputError("import_episode: not an episode record");
  Episode ep{c.get_matrix("inputs"), c.get_matrix("targets"), c.get_vector("mask")};
  if (ep.targets.rows() != ep.inputs.rows() || ep.mask.size() != ep.inputs.rows())
    throw InputError("import_episode: inconsistent step counts");
  return ep;
}

}  // namespace sam
