#include <algorithm>
#include <random>

#include "doctest.h"
#include "sam/error.hpp"
#include "sam/snapshot.hpp"
#include "sam/tasks.hpp"

using namespace sam;

namespace {

constexpr Index kBits = 8;

bool is_binary(const Matrix& m) {
  return (m.array() == 0.0 || m.array() == 1.0).all();
}

// Walks the recall input stream: flagged rows are key words, the rows after
// them are value words, the cue-flagged rows are the query.
Matrix decode_recall(const Episode& ep, Index iw) {
  std::vector<Matrix> keys;
  std::vector<Matrix> values;
  Matrix cue(iw, kBits);
  Index t = 0;
  while (ep.inputs(t, kBits + 1) == 0.0) {
    REQUIRE(ep.inputs(t, kBits) == 1.0);
    Matrix k = ep.inputs.block(t, 0, iw, kBits);
    t += iw;
    keys.push_back(k);
    values.push_back(ep.inputs.block(t, 0, iw, kBits));
    t += iw;
  }
  cue = ep.inputs.block(t, 0, iw, kBits);
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (keys[i] == cue) return values[i];
  FAIL("cue is not among the presented keys");
  return {};
}

}  // namespace

TEST_CASE("copy: level 1 is word, delimiter, answer") {
  const Episode ep = gen_copy({TaskKind::kCopy, 1, kBits, 1, 3});
  CHECK(ep.steps() == 3);
  CHECK(ep.answer_steps() == 1);
  CHECK(ep.inputs(1, kBits) == 1.0);
  CHECK(ep.mask == Vector((Vector(3) << 0, 0, 1).finished()));
  CHECK(ep.targets.row(2) == ep.inputs.row(0).head(kBits));
}

TEST_CASE("copy: targets equal the inputs and lengths scale with level") {
  for (Index level = 1; level <= 20; ++level) {
    const Episode ep = gen_copy({TaskKind::kCopy, level, kBits, 1, static_cast<std::uint64_t>(level)});
    CHECK(ep.steps() == 2 * level + 1);
    CHECK(ep.answer_steps() == level);
    CHECK(ep.targets.bottomRows(level) == ep.inputs.topRows(level).leftCols(kBits));
    CHECK(ep.targets.topRows(level + 1).isZero(0));
    CHECK(is_binary(ep.inputs));
  }
}

TEST_CASE("generators are pure functions of the config") {
  for (TaskKind k : {TaskKind::kCopy, TaskKind::kRecall, TaskKind::kSort}) {
    const TaskConfig c{k, 6, kBits, 2, 99};
    CHECK(generate(c) == generate(c));
    const auto a = export_episode(generate(c)).serialize();
    const auto b = export_episode(generate(c)).serialize();
    CHECK(a == b);
    TaskConfig other = c;
    other.seed = 100;
    CHECK_FALSE(generate(c) == generate(other));
  }
}

TEST_CASE("recall: one pair cues that key") {
  const Episode ep = gen_recall({TaskKind::kRecall, 1, kBits, 1, 5});
  CHECK(ep.steps() == 4);
  CHECK(ep.inputs.row(2).head(kBits) == ep.inputs.row(0).head(kBits));
  CHECK(ep.targets.row(3) == ep.inputs.row(1).head(kBits));
}

TEST_CASE("recall: decoding the stream reproduces the target") {
  for (Index iw : {1, 3}) {
    for (Index pairs = 1; pairs <= 12; ++pairs) {
      const Episode ep = gen_recall({TaskKind::kRecall, pairs, kBits, iw, static_cast<std::uint64_t>(pairs * 7 + iw)});
      CHECK(ep.steps() == 2 * pairs * iw + 2 * iw);
      CHECK(ep.answer_steps() == iw);
      CHECK(decode_recall(ep, iw) == ep.targets.bottomRows(iw));
    }
  }
}

TEST_CASE("recall: keys are pairwise distinct") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const Index pairs = 8;
    const Episode ep = gen_recall({TaskKind::kRecall, pairs, 3, 1, seed});
    std::vector<std::vector<double>> keys;
    for (Index p = 0; p < pairs; ++p) {
      const Vector k = ep.inputs.row(2 * p).head(3).transpose();
      keys.emplace_back(k.data(), k.data() + 3);
    }
    std::sort(keys.begin(), keys.end());
    CHECK(std::adjacent_find(keys.begin(), keys.end()) == keys.end());
  }
}

TEST_CASE("recall: more pairs than distinct keys is rejected") {
  CHECK_THROWS_AS(gen_recall({TaskKind::kRecall, 9, 3, 1, 1}), ContractError);
}

TEST_CASE("sort: two keys output the higher-priority one") {
  CHECK(sort_outputs(2) == 1);
  CHECK(sort_outputs(20) == 16);
  const Episode ep = gen_sort({TaskKind::kSort, 2, kBits, 1, 4});
  CHECK(ep.steps() == 4);
  const Index hi = ep.inputs(0, kBits + 1) > ep.inputs(1, kBits + 1) ? 0 : 1;
  CHECK(ep.targets.row(3) == ep.inputs.row(hi).head(kBits));
}

TEST_CASE("sort: an independent sort of the embedded pairs reproduces the target") {
  for (Index n = 1; n <= 25; ++n) {
    const Episode ep = gen_sort({TaskKind::kSort, n, kBits, 1, static_cast<std::uint64_t>(n)});
    const Index m = std::max<Index>(1, (4 * n) / 5);
    REQUIRE(ep.steps() == n + 1 + m);
    CHECK(ep.inputs(n, kBits) == 1.0);
    std::vector<std::pair<double, Index>> by_priority;
    for (Index i = 0; i < n; ++i) {
      const double p = ep.inputs(i, kBits + 1);
      CHECK((p >= -1.0 && p <= 1.0));
      by_priority.push_back({-p, i});
    }
    std::sort(by_priority.begin(), by_priority.end());
    for (Index j = 0; j + 1 < n; ++j) CHECK(by_priority[static_cast<std::size_t>(j)].first != by_priority[static_cast<std::size_t>(j + 1)].first);
    for (Index j = 0; j < m; ++j) {
      CHECK(ep.targets.row(n + 1 + j) == ep.inputs.row(by_priority[static_cast<std::size_t>(j)].second).head(kBits));
      CHECK(ep.mask[n + 1 + j] == 1.0);
    }
    CHECK(ep.mask.head(n + 1).isZero(0));
  }
}

TEST_CASE("bit error: perfect, inverted and random outputs") {
  const Episode ep = gen_recall({TaskKind::kRecall, 4, kBits, 6, 11});
  CHECK(bit_error(ep.targets, ep) == 0.0);
  const Matrix inverted = (1.0 - ep.targets.array()).matrix();
  CHECK(bit_error(inverted, ep) == static_cast<double>(ep.answer_steps() * kBits));

  // Independent fair-coin outputs: each of the 6 x 8 answer bits is wrong
  // with probability 1/2, so the expectation is 24. Standard error of the
  // mean over 4000 draws is sqrt(48 / 4) / sqrt(4000) ~= 0.055.
  std::mt19937_64 rng(12);
  std::bernoulli_distribution coin(0.5);
  double total = 0.0;
  const int draws = 4000;
  for (int d = 0; d < draws; ++d) {
    Matrix out(ep.targets.rows(), ep.targets.cols());
    for (Index i = 0; i < out.size(); ++i) out.data()[i] = coin(rng) ? 1.0 : 0.0;
    total += bit_error(out, ep);
  }
  CHECK(std::abs(total / draws - 24.0) <= 0.3);
  CHECK_THROWS_AS(bit_error(Matrix::Zero(2, 2), ep), ContractError);
}

TEST_CASE("episode export round trip") {
  const Episode ep = gen_sort({TaskKind::kSort, 7, kBits, 1, 3});
  CHECK(import_episode(Container::deserialize(export_episode(ep).serialize())) == ep);
}

TEST_CASE("level 0 is rejected") {
  CHECK_THROWS_AS(gen_copy({TaskKind::kCopy, 0, kBits, 1, 1}), ContractError);
}
