#include <algorithm>
#include <random>

#include "doctest.h"
#include "sam/ann_index.hpp"
#include "sam/error.hpp"

using namespace sam;

namespace {

Matrix unit_rows(std::mt19937_64& rng, Index n, Index d) {
  std::normal_distribution<double> g;
  Matrix m(n, d);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  m.rowwise().normalize();
  return m;
}

// Brute force over every slot: cosine similarity, ties to the lower slot.
std::vector<Index> brute_top_k(const Matrix& rows, const Vector& q, Index k) {
  std::vector<std::pair<double, Index>> all;
  for (Index i = 0; i < rows.rows(); ++i) {
    const double s = q.dot(rows.row(i).transpose()) / (q.norm() * rows.row(i).norm() + kCosineEpsilon);
    all.push_back({-s, i});
  }
  std::sort(all.begin(), all.end());
  std::vector<Index> out;
  for (Index i = 0; i < std::min<Index>(k, rows.rows()); ++i) out.push_back(all[static_cast<std::size_t>(i)].second);
  return out;
}

std::vector<Index> slots_of(const std::vector<Neighbor>& n) {
  std::vector<Index> s;
  for (const auto& x : n) s.push_back(x.slot);
  return s;
}

AnnConfig config(AnnBackend b) {
  AnnConfig c;
  c.backend = b;
  return c;
}

}  // namespace

TEST_CASE("single row answers every query") {
  for (AnnBackend b : {AnnBackend::kExact, AnnBackend::kKdForest, AnnBackend::kLsh}) {
    Matrix rows(1, 4);
    rows << 1, 2, 3, 4;
    const AnnIndex idx = AnnIndex::build(rows, config(b));
    const Vector q = Vector::LinSpaced(4, 1, 4);
    const auto r = idx.query(q, 3);
    REQUIRE(r.size() == 1);
    CHECK(r[0].slot == 0);
  }
}

TEST_CASE("orthogonal basis: e3 finds slot 3") {
  for (AnnBackend b : {AnnBackend::kExact, AnnBackend::kKdForest}) {
    const Matrix rows = Matrix::Identity(8, 8);
    const AnnIndex idx = AnnIndex::build(rows, config(b));
    const auto r = idx.query(Vector::Unit(8, 3), 1);
    REQUIRE(r.size() == 1);
    CHECK(r[0].slot == 3);
  }
}

TEST_CASE("exact backend equals brute force") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix rows = unit_rows(rng, 16, 8);
    const AnnIndex idx = AnnIndex::build(rows, config(AnnBackend::kExact));
    const Vector q = unit_rows(rng, 1, 8).row(0).transpose();
    CHECK(slots_of(idx.query(q, 4)) == brute_top_k(rows, q, 4));
  }
}

TEST_CASE("a stored row is its own nearest neighbour") {
  std::mt19937_64 rng(12);
  const Matrix rows = unit_rows(rng, 32, 8);
  const AnnIndex idx = AnnIndex::build(rows, config(AnnBackend::kExact));
  for (Index i = 0; i < 32; ++i) {
    const auto r = idx.query(rows.row(i).transpose(), 1);
    CHECK(r[0].slot == i);
    CHECK(r[0].similarity == doctest::Approx(1.0 / (1.0 + kCosineEpsilon)).epsilon(1e-12));
  }
}

TEST_CASE("k larger than the live set returns every live slot") {
  Matrix rows = Matrix::Zero(10, 3);
  rows.row(2) << 1, 0, 0;
  rows.row(7) << 0, 1, 0;
  const AnnIndex idx = AnnIndex::build(rows, config(AnnBackend::kExact));
  CHECK(idx.live_count() == 2);
  auto s = slots_of(idx.query(Vector::Ones(3), 5));
  std::sort(s.begin(), s.end());
  CHECK(s == std::vector<Index>{2, 7});
}

TEST_CASE("insert then query, and insert/remove round trip") {
  std::mt19937_64 rng(13);
  for (AnnBackend b : {AnnBackend::kExact, AnnBackend::kKdForest, AnnBackend::kLsh}) {
    Matrix rows = unit_rows(rng, 64, 16);
    rows.row(5).setZero();
    AnnIndex idx = AnnIndex::build(rows, config(b));
    const Matrix probes = unit_rows(rng, 20, 16);
    std::vector<std::vector<Neighbor>> before;
    for (Index p = 0; p < probes.rows(); ++p) before.push_back(idx.query(probes.row(p).transpose(), 4));

    const Vector v = unit_rows(rng, 1, 16).row(0).transpose();
    idx.insert(5, v);
    CHECK(idx.query(v, 1)[0].slot == 5);
    idx.remove(5);
    for (Index p = 0; p < probes.rows(); ++p) CHECK(idx.query(probes.row(p).transpose(), 4) == before[static_cast<std::size_t>(p)]);
  }
}

TEST_CASE("remove of an unindexed slot is a no-op") {
  Matrix rows = Matrix::Zero(4, 2);
  rows.row(0) << 1, 0;
  AnnIndex idx = AnnIndex::build(rows, config(AnnBackend::kExact));
  idx.remove(3);
  CHECK(idx.live_count() == 1);
}

TEST_CASE("N insertions trigger exactly one rebuild") {
  std::mt19937_64 rng(14);
  const Index n = 32;
  for (AnnBackend b : {AnnBackend::kExact, AnnBackend::kKdForest, AnnBackend::kLsh}) {
    AnnIndex idx = AnnIndex::build(unit_rows(rng, n, 8), config(b));
    const std::size_t start = idx.rebuild_count();
    const Matrix fresh = unit_rows(rng, n, 8);
    for (Index i = 0; i < n - 1; ++i) idx.insert(i, fresh.row(i).transpose());
    CHECK(idx.rebuild_count() == start);
    idx.insert(n - 1, fresh.row(n - 1).transpose());
    CHECK(idx.rebuild_count() == start + 1);
    CHECK(idx.insertions_since_rebuild() == 0);
  }
}

TEST_CASE("kd-forest recall grows with the check budget and is exact at a full scan") {
  std::mt19937_64 rng(15);
  const Matrix rows = unit_rows(rng, 512, 32);
  const AnnIndex exact = AnnIndex::build(rows, config(AnnBackend::kExact));
  const Matrix queries = unit_rows(rng, 100, 32);
  std::vector<std::vector<Neighbor>> e;
  for (Index q = 0; q < queries.rows(); ++q) e.push_back(exact.query(queries.row(q).transpose(), 4));
  double last = 0.0;
  for (int checks : {8, 32, 128, 512}) {
    AnnConfig c = config(AnnBackend::kKdForest);
    c.kd_checks = checks;
    const AnnIndex kd = AnnIndex::build(rows, c);
    std::vector<std::vector<Neighbor>> a;
    for (Index q = 0; q < queries.rows(); ++q) {
      a.push_back(kd.query(queries.row(q).transpose(), 4));
      for (const auto& x : a.back()) CHECK((x.slot >= 0 && x.slot < 512));
    }
    const double r = recall_at_k(a, e);
    CHECK(r >= last);
    last = r;
  }
  CHECK(last == 1.0);
}

TEST_CASE("rebuild after interleaved edits leaves exact answers unchanged") {
  std::mt19937_64 rng(16);
  const Index n = 64;
  AnnConfig c = config(AnnBackend::kExact);
  c.rebuild_interval = 1000000;
  AnnIndex idx = AnnIndex::build(unit_rows(rng, n, 8), c);
  for (Index op = 0; op < 10 * n; ++op) {
    const Index slot = static_cast<Index>(rng() % n);
    if (rng() % 4 == 0) {
      idx.remove(slot);
    } else {
      idx.insert(slot, unit_rows(rng, 1, 8).row(0).transpose());
    }
  }
  const Matrix probes = unit_rows(rng, 30, 8);
  std::vector<std::vector<Neighbor>> before;
  for (Index p = 0; p < probes.rows(); ++p) before.push_back(idx.query(probes.row(p).transpose(), 4));
  idx.rebuild();
  for (Index p = 0; p < probes.rows(); ++p) CHECK(idx.query(probes.row(p).transpose(), 4) == before[static_cast<std::size_t>(p)]);
}

TEST_CASE("rollback restores answers across inserts and rebuilds") {
  std::mt19937_64 rng(17);
  for (AnnBackend b : {AnnBackend::kExact, AnnBackend::kKdForest, AnnBackend::kLsh}) {
    AnnIndex idx = AnnIndex::build(unit_rows(rng, 32, 8), config(b));
    idx.set_undo_logging(true);
    const Matrix probes = unit_rows(rng, 20, 8);
    std::vector<std::vector<Neighbor>> before;
    for (Index p = 0; p < probes.rows(); ++p) before.push_back(idx.query(probes.row(p).transpose(), 4));
    const std::size_t mark = idx.log_size();
    for (int k = 0; k < 70; ++k) idx.insert(static_cast<Index>(rng() % 32), unit_rows(rng, 1, 8).row(0).transpose());
    CHECK(idx.rebuild_count() >= 2);
    idx.rollback(mark);
    for (Index p = 0; p < probes.rows(); ++p) CHECK(idx.query(probes.row(p).transpose(), 4) == before[static_cast<std::size_t>(p)]);
  }
}

TEST_CASE("configuration errors") {
  AnnConfig c = config(AnnBackend::kLsh);
  c.metric = AnnMetric::kEuclidean;
  CHECK_THROWS_AS(AnnIndex::build(Matrix::Identity(4, 4), c), ContractError);
  AnnConfig kd = config(AnnBackend::kKdForest);
  kd.kd_trees = 0;
  CHECK_THROWS_AS(AnnIndex::build(Matrix::Identity(4, 4), kd), ContractError);
  const AnnIndex empty = AnnIndex::build(Matrix::Zero(4, 4), config(AnnBackend::kExact));
  CHECK(empty.query(Vector::Ones(4), 2).empty());
}
