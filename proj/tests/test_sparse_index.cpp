#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "test_util.hpp"

using namespace hmips;
using test::code_of;
using test::sparse_from_rows;

namespace {

constexpr float kInf = std::numeric_limits<float>::infinity();

// Literal recursive partition: split [start, end) by the indicator of the
// j-th most active dim (nonzeros first, stable), then recurse on each side
// with dim j+1. Ranges of size <= 1 and exhausted dims stop the recursion.
void partition_by_dim(const SparseMatrix& m, const std::vector<DimIndex>& ranked, std::vector<PointId>& pi,
                      std::size_t start, std::size_t end, std::size_t j) {
  if (end - start <= 1 || j >= ranked.size()) return;
  auto has = [&](PointId id) {
    const auto r = m.row(id);
    return std::find(r.dims.begin(), r.dims.end(), ranked[j]) != r.dims.end();
  };
  const auto first = pi.begin() + static_cast<std::ptrdiff_t>(start);
  const auto last = pi.begin() + static_cast<std::ptrdiff_t>(end);
  const auto pivot = static_cast<std::size_t>(std::stable_partition(first, last, has) - pi.begin());
  partition_by_dim(m, ranked, pi, start, pivot, j + 1);
  partition_by_dim(m, ranked, pi, pivot, end, j + 1);
}

std::vector<PointId> recursive_cache_sort(const SparseMatrix& m) {
  const auto counts = m.nnz_per_dim();
  std::vector<DimIndex> ranked(m.cols);
  std::iota(ranked.begin(), ranked.end(), DimIndex{0});
  std::stable_sort(ranked.begin(), ranked.end(), [&](DimIndex a, DimIndex b) { return counts[a] > counts[b]; });
  // Dims with no nonzeros never split anything.
  while (!ranked.empty() && counts[ranked.back()] == 0) ranked.pop_back();
  std::vector<PointId> pi(m.rows);
  std::iota(pi.begin(), pi.end(), PointId{0});
  partition_by_dim(m, ranked, pi, 0, pi.size(), 0);
  return pi;
}

SparseMatrix random_sparse(std::uint64_t n, std::uint64_t d, double density, std::uint64_t seed) {
  return test::random_dataset(n, d, 0, density, seed).sparse;
}

// Brute-force sparse dot of q against every row, in original order.
std::vector<double> brute_sparse(const SparseMatrix& m, SparseView q) {
  std::vector<double> out(m.rows);
  for (std::uint64_t i = 0; i < m.rows; ++i) out[i] = sparse_dot(q, m.row(i));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// prune_split

TEST(PruneSplit, ZeroEtaKeepsEverythingInData) {
  const auto m = random_sparse(50, 20, 0.3, 1);
  const auto r = prune_split(m, PruneThresholds::uniform(20, 0.0f));
  EXPECT_EQ(r.data, m);
  EXPECT_EQ(r.residual.nnz(), 0u);
  EXPECT_EQ(r.discarded_count, 0u);
}

TEST(PruneSplit, InfiniteEtaMovesEverythingToResidual) {
  const auto m = random_sparse(50, 20, 0.3, 2);
  const auto r = prune_split(m, PruneThresholds::uniform(20, kInf, 0.0f));
  EXPECT_EQ(r.data.nnz(), 0u);
  EXPECT_EQ(r.residual, m);
}

TEST(PruneSplit, TopOneOfColumn) {
  const auto m = sparse_from_rows(1, {{{0, 0.9}}, {{0, 0.5}}, {{0, 0.1}}});
  const auto th = PruneThresholds::from_top_t(m, 1);
  EXPECT_FLOAT_EQ(th.eta[0], 0.9f);
  const auto r = prune_split(m, th);
  EXPECT_EQ(r.data.values, (std::vector<float>{0.9f}));
  EXPECT_EQ(r.residual.values, (std::vector<float>{0.5f, 0.1f}));
  EXPECT_EQ(r.discarded_count, 0u);
}

TEST(PruneSplit, TopTZeroKeepsNothing) {
  const auto m = random_sparse(30, 10, 0.5, 3);
  const auto r = prune_split(m, PruneThresholds::from_top_t(m, 0));
  EXPECT_EQ(r.data.nnz(), 0u);
  EXPECT_EQ(r.residual.nnz(), m.nnz());
}

// Data part keeps at most top_t entries per dim (no ties with random floats)
// and they are the largest magnitudes of the column.
TEST(PruneSplit, TopTMatchesOrderStatistics) {
  const auto m = random_sparse(400, 25, 0.4, 4);
  const std::uint32_t t = 17;
  const auto r = prune_split(m, PruneThresholds::from_top_t(m, t));
  const auto counts = m.nnz_per_dim(), kept = r.data.nnz_per_dim();
  for (std::size_t j = 0; j < counts.size(); ++j) {
    EXPECT_EQ(kept[j], std::min<std::uint64_t>(counts[j], t)) << j;
    std::vector<float> all, data;
    for (std::uint64_t k = 0; k < m.nnz(); ++k)
      if (m.dims[k] == j) all.push_back(std::fabs(m.values[k]));
    for (std::uint64_t k = 0; k < r.data.nnz(); ++k)
      if (r.data.dims[k] == j) data.push_back(std::fabs(r.data.values[k]));
    std::sort(all.rbegin(), all.rend());
    std::sort(data.rbegin(), data.rend());
    all.resize(data.size());
    EXPECT_EQ(all, data);
  }
}

TEST(PruneSplit, PartsAreDisjointAndExhaustive) {
  const auto m = random_sparse(200, 30, 0.3, 5);
  const auto r = prune_split(m, PruneThresholds::uniform(30, 0.6f, 0.2f));
  double mass = 0.0;
  for (std::uint64_t i = 0; i < m.rows; ++i) {
    const auto orig = m.row(i), d = r.data.row(i), res = r.residual.row(i);
    std::set<DimIndex> seen;
    for (std::size_t k = 0; k < d.nnz(); ++k) {
      EXPECT_GE(std::fabs(d.values[k]), 0.6f);
      EXPECT_TRUE(seen.insert(d.dims[k]).second);
    }
    for (std::size_t k = 0; k < res.nnz(); ++k) {
      EXPECT_LT(std::fabs(res.values[k]), 0.6f);
      EXPECT_GE(std::fabs(res.values[k]), 0.2f);
      EXPECT_TRUE(seen.insert(res.dims[k]).second);
    }
    for (std::size_t k = 0; k < orig.nnz(); ++k)
      if (!seen.count(orig.dims[k])) mass += std::fabs(orig.values[k]);
    EXPECT_EQ(seen.size() + 0, d.nnz() + res.nnz());
  }
  EXPECT_EQ(r.data.nnz() + r.residual.nnz() + r.discarded_count, m.nnz());
  EXPECT_NEAR(r.discarded_mass, mass, 1e-9);
}

TEST(PruneSplit, RejectsEpsilonAboveEta) {
  const auto m = random_sparse(5, 4, 0.5, 6);
  EXPECT_EQ(code_of([&] { prune_split(m, PruneThresholds::uniform(4, 0.1f, 0.5f)); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([&] { prune_split(m, PruneThresholds::uniform(3, 0.1f)); }), Errc::dimension_mismatch);
}

// ---------------------------------------------------------------------------
// cache_sort

TEST(CacheSort, AllZeroIsIdentity) {
  SparseMatrix m(6, 5);
  for (int i = 0; i < 6; ++i) m.push_row({});
  EXPECT_EQ(cache_sort(m), Permutation::identity(6));
}

TEST(CacheSort, FourPointExample) {
  // x1 {d1}, x2 {d2}, x3 {d1, d2}, x4 {} -> x3, x1, x2, x4
  const auto m = sparse_from_rows(2, {{{0, 1.0}}, {{1, 1.0}}, {{0, 1.0}, {1, 1.0}}, {}});
  EXPECT_EQ(cache_sort(m).to_original, (std::vector<PointId>{2, 0, 1, 3}));
}

TEST(CacheSort, SingleDimensionStable) {
  const auto m = sparse_from_rows(1, {{}, {{0, 1.0}}, {}, {{0, 2.0}}, {{0, 3.0}}, {}});
  EXPECT_EQ(cache_sort(m).to_original, (std::vector<PointId>{1, 3, 4, 0, 2, 5}));
}

TEST(CacheSort, DimensionRankTiesGoToLowerDim) {
  const auto m = sparse_from_rows(3, {{{2, 1.0}}, {{1, 1.0}}, {{0, 1.0}, {2, 1.0}}, {{1, 1.0}}});
  // nnz: d0=1, d1=2, d2=2 -> ranking d1, d2, d0
  EXPECT_EQ(rank_dimensions(m), (std::vector<DimIndex>{1, 2, 0}));
  EXPECT_EQ(cache_sort(m).to_original, (std::vector<PointId>{1, 3, 2, 0}));
}

TEST(CacheSort, MatchesRecursivePartition) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_sparse(300 + 37 * seed, 12 + seed, 0.25, 100 + seed);
    EXPECT_EQ(cache_sort(m).to_original, recursive_cache_sort(m)) << seed;
  }
}

// More than 64 active dims exercises the tail comparison beyond the key prefix.
TEST(CacheSort, MatchesRecursivePartitionBeyondKeyPrefix) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SynthConfig cfg;
    cfg.n = 3000;
    cfg.d_sparse = 400;
    cfg.d_dense = 0;
    cfg.n_queries = 0;
    cfg.zipf_alpha = 0.6;
    cfg.nnz_scale = 0.5;
    cfg.seed = seed;
    const auto m = generate_synthetic(cfg).data.sparse;
    EXPECT_EQ(cache_sort(m).to_original, recursive_cache_sort(m)) << seed;
  }
}

TEST(CacheSort, IsBijection) {
  const auto m = random_sparse(1000, 40, 0.1, 9);
  const auto p = cache_sort(m);
  std::vector<PointId> sorted = p.to_original;
  std::sort(sorted.begin(), sorted.end());
  for (PointId i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
  for (PointId i = 0; i < p.size(); ++i) EXPECT_EQ(p.to_original[p.to_permuted[i]], i);
}

TEST(Permutation, RejectsNonPermutation) {
  EXPECT_EQ(code_of([] { Permutation::from_order({0, 0, 1}); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { Permutation::from_order({0, 3}); }), Errc::invalid_argument);
}

// ---------------------------------------------------------------------------
// inverted index and scan

TEST(InvertedIndex, EmptyMatrix) {
  SparseMatrix m(0, 7);
  const auto idx = build_inverted(m, Permutation::identity(0));
  EXPECT_EQ(idx.nnz(), 0u);
  for (DimIndex j = 0; j < 7; ++j) EXPECT_EQ(idx.list_size(j), 0u);
}

TEST(InvertedIndex, SinglePointTwoLists) {
  const auto m = sparse_from_rows(10, {{{2, 1.5}, {7, -2.0}}});
  const auto idx = build_inverted(m, Permutation::identity(1));
  for (DimIndex j = 0; j < 10; ++j) EXPECT_EQ(idx.list_size(j), (j == 2 || j == 7) ? 1u : 0u);
  EXPECT_EQ(idx.list_weights(7)[0], -2.0f);
}

TEST(InvertedIndex, ReconstructRoundTrip) {
  const auto m = random_sparse(100, 50, 0.2, 10);
  for (bool sorted : {false, true}) {
    const auto idx = build_inverted(m, sorted ? cache_sort(m) : Permutation::identity(m.rows));
    EXPECT_EQ(idx.reconstruct(), m);
    for (DimIndex j = 0; j < 50; ++j) {
      const auto ids = idx.list_ids(j);
      for (std::size_t k = 1; k < ids.size(); ++k) EXPECT_LT(ids[k - 1], ids[k]);
    }
  }
}

TEST(InvertedIndex, SerializationRoundTrip) {
  const auto m = random_sparse(120, 30, 0.2, 11);
  const auto idx = build_inverted(m, cache_sort(m));
  ByteWriter w;
  write_inverted(w, idx);
  const auto bytes = std::move(w).take();
  EXPECT_EQ(std::string(bytes.data(), 4), "HSIX");
  ByteReader r(bytes);
  EXPECT_EQ(read_inverted(r), idx);
  EXPECT_EQ(r.remaining(), 0u);
  const std::vector<char> cut(bytes.begin(), bytes.end() - 3);
  ByteReader rc(cut);
  EXPECT_EQ(code_of([&] { read_inverted(rc); }), Errc::truncated);
}

TEST(SparseScan, EmptyQuery) {
  const auto m = random_sparse(40, 10, 0.3, 12);
  const auto idx = build_inverted(m, cache_sort(m));
  Accumulator<double> acc(m.rows);
  sparse_scan(idx, SparseView{}, acc);
  for (double s : acc.scores()) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(acc.touched_lines(), 0u);
}

TEST(SparseScan, SinglePosting) {
  const auto m = sparse_from_rows(5, {{}, {{3, 0.25}}, {}});
  const auto idx = build_inverted(m, Permutation::identity(3));
  const SparseVector q{{3}, {4.0f}};
  Accumulator<double> acc(3);
  sparse_scan(idx, q.view(), acc);
  EXPECT_EQ(acc.scores()[1], 1.0);
  EXPECT_EQ(acc.scores()[0], 0.0);
  EXPECT_EQ(acc.touched_lines(), 1u);
}

TEST(SparseScan, MatchesBruteForce) {
  const auto m = random_sparse(500, 60, 0.1, 13);
  const auto queries = random_sparse(30, 60, 0.3, 14);
  const auto idx = build_inverted(m, cache_sort(m));
  Accumulator<double> acc(m.rows);
  for (std::uint64_t qi = 0; qi < queries.rows; ++qi) {
    acc.reset();
    sparse_scan(idx, queries.row(qi), acc);
    const auto truth = brute_sparse(m, queries.row(qi));
    for (std::uint64_t i = 0; i < m.rows; ++i)
      EXPECT_NEAR(acc.scores()[idx.perm.to_permuted[i]], truth[i], 1e-6 * std::max(1.0, std::fabs(truth[i])));
  }
}

TEST(SparseScan, QueryDimOutOfRange) {
  const auto m = random_sparse(10, 5, 0.5, 15);
  const auto idx = build_inverted(m, Permutation::identity(10));
  Accumulator<float> acc(10);
  const SparseVector q{{5}, {1.0f}};
  EXPECT_EQ(code_of([&] { sparse_scan(idx, q.view(), acc); }), Errc::out_of_range);
}

// ---------------------------------------------------------------------------
// cache lines

TEST(CacheLines, FullColumnTouchesEveryLine) {
  std::vector<std::vector<std::pair<DimIndex, double>>> rows(64, {{0, 1.0}});
  const auto m = sparse_from_rows(3, rows);
  const auto idx = build_inverted(m, Permutation::identity(64));
  const auto q = sparse_from_rows(3, {{{0, 1.0}}});
  EXPECT_DOUBLE_EQ(measure_cachelines(idx, q, 16), 4.0);
}

TEST(CacheLines, NoOverlapIsZero) {
  const auto m = sparse_from_rows(4, {{{0, 1.0}}, {{1, 1.0}}});
  const auto idx = build_inverted(m, Permutation::identity(2));
  const auto q = sparse_from_rows(4, {{{2, 1.0}, {3, 1.0}}});
  EXPECT_DOUBLE_EQ(measure_cachelines(idx, q, 16), 0.0);
}

TEST(CacheLines, AccumulatorCountMatchesMeasure) {
  const auto m = random_sparse(700, 40, 0.08, 16);
  const auto qs = random_sparse(25, 40, 0.2, 17);
  const auto idx = build_inverted(m, cache_sort(m));
  Accumulator<float> acc(m.rows, 16);
  std::uint64_t total = 0;
  for (std::uint64_t i = 0; i < qs.rows; ++i) {
    acc.reset();
    sparse_scan(idx, qs.row(i), acc);
    total += acc.touched_lines();
  }
  EXPECT_DOUBLE_EQ(measure_cachelines(idx, qs, 16), static_cast<double>(total) / qs.rows);
}

TEST(CacheLines, SortedNeverWorseOnPowerLawSuites) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthConfig cfg;
    cfg.n = 4000;
    cfg.d_sparse = 2000;
    cfg.d_dense = 0;
    cfg.n_queries = 50;
    cfg.zipf_alpha = 1.0 + 0.05 * static_cast<double>(seed);
    cfg.nnz_scale = 0.5;
    cfg.seed = seed;
    const auto s = generate_synthetic(cfg);
    const auto sorted = build_inverted(s.data.sparse, cache_sort(s.data.sparse));
    const auto plain = build_inverted(s.data.sparse, Permutation::identity(cfg.n));
    EXPECT_LE(measure_cachelines(sorted, s.queries.sparse, 16), measure_cachelines(plain, s.queries.sparse, 16))
        << seed;
  }
}

// ---------------------------------------------------------------------------
// cost model

TEST(CostModel, SingleFullDim) {
  CostModelParams p{{1.0}, {1.0}, 16, 16};
  EXPECT_DOUBLE_EQ(expected_cachelines_unsorted(p), 1.0);
  EXPECT_DOUBLE_EQ(expected_cachelines_sorted_bound(p), 1.0);
}

TEST(CostModel, InactiveDataIsFree) {
  CostModelParams p{{0.0, 0.0, 0.0}, {1.0, 0.5, 0.2}, 1000, 16};
  EXPECT_EQ(expected_cachelines_unsorted(p), 0.0);
}

TEST(CostModel, SortedBoundFirstDimMatchesUnsorted) {
  CostModelParams p{{1.0}, {0.7}, 4096, 16};
  EXPECT_DOUBLE_EQ(sorted_lines_bound_for_dim(p, 0), unsorted_lines_for_dim(p, 0));
}

TEST(CostModel, Validation) {
  CostModelParams ascending{{0.1, 0.2}, {1.0, 1.0}, 10, 16};
  EXPECT_EQ(code_of([&] { expected_cachelines_unsorted(ascending); }), Errc::invalid_argument);
  CostModelParams ragged{{0.1}, {1.0, 1.0}, 10, 16};
  EXPECT_EQ(code_of([&] { expected_cachelines_unsorted(ragged); }), Errc::dimension_mismatch);
}

// Simulate Bernoulli(P_j) columns on N=1e6 and count touched lines directly;
// the expectation weights each dim by Q_j.
TEST(CostModel, UnsortedExpectationMatchesSimulation) {
  const std::uint64_t n = 1000000;
  const std::uint32_t b = 16;
  const std::size_t d = 3000;
  CostModelParams p;
  p.N = n;
  p.B = b;
  for (std::size_t j = 1; j <= d; ++j) {
    p.P.push_back(1.0 / (static_cast<double>(j) * j));
    p.Q.push_back(1.0 / (static_cast<double>(j) * j));
  }
  std::mt19937_64 rng(99);
  double simulated = 0.0;
  std::vector<std::uint8_t> touched(n / b);
  for (std::size_t j = 0; j < d; ++j) {
    std::fill(touched.begin(), touched.end(), 0);
    std::uint64_t lines = 0;
    if (p.P[j] >= 1.0) {
      lines = n / b;
    } else {
      std::geometric_distribution<std::uint64_t> gap(p.P[j]);
      for (std::uint64_t i = gap(rng); i < n; i += 1 + gap(rng))
        if (!touched[i / b]) {
          touched[i / b] = 1;
          ++lines;
        }
    }
    simulated += p.Q[j] * static_cast<double>(lines);
  }
  const double expected = expected_cachelines_unsorted(p);
  EXPECT_NEAR(simulated / expected, 1.0, 0.005);
}

// ---------------------------------------------------------------------------
// Chernoff pruning bound

TEST(ChernoffBound, DegenerateInputsGiveOne) {
  EXPECT_EQ(chernoff_prune_bound(0.1, 1.0, 0.0, 100, 0.1), 1.0);
  EXPECT_EQ(chernoff_prune_bound(0.1, 0.0, 0.5, 100, 0.1), 1.0);
}

TEST(ChernoffBound, ApproachesOne) {
  EXPECT_GT(chernoff_prune_bound(1e6, 1.0, 0.01, 1e4, 0.01), 1.0 - 1e-12);
}

TEST(ChernoffBound, ZeroExponentClamps) {
  // n_eps = eps / (M eta) = d p^2
  const double d = 1e4, p = 0.01, m = 1.0, eta = 0.1;
  EXPECT_EQ(chernoff_prune_bound(d * p * p * m * eta, m, eta, d, p), 0.0);
}

TEST(ChernoffBound, DirectFormula) {
  const double n_eps = 1.0 / (1.0 * 0.01), mu = 1e4 * 1e-3 * 1e-3;
  const double want = 1.0 - 2.0 * std::exp(-(n_eps - mu) * (n_eps - mu) / (n_eps + mu));
  EXPECT_NEAR(chernoff_prune_bound(1.0, 1.0, 0.01, 1e4, 1e-3), want, 1e-15);
  EXPECT_NEAR(want, 1.0 - 2.0 * std::exp(-(99.99 * 99.99) / 100.01), 1e-15);
}
