#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "test_util.hpp"

using namespace hmips;
using test::code_of;

namespace {

SyntheticData bench_synth(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n = 3000;
  cfg.n_queries = 15;
  cfg.d_sparse = 3000;
  cfg.d_dense = 16;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

HybridIndexConfig bench_config() {
  HybridIndexConfig cfg;
  cfg.top_t = 30;
  cfg.kmeans_iters = 8;
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// oracle and recall

TEST(Oracle, SinglePoint) {
  const auto ds = test::random_dataset(1, 10, 3, 0.5, 1);
  const auto q = test::random_dataset(1, 10, 3, 0.5, 2).vector_at(0);
  EXPECT_EQ(ids_of(brute_force_topk(ds, q, 5)), (std::vector<PointId>{0}));
}

TEST(Oracle, FullRankingMatchesNaiveScorer) {
  const auto ds = test::random_dataset(300, 25, 4, 0.2, 3);
  const auto qs = test::random_dataset(1000, 25, 4, 0.2, 4);
  const auto vs = ds.to_vectors();
  for (std::uint64_t qi = 0; qi < qs.size(); ++qi) {
    const auto q = qs.vector_at(qi);
    std::vector<double> naive(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) naive[i] = test::padded_dot(q, vs[i]);
    const std::size_t h = qi == 0 ? vs.size() : 10;
    const auto got = brute_force_topk(ds, q, h);
    const auto want = test::sorted_ids(naive, h);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t r = 0; r < h; ++r) {
      // Ids agree unless two scores differ only by rounding.
      if (got[r].id != want[r]) EXPECT_NEAR(naive[got[r].id], naive[want[r]], 1e-12);
      EXPECT_NEAR(got[r].score, naive[got[r].id], 1e-12);
    }
  }
}

TEST(Recall, Examples) {
  std::vector<PointId> truth(20), disjoint(20), half(20);
  for (PointId i = 0; i < 20; ++i) {
    truth[i] = i;
    disjoint[i] = 100 + i;
    half[i] = i < 10 ? i : 200 + i;
  }
  EXPECT_EQ(recall_at_h(truth, truth, 20), 1.0);
  EXPECT_EQ(recall_at_h(disjoint, truth, 20), 0.0);
  EXPECT_EQ(recall_at_h(half, truth, 20), 0.5);
  const std::vector<PointId> dup{0, 0, 0};
  EXPECT_DOUBLE_EQ(recall_at_h(dup, truth, 3), 1.0 / 3.0);
  EXPECT_EQ(code_of([&] { recall_at_h(truth, truth, 0); }), Errc::invalid_argument);
}

// ---------------------------------------------------------------------------
// ratings

TEST(Ratings, ParsesSeparatorsAndRemapsIds) {
  std::istringstream in("# header\n\n10 500 4\n7,500,3.5\n10::42::5\n7\t42\t1\n");
  const auto m = read_ratings(in);
  EXPECT_EQ(m.users, 2u);
  EXPECT_EQ(m.items, 2u);
  ASSERT_EQ(m.triplets.size(), 4u);
  EXPECT_EQ(m.triplets[0].user, 1u);  // raw 10 -> 1, raw 7 -> 0
  EXPECT_EQ(m.triplets[0].item, 1u);  // raw 500 -> 1, raw 42 -> 0
  EXPECT_EQ(m.triplets[1].value, 3.5f);
  const auto csr = m.to_csr();
  EXPECT_EQ(csr.rows, 2u);
  EXPECT_EQ(csr.nnz(), 4u);
  csr.validate();
}

TEST(Ratings, Errors) {
  std::istringstream out_of_range("1 2 9\n");
  EXPECT_EQ(code_of([&] { read_ratings(out_of_range); }), Errc::out_of_range);
  std::istringstream malformed("1 two 3\n");
  EXPECT_EQ(code_of([&] { read_ratings(malformed); }), Errc::invalid_argument);
  EXPECT_EQ(code_of([] { load_ratings("/nonexistent/ratings.txt"); }), Errc::io);
}

// ---------------------------------------------------------------------------
// SVD embedding

TEST(Svd, RankOneRecoversFactors) {
  const std::vector<double> u{1, 2, 0, -1, 3}, v{0.5, 1, -2, 0, 4, 1};
  SparseMatrix m(5, 6);
  for (double ui : u) {
    SparseVector row;
    for (std::size_t j = 0; j < v.size(); ++j)
      if (ui * v[j] != 0.0) {
        row.dims.push_back(static_cast<DimIndex>(j));
        row.values.push_back(static_cast<float>(ui * v[j]));
      }
    m.push_row(row.view());
  }
  const auto r = truncated_svd(m, 1);
  Eigen::Map<const Eigen::VectorXd> ue(u.data(), 5), ve(v.data(), 6);
  EXPECT_NEAR(r.s(0), ue.norm() * ve.norm(), 1e-6);
  EXPECT_NEAR(std::fabs(r.u.col(0).dot(ue.normalized())), 1.0, 1e-9);
  EXPECT_NEAR(std::fabs(r.v.col(0).dot(ve.normalized())), 1.0, 1e-9);
}

TEST(Svd, RankZeroAndTooLarge) {
  const auto m = test::random_dataset(10, 6, 0, 0.5, 5).sparse;
  const auto r = truncated_svd(m, 0);
  EXPECT_EQ(r.s.size(), 0);
  EXPECT_EQ(code_of([&] { truncated_svd(m, 7); }), Errc::invalid_argument);
}

TEST(Svd, LeadingValuesMatchDenseOracle) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  const int rows = 1000, cols = 500, rank = 10;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
  for (int k = 0; k < rank; ++k) {
    Eigen::VectorXd x(rows), y(cols);
    for (auto& e : x) e = g(rng);
    for (auto& e : y) e = g(rng);
    a += (10.0 * (rank - k)) * x * y.transpose() / std::sqrt(double(rows) * cols);
  }
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) += 0.01 * g(rng);
  SparseMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    SparseVector row;
    for (int j = 0; j < cols; ++j) {
      const auto f = static_cast<float>(a(i, j));
      if (f != 0.0f) {
        row.dims.push_back(static_cast<DimIndex>(j));
        row.values.push_back(f);
      }
      a(i, j) = f;  // oracle sees the stored single-precision matrix
    }
    m.push_row(row.view());
  }
  const auto r = truncated_svd(m, rank);
  const Eigen::JacobiSVD<Eigen::MatrixXd> oracle(a);
  for (int k = 0; k < rank; ++k)
    EXPECT_NEAR(r.s(k) / oracle.singularValues()(k), 1.0, 1e-3) << k;
}

TEST(Svd, EmbedShapesAndLambda) {
  std::ostringstream text;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> user(0, 199), item(0, 99), stars(1, 5);
  for (int k = 0; k < 3000; ++k) text << user(rng) << ' ' << item(rng) << ' ' << stars(rng) << '\n';
  std::istringstream in(text.str());
  const auto ratings = read_ratings(in);
  const auto e = svd_embed(ratings, 8);
  EXPECT_EQ(e.data.size(), ratings.users);
  EXPECT_EQ(e.data.d_sparse(), ratings.items);
  EXPECT_EQ(e.data.d_dense(), 8u);
  e.data.validate();
  double sn = 0.0, dn = 0.0;
  for (std::uint64_t i = 0; i < e.data.size(); ++i) {
    const auto p = e.data.point(i);
    sn += std::sqrt(sparse_dot(p.sparse, p.sparse));
    dn += std::sqrt(dense_dot(p.dense, p.dense));
  }
  EXPECT_NEAR(sn / dn, 1.0, 1e-4);
  EXPECT_EQ(svd_embed(ratings, 0).data.d_dense(), 0u);
  EXPECT_EQ(svd_embed(ratings, 4, 2.5).lambda, 2.5);
}

TEST(Svd, QuerySplitPartitionsRows) {
  const auto ds = test::random_dataset(100, 10, 2, 0.3, 8);
  const auto s = split_queries(ds, 12, 3);
  EXPECT_EQ(s.queries.size(), 12u);
  EXPECT_EQ(s.data.size(), 88u);
  for (std::size_t k = 0; k < s.query_rows.size(); ++k) EXPECT_EQ(s.queries.vector_at(k), ds.vector_at(s.query_rows[k]));
  const auto again = split_queries(ds, 12, 3);
  EXPECT_EQ(again.query_rows, s.query_rows);
}

// ---------------------------------------------------------------------------
// baselines and benchmark

TEST(Methods, NamesMatchFactoryKeys) {
  for (const auto& name : method_names()) EXPECT_EQ(make_method(name)->name(), name);
  EXPECT_EQ(code_of([] { make_method("nope"); }), Errc::invalid_argument);
}

TEST(Methods, ExactMethodsHaveFullRecall) {
  const auto s = bench_synth(1);
  BenchOptions opt;
  opt.repetitions = 1;
  const auto rep = run_benchmark(std::make_shared<const HybridDataset>(s.data), s.queries,
                                 {"sparse_inverted_index", "sparse_brute_force", "dense_brute_force"}, bench_config(), opt);
  for (const auto& row : rep.rows) {
    EXPECT_FALSE(row.skipped) << row.method;
    EXPECT_EQ(row.recall, 1.0) << row.method;
    EXPECT_GT(row.index_bytes, 0u);
  }
}

TEST(Methods, HybridBeatsSparseOnlyWithoutReorder) {
  const auto s = bench_synth(2);
  BenchOptions opt;
  opt.repetitions = 1;
  const auto rep = run_benchmark(std::make_shared<const HybridDataset>(s.data), s.queries,
                                 {"hybrid", "sparse_ii_no_reorder"}, bench_config(), opt);
  EXPECT_GE(rep.find("hybrid")->recall, rep.find("sparse_ii_no_reorder")->recall);
}

TEST(Methods, ApproximateBaselinesRun) {
  const auto s = bench_synth(3);
  BenchOptions opt;
  opt.repetitions = 1;
  const auto rep = run_benchmark(std::make_shared<const HybridDataset>(s.data), s.queries,
                                 {"hamming_512", "dense_pq_rerank_10k", "sparse_ii_rerank_20k"}, bench_config(), opt);
  for (const auto& row : rep.rows) {
    EXPECT_FALSE(row.skipped);
    EXPECT_GE(row.recall, 0.0);
    EXPECT_LE(row.recall, 1.0);
  }
  // Both rerank depths exceed N here, so they rescore everything exactly.
  EXPECT_EQ(rep.find("dense_pq_rerank_10k")->recall, 1.0);
  EXPECT_EQ(rep.find("sparse_ii_rerank_20k")->recall, 1.0);
}

TEST(Methods, OversizedDenseBruteForceIsSkipped) {
  const auto s = bench_synth(4);
  DenseBruteForceMethod m(1024);
  const std::vector<std::vector<PointId>> truth(s.queries.size());
  const auto row = bench_method(m, std::make_shared<const HybridDataset>(s.data), s.queries, truth, {});
  EXPECT_TRUE(row.skipped);
  BenchReport rep;
  rep.rows.push_back(row);
  EXPECT_NE(rep.to_csv().find("dense_brute_force,synthetic,3000,3000,16,20,NA,NA,NA,NA,NA"), std::string::npos);
  EXPECT_NE(rep.to_table().find("OOM"), std::string::npos);
}

TEST(Benchmark, DeterministicCsvIsByteIdentical) {
  const auto s = bench_synth(5);
  BenchOptions opt;
  opt.repetitions = 2;
  opt.deterministic = true;
  const std::vector<std::string> methods{"hybrid", "sparse_inverted_index", "hamming_512"};
  auto data = std::make_shared<const HybridDataset>(s.data);
  const auto a = run_benchmark(data, s.queries, methods, bench_config(), opt).to_csv();
  const auto b = run_benchmark(data, s.queries, methods, bench_config(), opt).to_csv();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')), "method,dataset,N,dS,dD,h,recall,mean_ms,median_ms,index_bytes,build_s");
}

TEST(Benchmark, TimedRowsArePositive) {
  const auto s = bench_synth(6);
  BenchOptions opt;
  opt.repetitions = 3;
  const auto rep = run_benchmark(std::make_shared<const HybridDataset>(s.data), s.queries, {"sparse_brute_force"},
                                 bench_config(), opt);
  EXPECT_GT(rep.rows[0].mean_ms, 0.0);
  EXPECT_GT(rep.rows[0].median_ms, 0.0);
}

TEST(Benchmark, MedianOf) {
  EXPECT_EQ(median_of({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median_of({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_EQ(median_of({}), 0.0);
}

// ---------------------------------------------------------------------------
// bound verification (reduced trial counts; the acceptance run uses 10^4)

TEST(Verify, SuiteNames) {
  for (auto s : {BoundSuite::prop1, BoundSuite::prop2, BoundSuite::prop3, BoundSuite::prop4})
    EXPECT_EQ(parse_suite(suite_name(s)), s);
  EXPECT_EQ(code_of([] { parse_suite("prop5"); }), Errc::invalid_argument);
}

TEST(Verify, Prop1Floor) {
  VerifyParams p;
  p.n = 5000;
  const auto r = verify_prop1(p);
  EXPECT_GE(r.empirical, r.bound);
  EXPECT_TRUE(r.passed) << r.summary();
}

TEST(Verify, Prop2And3Pass) {
  VerifyParams p;
  p.trials = 2000;
  p.n = 5000;
  EXPECT_TRUE(verify_prop2(p).passed);
  EXPECT_TRUE(verify_prop3(p).passed);
}

TEST(Verify, ThreadCountDoesNotChangeResult) {
  VerifyParams p;
  p.trials = 3000;
  p.threads = 1;
  const auto a = verify_prop3(p);
  p.threads = 4;
  const auto b = verify_prop3(p);
  EXPECT_EQ(a.empirical, b.empirical);
  EXPECT_EQ(a.summary(), b.summary());
}

TEST(Verify, Prop4SmallSuite) {
  VerifyParams p;
  p.queries = 10;
  p.data.n = 3000;
  p.data.d_sparse = 3000;
  p.data.d_dense = 16;
  p.index = bench_config();
  const auto r = verify_prop4(p);
  EXPECT_TRUE(r.passed) << r.summary();
}

TEST(Verify, TwoSigma) {
  EXPECT_DOUBLE_EQ(two_sigma(0.5, 10000), 0.01);
  EXPECT_EQ(two_sigma(1.0, 100), 0.0);
}
