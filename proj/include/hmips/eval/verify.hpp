#pragma once

// Monte-Carlo checks of the quantization and pruning bounds and of the
// overfetch recall guarantee. A suite passes when the empirical statistic is
// on the right side of the analytic value after 2-sigma sampling slack.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "hmips/dense_index.hpp"
#include "hmips/search.hpp"
#include "hmips/sparse_index.hpp"
#include "hmips/synthetic.hpp"

namespace hmips {

enum class BoundSuite { prop1, prop2, prop3, prop4 };

inline BoundSuite parse_suite(const std::string& s) {
  if (s == "prop1") return BoundSuite::prop1;
  if (s == "prop2") return BoundSuite::prop2;
  if (s == "prop3") return BoundSuite::prop3;
  if (s == "prop4") return BoundSuite::prop4;
  throw Error(Errc::invalid_argument, "unknown suite '" + s + "' (prop1|prop2|prop3|prop4)");
}

inline const char* suite_name(BoundSuite s) {
  switch (s) {
    case BoundSuite::prop1: return "prop1";
    case BoundSuite::prop2: return "prop2";
    case BoundSuite::prop3: return "prop3";
    case BoundSuite::prop4: return "prop4";
  }
  return "?";
}

struct VerifyParams {
  std::uint64_t trials = 10000;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  // prop1: PQ on i.i.d. N(0, 1) data; prop2 reuses the shape.
  std::uint32_t dim = 32;
  std::uint32_t subspaces = 16;
  std::uint64_t n = 50000;
  double max_ratio = 2.0;  // prop1 ceiling on MSE / bound

  // prop2: eps is picked so the analytic bound equals this value.
  double target_bound = 0.5;

  // prop3: generative sparse model.
  std::uint64_t d_sparse = 10000;
  double p = 0.01;
  double value_max = 1.0;
  double eta = 0.1;
  double eps = 0.5;

  // prop4
  std::uint64_t queries = 100;
  std::uint32_t h = 20;
  double alpha = 10.0;
  double slack = 0.02;
  SynthConfig data{};
  HybridIndexConfig index{};
};

struct BoundReport {
  BoundSuite suite = BoundSuite::prop1;
  double bound = 0.0;      // analytic value
  double empirical = 0.0;  // measured statistic
  double slack = 0.0;
  double margin = 0.0;     // >= 0 when passing
  bool passed = false;
  std::string detail;

  std::string summary() const {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s %s bound=%.6g empirical=%.6g slack=%.3g margin=%.6g%s%s",
                  suite_name(suite), passed ? "PASS" : "FAIL", bound, empirical, slack, margin,
                  detail.empty() ? "" : " ", detail.c_str());
    return buf;
  }
};

inline double two_sigma(double prob, std::uint64_t trials) {
  if (trials == 0) return 0.0;
  const double pc = std::clamp(prob, 0.0, 1.0);
  return 2.0 * std::sqrt(pc * (1.0 - pc) / static_cast<double>(trials));
}

namespace detail {

inline DenseMatrix gaussian_matrix(std::uint64_t rows, std::uint64_t cols, std::uint64_t seed, std::uint64_t stream) {
  auto rng = make_rng(seed, stream);
  std::normal_distribution<float> g;
  DenseMatrix m(rows, cols);
  for (auto& v : m.values) v = g(rng);
  return m;
}

// Runs fn(chunk, begin, end) over a fixed chunking of [0, trials) so results
// do not depend on the thread count.
template <class Fn>
void parallel_chunks(std::uint64_t trials, unsigned threads, Fn&& fn) {
  constexpr std::uint64_t chunks = 16;
  threads = std::max(1u, threads);
  auto worker = [&](unsigned w) {
    for (std::uint64_t c = w; c < chunks; c += threads) fn(c, trials * c / chunks, trials * (c + 1) / chunks);
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(worker, w);
  worker(0);
  for (auto& t : pool) t.join();
}

// Sorted distinct dims, each present with probability p, values U[-M, M].
inline SparseVector bernoulli_sparse(std::uint64_t d, double p, double m, std::mt19937_64& rng) {
  SparseVector v;
  if (p <= 0.0) return v;
  std::uniform_real_distribution<double> val(-m, m);
  if (p >= 1.0) {
    for (std::uint64_t j = 0; j < d; ++j) {
      v.dims.push_back(static_cast<DimIndex>(j));
      v.values.push_back(static_cast<float>(val(rng)));
    }
    return v;
  }
  std::geometric_distribution<std::uint64_t> gap(p);
  for (std::uint64_t j = gap(rng); j < d; j += 1 + gap(rng)) {
    v.dims.push_back(static_cast<DimIndex>(j));
    v.values.push_back(static_cast<float>(val(rng)));
  }
  return v;
}

}  // namespace detail

// k-means MSE on i.i.d. standard normal data against sigma^2 2^(-2b/d),
// with sigma^2 = dim and b = subspaces * log2(16).
inline BoundReport verify_prop1(const VerifyParams& prm) {
  const auto x = detail::gaussian_matrix(prm.n, prm.dim, prm.seed, 31);
  const auto cb = train_codebooks(x, prm.subspaces, 16, 25, prm.seed, 0);
  const auto codes = pq_encode_all(x, cb);
  double sse = 0.0;
  for (std::uint64_t i = 0; i < x.rows; ++i) {
    const auto rec = pq_decode(codes.row(i), cb);
    const auto row = x.row(i);
    for (std::uint32_t d = 0; d < prm.dim; ++d) sse += (row[d] - static_cast<double>(rec[d])) * (row[d] - rec[d]);
  }
  BoundReport rep;
  rep.suite = BoundSuite::prop1;
  rep.empirical = sse / static_cast<double>(x.rows);
  rep.bound = rate_distortion_bound(static_cast<double>(prm.dim), 4.0 * prm.subspaces, static_cast<double>(prm.dim));
  const double ratio = rep.empirical / rep.bound;
  rep.margin = std::min(rep.empirical - rep.bound, prm.max_ratio - ratio);
  rep.passed = rep.empirical >= rep.bound && ratio <= prm.max_ratio;
  char buf[96];
  std::snprintf(buf, sizeof buf, "ratio=%.4f ceiling=%.2f", ratio, prm.max_ratio);
  rep.detail = buf;
  return rep;
}

// Fraction of random (query, point) pairs with |q.(x - x~)| < eps, against
// the Azuma bound built from the largest per-subspace norms in the sample.
inline BoundReport verify_prop2(const VerifyParams& prm) {
  const auto x = detail::gaussian_matrix(std::min<std::uint64_t>(prm.n, 20000), prm.dim, prm.seed, 32);
  const auto cb = train_codebooks(x, prm.subspaces, 16, 25, prm.seed, 0);
  const auto codes = pq_encode_all(x, cb);
  DenseMatrix resid(x.rows, x.cols);
  double max_r = 0.0;
  for (std::uint64_t i = 0; i < x.rows; ++i) {
    const auto rec = pq_decode(codes.row(i), cb);
    for (std::uint32_t d = 0; d < prm.dim; ++d) resid.row(i)[d] = x.row(i)[d] - rec[d];
    max_r = std::max(max_r, max_subspace_sq_norm(resid.row(i), cb));
  }
  const auto qs = detail::gaussian_matrix(prm.trials, prm.dim, prm.seed, 33);
  auto pick_rng = make_rng(prm.seed, 34);
  std::uniform_int_distribution<std::uint64_t> pick(0, x.rows - 1);
  std::vector<std::uint64_t> picks(prm.trials);
  for (auto& p : picks) p = pick(pick_rng);
  double max_q = 0.0;
  for (std::uint64_t t = 0; t < prm.trials; ++t) max_q = std::max(max_q, max_subspace_sq_norm(qs.row(t), cb));

  // Solve 1 - 2 exp(-eps^2 / D) = target for eps.
  const double denom = 2.0 * prm.subspaces * max_q * max_r;
  const double eps = std::sqrt(denom * std::log(2.0 / (1.0 - prm.target_bound)));
  std::vector<std::uint64_t> hits(16, 0);
  detail::parallel_chunks(prm.trials, prm.threads, [&](std::uint64_t c, std::uint64_t b, std::uint64_t e) {
    for (std::uint64_t t = b; t < e; ++t) {
      const double err = dense_dot(qs.row(t), resid.row(picks[t]));
      if (std::fabs(err) < eps) ++hits[c];
    }
  });
  std::uint64_t total = 0;
  for (auto v : hits) total += v;
  BoundReport rep;
  rep.suite = BoundSuite::prop2;
  rep.bound = azuma_error_bound(eps, prm.subspaces, max_q, max_r);
  rep.empirical = prm.trials ? static_cast<double>(total) / static_cast<double>(prm.trials) : 1.0;
  rep.slack = two_sigma(rep.bound, prm.trials);
  rep.margin = rep.empirical - (rep.bound - rep.slack);
  rep.passed = rep.margin >= 0.0;
  char buf[128];
  std::snprintf(buf, sizeof buf, "eps=%.4g trials=%llu", eps, static_cast<unsigned long long>(prm.trials));
  rep.detail = buf;
  return rep;
}

// Pairs (q, x) drawn from the Bernoulli(p) / U[-M, M] model; x pruned at a
// uniform threshold eta. Success: |q.x - q.x~| < eps.
inline BoundReport verify_prop3(const VerifyParams& prm) {
  std::vector<std::uint64_t> hits(16, 0);
  detail::parallel_chunks(prm.trials, prm.threads, [&](std::uint64_t c, std::uint64_t b, std::uint64_t e) {
    auto rng = make_rng(prm.seed, 300 + c);
    for (std::uint64_t t = b; t < e; ++t) {
      const auto q = detail::bernoulli_sparse(prm.d_sparse, prm.p, prm.value_max, rng);
      const auto x = detail::bernoulli_sparse(prm.d_sparse, prm.p, prm.value_max, rng);
      // q.x - q.x~ is the product over shared dims where |x_j| < eta.
      double err = 0.0;
      std::size_t a = 0, k = 0;
      while (a < q.dims.size() && k < x.dims.size()) {
        if (q.dims[a] < x.dims[k]) {
          ++a;
        } else if (x.dims[k] < q.dims[a]) {
          ++k;
        } else {
          if (std::fabs(x.values[k]) < prm.eta) err += static_cast<double>(q.values[a]) * x.values[k];
          ++a;
          ++k;
        }
      }
      if (std::fabs(err) < prm.eps) ++hits[c];
    }
  });
  std::uint64_t total = 0;
  for (auto v : hits) total += v;
  BoundReport rep;
  rep.suite = BoundSuite::prop3;
  rep.bound = chernoff_prune_bound(prm.eps, prm.value_max, prm.eta, static_cast<double>(prm.d_sparse), prm.p);
  rep.empirical = prm.trials ? static_cast<double>(total) / static_cast<double>(prm.trials) : 1.0;
  rep.slack = two_sigma(rep.bound, prm.trials);
  rep.margin = rep.empirical - (rep.bound - rep.slack);
  rep.passed = rep.margin >= 0.0;
  char buf[160];
  std::snprintf(buf, sizeof buf, "eps=%.4g eta=%.4g d=%llu p=%.4g trials=%llu", prm.eps, prm.eta,
                static_cast<unsigned long long>(prm.d_sparse), prm.p, static_cast<unsigned long long>(prm.trials));
  rep.detail = buf;
  return rep;
}

// Per query: recall@h with alpha overfetch and exact rescoring against the
// fraction of points whose stage-1 error is below half the gap. Reports the
// worst margin over non-degenerate queries.
inline BoundReport verify_prop4(const VerifyParams& prm) {
  auto cfg = prm.data;
  cfg.n_queries = prm.queries;
  const auto synth = generate_synthetic(cfg);
  const auto idx = build_index(synth.data, prm.index);
  std::vector<GapReport> per(synth.queries.size());
  std::vector<std::thread> pool;
  const unsigned threads = std::max(1u, prm.threads);
  auto work = [&](unsigned w) {
    for (std::uint64_t i = w; i < per.size(); i += threads)
      per[i] = gap_recall_check(idx, synth.queries.vector_at(i), prm.h, prm.alpha);
  };
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& t : pool) t.join();

  BoundReport rep;
  rep.suite = BoundSuite::prop4;
  rep.slack = prm.slack;
  rep.margin = 1.0;
  std::uint64_t degenerate = 0, failing = 0;
  double frac_sum = 0.0, recall_sum = 0.0;
  for (const auto& g : per) {
    frac_sum += g.fraction_within;
    recall_sum += g.recall;
    if (g.degenerate) {
      ++degenerate;
      continue;
    }
    rep.margin = std::min(rep.margin, g.recall - (g.fraction_within - prm.slack));
    if (!g.holds(prm.slack)) ++failing;
  }
  const double nq = std::max<double>(1.0, static_cast<double>(per.size()));
  rep.bound = frac_sum / nq;
  rep.empirical = recall_sum / nq;
  rep.passed = failing == 0;
  char buf[160];
  std::snprintf(buf, sizeof buf, "queries=%zu failing=%llu degenerate=%llu alpha=%.3g h=%u", per.size(),
                static_cast<unsigned long long>(failing), static_cast<unsigned long long>(degenerate), prm.alpha, prm.h);
  rep.detail = buf;
  return rep;
}

inline BoundReport verify_bounds(BoundSuite suite, const VerifyParams& prm) {
  switch (suite) {
    case BoundSuite::prop1: return verify_prop1(prm);
    case BoundSuite::prop2: return verify_prop2(prm);
    case BoundSuite::prop3: return verify_prop3(prm);
    case BoundSuite::prop4: return verify_prop4(prm);
  }
  throw Error(Errc::invalid_argument, "unknown suite");
}

}  // namespace hmips
