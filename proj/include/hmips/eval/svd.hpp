#pragma once

// Truncated SVD of a sparse matrix by randomized subspace iteration, and the
// collaborative-filtering hybrid embedding built from it: each user row is
// (lambda * U_row | raw ratings).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "hmips/data_model.hpp"
#include "hmips/eval/ratings.hpp"
#include "hmips/synthetic.hpp"

namespace hmips {

struct SvdResult {
  Eigen::MatrixXd u;  // rows x rank
  Eigen::VectorXd s;  // descending
  Eigen::MatrixXd v;  // cols x rank
  std::uint32_t iterations = 0;
};

struct SvdOptions {
  std::uint32_t oversample = 10;
  std::uint32_t max_iters = 100;
  double tol = 1e-4;  // relative change of every kept singular value between sweeps
  std::uint64_t seed = 0;
};

namespace detail {

inline Eigen::MatrixXd csr_times(const SparseMatrix& a, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.rows), x.cols());
  for (std::uint64_t i = 0; i < a.rows; ++i) {
    const auto r = a.row(i);
    for (std::size_t k = 0; k < r.dims.size(); ++k) y.row(i) += static_cast<double>(r.values[k]) * x.row(r.dims[k]);
  }
  return y;
}

inline Eigen::MatrixXd csr_transpose_times(const SparseMatrix& a, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.cols), x.cols());
  for (std::uint64_t i = 0; i < a.rows; ++i) {
    const auto r = a.row(i);
    for (std::size_t k = 0; k < r.dims.size(); ++k) y.row(r.dims[k]) += static_cast<double>(r.values[k]) * x.row(i);
  }
  return y;
}

inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace detail

inline SvdResult truncated_svd(const SparseMatrix& a, std::uint32_t rank, const SvdOptions& opt = {}) {
  const auto small = std::min(a.rows, a.cols);
  require(rank <= small, Errc::invalid_argument,
          "rank " + std::to_string(rank) + " exceeds min(rows, cols) = " + std::to_string(small));
  SvdResult res;
  if (rank == 0) {
    res.u.resize(static_cast<Eigen::Index>(a.rows), 0);
    res.v.resize(static_cast<Eigen::Index>(a.cols), 0);
    return res;
  }
  const auto p = static_cast<Eigen::Index>(std::min<std::uint64_t>(rank + opt.oversample, small));
  auto rng = make_rng(opt.seed, 11);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd omega(static_cast<Eigen::Index>(a.cols), p);
  for (Eigen::Index c = 0; c < p; ++c)
    for (Eigen::Index r = 0; r < omega.rows(); ++r) omega(r, c) = gauss(rng);

  Eigen::MatrixXd q = detail::orthonormal_basis(detail::csr_times(a, omega));
  Eigen::VectorXd prev;
  for (std::uint32_t it = 1;; ++it) {
    const Eigen::MatrixXd bt = detail::csr_transpose_times(a, q);  // A^T Q, cols x p
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(bt, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues().head(rank);
    bool done = it >= opt.max_iters;
    if (prev.size() == s.size()) {
      double change = 0.0;
      for (Eigen::Index k = 0; k < s.size(); ++k)
        change = std::max(change, std::fabs(s[k] - prev[k]) / std::max(s[0], 1e-300));
      done = done || change <= opt.tol;
    }
    if (done) {
      // B = Q^T A = (A^T Q)^T = V_b S U_b^T, so A ~ (Q V_b) S U_b^T.
      res.s = s;
      res.u = q * svd.matrixV().leftCols(rank);
      res.v = svd.matrixU().leftCols(rank);
      res.iterations = it;
      return res;
    }
    prev = s;
    q = detail::orthonormal_basis(detail::csr_times(a, detail::orthonormal_basis(bt)));
  }
}

struct EmbedResult {
  HybridDataset data;
  double lambda = 1.0;
  Eigen::VectorXd singular_values;
};

// lambda defaults to the value that equalizes mean dense and sparse row norms.
inline EmbedResult svd_embed(const RatingsMatrix& r, std::uint32_t rank, std::optional<double> lambda = std::nullopt,
                             const SvdOptions& opt = {}) {
  r.validate();
  const auto m = r.to_csr();
  const auto svd = truncated_svd(m, rank, opt);
  EmbedResult out;
  out.singular_values = svd.s;
  if (lambda) {
    out.lambda = *lambda;
  } else if (rank > 0 && m.rows > 0) {
    double sparse_norm = 0.0, dense_norm = 0.0;
    for (std::uint64_t i = 0; i < m.rows; ++i) {
      const auto row = m.row(i);
      sparse_norm += std::sqrt(sparse_dot(row, row));
      dense_norm += svd.u.row(static_cast<Eigen::Index>(i)).norm();
    }
    out.lambda = dense_norm > 0.0 ? sparse_norm / dense_norm : 1.0;
  }
  out.data = HybridDataset(m.cols, rank);
  out.data.sparse = m;
  out.data.dense.rows = m.rows;
  out.data.dense.values.resize(m.rows * rank);
  for (std::uint64_t i = 0; i < m.rows; ++i)
    for (std::uint32_t k = 0; k < rank; ++k)
      out.data.dense.values[i * rank + k] = static_cast<float>(out.lambda * svd.u(static_cast<Eigen::Index>(i), k));
  return out;
}

struct QuerySplit {
  HybridDataset data;
  HybridDataset queries;
  std::vector<PointId> query_rows;  // source row of each query
};

// Uniformly samples n_queries rows as queries; both parts keep source order.
inline QuerySplit split_queries(const HybridDataset& all, std::uint64_t n_queries, std::uint64_t seed) {
  require(n_queries <= all.size(), Errc::invalid_argument, "more queries than rows");
  std::vector<PointId> idx(all.size());
  std::iota(idx.begin(), idx.end(), PointId{0});
  auto rng = make_rng(seed, 12);
  for (std::uint64_t i = 0; i < n_queries; ++i) {
    std::uniform_int_distribution<std::uint64_t> pick(i, all.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<char> is_query(all.size(), 0);
  for (std::uint64_t i = 0; i < n_queries; ++i) is_query[idx[i]] = 1;
  QuerySplit out{HybridDataset(all.d_sparse(), all.d_dense()), HybridDataset(all.d_sparse(), all.d_dense()), {}};
  for (std::uint64_t i = 0; i < all.size(); ++i) {
    if (is_query[i]) {
      out.queries.push_back(all.point(i));
      out.query_rows.push_back(static_cast<PointId>(i));
    } else {
      out.data.push_back(all.point(i));
    }
  }
  return out;
}

}  // namespace hmips
