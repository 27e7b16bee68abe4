#pragma once

// Hybrid sparse+dense vectors and datasets.
//
// A hybrid vector is x = x^S (+) x^D: a sparse coordinate list over d_sparse
// dimensions and a dense array of d_dense values. The two parts live in
// separate index spaces, 0..d_sparse-1 and 0..d_dense-1. Storage is single
// precision; every exact score accumulates in double.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hmips/error.hpp"

namespace hmips {

using DimIndex = std::uint32_t;
using PointId = std::uint32_t;

struct SparseView {
  std::span<const DimIndex> dims;
  std::span<const float> values;

  std::size_t nnz() const { return dims.size(); }
};

// Entries sorted strictly ascending by dim, no stored zeros.
struct SparseVector {
  std::vector<DimIndex> dims;
  std::vector<float> values;

  std::size_t nnz() const { return dims.size(); }
  SparseView view() const { return {dims, values}; }
  bool operator==(const SparseVector&) const = default;
};

struct HybridView {
  std::uint64_t d_sparse = 0;
  SparseView sparse;
  std::span<const float> dense;
};

struct HybridVector {
  std::uint64_t d_sparse = 0;
  SparseVector sparse;
  std::vector<float> dense;

  HybridView view() const { return {d_sparse, sparse.view(), dense}; }
  bool operator==(const HybridVector&) const = default;
};

// Sorts by dim, sums duplicate dims in double and drops zeros.
inline SparseVector normalize_sparse(std::span<const std::pair<DimIndex, double>> raw, std::uint64_t d_sparse) {
  std::vector<std::pair<DimIndex, double>> entries(raw.begin(), raw.end());
  for (const auto& [dim, value] : entries)
    require(dim < d_sparse, Errc::out_of_range,
            "sparse dim " + std::to_string(dim) + " >= d_sparse " + std::to_string(d_sparse));
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  SparseVector out;
  for (std::size_t i = 0; i < entries.size();) {
    const DimIndex dim = entries[i].first;
    double sum = 0.0;
    for (; i < entries.size() && entries[i].first == dim; ++i) sum += entries[i].second;
    const auto stored = static_cast<float>(sum);
    if (stored != 0.0f) {
      out.dims.push_back(dim);
      out.values.push_back(stored);
    }
  }
  return out;
}

inline SparseVector normalize_sparse(const SparseVector& v, std::uint64_t d_sparse) {
  std::vector<std::pair<DimIndex, double>> raw;
  raw.reserve(v.nnz());
  for (std::size_t i = 0; i < v.nnz(); ++i) raw.emplace_back(v.dims[i], v.values[i]);
  return normalize_sparse(raw, d_sparse);
}

inline bool is_normalized(SparseView v, std::uint64_t d_sparse) {
  for (std::size_t i = 0; i < v.nnz(); ++i) {
    if (v.dims[i] >= d_sparse || v.values[i] == 0.0f) return false;
    if (i > 0 && v.dims[i - 1] >= v.dims[i]) return false;
  }
  return true;
}

// Merge-join over two normalized sparse vectors, ascending dim order.
inline double sparse_dot(SparseView a, SparseView b) {
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.nnz() && j < b.nnz()) {
    if (a.dims[i] < b.dims[j]) {
      ++i;
    } else if (a.dims[i] > b.dims[j]) {
      ++j;
    } else {
      sum += static_cast<double>(a.values[i]) * static_cast<double>(b.values[j]);
      ++i;
      ++j;
    }
  }
  return sum;
}

inline double dense_dot(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), Errc::dimension_mismatch,
          "dense lengths " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return sum;
}

// q.x = q^S.x^S + q^D.x^D in double precision.
inline double hybrid_dot(const HybridView& q, const HybridView& x) {
  require(q.d_sparse == x.d_sparse, Errc::dimension_mismatch,
          "d_sparse " + std::to_string(q.d_sparse) + " vs " + std::to_string(x.d_sparse));
  return sparse_dot(q.sparse, x.sparse) + dense_dot(q.dense, x.dense);
}

inline double hybrid_dot(const HybridVector& q, const HybridVector& x) { return hybrid_dot(q.view(), x.view()); }

// CSR rows of normalized sparse vectors.
struct SparseMatrix {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<std::uint64_t> offsets{0};
  std::vector<DimIndex> dims;
  std::vector<float> values;

  SparseMatrix() = default;
  SparseMatrix(std::uint64_t n_rows, std::uint64_t n_cols) : rows(0), cols(n_cols) {
    offsets.reserve(n_rows + 1);
  }

  std::uint64_t nnz() const { return dims.size(); }

  SparseView row(std::uint64_t i) const {
    const auto b = offsets[i], e = offsets[i + 1];
    return {std::span<const DimIndex>(dims).subspan(b, e - b), std::span<const float>(values).subspan(b, e - b)};
  }

  // Appends an already-normalized row.
  void push_row(SparseView r) {
    dims.insert(dims.end(), r.dims.begin(), r.dims.end());
    values.insert(values.end(), r.values.begin(), r.values.end());
    offsets.push_back(dims.size());
    ++rows;
  }

  std::vector<std::uint64_t> nnz_per_dim() const {
    std::vector<std::uint64_t> counts(cols, 0);
    for (DimIndex d : dims) ++counts[d];
    return counts;
  }

  void validate() const {
    require(offsets.size() == rows + 1 && offsets.front() == 0 && offsets.back() == dims.size() &&
                dims.size() == values.size(),
            Errc::invalid_argument, "malformed CSR structure");
    for (std::uint64_t i = 0; i < rows; ++i) {
      require(offsets[i] <= offsets[i + 1], Errc::invalid_argument, "CSR offsets decrease");
      require(is_normalized(row(i), cols), Errc::invalid_argument, "row " + std::to_string(i) + " not normalized");
    }
  }

  bool operator==(const SparseMatrix&) const = default;
};

struct DenseMatrix {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<float> values;

  DenseMatrix() = default;
  DenseMatrix(std::uint64_t r, std::uint64_t c) : rows(r), cols(c), values(r * c, 0.0f) {}

  std::span<const float> row(std::uint64_t i) const {
    return std::span<const float>(values).subspan(i * cols, cols);
  }
  std::span<float> row(std::uint64_t i) { return std::span<float>(values).subspan(i * cols, cols); }

  bool operator==(const DenseMatrix&) const = default;
};

// Immutable after construction; safe for concurrent readers.
struct HybridDataset {
  SparseMatrix sparse;
  DenseMatrix dense;

  HybridDataset() = default;
  HybridDataset(std::uint64_t d_sparse, std::uint64_t d_dense) {
    sparse.cols = d_sparse;
    dense.cols = d_dense;
  }

  std::uint64_t size() const { return sparse.rows; }
  std::uint64_t d_sparse() const { return sparse.cols; }
  std::uint64_t d_dense() const { return dense.cols; }

  HybridView point(std::uint64_t i) const { return {sparse.cols, sparse.row(i), dense.row(i)}; }

  HybridVector vector_at(std::uint64_t i) const {
    const auto p = point(i);
    HybridVector v;
    v.d_sparse = p.d_sparse;
    v.sparse.dims.assign(p.sparse.dims.begin(), p.sparse.dims.end());
    v.sparse.values.assign(p.sparse.values.begin(), p.sparse.values.end());
    v.dense.assign(p.dense.begin(), p.dense.end());
    return v;
  }

  void push_back(const HybridView& v) {
    require(v.d_sparse == d_sparse(), Errc::dimension_mismatch, "point d_sparse differs from dataset");
    require(v.dense.size() == d_dense(), Errc::dimension_mismatch, "point d_dense differs from dataset");
    sparse.push_row(v.sparse);
    dense.values.insert(dense.values.end(), v.dense.begin(), v.dense.end());
    ++dense.rows;
  }
  void push_back(const HybridVector& v) { push_back(v.view()); }

  std::vector<HybridVector> to_vectors() const {
    std::vector<HybridVector> out;
    out.reserve(size());
    for (std::uint64_t i = 0; i < size(); ++i) out.push_back(vector_at(i));
    return out;
  }

  void validate() const {
    sparse.validate();
    require(dense.rows == sparse.rows && dense.values.size() == dense.rows * dense.cols, Errc::invalid_argument,
            "dense block does not match point count");
  }

  bool operator==(const HybridDataset&) const = default;
};

}  // namespace hmips
