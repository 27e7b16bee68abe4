#pragma once

// Comparison methods for the benchmark harness. Every method maps a query to
// h original datapoint ids; recall is always measured against the exact
// brute-force oracle.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "hmips/data_model.hpp"
#include "hmips/dense_index.hpp"
#include "hmips/eval/oracle.hpp"
#include "hmips/lut16.hpp"
#include "hmips/search.hpp"
#include "hmips/sparse_index.hpp"
#include "hmips/synthetic.hpp"
#include "hmips/topk.hpp"

namespace hmips {

class SearchMethod {
 public:
  virtual ~SearchMethod() = default;
  virtual std::string name() const = 0;
  // Throws Error(Errc::unsupported) when the method cannot run on this data.
  virtual void build(std::shared_ptr<const HybridDataset> data) = 0;
  virtual std::vector<PointId> search(const HybridVector& q, std::uint32_t h) = 0;
  virtual std::uint64_t index_bytes() const = 0;
};

// 20000 -> "20k"; names match the make_method keys.
inline std::string count_label(std::uint64_t n) {
  return n % 1000 == 0 && n > 0 ? std::to_string(n / 1000) + "k" : std::to_string(n);
}

// Hybrid rows flattened into one sparse space: dense dim k becomes sparse dim
// d_sparse + k; zero dense entries are dropped.
inline SparseMatrix flatten_to_sparse(const HybridDataset& ds) {
  SparseMatrix m(ds.size(), ds.d_sparse() + ds.d_dense());
  for (std::uint64_t i = 0; i < ds.size(); ++i) {
    const auto p = ds.point(i);
    m.dims.insert(m.dims.end(), p.sparse.dims.begin(), p.sparse.dims.end());
    m.values.insert(m.values.end(), p.sparse.values.begin(), p.sparse.values.end());
    for (std::size_t k = 0; k < p.dense.size(); ++k) {
      if (p.dense[k] == 0.0f) continue;
      m.dims.push_back(static_cast<DimIndex>(ds.d_sparse() + k));
      m.values.push_back(p.dense[k]);
    }
    m.offsets.push_back(m.dims.size());
    ++m.rows;
  }
  return m;
}

inline SparseVector flatten_query(const HybridVector& q) {
  SparseVector v = q.sparse;
  for (std::size_t k = 0; k < q.dense.size(); ++k) {
    if (q.dense[k] == 0.0f) continue;
    v.dims.push_back(static_cast<DimIndex>(q.d_sparse + k));
    v.values.push_back(q.dense[k]);
  }
  return v;
}

// Exact rescoring of candidate original ids; returns the best h.
inline std::vector<PointId> exact_rerank(const HybridDataset& data, const HybridVector& q,
                                         std::span<const PointId> candidates, std::uint32_t h) {
  const auto top = select_topk_by(
      candidates.size(), h, [&](std::uint64_t i) { return hybrid_dot(q.view(), data.point(candidates[i])); },
      [&](std::uint64_t i) { return candidates[i]; });
  return ids_of(top);
}

// Top-k over a permuted-order score array, reported as original ids.
template <class T>
std::vector<PointId> topk_permuted(std::span<const T> scores, const Permutation& perm, std::uint64_t k) {
  return ids_of(select_topk_by(
      scores.size(), k, [&](std::uint64_t pid) { return scores[pid]; },
      [&](std::uint64_t pid) { return perm.to_original[pid]; }));
}

// Exact scan of the flattened dataset through an inverted index with double
// accumulation. Rows are cache-sorted on the sparse part.
class ExactInvertedIndexMethod final : public SearchMethod {
 public:
  std::string name() const override { return "sparse_inverted_index"; }

  void build(std::shared_ptr<const HybridDataset> data) override {
    data_ = std::move(data);
    auto perm = cache_sort(data_->sparse);
    index_ = build_inverted(flatten_to_sparse(*data_), std::move(perm));
    acc_.assign(data_->size(), 0.0);
  }

  std::vector<PointId> search(const HybridVector& q, std::uint32_t h) override {
    const auto fq = flatten_query(q);
    check_query_dims(fq.view(), index_.d_sparse);
    accumulate_postings<double>(index_, fq.view(), acc_);
    auto out = topk_permuted<double>(acc_, index_.perm, h);
    std::fill(acc_.begin(), acc_.end(), 0.0);
    return out;
  }

  std::uint64_t index_bytes() const override { return index_.bytes(); }
  const InvertedIndex& index() const { return index_; }

 private:
  std::shared_ptr<const HybridDataset> data_;
  InvertedIndex index_;
  std::vector<double> acc_;
};

// Inverted index over the sparse component only; optionally reranks the top
// `rerank` sparse candidates exactly.
class SparseOnlyMethod final : public SearchMethod {
 public:
  explicit SparseOnlyMethod(std::uint64_t rerank) : rerank_(rerank) {}

  std::string name() const override {
    return rerank_ ? "sparse_ii_rerank_" + count_label(rerank_) : "sparse_ii_no_reorder";
  }

  void build(std::shared_ptr<const HybridDataset> data) override {
    data_ = std::move(data);
    index_ = build_inverted(data_->sparse, cache_sort(data_->sparse));
    acc_.assign(data_->size(), 0.0f);
  }

  std::vector<PointId> search(const HybridVector& q, std::uint32_t h) override {
    check_query_dims(q.sparse.view(), index_.d_sparse);
    accumulate_postings<float>(index_, q.sparse.view(), acc_);
    auto cand = topk_permuted<float>(acc_, index_.perm, rerank_ ? std::max<std::uint64_t>(rerank_, h) : h);
    clear_postings<float>(index_, q.sparse.view(), acc_);
    return rerank_ ? exact_rerank(*data_, q, cand, h) : cand;
  }

  std::uint64_t index_bytes() const override { return index_.bytes(); }

 private:
  std::uint64_t rerank_;
  std::shared_ptr<const HybridDataset> data_;
  InvertedIndex index_;
  std::vector<float> acc_;
};

// Every point scored with merge-join sparse dots on the flattened rows.
class SparseBruteForceMethod final : public SearchMethod {
 public:
  std::string name() const override { return "sparse_brute_force"; }

  void build(std::shared_ptr<const HybridDataset> data) override { flat_ = flatten_to_sparse(*data); }

  std::vector<PointId> search(const HybridVector& q, std::uint32_t h) override {
    const auto fq = flatten_query(q);
    return ids_of(select_topk_by(
        flat_.rows, h, [&](std::uint64_t i) { return sparse_dot(fq.view(), flat_.row(i)); },
        [](std::uint64_t i) { return static_cast<PointId>(i); }));
  }

  std::uint64_t index_bytes() const override { return flat_.nnz() * 8 + flat_.offsets.size() * 8; }

 private:
  SparseMatrix flat_;
};

// Zero-padded dense matrix; skipped above max_bytes.
class DenseBruteForceMethod final : public SearchMethod {
 public:
  explicit DenseBruteForceMethod(std::uint64_t max_bytes = std::uint64_t{1} << 31) : max_bytes_(max_bytes) {}

  std::string name() const override { return "dense_brute_force"; }

  void build(std::shared_ptr<const HybridDataset> data) override {
    width_ = data->d_sparse() + data->d_dense();
    const long double need = static_cast<long double>(data->size()) * width_ * sizeof(float);
    if (need > static_cast<long double>(max_bytes_))
      throw Error(Errc::unsupported, "OOM: padded dense matrix needs " + std::to_string(static_cast<double>(need)) + " bytes");
    n_ = data->size();
    padded_.assign(n_ * width_, 0.0f);
    for (std::uint64_t i = 0; i < n_; ++i) {
      const auto p = data->point(i);
      float* row = padded_.data() + i * width_;
      for (std::size_t k = 0; k < p.sparse.dims.size(); ++k) row[p.sparse.dims[k]] = p.sparse.values[k];
      std::copy(p.dense.begin(), p.dense.end(), row + data->d_sparse());
    }
  }

  std::vector<PointId> search(const HybridVector& q, std::uint32_t h) override {
    std::vector<float> qd(width_, 0.0f);
    for (std::size_t k = 0; k < q.sparse.dims.size(); ++k) qd[q.sparse.dims[k]] = q.sparse.values[k];
    std::copy(q.dense.begin(), q.dense.end(), qd.begin() + static_cast<std::ptrdiff_t>(q.d_sparse));
    return ids_of(select_topk_by(
        n_, h,
        [&](std::uint64_t i) {
          const float* row = padded_.data() + i * width_;
          double s = 0.0;
          for (std::uint64_t d = 0; d < width_; ++d) s += static_cast<double>(qd[d]) * row[d];
          return s;
        },
        [](std::uint64_t i) { return static_cast<PointId>(i); }));
  }

  std::uint64_t index_bytes() const override { return padded_.size() * sizeof(float); }

 private:
  std::uint64_t max_bytes_;
  std::uint64_t n_ = 0, width_ = 0;
  std::vector<float> padded_;
};

// Sign-random-projection codes: `bits` Rademacher projections of the full
// hybrid vector, thresholded at the per-bit data median. Candidates with the
// smallest Hamming distance are reranked exactly.
class HammingMethod final : public SearchMethod {
 public:
  HammingMethod(std::uint32_t bits = 512, std::uint64_t rerank = 5000, std::uint64_t seed = 0)
      : bits_(bits), words_((bits + 63) / 64), rerank_(rerank), seed_(seed) {
    require(bits > 0, Errc::invalid_argument, "need at least one bit");
  }

  std::string name() const override { return "hamming_" + std::to_string(bits_); }

  void build(std::shared_ptr<const HybridDataset> data) override {
    data_ = std::move(data);
    width_ = data_->d_sparse() + data_->d_dense();
    signs_.assign(width_ * words_, 0);
    auto rng = make_rng(seed_, 21);
    for (auto& w : signs_) w = rng();
    if (bits_ % 64) {
      const std::uint64_t mask = (std::uint64_t{1} << (bits_ % 64)) - 1;
      for (std::uint64_t d = 0; d < width_; ++d) signs_[d * words_ + words_ - 1] &= mask;
    }
    const auto n = data_->size();
    // Medians come from at most median_rows_ evenly spaced rows.
    const auto m = std::min<std::uint64_t>(n, median_rows_);
    std::vector<float> proj(m * bits_);
    for (std::uint64_t s = 0; s < m; ++s) project(data_->point(s * n / m), proj.data() + s * bits_);
    median_.assign(bits_, 0.0f);
    std::vector<float> column(m);
    for (std::uint32_t b = 0; b < bits_ && m > 0; ++b) {
      for (std::uint64_t s = 0; s < m; ++s) column[s] = proj[s * bits_ + b];
      const auto mid = column.begin() + static_cast<std::ptrdiff_t>(m / 2);
      std::nth_element(column.begin(), mid, column.end());
      median_[b] = *mid;
    }
    proj.assign(bits_, 0.0f);
    codes_.assign(n * words_, 0);
    for (std::uint64_t i = 0; i < n; ++i) {
      project(data_->point(i), proj.data());
      binarize(proj.data(), codes_.data() + i * words_);
    }
  }

  std::vector<PointId> search(const HybridVector& q, std::uint32_t h) override {
    std::vector<float> proj(bits_);
    project(q.view(), proj.data());
    std::vector<std::uint64_t> code(words_);
    binarize(proj.data(), code.data());
    const auto cand = ids_of(select_topk_by(
        data_->size(), std::max<std::uint64_t>(rerank_, h),
        [&](std::uint64_t i) {
          const auto* c = codes_.data() + i * words_;
          int dist = 0;
          for (std::uint32_t w = 0; w < words_; ++w) dist += std::popcount(c[w] ^ code[w]);
          return -dist;
        },
        [](std::uint64_t i) { return static_cast<PointId>(i); }));
    return exact_rerank(*data_, q, cand, h);
  }

  std::uint64_t index_bytes() const override { return codes_.size() * 8 + signs_.size() * 8 + median_.size() * 4; }

 private:
  void add_row(float* out, std::uint64_t d, float v) const {
    const auto* s = signs_.data() + d * words_;
    for (std::uint32_t b = 0; b < bits_; ++b) out[b] += ((s[b / 64] >> (b % 64)) & 1) ? v : -v;
  }

  void project(const HybridView& x, float* out) const {
    std::fill(out, out + bits_, 0.0f);
    for (std::size_t k = 0; k < x.sparse.dims.size(); ++k) add_row(out, x.sparse.dims[k], x.sparse.values[k]);
    for (std::size_t k = 0; k < x.dense.size(); ++k) add_row(out, x.d_sparse + k, x.dense[k]);
  }

  void binarize(const float* proj, std::uint64_t* code) const {
    std::fill(code, code + words_, 0);
    for (std::uint32_t b = 0; b < bits_; ++b)
      if (proj[b] > median_[b]) code[b / 64] |= std::uint64_t{1} << (b % 64);
  }

  std::uint32_t bits_, words_;
  std::uint64_t rerank_, seed_;
  std::uint64_t median_rows_ = std::uint64_t{1} << 18;
  std::shared_ptr<const HybridDataset> data_;
  std::uint64_t width_ = 0;
  std::vector<std::uint64_t> signs_;  // width x words
  std::vector<float> median_;
  std::vector<std::uint64_t> codes_;
};

// PQ on the dense component only (no whitening), LUT16 scan, exact rerank.
class DensePQMethod final : public SearchMethod {
 public:
  DensePQMethod(std::uint64_t rerank = 10000, std::uint64_t seed = 0, std::uint64_t train_rows = 65536)
      : rerank_(rerank), seed_(seed), train_rows_(train_rows) {}

  std::string name() const override { return "dense_pq_rerank_" + count_label(rerank_); }

  void build(std::shared_ptr<const HybridDataset> data) override {
    data_ = std::move(data);
    if (data_->d_dense() == 0) throw Error(Errc::unsupported, "dataset has no dense component");
    cb_ = train_codebooks(data_->dense, default_subspace_count(data_->d_dense()), 16, 25, seed_, train_rows_);
    codes_ = pq_encode_all(data_->dense, cb_);
    layout_ = make_lut16_layout(codes_);
    sums_.resize(codes_.n);
  }

  std::vector<PointId> search(const HybridVector& q, std::uint32_t h) override {
    const auto qlut = quantize_lut(adc_table(q.dense, cb_));
    lut16_sums(codes_, layout_, qlut, sums_);
    const auto cand = ids_of(select_topk_by(
        codes_.n, std::max<std::uint64_t>(rerank_, h), [&](std::uint64_t i) { return sums_[i]; },
        [](std::uint64_t i) { return static_cast<PointId>(i); }));
    return exact_rerank(*data_, q, cand, h);
  }

  std::uint64_t index_bytes() const override { return codes_.packed.size() + cb_.centers.size() * 4; }

 private:
  std::uint64_t rerank_, seed_, train_rows_;
  std::shared_ptr<const HybridDataset> data_;
  Codebooks cb_;
  PQCodes codes_;
  Lut16Layout layout_;
  std::vector<std::uint32_t> sums_;
};

class HybridMethod final : public SearchMethod {
 public:
  explicit HybridMethod(HybridIndexConfig cfg = {}) : cfg_(cfg) {}

  std::string name() const override { return "hybrid"; }

  void build(std::shared_ptr<const HybridDataset> data) override {
    searcher_.reset();
    index_ = std::make_unique<HybridIndex>(build_index(std::move(data), cfg_));
    searcher_ = std::make_unique<Searcher>(*index_);
  }

  std::vector<PointId> search(const HybridVector& q, std::uint32_t h) override { return searcher_->search(q, h).ids; }

  std::uint64_t index_bytes() const override { return index_ ? index_->bytes() : 0; }
  const HybridIndex& index() const { return *index_; }

 private:
  HybridIndexConfig cfg_;
  std::unique_ptr<HybridIndex> index_;
  std::unique_ptr<Searcher> searcher_;
};

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{
      "hybrid",          "sparse_inverted_index", "sparse_brute_force",   "dense_brute_force",
      "hamming_512",     "dense_pq_rerank_10k",   "sparse_ii_no_reorder", "sparse_ii_rerank_20k"};
  return names;
}

inline std::unique_ptr<SearchMethod> make_method(const std::string& name, const HybridIndexConfig& cfg = {}) {
  if (name == "hybrid") return std::make_unique<HybridMethod>(cfg);
  if (name == "sparse_inverted_index") return std::make_unique<ExactInvertedIndexMethod>();
  if (name == "sparse_brute_force") return std::make_unique<SparseBruteForceMethod>();
  if (name == "dense_brute_force") return std::make_unique<DenseBruteForceMethod>();
  if (name == "hamming_512") return std::make_unique<HammingMethod>(512, 5000, cfg.seed);
  if (name == "dense_pq_rerank_10k") return std::make_unique<DensePQMethod>(10000, cfg.seed, cfg.train_rows);
  if (name == "sparse_ii_no_reorder") return std::make_unique<SparseOnlyMethod>(0);
  if (name == "sparse_ii_rerank_20k") return std::make_unique<SparseOnlyMethod>(20000);
  throw Error(Errc::invalid_argument, "unknown method '" + name + "'");
}

}  // namespace hmips
