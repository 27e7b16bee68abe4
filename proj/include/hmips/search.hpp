#pragma once

// Hybrid index build and the three-stage search:
//   1. score every point with the pruned sparse index plus LUT16 over the
//      dense PQ codes, keep the best ceil(alpha*h);
//   2. rescore those with float ADC plus the 8-bit dense residual, keep
//      ceil(beta*h);
//   3. add the sparse residual rows (or score exactly) and return h.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "hmips/binary_io.hpp"
#include "hmips/data_model.hpp"
#include "hmips/dataset_io.hpp"
#include "hmips/dense_index.hpp"
#include "hmips/eval/oracle.hpp"
#include "hmips/lut16.hpp"
#include "hmips/sparse_index.hpp"
#include "hmips/topk.hpp"

namespace hmips {

struct HybridIndexConfig {
  double alpha = 10.0;  // stage-1 overfetch factor
  double beta = 3.0;    // stage-2 retain factor
  std::uint32_t h = 20;
  std::uint32_t top_t = 128;      // postings kept per dim in the data index
  std::optional<float> eta;       // uniform data threshold; overrides top_t
  float epsilon = 0.0f;           // residual threshold
  std::uint32_t dense_subspaces = 0;  // 0: ceil(d_dense / 2)
  std::uint32_t kmeans_iters = 25;
  std::uint64_t train_rows = 65536;   // k-means / whitening sample, 0 = all
  bool whiten = true;
  bool cache_sort = true;
  bool exact_final_rerank = false;
  double sparse_weight = 1.0;
  double dense_weight = 1.0;
  std::uint64_t seed = 42;

  void validate() const {
    require(std::isfinite(alpha) && std::isfinite(beta) && beta >= 1.0 && alpha >= beta, Errc::invalid_argument,
            "need alpha >= beta >= 1");
    require(h >= 1, Errc::invalid_argument, "h must be >= 1");
    require(epsilon >= 0.0f && (!eta || *eta >= epsilon), Errc::invalid_argument, "need eta >= epsilon >= 0");
    require(std::isfinite(sparse_weight) && std::isfinite(dense_weight), Errc::invalid_argument, "weights must be finite");
  }
};

struct HybridIndex {
  HybridIndexConfig config;
  std::uint64_t n = 0;
  std::uint64_t d_sparse = 0;
  std::uint64_t d_dense = 0;
  InvertedIndex sparse_data;
  SparseMatrix sparse_residual;  // rows in permuted order
  DenseIndex dense;              // rows in permuted order, whitened space when enabled
  WhiteningTransform whitening;
  std::shared_ptr<const HybridDataset> original;
  Lut16Layout scan_layout;

  const Permutation& perm() const { return sparse_data.perm; }

  std::uint64_t bytes() const {
    return sparse_data.bytes() + sparse_residual.nnz() * 8 + sparse_residual.offsets.size() * 8 +
           dense.codebooks.centers.size() * 4 + dense.codes.packed.size() + dense.residual.codes.size() +
           dense.residual.dim * 8 + whitening.p.size() * 16;
  }
};

namespace detail {

// Whitened (or copied) dense rows, emitted in the given order.
inline DenseMatrix transform_dense(const DenseMatrix& x, const WhiteningTransform& w, std::span<const PointId> order) {
  DenseMatrix out(x.rows, x.cols);
  for (std::uint64_t i = 0; i < x.rows; ++i) {
    const auto src = x.row(order[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  if (w.empty() || x.rows == 0) return out;
  using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto d = static_cast<Eigen::Index>(x.cols);
  Eigen::Map<RowMat> m(out.values.data(), static_cast<Eigen::Index>(x.rows), d);
  const Eigen::RowVectorXf mean = Eigen::Map<const Eigen::RowVectorXd>(w.mean.data(), d).cast<float>();
  const RowMat p = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(w.p.data(), d, d).cast<float>();
  const Eigen::Index chunk = 4096;
  for (Eigen::Index r = 0; r < m.rows(); r += chunk) {
    const auto rows = std::min(chunk, m.rows() - r);
    auto block = m.middleRows(r, rows);
    RowMat centered = block.rowwise() - mean;
    block.noalias() = centered * p.transpose();
  }
  return out;
}

}  // namespace detail

inline HybridIndex build_index(std::shared_ptr<const HybridDataset> data, const HybridIndexConfig& cfg) {
  cfg.validate();
  require(data != nullptr, Errc::invalid_argument, "null dataset");
  const auto& ds = *data;
  require(ds.size() < (std::uint64_t{1} << 32), Errc::out_of_range, "at most 2^32-1 points");
  HybridIndex idx;
  idx.config = cfg;
  idx.n = ds.size();
  idx.d_sparse = ds.d_sparse();
  idx.d_dense = ds.d_dense();
  idx.original = data;

  const auto thresholds = cfg.eta ? PruneThresholds::uniform(ds.d_sparse(), *cfg.eta, cfg.epsilon)
                                  : PruneThresholds::from_top_t(ds.sparse, cfg.top_t, cfg.epsilon);
  auto pruned = prune_split(ds.sparse, thresholds);
  auto perm = cfg.cache_sort ? cache_sort(pruned.data) : Permutation::identity(ds.size());
  idx.sparse_data = build_inverted(pruned.data, std::move(perm));
  const auto& order = idx.perm().to_original;
  idx.sparse_residual = SparseMatrix(ds.size(), ds.d_sparse());
  for (std::uint64_t pid = 0; pid < ds.size(); ++pid) idx.sparse_residual.push_row(pruned.residual.row(order[pid]));

  if (ds.d_dense() > 0 && ds.size() > 0) {
    if (cfg.whiten) idx.whitening = whiten_fit(ds.dense, 1e-6, cfg.train_rows, cfg.seed);
    const auto x = detail::transform_dense(ds.dense, idx.whitening, order);
    const auto k = cfg.dense_subspaces ? cfg.dense_subspaces : default_subspace_count(ds.d_dense());
    idx.dense.codebooks = train_codebooks(x, k, 16, cfg.kmeans_iters, cfg.seed, cfg.train_rows);
    idx.dense.codes = pq_encode_all(x, idx.dense.codebooks);
    DenseMatrix residual(x.rows, x.cols);
    for (std::uint64_t i = 0; i < x.rows; ++i) {
      const auto rec = pq_decode(idx.dense.codes.row(i), idx.dense.codebooks);
      const auto src = x.row(i);
      auto dst = residual.row(i);
      for (std::uint64_t d = 0; d < x.cols; ++d) dst[d] = src[d] - rec[d];
    }
    idx.dense.residual = sq_encode(residual);
    idx.scan_layout = make_lut16_layout(idx.dense.codes);
  }
  return idx;
}

inline HybridIndex build_index(HybridDataset data, const HybridIndexConfig& cfg) {
  return build_index(std::make_shared<const HybridDataset>(std::move(data)), cfg);
}

struct StageStats {
  std::uint64_t candidates = 0;
  double seconds = 0.0;
};

struct SearchResult {
  std::vector<PointId> ids;     // original datapoint ids, best first
  std::vector<double> scores;
  std::array<StageStats, 3> stages{};
};

struct SearchParams {
  double alpha = 10.0;
  double beta = 3.0;
  bool exact_final_rerank = false;
};

inline std::uint64_t overfetch_count(double factor, std::uint64_t h, std::uint64_t n) {
  return std::min<std::uint64_t>(n, static_cast<std::uint64_t>(std::ceil(factor * static_cast<double>(h))));
}

// Per-thread query state; reuse across queries. The index must outlive it.
class Searcher {
 public:
  explicit Searcher(const HybridIndex& idx)
      : idx_(idx), sums_(idx.dense.codes.n), sparse_acc_(idx.n, 0.0f) {}

  SearchParams default_params() const {
    return {idx_.config.alpha, idx_.config.beta, idx_.config.exact_final_rerank};
  }

  SearchResult search(const HybridVector& q, std::uint32_t h) { return search(q, h, default_params()); }

  SearchResult search(const HybridVector& q, std::uint32_t h, const SearchParams& params) {
    require(h >= 1, Errc::invalid_argument, "h must be >= 1");
    require(params.beta >= 1.0 && params.alpha >= params.beta, Errc::invalid_argument, "need alpha >= beta >= 1");
    using clock = std::chrono::steady_clock;
    SearchResult res;
    const auto t0 = clock::now();
    const auto prepared = prepare(q);
    const auto& order = idx_.perm().to_original;
    const auto& to_perm = idx_.perm().to_permuted;

    // Stage 1
    const std::uint64_t c1 = overfetch_count(params.alpha, h, idx_.n);
    run_stage1(prepared);
    const bool has_dense = idx_.dense.codes.n > 0;
    auto stage1 = select_topk_by(
        idx_.n, c1,
        [&](std::uint64_t pid) { return (has_dense ? prepared.qlut.score(sums_[pid]) : 0.0f) + sparse_acc_[pid]; },
        [&](std::uint64_t pid) { return order[pid]; });
    const auto t1 = clock::now();
    res.stages[0] = {stage1.size(), std::chrono::duration<double>(t1 - t0).count()};

    // Stage 2
    for (auto& c : stage1) {
      const auto pid = to_perm[c.id];
      double s = static_cast<double>(sparse_acc_[pid]);
      if (has_dense) s += adc_score(prepared.table, idx_.dense.codes, pid) + prepared.dense_offset + residual_dot(prepared, pid);
      c.score = s;
    }
    clear_postings<float>(idx_.sparse_data, prepared.q.sparse.view(), sparse_acc_);
    const std::uint64_t c2 = std::min<std::uint64_t>(stage1.size(), overfetch_count(params.beta, h, idx_.n));
    auto stage2 = select_topk_by(
        stage1.size(), c2, [&](std::uint64_t i) { return stage1[i].score; }, [&](std::uint64_t i) { return stage1[i].id; });
    const auto t2 = clock::now();
    res.stages[1] = {stage2.size(), std::chrono::duration<double>(t2 - t1).count()};

    // Stage 3
    if (params.exact_final_rerank) {
      require(idx_.original != nullptr, Errc::unsupported, "exact rerank needs the original dataset");
      for (auto& c : stage2) c.score = hybrid_dot(prepared.q.view(), idx_.original->point(c.id));
    } else {
      for (auto& c : stage2) c.score += sparse_dot(prepared.q.sparse.view(), idx_.sparse_residual.row(to_perm[c.id]));
    }
    auto final_top = select_topk_by(
        stage2.size(), std::min<std::uint64_t>(h, stage2.size()), [&](std::uint64_t i) { return stage2[i].score; },
        [&](std::uint64_t i) { return stage2[i].id; });
    const auto t3 = clock::now();
    res.stages[2] = {final_top.size(), std::chrono::duration<double>(t3 - t2).count()};
    for (const auto& c : final_top) {
      res.ids.push_back(c.id);
      res.scores.push_back(c.score);
    }
    return res;
  }

  // Stage-1 approximate scores for every point, in original id order.
  std::vector<float> stage1_scores(const HybridVector& q) {
    const auto prepared = prepare(q);
    run_stage1(prepared);
    std::vector<float> out(idx_.n);
    const bool has_dense = idx_.dense.codes.n > 0;
    const auto& order = idx_.perm().to_original;
    for (std::uint64_t pid = 0; pid < idx_.n; ++pid)
      out[order[pid]] = (has_dense ? prepared.qlut.score(sums_[pid]) : 0.0f) + sparse_acc_[pid];
    clear_postings<float>(idx_.sparse_data, prepared.q.sparse.view(), sparse_acc_);
    return out;
  }

  // The query with the configured sparse/dense weights applied.
  HybridVector weighted(const HybridVector& q) const {
    check(q);
    HybridVector w = q;
    for (auto& v : w.sparse.values) v = static_cast<float>(v * idx_.config.sparse_weight);
    for (auto& v : w.dense) v = static_cast<float>(v * idx_.config.dense_weight);
    w.sparse = normalize_sparse(w.sparse, idx_.d_sparse);
    return w;
  }

 private:
  struct Prepared {
    HybridVector q;
    LookupTable table;
    QuantizedLUT qlut;
    double dense_offset = 0.0;
    std::vector<double> residual_weights;
    double residual_const = 0.0;
  };

  void check(const HybridVector& q) const {
    require(q.d_sparse == idx_.d_sparse, Errc::dimension_mismatch,
            "query d_sparse " + std::to_string(q.d_sparse) + ", index " + std::to_string(idx_.d_sparse));
    require(q.dense.size() == idx_.d_dense, Errc::dimension_mismatch,
            "query d_dense " + std::to_string(q.dense.size()) + ", index " + std::to_string(idx_.d_dense));
    check_query_dims(q.sparse.view(), idx_.d_sparse);
  }

  Prepared prepare(const HybridVector& q) const {
    Prepared p;
    p.q = weighted(q);
    if (idx_.dense.codes.n == 0) return p;
    std::vector<float> qd = p.q.dense;
    if (!idx_.whitening.empty()) {
      p.dense_offset = idx_.whitening.query_offset(qd);
      qd = idx_.whitening.apply_query(qd);
    }
    p.table = adc_table(qd, idx_.dense.codebooks);
    p.qlut = quantize_lut(p.table);
    const auto& sq = idx_.dense.residual;
    p.residual_weights.resize(sq.dim);
    for (std::uint64_t d = 0; d < sq.dim; ++d) {
      p.residual_weights[d] = static_cast<double>(qd[d]) * sq.step[d];
      p.residual_const += static_cast<double>(qd[d]) * (static_cast<double>(sq.min[d]) + 0.5 * sq.step[d]);
    }
    return p;
  }

  double residual_dot(const Prepared& p, std::uint64_t pid) const {
    const auto& sq = idx_.dense.residual;
    const auto* codes = sq.codes.data() + pid * sq.dim;
    double s = p.residual_const;
    for (std::uint64_t d = 0; d < sq.dim; ++d) s += p.residual_weights[d] * codes[d];
    return s;
  }

  void run_stage1(const Prepared& p) {
    if (idx_.dense.codes.n > 0) lut16_sums(idx_.dense.codes, idx_.scan_layout, p.qlut, sums_);
    accumulate_postings<float>(idx_.sparse_data, p.q.sparse.view(), sparse_acc_);
  }

  const HybridIndex& idx_;
  std::vector<std::uint32_t> sums_;
  std::vector<float> sparse_acc_;
};

inline SearchResult search_topk(const HybridIndex& idx, const HybridVector& q, std::uint32_t h) {
  Searcher s(idx);
  return s.search(q, h);
}

// Queries are spread over `threads` workers; result order follows the queries.
inline std::vector<SearchResult> search_batch(const HybridIndex& idx, const HybridDataset& queries, std::uint32_t h,
                                              std::optional<SearchParams> params = std::nullopt, unsigned threads = 1) {
  std::vector<SearchResult> out(queries.size());
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::uint64_t>(1, queries.size()))));
  auto worker = [&](unsigned w) {
    Searcher s(idx);
    const auto p = params.value_or(s.default_params());
    for (std::uint64_t i = w; i < queries.size(); i += threads) out[i] = s.search(queries.vector_at(i), h, p);
  };
  if (threads == 1) {
    worker(0);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        worker(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Retrieval guarantee check: recall@h after overfetching alpha*h with the
// stage-1 approximation and rescoring exactly should be at least the
// fraction of points whose stage-1 error is below half the gap between the
// h-th and (alpha*h)-th exact scores.

struct GapReport {
  double gap = 0.0;
  double fraction_within = 0.0;
  double recall = 0.0;
  bool degenerate = false;  // gap <= 0: check skipped

  bool holds(double slack) const { return degenerate || recall >= fraction_within - slack; }
};

inline GapReport gap_recall_check(const HybridIndex& idx, const HybridVector& q, std::uint32_t h, double alpha) {
  require(idx.original != nullptr, Errc::unsupported, "gap check needs the original dataset");
  require(h >= 1 && alpha >= 1.0, Errc::invalid_argument, "need h >= 1 and alpha >= 1");
  Searcher searcher(idx);
  const auto qw = searcher.weighted(q);
  const auto exact = exact_scores(*idx.original, qw.view());
  std::vector<double> sorted = exact;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  GapReport rep;
  const auto hh = std::min<std::uint64_t>(h, idx.n);
  const auto far = overfetch_count(alpha, h, idx.n);
  rep.gap = idx.n == 0 ? 0.0 : sorted[hh - 1] - sorted[far - 1];
  rep.degenerate = !(rep.gap > 0.0);

  const auto approx = searcher.stage1_scores(q);
  std::uint64_t within = 0;
  for (std::uint64_t i = 0; i < idx.n; ++i)
    if (std::fabs(exact[i] - approx[i]) < rep.gap / 2.0) ++within;
  rep.fraction_within = idx.n ? static_cast<double>(within) / static_cast<double>(idx.n) : 1.0;

  const auto truth = select_topk(std::span<const double>(exact), h);
  const auto got = searcher.search(q, h, SearchParams{alpha, alpha, true});
  rep.recall = recall_at_h(got.ids, ids_of(truth), h);
  return rep;
}

// ---------------------------------------------------------------------------
// HMIX composite file:
//   "HMIX" | u32 version | u32 section count
//   | per section: 4-byte tag, u64 offset from file start, u64 length
//   | section payloads
// Sections: CONF, HSIX, SRES, HDPQ, WHIT and optionally DATA (a HYBX blob).

inline constexpr Magic kIndexMagic{'H', 'M', 'I', 'X'};
inline constexpr std::uint32_t kIndexVersion = 1;

namespace detail {

inline Bytes encode_config(const HybridIndex& idx) {
  const auto& c = idx.config;
  ByteWriter w;
  w.put<std::uint64_t>(idx.n);
  w.put<std::uint64_t>(idx.d_sparse);
  w.put<std::uint64_t>(idx.d_dense);
  w.put<double>(c.alpha);
  w.put<double>(c.beta);
  w.put<std::uint32_t>(c.h);
  w.put<std::uint32_t>(c.top_t);
  w.put<std::uint8_t>(c.eta ? 1 : 0);
  w.put<float>(c.eta.value_or(0.0f));
  w.put<float>(c.epsilon);
  w.put<std::uint32_t>(c.dense_subspaces);
  w.put<std::uint32_t>(c.kmeans_iters);
  w.put<std::uint64_t>(c.train_rows);
  w.put<std::uint8_t>(c.whiten);
  w.put<std::uint8_t>(c.cache_sort);
  w.put<std::uint8_t>(c.exact_final_rerank);
  w.put<double>(c.sparse_weight);
  w.put<double>(c.dense_weight);
  w.put<std::uint64_t>(c.seed);
  return std::move(w).take();
}

inline void decode_config(std::span<const char> bytes, HybridIndex& idx) {
  ByteReader r(bytes);
  auto& c = idx.config;
  idx.n = r.get<std::uint64_t>();
  idx.d_sparse = r.get<std::uint64_t>();
  idx.d_dense = r.get<std::uint64_t>();
  c.alpha = r.get<double>();
  c.beta = r.get<double>();
  c.h = r.get<std::uint32_t>();
  c.top_t = r.get<std::uint32_t>();
  const bool has_eta = r.get<std::uint8_t>() != 0;
  const auto eta = r.get<float>();
  if (has_eta) c.eta = eta;
  c.epsilon = r.get<float>();
  c.dense_subspaces = r.get<std::uint32_t>();
  c.kmeans_iters = r.get<std::uint32_t>();
  c.train_rows = r.get<std::uint64_t>();
  c.whiten = r.get<std::uint8_t>() != 0;
  c.cache_sort = r.get<std::uint8_t>() != 0;
  c.exact_final_rerank = r.get<std::uint8_t>() != 0;
  c.sparse_weight = r.get<double>();
  c.dense_weight = r.get<double>();
  c.seed = r.get<std::uint64_t>();
}

inline Bytes encode_csr(const SparseMatrix& m) {
  ByteWriter w;
  w.put<std::uint64_t>(m.rows);
  w.put<std::uint64_t>(m.cols);
  w.put_span(std::span<const std::uint64_t>(m.offsets));
  w.put_span(std::span<const DimIndex>(m.dims));
  w.put_span(std::span<const float>(m.values));
  return std::move(w).take();
}

inline SparseMatrix decode_csr(std::span<const char> bytes) {
  ByteReader r(bytes);
  SparseMatrix m;
  m.rows = r.get<std::uint64_t>();
  m.cols = r.get<std::uint64_t>();
  m.offsets = r.get_vector<std::uint64_t>(m.rows + 1);
  m.dims = r.get_vector<DimIndex>(m.offsets.back());
  m.values = r.get_vector<float>(m.offsets.back());
  m.validate();
  return m;
}

inline Bytes encode_whitening(const WhiteningTransform& wt) {
  ByteWriter w;
  w.put<std::uint64_t>(wt.dim);
  w.put_span(std::span<const double>(wt.mean));
  w.put_span(std::span<const double>(wt.p));
  w.put_span(std::span<const double>(wt.p_inv_t));
  return std::move(w).take();
}

inline WhiteningTransform decode_whitening(std::span<const char> bytes) {
  ByteReader r(bytes);
  WhiteningTransform wt;
  wt.dim = r.get<std::uint64_t>();
  if (wt.dim == 0) return wt;
  wt.mean = r.get_vector<double>(wt.dim);
  wt.p = r.get_vector<double>(wt.dim * wt.dim);
  wt.p_inv_t = r.get_vector<double>(wt.dim * wt.dim);
  return wt;
}

}  // namespace detail

inline Bytes serialize_index(const HybridIndex& idx, bool include_data) {
  std::vector<std::pair<Magic, Bytes>> sections;
  sections.emplace_back(Magic{'C', 'O', 'N', 'F'}, detail::encode_config(idx));
  {
    ByteWriter w;
    write_inverted(w, idx.sparse_data);
    sections.emplace_back(kSparseIndexMagic, std::move(w).take());
  }
  sections.emplace_back(Magic{'S', 'R', 'E', 'S'}, detail::encode_csr(idx.sparse_residual));
  {
    ByteWriter w;
    write_dense_index(w, idx.dense);
    sections.emplace_back(kDenseIndexMagic, std::move(w).take());
  }
  sections.emplace_back(Magic{'W', 'H', 'I', 'T'}, detail::encode_whitening(idx.whitening));
  if (include_data && idx.original) sections.emplace_back(kDatasetMagic, serialize_dataset(*idx.original));

  ByteWriter w;
  w.put_magic(kIndexMagic);
  w.put<std::uint32_t>(kIndexVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  std::uint64_t offset = 12 + sections.size() * 20;
  for (const auto& [tag, blob] : sections) {
    w.put_magic(tag);
    w.put<std::uint64_t>(offset);
    w.put<std::uint64_t>(blob.size());
    offset += blob.size();
  }
  for (const auto& [tag, blob] : sections) w.put_bytes(blob);
  return std::move(w).take();
}

inline HybridIndex deserialize_index(std::span<const char> bytes) {
  ByteReader r(bytes);
  r.expect_magic(kIndexMagic, "index");
  r.expect_version(kIndexVersion, "index");
  const auto count = r.get<std::uint32_t>();
  std::vector<std::pair<Magic, std::span<const char>>> sections;
  for (std::uint32_t s = 0; s < count; ++s) {
    Magic tag;
    const auto raw = r.get_bytes(4);
    std::copy(raw.begin(), raw.end(), tag.begin());
    const auto offset = r.get<std::uint64_t>();
    const auto length = r.get<std::uint64_t>();
    require(offset <= bytes.size() && length <= bytes.size() - offset, Errc::truncated,
            "section " + std::string(tag.data(), 4) + " extends past end of file");
    sections.emplace_back(tag, bytes.subspan(offset, length));
  }
  auto find = [&](const Magic& tag, bool required) -> std::optional<std::span<const char>> {
    for (const auto& [t, blob] : sections)
      if (t == tag) return blob;
    if (required) throw Error(Errc::invalid_argument, "index lacks section " + std::string(tag.data(), 4));
    return std::nullopt;
  };

  HybridIndex idx;
  detail::decode_config(*find(Magic{'C', 'O', 'N', 'F'}, true), idx);
  {
    ByteReader sr(*find(kSparseIndexMagic, true));
    idx.sparse_data = read_inverted(sr);
  }
  idx.sparse_residual = detail::decode_csr(*find(Magic{'S', 'R', 'E', 'S'}, true));
  {
    ByteReader dr(*find(kDenseIndexMagic, true));
    idx.dense = read_dense_index(dr);
  }
  idx.whitening = detail::decode_whitening(*find(Magic{'W', 'H', 'I', 'T'}, true));
  if (auto data = find(kDatasetMagic, false)) idx.original = std::make_shared<const HybridDataset>(deserialize_dataset(*data));

  require(idx.sparse_data.n == idx.n && idx.sparse_residual.rows == idx.n &&
              (idx.dense.codes.n == idx.n || (idx.d_dense == 0 && idx.dense.codes.n == 0)) &&
              (!idx.original || idx.original->size() == idx.n),
          Errc::invalid_argument, "index sections disagree on N");
  if (idx.dense.codes.n > 0) idx.scan_layout = make_lut16_layout(idx.dense.codes);
  return idx;
}

inline void save_index(const std::string& path, const HybridIndex& idx, bool include_data = true) {
  write_file(path, serialize_index(idx, include_data));
}

inline HybridIndex load_index(const std::string& path) { return deserialize_index(read_file(path)); }

}  // namespace hmips
