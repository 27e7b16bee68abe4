#pragma once

// Product quantization of the dense component: codebook training, encoding,
// asymmetric lookup tables and their 8-bit quantization, the 8-bit scalar
// residual, whitening, and the closed-form error bounds.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hmips/binary_io.hpp"
#include "hmips/data_model.hpp"
#include "hmips/kmeans.hpp"
#include "hmips/synthetic.hpp"

namespace hmips {

// Near-even contiguous split of d dims into k spans; wider spans first.
inline std::vector<std::uint32_t> split_subspaces(std::uint64_t d, std::uint32_t k) {
  require(k > 0, Errc::invalid_argument, "subspace count must be > 0");
  require(k <= d, Errc::invalid_argument, "more subspaces (" + std::to_string(k) + ") than dims (" + std::to_string(d) + ")");
  std::vector<std::uint32_t> offsets(k + 1, 0);
  const auto base = d / k, extra = d % k;
  for (std::uint32_t s = 0; s < k; ++s) offsets[s + 1] = static_cast<std::uint32_t>(offsets[s] + base + (s < extra ? 1 : 0));
  return offsets;
}

// Default data-index split: two dims per subspace, the last one width 1 when d is odd.
inline std::uint32_t default_subspace_count(std::uint64_t d) { return static_cast<std::uint32_t>((d + 1) / 2); }

struct Codebooks {
  std::uint32_t l = 16;                   // codewords per subspace
  std::vector<std::uint32_t> offsets{0};  // K + 1 dim offsets
  std::vector<float> centers;             // subspace k: l x width(k) at l * offsets[k]

  std::uint32_t subspaces() const { return offsets.empty() ? 0 : static_cast<std::uint32_t>(offsets.size() - 1); }
  std::uint32_t dim() const { return offsets.empty() ? 0 : offsets.back(); }
  std::uint32_t width(std::uint32_t k) const { return offsets[k + 1] - offsets[k]; }
  std::span<const float> center(std::uint32_t k, std::uint32_t c) const {
    return std::span<const float>(centers).subspan(std::size_t{l} * offsets[k] + std::size_t{c} * width(k), width(k));
  }
  std::span<float> center(std::uint32_t k, std::uint32_t c) {
    return std::span<float>(centers).subspan(std::size_t{l} * offsets[k] + std::size_t{c} * width(k), width(k));
  }

  bool operator==(const Codebooks&) const = default;
};

struct TrainReport {
  std::vector<std::vector<double>> objective;  // per subspace, per iteration
};

// One k-means per subspace; rows are optionally subsampled to max_train_rows.
inline Codebooks train_codebooks(const DenseMatrix& x, std::uint32_t subspaces, std::uint32_t l, std::uint32_t iters,
                                 std::uint64_t seed, std::uint64_t max_train_rows = 0, TrainReport* report = nullptr) {
  require(l == 16 || l == 256, Errc::unsupported, "codebook size must be 16 or 256");
  Codebooks cb;
  cb.l = l;
  cb.offsets = split_subspaces(x.cols, subspaces);
  require(x.rows >= l, Errc::invalid_argument,
          "need at least l=" + std::to_string(l) + " points to train, got " + std::to_string(x.rows));

  std::vector<std::uint64_t> rows(x.rows);
  std::iota(rows.begin(), rows.end(), std::uint64_t{0});
  if (max_train_rows > 0 && x.rows > max_train_rows) {
    auto rng = make_rng(seed, 0x5a);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(std::max<std::uint64_t>(max_train_rows, l));
    std::sort(rows.begin(), rows.end());
  }

  cb.centers.assign(std::size_t{l} * x.cols, 0.0f);
  if (report) report->objective.assign(subspaces, {});
  for (std::uint32_t k = 0; k < subspaces; ++k) {
    const auto w = cb.width(k);
    std::vector<double> sub(rows.size() * w);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = x.row(rows[i]);
      for (std::uint32_t t = 0; t < w; ++t) sub[i * w + t] = r[cb.offsets[k] + t];
    }
    auto rng = make_rng(seed, 0x100 + k);
    const auto km = kmeans(sub, w, l, iters, rng);
    for (std::uint32_t c = 0; c < l; ++c) {
      auto dst = cb.center(k, c);
      for (std::uint32_t t = 0; t < w; ++t) dst[t] = static_cast<float>(km.centers[std::size_t{c} * w + t]);
    }
    if (report) report->objective[k] = km.objective;
  }
  return cb;
}

// Nearest codeword per subspace; ties go to the lower index.
inline void pq_encode_into(std::span<const float> x, const Codebooks& cb, std::span<std::uint8_t> codes) {
  require(x.size() == cb.dim(), Errc::dimension_mismatch,
          "vector has " + std::to_string(x.size()) + " dims, codebooks " + std::to_string(cb.dim()));
  for (std::uint32_t k = 0; k < cb.subspaces(); ++k) {
    const auto w = cb.width(k);
    std::uint32_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint32_t c = 0; c < cb.l; ++c) {
      const auto ctr = cb.center(k, c);
      double d = 0.0;
      for (std::uint32_t t = 0; t < w; ++t) {
        const double diff = static_cast<double>(x[cb.offsets[k] + t]) - ctr[t];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    codes[k] = static_cast<std::uint8_t>(best);
  }
}

inline std::vector<std::uint8_t> pq_encode(std::span<const float> x, const Codebooks& cb) {
  std::vector<std::uint8_t> codes(cb.subspaces());
  pq_encode_into(x, cb, codes);
  return codes;
}

inline std::vector<float> pq_decode(std::span<const std::uint8_t> codes, const Codebooks& cb) {
  std::vector<float> out(cb.dim());
  for (std::uint32_t k = 0; k < cb.subspaces(); ++k) {
    const auto ctr = cb.center(k, codes[k]);
    std::copy(ctr.begin(), ctr.end(), out.begin() + cb.offsets[k]);
  }
  return out;
}

// N x K code matrix. l=16 packs two codes per byte, the even subspace in the
// low nibble; l=256 stores one byte per code.
struct PQCodes {
  std::uint64_t n = 0;
  std::uint32_t subspaces = 0;
  std::uint32_t l = 16;
  std::vector<std::uint8_t> packed;

  std::uint64_t row_bytes() const { return l == 16 ? (subspaces + 1) / 2 : subspaces; }

  std::uint8_t get(std::uint64_t i, std::uint32_t k) const {
    if (l == 16) {
      const auto byte = packed[i * row_bytes() + k / 2];
      return (k & 1) ? static_cast<std::uint8_t>(byte >> 4) : static_cast<std::uint8_t>(byte & 0x0f);
    }
    return packed[i * row_bytes() + k];
  }

  void set_row(std::uint64_t i, std::span<const std::uint8_t> codes) {
    auto* row = packed.data() + i * row_bytes();
    if (l == 16) {
      std::fill(row, row + row_bytes(), 0);
      for (std::uint32_t k = 0; k < subspaces; ++k)
        row[k / 2] |= static_cast<std::uint8_t>((codes[k] & 0x0f) << ((k & 1) * 4));
    } else {
      std::copy(codes.begin(), codes.end(), row);
    }
  }

  std::vector<std::uint8_t> row(std::uint64_t i) const {
    std::vector<std::uint8_t> out(subspaces);
    for (std::uint32_t k = 0; k < subspaces; ++k) out[k] = get(i, k);
    return out;
  }

  bool operator==(const PQCodes&) const = default;
};

// Encodes rows of x in the given order (order[i] is the source row of code row i).
inline PQCodes pq_encode_all(const DenseMatrix& x, const Codebooks& cb, std::span<const PointId> order = {}) {
  PQCodes codes;
  codes.n = x.rows;
  codes.subspaces = cb.subspaces();
  codes.l = cb.l;
  codes.packed.assign(codes.n * codes.row_bytes(), 0);
  std::vector<std::uint8_t> row(cb.subspaces());
  for (std::uint64_t i = 0; i < x.rows; ++i) {
    pq_encode_into(x.row(order.empty() ? i : order[i]), cb, row);
    codes.set_row(i, row);
  }
  return codes;
}

// T[k][c] = q^(k) . center_c^(k)
struct LookupTable {
  std::uint32_t subspaces = 0;
  std::uint32_t l = 16;
  std::vector<float> values;  // K x l

  float at(std::uint32_t k, std::uint32_t c) const { return values[std::size_t{k} * l + c]; }
};

inline LookupTable adc_table(std::span<const float> q, const Codebooks& cb) {
  require(q.size() == cb.dim(), Errc::dimension_mismatch,
          "query has " + std::to_string(q.size()) + " dense dims, codebooks " + std::to_string(cb.dim()));
  LookupTable t;
  t.subspaces = cb.subspaces();
  t.l = cb.l;
  t.values.resize(std::size_t{t.subspaces} * t.l);
  for (std::uint32_t k = 0; k < t.subspaces; ++k) {
    for (std::uint32_t c = 0; c < cb.l; ++c) {
      const auto ctr = cb.center(k, c);
      double s = 0.0;
      for (std::uint32_t d = 0; d < ctr.size(); ++d) s += static_cast<double>(q[cb.offsets[k] + d]) * ctr[d];
      t.values[std::size_t{k} * t.l + c] = static_cast<float>(s);
    }
  }
  return t;
}

// Float ADC: sum of table entries in subspace order.
inline double adc_score(const LookupTable& t, const PQCodes& codes, std::uint64_t i) {
  double s = 0.0;
  for (std::uint32_t k = 0; k < t.subspaces; ++k) s += t.at(k, codes.get(i, k));
  return s;
}

// Entry k,c dequantizes to bias[k] + scale * qtable[k*16+c].
struct QuantizedLUT {
  std::uint32_t subspaces = 0;
  std::vector<float> bias;
  float scale = 0.0f;
  float bias_total = 0.0f;
  std::vector<std::uint8_t> qtable;  // K x 16

  double dequantize(std::uint32_t k, std::uint32_t c) const {
    return static_cast<double>(bias[k]) + static_cast<double>(scale) * qtable[std::size_t{k} * 16 + c];
  }

  // The one post-processing step every scan kernel shares, so all kernels
  // agree bit for bit once their integer sums agree.
  float score(std::uint32_t integer_sum) const { return bias_total + scale * static_cast<float>(integer_sum); }
};

inline QuantizedLUT quantize_lut(const LookupTable& t) {
  require(t.l == 16, Errc::unsupported, "LUT quantization needs l=16 tables");
  QuantizedLUT q;
  q.subspaces = t.subspaces;
  q.bias.resize(t.subspaces);
  q.qtable.assign(std::size_t{t.subspaces} * 16, 0);
  double max_range = 0.0;
  double bias_sum = 0.0;
  for (std::uint32_t k = 0; k < t.subspaces; ++k) {
    float lo = t.at(k, 0), hi = t.at(k, 0);
    for (std::uint32_t c = 0; c < 16; ++c) {
      const float v = t.at(k, c);
      require(std::isfinite(v), Errc::numerical, "non-finite lookup table entry");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    q.bias[k] = lo;
    bias_sum += lo;
    max_range = std::max(max_range, static_cast<double>(hi) - lo);
  }
  q.bias_total = static_cast<float>(bias_sum);
  q.scale = static_cast<float>(max_range / 255.0);
  if (q.scale == 0.0f) return q;
  for (std::uint32_t k = 0; k < t.subspaces; ++k) {
    for (std::uint32_t c = 0; c < 16; ++c) {
      const double v = std::nearbyint((static_cast<double>(t.at(k, c)) - q.bias[k]) / q.scale);
      q.qtable[std::size_t{k} * 16 + c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Scalar-quantized residual: one affine 8-bit code per value.

struct ScalarQuantResidual {
  std::uint64_t n = 0;
  std::uint64_t dim = 0;
  std::vector<float> min;
  std::vector<float> step;  // range / 256
  std::vector<std::uint8_t> codes;

  double decode(std::uint64_t i, std::uint64_t d) const {
    return static_cast<double>(min[d]) + static_cast<double>(step[d]) * (codes[i * dim + d] + 0.5);
  }

  std::vector<float> decode_row(std::uint64_t i) const {
    std::vector<float> out(dim);
    for (std::uint64_t d = 0; d < dim; ++d) out[d] = static_cast<float>(decode(i, d));
    return out;
  }

  bool operator==(const ScalarQuantResidual&) const = default;
};

inline ScalarQuantResidual sq_encode(const DenseMatrix& x) {
  ScalarQuantResidual sq;
  sq.n = x.rows;
  sq.dim = x.cols;
  sq.min.assign(x.cols, 0.0f);
  sq.step.assign(x.cols, 0.0f);
  sq.codes.assign(x.rows * x.cols, 0);
  for (std::uint64_t d = 0; d < x.cols; ++d) {
    if (x.rows == 0) break;
    float lo = x.values[d], hi = x.values[d];
    for (std::uint64_t i = 0; i < x.rows; ++i) {
      lo = std::min(lo, x.values[i * x.cols + d]);
      hi = std::max(hi, x.values[i * x.cols + d]);
    }
    sq.min[d] = lo;
    sq.step[d] = static_cast<float>((static_cast<double>(hi) - lo) / 256.0);
  }
  for (std::uint64_t i = 0; i < x.rows; ++i) {
    for (std::uint64_t d = 0; d < x.cols; ++d) {
      if (sq.step[d] == 0.0f) continue;
      const double c = std::floor((static_cast<double>(x.values[i * x.cols + d]) - sq.min[d]) / sq.step[d]);
      sq.codes[i * x.cols + d] = static_cast<std::uint8_t>(std::clamp(c, 0.0, 255.0));
    }
  }
  return sq;
}

inline DenseMatrix sq_decode(const ScalarQuantResidual& sq) {
  DenseMatrix out(sq.n, sq.dim);
  for (std::uint64_t i = 0; i < sq.n; ++i)
    for (std::uint64_t d = 0; d < sq.dim; ++d) out.values[i * sq.dim + d] = static_cast<float>(sq.decode(i, d));
  return out;
}

// Largest |decode - value| / range over every stored value (0 for constant dims).
inline double sq_max_relative_error(const DenseMatrix& x, const ScalarQuantResidual& sq) {
  require(x.rows == sq.n && x.cols == sq.dim, Errc::dimension_mismatch, "residual shape differs from data");
  double worst = 0.0;
  for (std::uint64_t d = 0; d < x.cols; ++d) {
    const double range = 256.0 * sq.step[d];
    for (std::uint64_t i = 0; i < x.rows; ++i) {
      const double err = std::fabs(sq.decode(i, d) - x.values[i * x.cols + d]);
      if (range == 0.0) {
        if (err > 0.0) return std::numeric_limits<double>::infinity();
        continue;
      }
      worst = std::max(worst, err / range);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Whitening: data x -> P (x - mean), query q -> P^-T q, with P = Cov^-1/2.
// Then (P^-T q).(P (x - mean)) + q.mean = q.x.

struct WhiteningTransform {
  std::uint64_t dim = 0;
  std::vector<double> mean;
  std::vector<double> p;        // dim x dim, row-major
  std::vector<double> p_inv_t;  // dim x dim, row-major

  bool empty() const { return dim == 0; }

  std::vector<float> apply_data(std::span<const float> x) const {
    require(x.size() == dim, Errc::dimension_mismatch, "whitening input length");
    std::vector<float> out(dim);
    for (std::uint64_t r = 0; r < dim; ++r) {
      double s = 0.0;
      for (std::uint64_t c = 0; c < dim; ++c) s += p[r * dim + c] * (static_cast<double>(x[c]) - mean[c]);
      out[r] = static_cast<float>(s);
    }
    return out;
  }

  std::vector<float> apply_query(std::span<const float> q) const {
    require(q.size() == dim, Errc::dimension_mismatch, "whitening input length");
    std::vector<float> out(dim);
    for (std::uint64_t r = 0; r < dim; ++r) {
      double s = 0.0;
      for (std::uint64_t c = 0; c < dim; ++c) s += p_inv_t[r * dim + c] * static_cast<double>(q[c]);
      out[r] = static_cast<float>(s);
    }
    return out;
  }

  // q.mean, the constant the centered inner product drops.
  double query_offset(std::span<const float> q) const {
    double s = 0.0;
    for (std::uint64_t c = 0; c < dim; ++c) s += static_cast<double>(q[c]) * mean[c];
    return s;
  }

  bool operator==(const WhiteningTransform&) const = default;
};

enum class WhitenSide { data, query };

inline std::vector<float> whiten_apply(const WhiteningTransform& w, std::span<const float> v, WhitenSide side) {
  return side == WhitenSide::data ? w.apply_data(v) : w.apply_query(v);
}

// ridge_rel scales a ridge of ridge_rel * trace/d added before the inverse
// square root; ridge_rel = 0 fails on a singular covariance.
inline WhiteningTransform whiten_fit(const DenseMatrix& x, double ridge_rel = 1e-6, std::uint64_t max_rows = 0,
                                     std::uint64_t seed = 0) {
  WhiteningTransform w;
  w.dim = x.cols;
  if (x.cols == 0) return w;
  require(x.rows >= 2, Errc::invalid_argument, "whitening needs at least two rows");
  std::vector<std::uint64_t> rows(x.rows);
  std::iota(rows.begin(), rows.end(), std::uint64_t{0});
  if (max_rows > 0 && x.rows > max_rows) {
    auto rng = make_rng(seed, 0x77);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(max_rows);
    std::sort(rows.begin(), rows.end());
  }
  const auto d = static_cast<Eigen::Index>(x.cols);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (auto r : rows) mean += Eigen::Map<const Eigen::VectorXf>(x.row(r).data(), d).cast<double>();
  mean /= static_cast<double>(rows.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (auto r : rows) {
    const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXf>(x.row(r).data(), d).cast<double>() - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(rows.size());
  const double ridge = ridge_rel * cov.trace() / static_cast<double>(d);
  cov.diagonal().array() += ridge;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  require(eig.info() == Eigen::Success, Errc::numerical, "covariance eigendecomposition failed");
  const Eigen::VectorXd lambda = eig.eigenvalues();
  const double tiny = 1e-12 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  require(lambda.minCoeff() > tiny, Errc::numerical, "covariance is singular; use a ridge");
  const Eigen::MatrixXd& v = eig.eigenvectors();
  const Eigen::MatrixXd p = v * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  const Eigen::MatrixXd p_inv_t = v * lambda.cwiseSqrt().asDiagonal() * v.transpose();

  w.mean.assign(mean.data(), mean.data() + d);
  w.p.resize(x.cols * x.cols);
  w.p_inv_t.resize(x.cols * x.cols);
  for (Eigen::Index r = 0; r < d; ++r)
    for (Eigen::Index c = 0; c < d; ++c) {
      w.p[static_cast<std::size_t>(r * d + c)] = p(r, c);
      w.p_inv_t[static_cast<std::size_t>(r * d + c)] = p_inv_t(r, c);
    }
  return w;
}

// ---------------------------------------------------------------------------
// Bounds

// Rate-distortion floor on E||x - x~||^2 for b bits over d i.i.d. Gaussian
// dims of total variance sigma2.
inline double rate_distortion_bound(double sigma2, double bits, double d) {
  require(d > 0.0, Errc::invalid_argument, "dimension must be > 0");
  return sigma2 * std::exp2(-2.0 * bits / d);
}

// Lower bound on Pr_q{|q.x - q.x~| < eps} from K subspaces, the largest
// per-subspace squared query norm and the largest per-subspace squared
// quantization error.
inline double azuma_error_bound(double eps, std::uint32_t subspaces, double max_query_sub_sq, double max_residual_sub_sq) {
  const double denom = 2.0 * subspaces * max_query_sub_sq * max_residual_sub_sq;
  if (denom <= 0.0) return 1.0;
  return std::max(0.0, 1.0 - 2.0 * std::exp(-(eps * eps) / denom));
}

inline double max_subspace_sq_norm(std::span<const float> v, const Codebooks& cb) {
  double best = 0.0;
  for (std::uint32_t k = 0; k < cb.subspaces(); ++k) {
    double s = 0.0;
    for (auto d = cb.offsets[k]; d < cb.offsets[k + 1]; ++d) s += static_cast<double>(v[d]) * v[d];
    best = std::max(best, s);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Dense index bundle and its HDPQ serialization:
//   "HDPQ" | u32 version | u64 dim | u32 K | u32 l | u32[K] widths
//   | f32 centers | u64 N | packed codes
//   | u8 has_residual [| u64 dim | f32[dim] min | f32[dim] step | u8[N*dim] codes]

struct DenseIndex {
  Codebooks codebooks;
  PQCodes codes;
  ScalarQuantResidual residual;

  bool operator==(const DenseIndex&) const = default;
};

inline constexpr Magic kDenseIndexMagic{'H', 'D', 'P', 'Q'};
inline constexpr std::uint32_t kDenseIndexVersion = 1;

inline void write_dense_index(ByteWriter& w, const DenseIndex& idx) {
  const auto& cb = idx.codebooks;
  w.put_magic(kDenseIndexMagic);
  w.put<std::uint32_t>(kDenseIndexVersion);
  w.put<std::uint64_t>(cb.dim());
  w.put<std::uint32_t>(cb.subspaces());
  w.put<std::uint32_t>(cb.l);
  for (std::uint32_t k = 0; k < cb.subspaces(); ++k) w.put<std::uint32_t>(cb.width(k));
  w.put_span(std::span<const float>(cb.centers));
  w.put<std::uint64_t>(idx.codes.n);
  w.put_span(std::span<const std::uint8_t>(idx.codes.packed));
  const bool has_residual = idx.residual.dim > 0;
  w.put<std::uint8_t>(has_residual ? 1 : 0);
  if (has_residual) {
    w.put<std::uint64_t>(idx.residual.dim);
    w.put_span(std::span<const float>(idx.residual.min));
    w.put_span(std::span<const float>(idx.residual.step));
    w.put_span(std::span<const std::uint8_t>(idx.residual.codes));
  }
}

inline DenseIndex read_dense_index(ByteReader& r) {
  r.expect_magic(kDenseIndexMagic, "dense index");
  r.expect_version(kDenseIndexVersion, "dense index");
  DenseIndex idx;
  auto& cb = idx.codebooks;
  const auto dim = r.get<std::uint64_t>();
  const auto k = r.get<std::uint32_t>();
  cb.l = r.get<std::uint32_t>();
  require(cb.l == 16 || cb.l == 256, Errc::unsupported, "codebook size must be 16 or 256");
  cb.offsets.assign(k + 1, 0);
  for (std::uint32_t s = 0; s < k; ++s) cb.offsets[s + 1] = cb.offsets[s] + r.get<std::uint32_t>();
  require(cb.dim() == dim, Errc::invalid_argument, "subspace widths do not cover the dense dims");
  cb.centers = r.get_vector<float>(std::uint64_t{cb.l} * dim);
  idx.codes.n = r.get<std::uint64_t>();
  idx.codes.subspaces = k;
  idx.codes.l = cb.l;
  idx.codes.packed = r.get_vector<std::uint8_t>(idx.codes.n * idx.codes.row_bytes());
  if (r.get<std::uint8_t>() != 0) {
    auto& sq = idx.residual;
    sq.n = idx.codes.n;
    sq.dim = r.get<std::uint64_t>();
    sq.min = r.get_vector<float>(sq.dim);
    sq.step = r.get_vector<float>(sq.dim);
    sq.codes = r.get_vector<std::uint8_t>(sq.n * sq.dim);
  }
  return idx;
}

}  // namespace hmips
