#pragma once

// Power-law synthetic hybrid data.
//
// Sparse dim j (0-based) is nonzero with probability
//   P_j = min(1, nnz_scale * (j+1)^-zipf_alpha)
// independently per point. Nonzero values follow a bounded law on [-M, M].
// Dense values are i.i.d. normal with standard deviation dense_scale.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hmips/data_model.hpp"

namespace hmips {

enum class ValueLaw {
  uniform,  // U[-M, M]
  power,    // sign * M * u^value_power, u ~ U(0, 1]; mass concentrates near zero
};

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

struct SynthConfig {
  std::uint64_t n = 10000;
  std::uint64_t n_queries = 100;
  std::uint64_t d_sparse = 10000;
  std::uint64_t d_dense = 64;
  double zipf_alpha = 1.0;
  double nnz_scale = 1.0;
  bool query_same_law = true;
  double query_nnz_scale = 1.0;  // used when !query_same_law
  ValueLaw value_law = ValueLaw::uniform;
  double value_max = 1.0;
  double value_power = 1.0;
  double dense_scale = 1.0;
  std::uint64_t seed = 0;

  double activity(std::uint64_t dim) const { return law(nnz_scale, dim); }
  double query_activity(std::uint64_t dim) const { return law(query_same_law ? nnz_scale : query_nnz_scale, dim); }

  std::vector<double> activities() const {
    std::vector<double> p(d_sparse);
    for (std::uint64_t j = 0; j < d_sparse; ++j) p[j] = activity(j);
    return p;
  }
  std::vector<double> query_activities() const {
    std::vector<double> q(d_sparse);
    for (std::uint64_t j = 0; j < d_sparse; ++j) q[j] = query_activity(j);
    return q;
  }

  void validate() const {
    require(zipf_alpha > 0.0 && std::isfinite(zipf_alpha), Errc::invalid_argument, "zipf_alpha must be > 0");
    require(nnz_scale >= 0.0 && query_nnz_scale >= 0.0, Errc::invalid_argument, "nnz scales must be >= 0");
    require(value_max > 0.0 && value_power > 0.0, Errc::invalid_argument, "value law parameters must be > 0");
    require(dense_scale >= 0.0, Errc::invalid_argument, "dense_scale must be >= 0");
    require(n < (std::uint64_t{1} << 32) && n_queries < (std::uint64_t{1} << 32), Errc::out_of_range,
            "point count must fit in 32 bits");
    require(d_sparse < (std::uint64_t{1} << 32), Errc::out_of_range, "d_sparse must fit in 32 bits");
  }

 private:
  double law(double scale, std::uint64_t dim) const {
    return std::min(1.0, scale * std::pow(static_cast<double>(dim + 1), -zipf_alpha));
  }
};

struct SyntheticData {
  HybridDataset data;
  HybridDataset queries;
};

namespace detail {

inline float draw_sparse_value(const SynthConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    double v = 0.0;
    if (cfg.value_law == ValueLaw::uniform) {
      v = cfg.value_max * (2.0 * unit(rng) - 1.0);
    } else {
      const double u = 1.0 - unit(rng);  // (0, 1]
      const double mag = cfg.value_max * std::pow(u, cfg.value_power);
      v = unit(rng) < 0.5 ? -mag : mag;
    }
    const auto f = static_cast<float>(v);
    if (f != 0.0f) return f;
  }
}

// Column-wise generation with geometric skipping: cost O(nnz + d_sparse).
inline SparseMatrix generate_sparse(const SynthConfig& cfg, std::uint64_t n, bool queries, std::mt19937_64& rng) {
  std::vector<std::vector<std::pair<DimIndex, float>>> rows(n);
  for (std::uint64_t j = 0; j < cfg.d_sparse && n > 0; ++j) {
    const double p = queries ? cfg.query_activity(j) : cfg.activity(j);
    if (p <= 0.0) continue;
    std::geometric_distribution<std::uint64_t> gap(p);
    for (std::uint64_t i = gap(rng); i < n; i += 1 + gap(rng)) {
      rows[i].emplace_back(static_cast<DimIndex>(j), draw_sparse_value(cfg, rng));
    }
  }
  SparseMatrix m(n, cfg.d_sparse);
  for (auto& r : rows) {
    for (const auto& [d, v] : r) {
      m.dims.push_back(d);
      m.values.push_back(v);
    }
    m.offsets.push_back(m.dims.size());
    ++m.rows;
    std::vector<std::pair<DimIndex, float>>().swap(r);
  }
  return m;
}

inline DenseMatrix generate_dense(const SynthConfig& cfg, std::uint64_t n, std::mt19937_64& rng) {
  DenseMatrix m(n, cfg.d_dense);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : m.values) v = static_cast<float>(cfg.dense_scale * normal(rng));
  return m;
}

}  // namespace detail

// Deterministic for a fixed cfg (including seed).
inline SyntheticData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SyntheticData out;
  auto sparse_rng = make_rng(cfg.seed, 1);
  auto dense_rng = make_rng(cfg.seed, 2);
  auto qsparse_rng = make_rng(cfg.seed, 3);
  auto qdense_rng = make_rng(cfg.seed, 4);
  out.data.sparse = detail::generate_sparse(cfg, cfg.n, false, sparse_rng);
  out.data.dense = detail::generate_dense(cfg, cfg.n, dense_rng);
  out.queries.sparse = detail::generate_sparse(cfg, cfg.n_queries, true, qsparse_rng);
  out.queries.dense = detail::generate_dense(cfg, cfg.n_queries, qdense_rng);
  return out;
}

}  // namespace hmips
