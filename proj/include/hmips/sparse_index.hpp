#pragma once

// Pruned, cache-sorted inverted index over the sparse component, and the
// cache-line cost model that motivates the sort.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hmips/binary_io.hpp"
#include "hmips/data_model.hpp"

namespace hmips {

// ---------------------------------------------------------------------------
// Pruning

// Per-dimension magnitude cutoffs. Entries with |v| >= eta go to the data
// index, eta > |v| >= epsilon to the residual, the rest are discarded.
struct PruneThresholds {
  std::vector<float> eta;
  std::vector<float> epsilon;

  static PruneThresholds uniform(std::uint64_t d_sparse, float eta, float epsilon = 0.0f) {
    return {std::vector<float>(d_sparse, eta), std::vector<float>(d_sparse, epsilon)};
  }

  // eta_j is the top_t-th largest |value| in dim j, so the data index keeps
  // the top_t entries per dimension (more only on exact ties). Dimensions with
  // at most top_t nonzeros keep everything; top_t = 0 keeps nothing.
  static PruneThresholds from_top_t(const SparseMatrix& m, std::uint32_t top_t, float epsilon = 0.0f) {
    PruneThresholds th;
    th.epsilon.assign(m.cols, epsilon);
    if (top_t == 0) {
      th.eta.assign(m.cols, std::numeric_limits<float>::infinity());
      return th;
    }
    th.eta.assign(m.cols, 0.0f);
    const auto counts = m.nnz_per_dim();
    std::vector<std::uint64_t> start(m.cols + 1, 0);
    for (std::uint64_t j = 0; j < m.cols; ++j) start[j + 1] = start[j] + counts[j];
    std::vector<float> mags(m.nnz());
    auto cursor = start;
    for (std::uint64_t k = 0; k < m.nnz(); ++k) mags[cursor[m.dims[k]]++] = std::fabs(m.values[k]);
    for (std::uint64_t j = 0; j < m.cols; ++j) {
      if (counts[j] <= top_t) continue;
      auto first = mags.begin() + static_cast<std::ptrdiff_t>(start[j]);
      auto last = mags.begin() + static_cast<std::ptrdiff_t>(start[j + 1]);
      auto nth = first + (top_t - 1);
      std::nth_element(first, nth, last, std::greater<float>());
      th.eta[j] = *nth;
    }
    for (std::uint64_t j = 0; j < m.cols; ++j) th.epsilon[j] = std::min(th.epsilon[j], th.eta[j]);
    return th;
  }

  void validate(std::uint64_t d_sparse) const {
    require(eta.size() == d_sparse && epsilon.size() == d_sparse, Errc::dimension_mismatch,
            "threshold vectors must have d_sparse entries");
    for (std::uint64_t j = 0; j < d_sparse; ++j) {
      require(!(eta[j] < 0.0f) && !(epsilon[j] < 0.0f), Errc::invalid_argument, "thresholds must be >= 0");
      require(epsilon[j] <= eta[j], Errc::invalid_argument, "epsilon_j must not exceed eta_j");
    }
  }
};

struct PruneResult {
  SparseMatrix data;
  SparseMatrix residual;
  std::uint64_t discarded_count = 0;
  double discarded_mass = 0.0;  // sum of |v| over discarded entries
};

inline PruneResult prune_split(const SparseMatrix& m, const PruneThresholds& th) {
  th.validate(m.cols);
  PruneResult out;
  out.data = SparseMatrix(m.rows, m.cols);
  out.residual = SparseMatrix(m.rows, m.cols);
  for (std::uint64_t i = 0; i < m.rows; ++i) {
    const auto r = m.row(i);
    for (std::size_t k = 0; k < r.nnz(); ++k) {
      const DimIndex d = r.dims[k];
      const float v = r.values[k];
      const float mag = std::fabs(v);
      if (mag >= th.eta[d]) {
        out.data.dims.push_back(d);
        out.data.values.push_back(v);
      } else if (mag >= th.epsilon[d]) {
        out.residual.dims.push_back(d);
        out.residual.values.push_back(v);
      } else {
        ++out.discarded_count;
        out.discarded_mass += mag;
      }
    }
    out.data.offsets.push_back(out.data.dims.size());
    out.residual.offsets.push_back(out.residual.dims.size());
    ++out.data.rows;
    ++out.residual.rows;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Datapoint permutation

struct Permutation {
  std::vector<PointId> to_original;   // permuted position -> original id
  std::vector<PointId> to_permuted;   // original id -> permuted position

  std::uint64_t size() const { return to_original.size(); }

  static Permutation from_order(std::vector<PointId> order) {
    Permutation p;
    p.to_original = std::move(order);
    p.to_permuted.assign(p.to_original.size(), std::numeric_limits<PointId>::max());
    for (std::size_t pos = 0; pos < p.to_original.size(); ++pos) {
      const PointId id = p.to_original[pos];
      require(id < p.to_original.size() && p.to_permuted[id] == std::numeric_limits<PointId>::max(),
              Errc::invalid_argument, "order is not a permutation");
      p.to_permuted[id] = static_cast<PointId>(pos);
    }
    return p;
  }

  static Permutation identity(std::uint64_t n) {
    std::vector<PointId> order(n);
    std::iota(order.begin(), order.end(), PointId{0});
    return from_order(std::move(order));
  }

  bool operator==(const Permutation&) const = default;
};

// Dimensions ranked by nonzero count, most active first; ties by lower dim.
inline std::vector<DimIndex> rank_dimensions(const SparseMatrix& m) {
  const auto counts = m.nnz_per_dim();
  std::vector<DimIndex> order(m.cols);
  std::iota(order.begin(), order.end(), DimIndex{0});
  std::stable_sort(order.begin(), order.end(), [&](DimIndex a, DimIndex b) { return counts[a] > counts[b]; });
  return order;
}

// Orders datapoints by their indicator vectors over the ranked dimensions,
// descending lexicographically; identical indicators keep original order.
// This is the recursive nonzeros-first partition, realized as a sort: a
// 64-bit key holds the indicators of the 64 most active dimensions and the
// remaining ranks are compared as sorted lists.
inline Permutation cache_sort(const SparseMatrix& m) {
  const auto dim_order = rank_dimensions(m);
  std::vector<std::uint32_t> rank_of(m.cols);
  for (std::uint32_t r = 0; r < dim_order.size(); ++r) rank_of[dim_order[r]] = r;

  // Ranks beyond the key prefix, sorted ascending per point.
  constexpr std::uint32_t kKeyBits = 64;
  std::vector<std::uint64_t> keys(m.rows, 0);
  std::vector<std::uint64_t> tail_offsets(m.rows + 1, 0);
  std::vector<std::uint32_t> tails;
  for (std::uint64_t i = 0; i < m.rows; ++i) {
    const auto row = m.row(i);
    const auto tail_begin = tails.size();
    for (DimIndex d : row.dims) {
      const auto r = rank_of[d];
      if (r < kKeyBits) {
        keys[i] |= std::uint64_t{1} << (kKeyBits - 1 - r);
      } else {
        tails.push_back(r);
      }
    }
    std::sort(tails.begin() + static_cast<std::ptrdiff_t>(tail_begin), tails.end());
    tail_offsets[i + 1] = tails.size();
  }

  std::vector<PointId> order(m.rows);
  std::iota(order.begin(), order.end(), PointId{0});
  std::stable_sort(order.begin(), order.end(), [&](PointId a, PointId b) {
    if (keys[a] != keys[b]) return keys[a] > keys[b];
    auto ia = tail_offsets[a], ea = tail_offsets[a + 1];
    auto ib = tail_offsets[b], eb = tail_offsets[b + 1];
    for (; ia < ea && ib < eb; ++ia, ++ib) {
      // The point holding the more active (smaller) rank has a 1 where the
      // other has a 0 at the first difference.
      if (tails[ia] != tails[ib]) return tails[ia] < tails[ib];
    }
    return ia < ea && ib == eb;
  });
  return Permutation::from_order(std::move(order));
}

// ---------------------------------------------------------------------------
// Inverted index

struct InvertedIndex {
  std::uint64_t n = 0;
  std::uint64_t d_sparse = 0;
  Permutation perm;
  std::vector<std::uint64_t> list_offsets{0};  // d_sparse + 1
  std::vector<PointId> ids;                    // permuted ids, ascending within a list
  std::vector<float> weights;

  std::uint64_t nnz() const { return ids.size(); }
  std::uint64_t list_size(DimIndex j) const { return list_offsets[j + 1] - list_offsets[j]; }
  std::span<const PointId> list_ids(DimIndex j) const {
    return std::span<const PointId>(ids).subspan(list_offsets[j], list_size(j));
  }
  std::span<const float> list_weights(DimIndex j) const {
    return std::span<const float>(weights).subspan(list_offsets[j], list_size(j));
  }
  std::uint64_t bytes() const {
    return ids.size() * sizeof(PointId) + weights.size() * sizeof(float) + list_offsets.size() * 8 +
           perm.size() * 2 * sizeof(PointId);
  }

  // Rebuilds the indexed matrix in original datapoint order.
  SparseMatrix reconstruct() const {
    std::vector<std::vector<std::pair<DimIndex, float>>> rows(n);
    for (DimIndex j = 0; j < d_sparse; ++j) {
      const auto lid = list_ids(j);
      const auto lw = list_weights(j);
      for (std::size_t k = 0; k < lid.size(); ++k) rows[perm.to_original[lid[k]]].emplace_back(j, lw[k]);
    }
    SparseMatrix m(n, d_sparse);
    for (const auto& r : rows) {
      for (const auto& [d, v] : r) {
        m.dims.push_back(d);
        m.values.push_back(v);
      }
      m.offsets.push_back(m.dims.size());
      ++m.rows;
    }
    return m;
  }

  bool operator==(const InvertedIndex&) const = default;
};

inline InvertedIndex build_inverted(const SparseMatrix& data, Permutation perm) {
  require(perm.size() == data.rows, Errc::dimension_mismatch, "permutation size differs from row count");
  InvertedIndex idx;
  idx.n = data.rows;
  idx.d_sparse = data.cols;
  const auto counts = data.nnz_per_dim();
  idx.list_offsets.assign(data.cols + 1, 0);
  for (std::uint64_t j = 0; j < data.cols; ++j) idx.list_offsets[j + 1] = idx.list_offsets[j] + counts[j];
  idx.ids.resize(data.nnz());
  idx.weights.resize(data.nnz());
  auto cursor = idx.list_offsets;
  // Visiting rows in permuted order leaves every list sorted by permuted id.
  for (std::uint64_t pid = 0; pid < data.rows; ++pid) {
    const auto row = data.row(perm.to_original[pid]);
    for (std::size_t k = 0; k < row.nnz(); ++k) {
      const auto pos = cursor[row.dims[k]]++;
      idx.ids[pos] = static_cast<PointId>(pid);
      idx.weights[pos] = row.values[k];
    }
  }
  idx.perm = std::move(perm);
  return idx;
}

// ---------------------------------------------------------------------------
// Accumulation

// Per-query partial sums in permuted order, with an optional count of
// accumulator line accesses: for each scanned posting list, the number of
// distinct lines (blocks of line_capacity slots) it touches, summed.
template <class T = float>
class Accumulator {
 public:
  explicit Accumulator(std::uint64_t n, std::uint32_t line_capacity = 16, bool track_lines = true)
      : scores_(n, T{0}), line_capacity_(line_capacity), track_lines_(track_lines) {
    require(line_capacity > 0, Errc::invalid_argument, "line capacity must be > 0");
  }

  std::span<T> scores() { return scores_; }
  std::span<const T> scores() const { return scores_; }
  std::uint32_t line_capacity() const { return line_capacity_; }
  std::uint64_t touched_lines() const { return lines_; }
  bool tracks_lines() const { return track_lines_; }
  void add_lines(std::uint64_t k) { lines_ += k; }

  void reset() {
    std::fill(scores_.begin(), scores_.end(), T{0});
    lines_ = 0;
  }

 private:
  std::vector<T> scores_;
  std::uint32_t line_capacity_;
  bool track_lines_;
  std::uint64_t lines_ = 0;
};

// Distinct lines of capacity B touched by one posting list (ids ascending).
inline std::uint64_t list_lines(std::span<const PointId> ids, std::uint32_t line_capacity) {
  std::uint64_t lines = 0;
  std::uint64_t last = std::numeric_limits<std::uint64_t>::max();
  for (PointId pid : ids) {
    const std::uint64_t line = pid / line_capacity;
    if (line != last) {
      ++lines;
      last = line;
    }
  }
  return lines;
}

inline void check_query_dims(SparseView q, std::uint64_t d_sparse) {
  for (DimIndex d : q.dims)
    require(d < d_sparse, Errc::out_of_range,
            "query dim " + std::to_string(d) + " >= d_sparse " + std::to_string(d_sparse));
}

// scores[pid] += q_j * w over the postings of every query dim. No line tracking.
template <class T>
void accumulate_postings(const InvertedIndex& idx, SparseView q, std::span<T> scores) {
  for (std::size_t k = 0; k < q.nnz(); ++k) {
    const DimIndex j = q.dims[k];
    const T qj = static_cast<T>(q.values[k]);
    const auto lid = idx.list_ids(j);
    const auto lw = idx.list_weights(j);
    for (std::size_t p = 0; p < lid.size(); ++p) scores[lid[p]] += qj * static_cast<T>(lw[p]);
  }
}

// Zeroes exactly the slots accumulate_postings wrote for q.
template <class T>
void clear_postings(const InvertedIndex& idx, SparseView q, std::span<T> scores) {
  for (DimIndex j : q.dims)
    for (PointId pid : idx.list_ids(j)) scores[pid] = T{0};
}

template <class T>
Accumulator<T>& sparse_scan(const InvertedIndex& idx, SparseView q, Accumulator<T>& acc) {
  check_query_dims(q, idx.d_sparse);
  require(acc.scores().size() == idx.n, Errc::dimension_mismatch, "accumulator size differs from index size");
  accumulate_postings<T>(idx, q, acc.scores());
  if (acc.tracks_lines())
    for (DimIndex j : q.dims) acc.add_lines(list_lines(idx.list_ids(j), acc.line_capacity()));
  return acc;
}

// Mean over queries of the accumulator line accesses: per active query dim,
// the distinct lines its posting list touches, summed over dims.
inline double measure_cachelines(const InvertedIndex& idx, const SparseMatrix& queries, std::uint32_t line_capacity) {
  require(line_capacity > 0, Errc::invalid_argument, "line capacity must be > 0");
  if (queries.rows == 0) return 0.0;
  std::uint64_t total = 0;
  for (std::uint64_t qi = 0; qi < queries.rows; ++qi) {
    const auto q = queries.row(qi);
    check_query_dims(q, idx.d_sparse);
    for (DimIndex j : q.dims) total += list_lines(idx.list_ids(j), line_capacity);
  }
  return static_cast<double>(total) / static_cast<double>(queries.rows);
}

// ---------------------------------------------------------------------------
// Cost model for independent, power-law activity

struct CostModelParams {
  std::vector<double> P;  // datapoint activity per dim, descending
  std::vector<double> Q;  // query activity per dim
  std::uint64_t N = 0;
  std::uint32_t B = 16;

  void validate() const {
    require(P.size() == Q.size(), Errc::dimension_mismatch, "P and Q lengths differ");
    require(B > 0, Errc::invalid_argument, "B must be > 0");
    for (std::size_t j = 0; j < P.size(); ++j) {
      require(P[j] >= 0.0 && P[j] <= 1.0 && Q[j] >= 0.0 && Q[j] <= 1.0, Errc::invalid_argument,
              "probabilities must lie in [0,1]");
      require(j == 0 || P[j] <= P[j - 1], Errc::invalid_argument, "P must be descending");
    }
  }
};

// Expected lines touched in dim j (0-based) without sorting, given the dim is queried.
inline double unsorted_lines_for_dim(const CostModelParams& p, std::size_t j) {
  return (1.0 - std::pow(1.0 - p.P[j], static_cast<double>(p.B))) * static_cast<double>(p.N) / p.B;
}

// Worst-case lines in dim j after cache sorting: the 2^(j+1) contiguous blocks
// never share a line.
inline double sorted_lines_bound_for_dim(const CostModelParams& p, std::size_t j) {
  const double blocks = std::ldexp(1.0, static_cast<int>(std::min<std::size_t>(j + 1, 2000)));
  const double lines = p.P[j] * static_cast<double>(p.N) / p.B;
  if (lines >= blocks) return blocks * std::ceil(lines / blocks);
  return unsorted_lines_for_dim(p, j);
}

inline double expected_cachelines_unsorted(const CostModelParams& p) {
  p.validate();
  double sum = 0.0;
  for (std::size_t j = 0; j < p.P.size(); ++j) sum += p.Q[j] * unsorted_lines_for_dim(p, j);
  return sum;
}

inline double expected_cachelines_sorted_bound(const CostModelParams& p) {
  p.validate();
  double sum = 0.0;
  for (std::size_t j = 0; j < p.P.size(); ++j) sum += p.Q[j] * sorted_lines_bound_for_dim(p, j);
  return sum;
}

// Lower bound on Pr{|q.x - q.x~| < eps} for pruning with max threshold eta_max
// when every dim is independently active with probability p and values are
// bounded by M.
inline double chernoff_prune_bound(double eps, double M, double eta_max, double d, double p) {
  if (eta_max <= 0.0 || M <= 0.0) return 1.0;
  const double n_eps = eps / (M * eta_max);
  if (std::isinf(n_eps)) return 1.0;
  const double mu = d * p * p;
  const double denom = n_eps + mu;
  if (denom <= 0.0) return 0.0;
  const double diff = n_eps - mu;
  return std::max(0.0, 1.0 - 2.0 * std::exp(-(diff * diff) / denom));
}

// ---------------------------------------------------------------------------
// HSIX: "HSIX" | u32 version | u64 N | u64 d_sparse | u32[N] order
//       | u64[d_sparse] posting counts | (u32 id, f32 weight)[nnz]

inline constexpr Magic kSparseIndexMagic{'H', 'S', 'I', 'X'};
inline constexpr std::uint32_t kSparseIndexVersion = 1;

inline void write_inverted(ByteWriter& w, const InvertedIndex& idx) {
  w.put_magic(kSparseIndexMagic);
  w.put<std::uint32_t>(kSparseIndexVersion);
  w.put<std::uint64_t>(idx.n);
  w.put<std::uint64_t>(idx.d_sparse);
  w.put_span(std::span<const PointId>(idx.perm.to_original));
  for (std::uint64_t j = 0; j < idx.d_sparse; ++j) w.put<std::uint64_t>(idx.list_size(static_cast<DimIndex>(j)));
  for (std::uint64_t k = 0; k < idx.nnz(); ++k) {
    w.put<std::uint32_t>(idx.ids[k]);
    w.put<float>(idx.weights[k]);
  }
}

inline InvertedIndex read_inverted(ByteReader& r) {
  r.expect_magic(kSparseIndexMagic, "sparse index");
  r.expect_version(kSparseIndexVersion, "sparse index");
  InvertedIndex idx;
  idx.n = r.get<std::uint64_t>();
  idx.d_sparse = r.get<std::uint64_t>();
  idx.perm = Permutation::from_order(r.get_vector<PointId>(idx.n));
  const auto counts = r.get_vector<std::uint64_t>(idx.d_sparse);
  idx.list_offsets.assign(idx.d_sparse + 1, 0);
  for (std::uint64_t j = 0; j < idx.d_sparse; ++j) idx.list_offsets[j + 1] = idx.list_offsets[j] + counts[j];
  const auto nnz = idx.list_offsets.back();
  if (nnz > r.remaining() / 8) throw Error(Errc::truncated, "sparse index postings");
  idx.ids.resize(nnz);
  idx.weights.resize(nnz);
  for (std::uint64_t k = 0; k < nnz; ++k) {
    idx.ids[k] = r.get<std::uint32_t>();
    idx.weights[k] = r.get<float>();
    require(idx.ids[k] < idx.n, Errc::out_of_range, "posting id beyond N");
  }
  return idx;
}

}  // namespace hmips
