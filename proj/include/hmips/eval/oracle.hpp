#pragma once

// Ground truth: exact hybrid scoring over every point.

#include <algorithm>
#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "hmips/data_model.hpp"
#include "hmips/topk.hpp"

namespace hmips {

inline std::vector<double> exact_scores(const HybridDataset& data, const HybridView& q) {
  std::vector<double> scores(data.size());
  for (std::uint64_t i = 0; i < data.size(); ++i) scores[i] = hybrid_dot(q, data.point(i));
  return scores;
}

// Exact top-h by hybrid_dot; ties go to the lower id.
inline std::vector<ScoredId> brute_force_topk(const HybridDataset& data, const HybridView& q, std::uint64_t h) {
  require(q.dense.size() == data.d_dense() && q.d_sparse == data.d_sparse(), Errc::dimension_mismatch,
          "query schema differs from dataset");
  const auto scores = exact_scores(data, q);
  return select_topk(std::span<const double>(scores), h);
}

inline std::vector<ScoredId> brute_force_topk(const HybridDataset& data, const HybridVector& q, std::uint64_t h) {
  return brute_force_topk(data, q.view(), h);
}

// |returned ∩ truth| / h
inline double recall_at_h(std::span<const PointId> returned, std::span<const PointId> truth, std::uint64_t h) {
  require(h > 0, Errc::invalid_argument, "h must be >= 1");
  const std::unordered_set<PointId> want(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(std::min<std::uint64_t>(h, truth.size())));
  std::unordered_set<PointId> seen;
  std::uint64_t hits = 0;
  for (std::size_t i = 0; i < returned.size() && i < h; ++i)
    if (want.count(returned[i]) && seen.insert(returned[i]).second) ++hits;
  return static_cast<double>(hits) / static_cast<double>(h);
}

}  // namespace hmips
