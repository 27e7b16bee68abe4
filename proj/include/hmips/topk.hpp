#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <span>
#include <vector>

#include "hmips/data_model.hpp"

namespace hmips {

struct ScoredId {
  PointId id = 0;
  double score = 0.0;

  bool operator==(const ScoredId&) const = default;
};

// Higher score first; equal scores go to the lower id.
inline bool ranks_before(const ScoredId& a, const ScoredId& b) {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

// Exact top-k of candidates [0, n), where score(i) and id(i) give each
// candidate's score and tie-break id. Returned best first.
template <class ScoreFn, class IdFn>
std::vector<ScoredId> select_topk_by(std::uint64_t n, std::uint64_t k, ScoreFn&& score, IdFn&& id) {
  k = std::min(k, n);
  std::vector<ScoredId> out;
  if (k == 0) return out;
  out.reserve(k);
  if (k == n) {
    for (std::uint64_t i = 0; i < n; ++i) out.push_back({id(i), static_cast<double>(score(i))});
    std::sort(out.begin(), out.end(), ranks_before);
    return out;
  }
  // Heap of the k best so far, worst on top.
  auto worse_on_top = [](const ScoredId& a, const ScoredId& b) { return ranks_before(a, b); };
  std::priority_queue<ScoredId, std::vector<ScoredId>, decltype(worse_on_top)> heap(worse_on_top);
  std::uint64_t i = 0;
  for (; i < k; ++i) heap.push({id(i), static_cast<double>(score(i))});
  for (; i < n; ++i) {
    const auto s = static_cast<double>(score(i));
    const auto& worst = heap.top();
    if (s < worst.score) continue;
    const ScoredId cand{id(i), s};
    if (ranks_before(cand, worst)) {
      heap.pop();
      heap.push(cand);
    }
  }
  while (!heap.empty()) {
    out.push_back(heap.top());
    heap.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

template <class T>
std::vector<ScoredId> select_topk(std::span<const T> scores, std::uint64_t k) {
  return select_topk_by(
      scores.size(), k, [&](std::uint64_t i) { return scores[i]; },
      [](std::uint64_t i) { return static_cast<PointId>(i); });
}

inline std::vector<PointId> ids_of(std::span<const ScoredId> xs) {
  std::vector<PointId> ids;
  ids.reserve(xs.size());
  for (const auto& x : xs) ids.push_back(x.id);
  return ids;
}

}  // namespace hmips
