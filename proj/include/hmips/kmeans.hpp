#pragma once

// Lloyd's k-means with k-means++ seeding, used per PQ subspace.

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "hmips/error.hpp"

namespace hmips {

struct KMeansResult {
  std::vector<double> centers;            // k x dim, row-major
  std::vector<std::uint32_t> assignment;  // per point
  // Mean squared error after each assignment step; entry 0 is the seeding.
  std::vector<double> objective;
};

namespace detail {

inline double sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t t = 0; t < dim; ++t) {
    const double d = a[t] - b[t];
    s += d * d;
  }
  return s;
}

}  // namespace detail

// Nearest center by squared L2; ties go to the lower index.
inline std::uint32_t nearest_center(std::span<const double> centers, std::size_t dim, const double* x, double* dist_out = nullptr) {
  const std::size_t k = dim == 0 ? (centers.empty() ? 0 : 1) : centers.size() / dim;
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double d = detail::sq_dist(centers.data() + c * dim, x, dim);
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::uint32_t>(c);
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

// data: n x dim row-major. Deterministic for a given rng state.
inline KMeansResult kmeans(std::span<const double> data, std::size_t dim, std::size_t k, std::uint32_t iters,
                           std::mt19937_64& rng) {
  require(dim > 0, Errc::invalid_argument, "empty subspace");
  const std::size_t n = data.size() / dim;
  require(k > 0, Errc::invalid_argument, "k must be > 0");
  require(n >= k, Errc::invalid_argument, "need at least k=" + std::to_string(k) + " points, got " + std::to_string(n));

  KMeansResult res;
  res.centers.resize(k * dim);
  auto point = [&](std::size_t i) { return data.data() + i * dim; };

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  std::copy(point(first), point(first) + dim, res.centers.begin());
  for (std::size_t c = 1; c < k; ++c) {
    const double* prev = res.centers.data() + (c - 1) * dim;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], detail::sq_dist(point(i), prev, dim));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double target = unit(rng) * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] == 0.0 && pick > 0) --pick;
    } else {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    }
    std::copy(point(pick), point(pick) + dim, res.centers.begin() + static_cast<std::ptrdiff_t>(c * dim));
  }

  res.assignment.assign(n, 0);
  std::vector<double> dist(n);
  auto assign = [&] {
    double total = 0.0;
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = nearest_center(res.centers, dim, point(i), &dist[i]);
      changed |= a != res.assignment[i];
      res.assignment[i] = a;
      total += dist[i];
    }
    res.objective.push_back(total / static_cast<double>(n));
    return changed;
  };
  assign();

  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::uint32_t it = 0; it < iters; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto a = res.assignment[i];
      ++counts[a];
      for (std::size_t t = 0; t < dim; ++t) sums[a * dim + t] += point(i)[t];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t t = 0; t < dim; ++t) res.centers[c * dim + t] = sums[c * dim + t] / static_cast<double>(counts[c]);
    }
    // Empty clusters split the largest one: the empty center moves onto the
    // member of the largest cluster farthest from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      const auto largest = static_cast<std::uint32_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (res.assignment[i] != largest) continue;
        const double d = detail::sq_dist(point(i), res.centers.data() + largest * dim, dim);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n || far_d <= 0.0) continue;  // nothing left to split
      std::copy(point(far), point(far) + dim, res.centers.begin() + static_cast<std::ptrdiff_t>(c * dim));
      res.assignment[far] = static_cast<std::uint32_t>(c);
      --counts[largest];
      counts[c] = 1;
    }
    if (!assign()) break;
  }
  return res;
}

}  // namespace hmips
