#pragma once

// User-item rating triplets, read from "user item rating" text lines.
// Raw ids are remapped to [0, count) in ascending raw-id order.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "hmips/data_model.hpp"

namespace hmips {

struct Rating {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  float value = 0.0f;
};

struct RatingsMatrix {
  std::uint64_t users = 0;
  std::uint64_t items = 0;
  float min_rating = 1.0f;
  float max_rating = 5.0f;
  std::vector<Rating> triplets;

  void validate() const {
    for (const auto& t : triplets) {
      require(t.user < users && t.item < items, Errc::out_of_range, "rating id outside matrix");
      require(t.value >= min_rating && t.value <= max_rating, Errc::out_of_range,
              "rating " + std::to_string(t.value) + " outside declared range");
    }
  }

  // Users as rows, items as columns; repeated (user, item) pairs are summed.
  SparseMatrix to_csr() const {
    std::vector<std::vector<std::pair<DimIndex, double>>> rows(users);
    for (const auto& t : triplets) rows[t.user].emplace_back(t.item, t.value);
    SparseMatrix m(users, items);
    for (auto& r : rows) {
      const auto v = normalize_sparse(std::span<const std::pair<DimIndex, double>>(r), items);
      m.push_row(v.view());
    }
    return m;
  }
};

namespace detail {

inline std::vector<std::uint32_t> remap_ids(std::vector<std::uint64_t>& raw) {
  std::vector<std::uint64_t> uniq = raw;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  std::vector<std::uint32_t> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] = static_cast<std::uint32_t>(std::lower_bound(uniq.begin(), uniq.end(), raw[i]) - uniq.begin());
  raw = std::move(uniq);
  return out;
}

}  // namespace detail

// Blank lines and lines starting with '#' are skipped. Separators may be
// whitespace, ',' or "::".
inline RatingsMatrix read_ratings(std::istream& in, float min_rating = 1.0f, float max_rating = 5.0f) {
  std::vector<std::uint64_t> users, items;
  std::vector<float> values;
  std::string line;
  std::uint64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    for (auto& c : line)
      if (c == ',' || c == ':' || c == '\t') c = ' ';
    std::istringstream ss(line);
    std::uint64_t u = 0, i = 0;
    double r = 0.0;
    if (!(ss >> u >> i >> r))
      throw Error(Errc::invalid_argument, "ratings line " + std::to_string(lineno) + ": expected 'user item rating'");
    require(r >= min_rating && r <= max_rating, Errc::out_of_range,
            "ratings line " + std::to_string(lineno) + ": rating outside [" + std::to_string(min_rating) + ", " +
                std::to_string(max_rating) + "]");
    users.push_back(u);
    items.push_back(i);
    values.push_back(static_cast<float>(r));
  }
  RatingsMatrix m;
  m.min_rating = min_rating;
  m.max_rating = max_rating;
  const auto uid = detail::remap_ids(users);
  const auto iid = detail::remap_ids(items);
  m.users = users.size();
  m.items = items.size();
  m.triplets.resize(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) m.triplets[k] = {uid[k], iid[k], values[k]};
  return m;
}

inline RatingsMatrix load_ratings(const std::string& path, float min_rating = 1.0f, float max_rating = 5.0f) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open " + path);
  return read_ratings(in, min_rating, max_rating);
}

}  // namespace hmips
