#pragma once

// Recall / latency benchmark over a roster of methods. Per-query wall time is
// the median of `repetitions` runs; the report carries the mean and median
// of those per-query times. With `deterministic` set, timing fields are
// written as zero so the CSV depends only on data and seeds.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hmips/eval/baselines.hpp"
#include "hmips/eval/oracle.hpp"
#include "hmips/lut16.hpp"

namespace hmips {

struct BenchRow {
  std::string method;
  std::string dataset;
  std::uint64_t n = 0, d_sparse = 0, d_dense = 0;
  std::uint32_t h = 0;
  double recall = 0.0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  std::uint64_t index_bytes = 0;
  double build_s = 0.0;
  bool skipped = false;
  std::string note;  // reason when skipped
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::string environment;

  const BenchRow* find(const std::string& method) const {
    for (const auto& r : rows)
      if (r.method == method) return &r;
    return nullptr;
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "method,dataset,N,dS,dD,h,recall,mean_ms,median_ms,index_bytes,build_s\n";
    char buf[256];
    for (const auto& r : rows) {
      out << r.method << ',' << r.dataset << ',' << r.n << ',' << r.d_sparse << ',' << r.d_dense << ',' << r.h << ',';
      if (r.skipped) {
        out << "NA,NA,NA,NA,NA\n";
        continue;
      }
      std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%llu,%.3f\n", r.recall, r.mean_ms, r.median_ms,
                    static_cast<unsigned long long>(r.index_bytes), r.build_s);
      out << buf;
    }
    return out.str();
  }

  std::string to_table() const {
    std::ostringstream out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-24s %8s %10s %10s %14s %9s\n", "method", "recall", "mean_ms", "median_ms",
                  "index_bytes", "build_s");
    out << buf;
    for (const auto& r : rows) {
      if (r.skipped) {
        std::snprintf(buf, sizeof buf, "%-24s %s\n", r.method.c_str(), ("skipped: " + r.note).c_str());
      } else {
        std::snprintf(buf, sizeof buf, "%-24s %8.4f %10.4f %10.4f %14llu %9.3f\n", r.method.c_str(), r.recall,
                      r.mean_ms, r.median_ms, static_cast<unsigned long long>(r.index_bytes), r.build_s);
      }
      out << buf;
    }
    if (!rows.empty()) {
      const auto& r = rows.front();
      out << "dataset " << r.dataset << ": N=" << r.n << " dS=" << r.d_sparse << " dD=" << r.d_dense << " h=" << r.h
          << '\n';
    }
    if (!environment.empty()) out << environment << '\n';
    return out.str();
  }
};

struct BenchOptions {
  std::string dataset = "synthetic";
  std::uint32_t h = 20;
  std::uint32_t repetitions = 3;
  bool deterministic = false;
  unsigned threads = 1;  // ground-truth computation only; methods run sequentially
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  return (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid))) / 2.0;
}

inline std::vector<std::vector<PointId>> ground_truth(const HybridDataset& data, const HybridDataset& queries,
                                                      std::uint32_t h, unsigned threads = 1) {
  std::vector<std::vector<PointId>> truth(queries.size());
  threads = std::max(1u, threads);
  auto work = [&](unsigned w) {
    for (std::uint64_t i = w; i < queries.size(); i += threads)
      truth[i] = ids_of(brute_force_topk(data, queries.point(i), h));
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(work, w);
  work(0);
  for (auto& t : pool) t.join();
  return truth;
}

// Builds and times one method. Build failures with Errc::unsupported mark the
// row skipped; other errors propagate.
inline BenchRow bench_method(SearchMethod& method, std::shared_ptr<const HybridDataset> data,
                             const HybridDataset& queries, const std::vector<std::vector<PointId>>& truth,
                             const BenchOptions& opt) {
  using clock = std::chrono::steady_clock;
  BenchRow row;
  row.method = method.name();
  row.dataset = opt.dataset;
  row.n = data->size();
  row.d_sparse = data->d_sparse();
  row.d_dense = data->d_dense();
  row.h = opt.h;
  const auto b0 = clock::now();
  try {
    method.build(data);
  } catch (const Error& e) {
    if (e.code() != Errc::unsupported) throw;
    row.skipped = true;
    row.note = e.what();
    return row;
  }
  row.build_s = std::chrono::duration<double>(clock::now() - b0).count();
  row.index_bytes = method.index_bytes();

  const auto reps = std::max<std::uint32_t>(1, opt.repetitions);
  std::vector<double> per_query(queries.size());
  double recall_sum = 0.0;
  for (std::uint64_t i = 0; i < queries.size(); ++i) {
    const auto q = queries.vector_at(i);
    std::vector<double> times(reps);
    std::vector<PointId> ids;
    for (std::uint32_t r = 0; r < reps; ++r) {
      const auto t0 = clock::now();
      ids = method.search(q, opt.h);
      times[r] = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    }
    per_query[i] = median_of(times);
    recall_sum += recall_at_h(ids, truth[i], opt.h);
  }
  row.recall = queries.size() ? recall_sum / static_cast<double>(queries.size()) : 0.0;
  double total = 0.0;
  for (double t : per_query) total += t;
  row.mean_ms = queries.size() ? total / static_cast<double>(queries.size()) : 0.0;
  row.median_ms = median_of(per_query);
  if (opt.deterministic) row.mean_ms = row.median_ms = row.build_s = 0.0;
  return row;
}

inline BenchReport run_benchmark(std::shared_ptr<const HybridDataset> data, const HybridDataset& queries,
                                 const std::vector<std::string>& methods, const HybridIndexConfig& cfg,
                                 const BenchOptions& opt) {
  require(opt.h >= 1, Errc::invalid_argument, "h must be >= 1");
  require(queries.d_sparse() == data->d_sparse() && queries.d_dense() == data->d_dense(), Errc::dimension_mismatch,
          "query schema differs from dataset");
  std::vector<std::unique_ptr<SearchMethod>> roster;
  for (const auto& m : methods) roster.push_back(make_method(m, cfg));
  const auto truth = ground_truth(*data, queries, opt.h, opt.threads);
  BenchReport rep;
  rep.environment = std::string("lut16 kernel: ") + (lut16_avx2_available() ? "avx2" : "blocked") +
                    ", reps=" + std::to_string(std::max<std::uint32_t>(1, opt.repetitions)) +
                    ", queries=" + std::to_string(queries.size());
  for (auto& m : roster) {
    rep.rows.push_back(bench_method(*m, data, queries, truth, opt));
    m.reset();  // release the index before building the next one
  }
  return rep;
}

}  // namespace hmips
