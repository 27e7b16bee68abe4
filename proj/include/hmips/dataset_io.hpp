#pragma once

// HYBX dataset file, little-endian:
//   "HYBX" | u32 version=1 | u64 N | u64 d_sparse | u32 d_dense
//   dense:  N*d_dense f32, row-major
//   sparse: (N+1) u64 CSR offsets | nnz u32 dims | nnz f32 values

#include <limits>
#include <string>

#include "hmips/binary_io.hpp"
#include "hmips/data_model.hpp"

namespace hmips {

inline constexpr Magic kDatasetMagic{'H', 'Y', 'B', 'X'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline void write_dataset(ByteWriter& w, const HybridDataset& ds) {
  require(ds.d_dense() <= std::numeric_limits<std::uint32_t>::max(), Errc::out_of_range, "d_dense exceeds u32");
  w.put_magic(kDatasetMagic);
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint64_t>(ds.size());
  w.put<std::uint64_t>(ds.d_sparse());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.d_dense()));
  w.put_span(std::span<const float>(ds.dense.values));
  w.put_span(std::span<const std::uint64_t>(ds.sparse.offsets));
  w.put_span(std::span<const DimIndex>(ds.sparse.dims));
  w.put_span(std::span<const float>(ds.sparse.values));
}

inline HybridDataset read_dataset(ByteReader& r) {
  r.expect_magic(kDatasetMagic, "dataset");
  r.expect_version(kDatasetVersion, "dataset");
  const auto n = r.get<std::uint64_t>();
  const auto d_sparse = r.get<std::uint64_t>();
  const auto d_dense = r.get<std::uint32_t>();
  HybridDataset ds(d_sparse, d_dense);
  if (d_dense > 0 && n > r.remaining() / (sizeof(float) * d_dense)) throw Error(Errc::truncated, "dataset dense block");
  ds.dense.rows = n;
  ds.dense.values = r.get_vector<float>(n * d_dense);
  ds.sparse.rows = n;
  ds.sparse.offsets = r.get_vector<std::uint64_t>(n + 1);
  const auto nnz = ds.sparse.offsets.back();
  ds.sparse.dims = r.get_vector<DimIndex>(nnz);
  ds.sparse.values = r.get_vector<float>(nnz);
  ds.validate();
  return ds;
}

inline Bytes serialize_dataset(const HybridDataset& ds) {
  ByteWriter w;
  write_dataset(w, ds);
  return std::move(w).take();
}

inline HybridDataset deserialize_dataset(std::span<const char> bytes) {
  ByteReader r(bytes);
  return read_dataset(r);
}

inline void save_dataset(const std::string& path, const HybridDataset& ds) { write_file(path, serialize_dataset(ds)); }

inline HybridDataset load_dataset(const std::string& path) { return deserialize_dataset(read_file(path)); }

}  // namespace hmips
