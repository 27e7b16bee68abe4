#pragma once

// LUT16 scanning: sums of 8-bit quantized table entries selected by 4-bit
// codes, accumulated in 16-bit lanes and spilled to 32 bits every 256
// subspaces (256 * 255 < 2^16, so a chunk never overflows).
//
// The scalar kernel defines the result. The blocked kernels read a
// transposed layout of 32-point blocks and widen 8-bit lookups to 16 bits
// without masking: adding the raw 16-bit word (low byte + 256 * high byte)
// into one accumulator and the shifted high byte into another, the low-byte
// sums fall out as dirty - (odd << 8). The modular overflow of the dirty
// accumulator is cancelled exactly by that subtraction.

#include <cstdint>
#include <span>
#include <vector>

#if defined(__AVX2__)
#include <immintrin.h>
#endif

#include "hmips/dense_index.hpp"

namespace hmips {

inline constexpr std::uint32_t kLut16BlockPoints = 32;
inline constexpr std::uint32_t kLut16ChunkSubspaces = 256;

// Blocks of 32 points; per block, one 32-byte row per subspace pair where
// byte t holds point t's code for subspace 2p (low nibble) and 2p+1 (high).
struct Lut16Layout {
  std::uint64_t n = 0;
  std::uint32_t subspaces = 0;
  std::uint32_t pairs = 0;
  std::uint64_t blocks = 0;
  std::vector<std::uint8_t> data;

  const std::uint8_t* pair_row(std::uint64_t block, std::uint32_t pair) const {
    return data.data() + (block * pairs + pair) * kLut16BlockPoints;
  }
};

inline Lut16Layout make_lut16_layout(const PQCodes& codes) {
  require(codes.l == 16, Errc::unsupported, "LUT16 layout needs l=16 codes");
  Lut16Layout lay;
  lay.n = codes.n;
  lay.subspaces = codes.subspaces;
  lay.pairs = (codes.subspaces + 1) / 2;
  lay.blocks = (codes.n + kLut16BlockPoints - 1) / kLut16BlockPoints;
  lay.data.assign(lay.blocks * lay.pairs * kLut16BlockPoints, 0);
  // Packed rows already hold subspaces 2p/2p+1 in one byte.
  for (std::uint64_t i = 0; i < codes.n; ++i) {
    const auto block = i / kLut16BlockPoints, t = i % kLut16BlockPoints;
    for (std::uint32_t p = 0; p < lay.pairs; ++p)
      lay.data[(block * lay.pairs + p) * kLut16BlockPoints + t] = codes.packed[i * codes.row_bytes() + p];
  }
  return lay;
}

enum class Lut16Kernel { scalar, blocked, avx2, best };

inline bool lut16_avx2_available() {
#if defined(__AVX2__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

// Reference kernel over the packed row-major codes.
inline void lut16_sums_scalar(const PQCodes& codes, const QuantizedLUT& q, std::span<std::uint32_t> out) {
  require(codes.l == 16, Errc::unsupported, "LUT16 scan needs l=16 codes");
  require(q.subspaces == codes.subspaces, Errc::dimension_mismatch, "table and code subspace counts differ");
  for (std::uint64_t i = 0; i < codes.n; ++i) {
    std::uint32_t total = 0;
    for (std::uint32_t start = 0; start < codes.subspaces; start += kLut16ChunkSubspaces) {
      const auto stop = std::min(codes.subspaces, start + kLut16ChunkSubspaces);
      std::uint16_t acc = 0;
      for (std::uint32_t k = start; k < stop; ++k)
        acc = static_cast<std::uint16_t>(acc + q.qtable[std::size_t{k} * 16 + codes.get(i, k)]);
      total += acc;
    }
    out[i] = total;
  }
}

namespace detail {

// Tables padded to an even subspace count; the padding subspace is all zero.
inline std::vector<std::uint8_t> padded_tables(const QuantizedLUT& q, std::uint32_t pairs) {
  std::vector<std::uint8_t> t(std::size_t{pairs} * 2 * 16, 0);
  std::copy(q.qtable.begin(), q.qtable.end(), t.begin());
  return t;
}

}  // namespace detail

// Portable kernel over the blocked layout using the unmasked widening.
inline void lut16_sums_blocked(const Lut16Layout& lay, const QuantizedLUT& q, std::span<std::uint32_t> out) {
  require(q.subspaces == lay.subspaces, Errc::dimension_mismatch, "table and code subspace counts differ");
  const auto tables = detail::padded_tables(q, lay.pairs);
  constexpr std::uint32_t chunk_pairs = kLut16ChunkSubspaces / 2;
  for (std::uint64_t b = 0; b < lay.blocks; ++b) {
    std::uint32_t total[kLut16BlockPoints] = {};
    for (std::uint32_t start = 0; start < lay.pairs; start += chunk_pairs) {
      const auto stop = std::min(lay.pairs, start + chunk_pairs);
      std::uint16_t dirty[16] = {}, odd[16] = {};
      for (std::uint32_t p = start; p < stop; ++p) {
        const auto* row = lay.pair_row(b, p);
        const auto* lut_lo = tables.data() + std::size_t{2 * p} * 16;
        const auto* lut_hi = lut_lo + 16;
        for (std::uint32_t m = 0; m < 16; ++m) {
          const std::uint8_t b0 = row[2 * m], b1 = row[2 * m + 1];
          const auto w_lo = static_cast<std::uint16_t>(lut_lo[b0 & 0x0f] | (lut_lo[b1 & 0x0f] << 8));
          const auto w_hi = static_cast<std::uint16_t>(lut_hi[b0 >> 4] | (lut_hi[b1 >> 4] << 8));
          dirty[m] = static_cast<std::uint16_t>(dirty[m] + w_lo + w_hi);
          odd[m] = static_cast<std::uint16_t>(odd[m] + (w_lo >> 8) + (w_hi >> 8));
        }
      }
      for (std::uint32_t m = 0; m < 16; ++m) {
        total[2 * m] += static_cast<std::uint16_t>(dirty[m] - static_cast<std::uint16_t>(odd[m] << 8));
        total[2 * m + 1] += odd[m];
      }
    }
    const auto base = b * kLut16BlockPoints;
    for (std::uint32_t t = 0; t < kLut16BlockPoints && base + t < lay.n; ++t) out[base + t] = total[t];
  }
}

#if defined(__AVX2__)
// PSHUFB does 32 parallel 16-way byte lookups per subspace.
inline void lut16_sums_avx2(const Lut16Layout& lay, const QuantizedLUT& q, std::span<std::uint32_t> out) {
  require(q.subspaces == lay.subspaces, Errc::dimension_mismatch, "table and code subspace counts differ");
  const auto tables = detail::padded_tables(q, lay.pairs);
  struct Lane {
    __m256i v;
  };
  std::vector<Lane> luts(std::size_t{lay.pairs} * 2);
  for (std::size_t s = 0; s < luts.size(); ++s)
    luts[s].v = _mm256_broadcastsi128_si256(_mm_loadu_si128(reinterpret_cast<const __m128i*>(tables.data() + s * 16)));
  const __m256i nibble = _mm256_set1_epi8(0x0f);
  constexpr std::uint32_t chunk_pairs = kLut16ChunkSubspaces / 2;
  alignas(32) std::uint32_t tail[kLut16BlockPoints];

  for (std::uint64_t b = 0; b < lay.blocks; ++b) {
    __m256i t0 = _mm256_setzero_si256(), t1 = t0, t2 = t0, t3 = t0;
    for (std::uint32_t start = 0; start < lay.pairs; start += chunk_pairs) {
      const auto stop = std::min(lay.pairs, start + chunk_pairs);
      __m256i dirty = _mm256_setzero_si256(), odd = _mm256_setzero_si256();
      for (std::uint32_t p = start; p < stop; ++p) {
        const __m256i codes = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(lay.pair_row(b, p)));
        const __m256i lo = _mm256_and_si256(codes, nibble);
        const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(codes, 4), nibble);
        const __m256i r0 = _mm256_shuffle_epi8(luts[2 * p].v, lo);
        const __m256i r1 = _mm256_shuffle_epi8(luts[2 * p + 1].v, hi);
        dirty = _mm256_add_epi16(dirty, _mm256_add_epi16(r0, r1));
        odd = _mm256_add_epi16(odd, _mm256_add_epi16(_mm256_srli_epi16(r0, 8), _mm256_srli_epi16(r1, 8)));
      }
      const __m256i even = _mm256_sub_epi16(dirty, _mm256_slli_epi16(odd, 8));
      // Interleave back to point order: lo = points 0-7 | 16-23, hi = 8-15 | 24-31.
      const __m256i lo = _mm256_unpacklo_epi16(even, odd);
      const __m256i hi = _mm256_unpackhi_epi16(even, odd);
      t0 = _mm256_add_epi32(t0, _mm256_cvtepu16_epi32(_mm256_castsi256_si128(lo)));
      t1 = _mm256_add_epi32(t1, _mm256_cvtepu16_epi32(_mm256_castsi256_si128(hi)));
      t2 = _mm256_add_epi32(t2, _mm256_cvtepu16_epi32(_mm256_extracti128_si256(lo, 1)));
      t3 = _mm256_add_epi32(t3, _mm256_cvtepu16_epi32(_mm256_extracti128_si256(hi, 1)));
    }
    const auto base = b * kLut16BlockPoints;
    std::uint32_t* dst = base + kLut16BlockPoints <= lay.n ? out.data() + base : tail;
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst), t0);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + 8), t1);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + 16), t2);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + 24), t3);
    if (dst == tail)
      for (std::uint64_t t = 0; base + t < lay.n; ++t) out[base + t] = tail[t];
  }
}
#endif

inline Lut16Kernel resolve_kernel(Lut16Kernel k) {
  if (k == Lut16Kernel::best) return lut16_avx2_available() ? Lut16Kernel::avx2 : Lut16Kernel::blocked;
  require(k != Lut16Kernel::avx2 || lut16_avx2_available(), Errc::unsupported, "AVX2 kernel not available in this build");
  return k;
}

// Integer sums per point, in code-row order.
inline void lut16_sums(const PQCodes& codes, const Lut16Layout& lay, const QuantizedLUT& q, std::span<std::uint32_t> out,
                       Lut16Kernel kernel = Lut16Kernel::best) {
  require(out.size() >= codes.n, Errc::dimension_mismatch, "output shorter than code count");
  require(q.subspaces == codes.subspaces, Errc::dimension_mismatch, "table and code subspace counts differ");
  switch (resolve_kernel(kernel)) {
    case Lut16Kernel::scalar:
      lut16_sums_scalar(codes, q, out);
      break;
    case Lut16Kernel::blocked:
      lut16_sums_blocked(lay, q, out);
      break;
    case Lut16Kernel::avx2:
#if defined(__AVX2__)
      lut16_sums_avx2(lay, q, out);
#endif
      break;
    case Lut16Kernel::best:
      break;
  }
}

// score_i = sum_k bias_k + scale * (16-bit-lane sum of quantized entries).
inline std::vector<float> lut16_scan(const PQCodes& codes, const Lut16Layout& lay, const QuantizedLUT& q,
                                     Lut16Kernel kernel = Lut16Kernel::best) {
  require(codes.l == 16, Errc::unsupported, "LUT16 scan needs l=16 codes");
  std::vector<std::uint32_t> sums(codes.n);
  lut16_sums(codes, lay, q, sums, kernel);
  std::vector<float> scores(codes.n);
  for (std::uint64_t i = 0; i < codes.n; ++i) scores[i] = q.score(sums[i]);
  return scores;
}

inline std::vector<float> lut16_scan(const PQCodes& codes, const QuantizedLUT& q, Lut16Kernel kernel = Lut16Kernel::best) {
  require(codes.l == 16, Errc::unsupported, "LUT16 scan needs l=16 codes");
  return lut16_scan(codes, kernel == Lut16Kernel::scalar ? Lut16Layout{} : make_lut16_layout(codes), q, kernel);
}

}  // namespace hmips
