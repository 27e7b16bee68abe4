#pragma once

// Little-endian byte buffers used by every on-disk format in the library.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "hmips/error.hpp"

namespace hmips {

using Bytes = std::vector<char>;
using Magic = std::array<char, 4>;

namespace detail {

template <class T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    return v;
  } else {
    std::array<char, sizeof(T)> raw;
    std::memcpy(raw.data(), &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
    std::memcpy(&v, raw.data(), sizeof(T));
    return v;
  }
}

}  // namespace detail

class ByteWriter {
 public:
  template <class T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    v = detail::byteswap_if_big(v);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  void put_span(std::span<const T> values) {
    if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
      const auto* p = reinterpret_cast<const char*>(values.data());
      buf_.insert(buf_.end(), p, p + values.size_bytes());
    } else {
      for (T v : values) put(v);
    }
  }

  void put_magic(const Magic& m) { buf_.insert(buf_.end(), m.begin(), m.end()); }

  void put_bytes(std::span<const char> raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }

  std::size_t size() const { return buf_.size(); }
  const Bytes& bytes() const& { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const char> data) : data_(data) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return detail::byteswap_if_big(v);
  }

  template <class T>
    requires std::is_arithmetic_v<T>
  void get_into(std::span<T> out) {
    if (out.empty()) return;
    need(out.size_bytes());
    std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
    if constexpr (std::endian::native != std::endian::little && sizeof(T) > 1) {
      for (T& v : out) v = detail::byteswap_if_big(v);
    }
  }

  template <class T>
  std::vector<T> get_vector(std::uint64_t count) {
    // Bound the allocation by the bytes actually present.
    if (count > remaining() / sizeof(T)) throw Error(Errc::truncated, "array of " + std::to_string(count) + " elements exceeds input");
    std::vector<T> out(static_cast<std::size_t>(count));
    get_into(std::span<T>(out));
    return out;
  }

  void expect_magic(const Magic& m, std::string_view what) {
    if (remaining() < m.size()) throw Error(Errc::truncated, std::string(what) + " header");
    if (std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0)
      throw Error(Errc::bad_magic, std::string(what) + ": expected '" + std::string(m.data(), m.size()) + "'");
    pos_ += m.size();
  }

  void expect_version(std::uint32_t expected, std::string_view what) {
    const auto v = get<std::uint32_t>();
    if (v != expected)
      throw Error(Errc::version_mismatch,
                  std::string(what) + " version " + std::to_string(v) + ", expected " + std::to_string(expected));
  }

  std::span<const char> get_bytes(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw Error(Errc::truncated, "needed " + std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left");
  }

  std::span<const char> data_;
  std::size_t pos_ = 0;
};

inline Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(Errc::io, "cannot open '" + path + "'");
  const auto size = static_cast<std::size_t>(in.tellg());
  Bytes buf(size);
  in.seekg(0);
  if (size > 0 && !in.read(buf.data(), static_cast<std::streamsize>(size)))
    throw Error(Errc::io, "cannot read '" + path + "'");
  return buf;
}

inline void write_file(const std::string& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot create '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "cannot write '" + path + "'");
}

}  // namespace hmips
