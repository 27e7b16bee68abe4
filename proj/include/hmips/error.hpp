#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hmips {

enum class Errc {
  invalid_argument,
  out_of_range,
  dimension_mismatch,
  bad_magic,
  truncated,
  version_mismatch,
  unsupported,
  numerical,
  io,
};

inline std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::out_of_range: return "out of range";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::bad_magic: return "bad magic";
    case Errc::truncated: return "truncated input";
    case Errc::version_mismatch: return "version mismatch";
    case Errc::unsupported: return "unsupported";
    case Errc::numerical: return "numerical failure";
    case Errc::io: return "i/o error";
  }
  return "unknown";
}

// All library failures surface as this exception; code() distinguishes them.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace hmips
