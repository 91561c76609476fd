#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ctiaug {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a over raw bytes, chainable through `state`.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t state = kFnvOffsetBasis) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

/// SplitMix64 finalizer; used to spread FNV output before reduction.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 16 lowercase hex digits.
std::string to_hex(std::uint64_t value);

/// Incremental content fingerprint. Fields are length-prefixed so that
/// ("ab","c") and ("a","bc") differ.
class Fingerprint {
 public:
  Fingerprint& add(std::string_view field);
  Fingerprint& add(std::uint64_t value);
  Fingerprint& add(double value);
  std::uint64_t value() const { return mix64(state_); }
  std::string hex() const { return to_hex(value()); }

 private:
  std::uint64_t state_ = kFnvOffsetBasis;
};

}  // namespace ctiaug
