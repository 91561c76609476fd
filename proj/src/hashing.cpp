#include "ctiaug/hashing.hpp"

#include <bit>
#include <cstdio>

#include "ctiaug/random.hpp"

namespace ctiaug {

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

Fingerprint& Fingerprint::add(std::string_view field) {
  state_ = add(static_cast<std::uint64_t>(field.size())).state_;
  state_ = fnv1a64(field, state_);
  return *this;
}

Fingerprint& Fingerprint::add(std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    state_ ^= (value >> (8 * i)) & 0xffU;
    state_ *= kFnvPrime;
  }
  return *this;
}

Fingerprint& Fingerprint::add(double value) {
  return add(std::bit_cast<std::uint64_t>(value));
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  return mix64(fnv1a64(tag, mix64(master) ^ kFnvOffsetBasis));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
  return mix64(mix64(master) ^ mix64(tag ^ 0x6a09e667f3bcc909ULL));
}

}  // namespace ctiaug
