#include "mma/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mma {

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t mix64(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

namespace {
constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;
}

RngStream::RngStream(uint64_t seed, std::string_view label)
    : seed_(seed),
      label_(label),
      key_(mix64(mix64(seed + kGolden) ^ fnv1a64(label))) {}

RngStream::RngStream(uint64_t seed, std::string label, uint64_t key)
    : seed_(seed), label_(std::move(label)), key_(key) {}

uint64_t RngStream::next_u64() {
  return mix64(key_ + kGolden * ++counter_);
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

double RngStream::normal(double mean, double stddev) {
  // u1 in (0, 1] so the log is finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t RngStream::next_below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::next_below: n must be positive");
  // Multiply-shift bound; bias is negligible for the small n used here.
  return static_cast<uint64_t>(next_double() * static_cast<double>(n)) % n;
}

RngStream RngStream::fork(std::string_view label) const {
  std::string child_label = label_ + "/" + std::string(label);
  return RngStream(seed_, child_label, mix64(key_ ^ fnv1a64(label)));
}

RngStream RngStream::fork(uint64_t salt) const {
  std::string child_label = label_ + "/#" + std::to_string(salt);
  return RngStream(seed_, child_label, mix64(key_ + kGolden * (salt + 1)));
}

}  // namespace mma
