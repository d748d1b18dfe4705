#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mma {

uint64_t fnv1a64(std::string_view s);

// splitmix64 finalizer; bijective on u64.
uint64_t mix64(uint64_t x);

// Counter-based deterministic random stream. The n-th draw is a pure function
// of (seed, label, n), so identical streams replay identically on any platform
// and forks never touch the parent state. A stream must be consumed by a
// single logical owner; concurrent users take their own fork.
class RngStream {
 public:
  RngStream(uint64_t seed, std::string_view label);

  uint64_t next_u64();
  double next_double();  // [0, 1)
  double uniform(double lo, double hi);
  // Box-Muller; consumes exactly two raw draws per call.
  double normal(double mean, double stddev);
  // Integer in [0, n); n must be positive.
  uint64_t next_below(uint64_t n);

  // Child streams keyed off this stream's identity. Pure: does not advance
  // the parent counter, so fork(x) twice yields the same child.
  RngStream fork(std::string_view label) const;
  RngStream fork(uint64_t salt) const;

  uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

 private:
  RngStream(uint64_t seed, std::string label, uint64_t key);

  uint64_t seed_ = 0;
  std::string label_;
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace mma
