#include "mma/oracle.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

namespace mma {

namespace {

uint64_t hash_bytes(const void* p, size_t n, uint64_t h) {
  const unsigned char* b = static_cast<const unsigned char*>(p);
  for (size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

double keyed_normal(uint64_t key) {
  const uint64_t r1 = mix64(key + 1);
  const uint64_t r2 = mix64(key + 2);
  const double u1 = static_cast<double>((r1 >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(r2 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

double TextSurrogateOracle::loss(const ImageTensor& image, const PromptEmbedding& prompt,
                                 const std::string& target) {
  const std::string caption = victim_.query_text(image, prompt, ledger_);
  double s = 1.0 - embedder_.similarity(caption, target);
  if (sigma_ > 0.0) {
    uint64_t key = mix64(smooth_seed_ ^ 0x73750a7e5eedull);
    key = hash_bytes(image.data.data(), image.data.size() * sizeof(float), key);
    key = hash_bytes(prompt.vector.data(), prompt.vector.size() * sizeof(double), key);
    key = hash_bytes(target.data(), target.size(), key);
    s += sigma_ * keyed_normal(key);
  }
  return s;
}

}  // namespace mma
