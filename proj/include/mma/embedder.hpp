#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace mma {

// Deterministic sentence embedder used for scoring model outputs against the
// target text. Hashes word unigrams and character trigrams, accumulates a
// seeded Gaussian column per feature, and unit-normalizes. Independent of any
// victim's internal text encoder.
class EvalEmbedder {
 public:
  static constexpr uint64_t kDefaultSeed = 0x5eba51d0c0ffee01ull;

  explicit EvalEmbedder(uint64_t seed = kDefaultSeed, int dim = 256);

  std::vector<double> embed(const std::string& text) const;
  // Cosine of the two embeddings; exactly 1.0 for identical strings.
  double similarity(const std::string& a, const std::string& b) const;

  int dim() const { return dim_; }
  uint64_t seed() const { return seed_; }

 private:
  std::vector<double> embed_uncached(const std::string& text) const;

  uint64_t seed_;
  int dim_;
  mutable std::mutex cache_mu_;
  mutable std::unordered_map<std::string, std::vector<double>> cache_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mma
