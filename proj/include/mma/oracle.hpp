#pragma once

#include <string>

#include "mma/embedder.hpp"
#include "mma/rng.hpp"
#include "mma/victim.hpp"

namespace mma {

// Query-only victim interface. loss() and text() each charge one query to the
// shared ledger; encode() is attacker-side computation and is free.
class VictimOracle {
 public:
  virtual ~VictimOracle() = default;

  virtual PromptEmbedding encode(const std::string& prompt) const = 0;
  virtual double loss(const ImageTensor& image, const PromptEmbedding& prompt,
                      const std::string& target) = 0;
  virtual std::string text(const ImageTensor& image, const PromptEmbedding& prompt) = 0;

  virtual const QueryLedger& ledger() const = 0;
  virtual int prompt_dim() const = 0;
};

// Soft black box: the victim reports the scalar loss directly.
class LossOracle : public VictimOracle {
 public:
  LossOracle(const ToyVictim& victim, QueryLedger& ledger)
      : victim_(victim), ledger_(ledger) {}

  PromptEmbedding encode(const std::string& prompt) const override {
    return victim_.encode_prompt(prompt);
  }
  double loss(const ImageTensor& image, const PromptEmbedding& prompt,
              const std::string& target) override {
    return victim_.query_loss(image, prompt, target, ledger_);
  }
  std::string text(const ImageTensor& image, const PromptEmbedding& prompt) override {
    return victim_.query_text(image, prompt, ledger_);
  }
  const QueryLedger& ledger() const override { return ledger_; }
  int prompt_dim() const override { return victim_.prompt_dim(); }

 private:
  const ToyVictim& victim_;
  QueryLedger& ledger_;
};

// Strict black box: only output text is visible. The loss is the surrogate
// 1 - cos(E(output), E(target)) under the evaluation embedder, with Gaussian
// smoothing noise of std sigma so finite differences see a usable landscape.
// The noise is keyed off the query content, not a sequential stream, so the
// surrogate is a fixed deterministic function regardless of worker count.
class TextSurrogateOracle : public VictimOracle {
 public:
  TextSurrogateOracle(const ToyVictim& victim, QueryLedger& ledger,
                      const EvalEmbedder& embedder, double sigma, uint64_t seed)
      : victim_(victim), ledger_(ledger), embedder_(embedder), sigma_(sigma),
        smooth_seed_(seed) {}

  PromptEmbedding encode(const std::string& prompt) const override {
    return victim_.encode_prompt(prompt);
  }
  double loss(const ImageTensor& image, const PromptEmbedding& prompt,
              const std::string& target) override;
  std::string text(const ImageTensor& image, const PromptEmbedding& prompt) override {
    return victim_.query_text(image, prompt, ledger_);
  }
  const QueryLedger& ledger() const override { return ledger_; }
  int prompt_dim() const override { return victim_.prompt_dim(); }

 private:
  const ToyVictim& victim_;
  QueryLedger& ledger_;
  const EvalEmbedder& embedder_;
  double sigma_;
  uint64_t smooth_seed_;
};

}  // namespace mma
