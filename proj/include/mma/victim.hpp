#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mma/tensor.hpp"

namespace mma {

enum class TaskLabel { kClassification, kCaptioning, kVqaGeneral, kVqaSpecific };
inline constexpr int kTaskCount = 4;

const char* to_string(TaskLabel t);
TaskLabel task_from_string(std::string_view s);

// Prompt embedding in the victim's text space (unit-norm on encode; perturbed
// embeddings fed back to the model are not renormalized).
struct PromptEmbedding {
  std::vector<double> vector;
  std::string source_text;
};

struct CaptionEntry {
  std::string caption;
  TaskLabel task = TaskLabel::kCaptioning;
  std::vector<double> embedding;  // unit-norm, dim = victim output dim
};

// Discrete output space of the toy victim. Entry embeddings are derived from
// (bank_seed, caption text) so a bank rebuilt from its caption list is
// identical to the original.
struct CaptionBank {
  std::vector<CaptionEntry> entries;
  uint64_t bank_seed = 0;
  int embedding_dim = 64;

  int index_of(std::string_view caption) const;  // -1 when absent
  void validate() const;                         // >= 8 per task, unit norms

  static CaptionBank from_captions(uint64_t bank_seed, int dim,
                                   const std::vector<std::pair<std::string, TaskLabel>>& items);
  static CaptionBank default_bank(uint64_t bank_seed = 0xbadc0ffeeull, int dim = 64);
};

// Monotone query counter with a hard budget. charge() is a single atomic
// check-and-increment, so concurrent probes never overshoot the budget.
class QueryLedger {
 public:
  explicit QueryLedger(uint64_t budget = 70000);

  uint64_t charge();  // returns the new used count; throws BudgetExhausted
  uint64_t used() const { return used_.load(std::memory_order_relaxed); }
  uint64_t budget() const { return budget_; }
  uint64_t remaining() const;

 private:
  std::atomic<uint64_t> used_{0};
  uint64_t budget_;
};

struct VictimGradients {
  double loss = 0.0;
  ImageTensor grad_image;
  std::vector<double> grad_prompt;
};

// Deterministic toy vision-language model. All parameters are a pure function
// of (seed, width); forward math runs in double precision.
//
//   image --8x8 cell means--> tanh(W1 .) --> tanh(W2 .) --> image code
//   prompt --hashed token counts--> Wp . --> unit norm --> prompt code
//   output = normalize(F [image code; prompt code])
//   P(caption_j) = softmax_j(cos(output, bank_j) / tau)
//
// Victim parameters blend a family-shared component with a seed-specific one,
// so victims with different seeds are distinct but related models.
class ToyVictim {
 public:
  ToyVictim(uint64_t seed, double tau, CaptionBank bank, int hidden_width = 128,
            int channels = 3);

  PromptEmbedding encode_prompt(const std::string& prompt) const;

  // Oracle surface: each call charges one query to the ledger.
  double query_loss(const ImageTensor& image, const PromptEmbedding& prompt,
                    const std::string& target, QueryLedger& ledger) const;
  std::string query_text(const ImageTensor& image, const PromptEmbedding& prompt,
                         QueryLedger& ledger) const;

  // White-box test hook: analytic gradients of the query_loss objective.
  // Not part of the attack path; does not touch any ledger.
  VictimGradients forward_with_grad(const ImageTensor& image, const PromptEmbedding& prompt,
                                    const std::string& target) const;

  const CaptionBank& bank() const { return bank_; }
  double tau() const { return tau_; }
  uint64_t seed() const { return seed_; }
  int prompt_dim() const { return prompt_dim_; }
  int image_code_dim() const { return img_code_dim_; }
  int output_dim() const { return bank_.embedding_dim; }
  int hidden_width() const { return hidden_width_; }
  int channels() const { return channels_; }

 private:
  struct Forward;
  Forward run_forward(const ImageTensor& image, const PromptEmbedding& prompt,
                      const std::string& target) const;
  std::vector<double> image_features(const ImageTensor& image) const;

  uint64_t seed_;
  double tau_;
  CaptionBank bank_;
  int hidden_width_;
  int channels_;
  int prompt_dim_ = 64;
  int img_code_dim_ = 64;
  int vocab_buckets_ = 512;

  // Row-major parameter matrices.
  std::vector<double> w1_, b1_;  // hidden x (64*channels), hidden
  std::vector<double> w2_, b2_;  // img_code x hidden, img_code
  std::vector<double> wp_;       // prompt_dim x vocab_buckets
  std::vector<double> fuse_;     // output_dim x (img_code + prompt_dim)
};

ToyVictim build_toy_victim(uint64_t seed, double tau, CaptionBank bank);

}  // namespace mma
