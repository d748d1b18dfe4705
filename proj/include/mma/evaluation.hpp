#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "mma/corpus.hpp"
#include "mma/embedder.hpp"
#include "mma/executor.hpp"
#include "mma/optimizer.hpp"
#include "mma/perturbation.hpp"
#include "mma/victim.hpp"

namespace mma {

// Input-transformation defenses applied before the victim sees an image.
struct DefenseSpec {
  enum class Kind { kNone, kRandomization, kQuantize, kDctQuantize };
  Kind kind = Kind::kNone;
  double resize_lo = 0.9;  // randomization: scale range
  double resize_hi = 1.0;
  int bit_depth = 8;   // quantize
  int quality = 75;    // dct_quantize, 1..100
  uint64_t seed = 0;   // randomization

  void validate() const;
  static Kind kind_from_string(std::string_view s);
  static const char* kind_to_string(Kind k);
};

ImageTensor defend(const ImageTensor& image, const DefenseSpec& spec);

struct TaskScore {
  double clean_sim = 0.0;
  double attacked_sim = 0.0;
  double clean_asr = 0.0;
  double attacked_asr = 0.0;
  int pairs = 0;
};

// Per-task and overall similarity-to-target scores for clean and attacked
// inputs. Overall values are the arithmetic mean of the four task values.
struct AttackReport {
  std::array<TaskScore, kTaskCount> tasks = {};
  double overall_clean_sim = 0.0;
  double overall_attacked_sim = 0.0;
  double overall_clean_asr = 0.0;
  double overall_attacked_asr = 0.0;
  double theta = 0.55;
  std::string target;
  uint64_t victim_seed = 0;
  uint64_t eval_queries = 0;
  uint64_t attack_queries = 0;
  uint64_t attack_budget = 0;

  void write_text(std::ostream& os) const;
  void write_csv(const std::filesystem::path& path) const;
};

// Scores one perturbation pair on the held-out split: for every held-out
// (image, prompt), queries the victim's output text on clean and attacked
// inputs and compares both to the target under the evaluation embedder.
// Uses its own ledger, separate from any attack budget.
AttackReport evaluate(const ToyVictim& victim, const TextureUAP& uap, const PromptDelta& delta,
                      const AttackCorpus& corpus, const std::string& target, double theta,
                      const EvalEmbedder& embedder = EvalEmbedder(),
                      const DefenseSpec& defense = DefenseSpec{}, const Executor& exec = {});

// Evaluates one perturbation pair across a victim x corpus grid. Row i /
// column j holds the report for victims[i] scored on corpora[j]; entry (0,0)
// is conventionally the training victim and corpus.
std::vector<std::vector<AttackReport>> transfer_eval(
    const TextureUAP& uap, const PromptDelta& delta, const std::vector<ToyVictim>& victims,
    const std::vector<AttackCorpus>& corpora, const std::string& target, double theta,
    const EvalEmbedder& embedder = EvalEmbedder(), const Executor& exec = {});

void write_transfer_csv(const std::filesystem::path& path,
                        const std::vector<std::vector<AttackReport>>& matrix,
                        const std::vector<uint64_t>& victim_seeds);

enum class AblationMode { kFull, kNoText, kNoImage, kNoJoint };
const char* to_string(AblationMode m);

// Runs the attack once per mode under identical seeds and budgets, then
// scores each result on the held-out split.
std::map<AblationMode, AttackReport> ablate(const ToyVictim& victim, const AttackCorpus& corpus,
                                            const AttackConfig& config,
                                            const EvalEmbedder& embedder = EvalEmbedder(),
                                            const Executor& exec = {});

}  // namespace mma
