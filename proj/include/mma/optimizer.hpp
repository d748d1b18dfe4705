#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mma/corpus.hpp"
#include "mma/estimator.hpp"
#include "mma/executor.hpp"
#include "mma/oracle.hpp"
#include "mma/perturbation.hpp"
#include "mma/wavelet.hpp"

namespace mma {

struct AttackConfig {
  double eps_v = 8.0 / 255.0;  // linf budget, image perturbation
  double eps_t = 0.5;          // l2 budget, prompt perturbation
  double alpha_v = 0.01;       // sign-PGD step, image
  double alpha_t = 0.005;      // normalized-PGD step, text
  double lambda = 0.1;         // cross-modal coupling weight
  int k_samples = 10;          // probes per gradient estimate
  int batch = 16;              // pairs per iteration
  int tile_scale = 4;          // s in {1,2,4,8}
  uint64_t query_budget = 70000;
  double theta = 0.55;         // per-instance success threshold
  double sigma = 0.01;         // strict-mode surrogate smoothing std
  uint64_t seed = 1;
  std::string target_text = "I am sorry";
  int levels = 3;
  ScaleMask mask = ScaleMask::detail_only(3);
  int common_dim = 128;  // coupling projection dim
  bool targeted = true;
  // Ablation switches. A disabled modality is frozen at zero: its gradient
  // queries are still spent, so every ablation mode runs the same iteration
  // count under the same budget, but its update is skipped.
  bool enable_image = true;
  bool enable_text = true;

  void validate() const;
};

struct TraceRow {
  int iteration = 0;
  double mean_loss = 0.0;
  double r_hat = 0.0;
  uint64_t queries_used = 0;
  double uap_linf = 0.0;
  double delta_l2 = 0.0;
  double dropped_max = 0.0;  // largest |coef| in masked-out subbands
  bool text_step_skipped = false;
};

struct AttackTrace {
  std::vector<TraceRow> rows;
  void write_csv(const std::filesystem::path& path) const;
};

// Couples the two modality gradients through fixed seeded random projections
// into a shared space. r_hat = 1 - cos of the projected gradients; each
// coupled direction is the other modality's projected gradient pulled back.
class GradientCoupler {
 public:
  struct Coupling {
    double r_hat = 0.0;
    std::vector<double> coupled_image;  // patch space
    std::vector<double> coupled_text;   // embedding space
  };

  GradientCoupler(uint64_t proj_seed, int common_dim, int image_dim, int text_dim);
  Coupling couple(const std::vector<double>& g_image, const std::vector<double>& g_text) const;

  int common_dim() const { return common_dim_; }

 private:
  int common_dim_, image_dim_, text_dim_;
  std::vector<double> u_;  // common_dim x image_dim
  std::vector<double> v_;  // common_dim x text_dim
};

GradientCoupler::Coupling cross_modal_alignment(const std::vector<double>& g_image,
                                                const std::vector<double>& g_text,
                                                uint64_t proj_seed, int common_dim);

struct AttackState {
  TextureUAP uap;
  PromptDelta delta;
};

struct StepOutcome {
  bool text_step_skipped = false;
};

// One joint PGD step: sign step + linf projection + texture constraint on the
// patch, normalized step + l2 projection on the prompt delta. With
// lambda == 0 the coupling term is skipped entirely and the update equals
// independent per-modality PGD bit-for-bit.
StepOutcome joint_step(AttackState& state, const AttackConfig& config,
                       const GradientEstimate& g_image, const GradientEstimate& g_text,
                       const GradientCoupler::Coupling* coupling);

struct AttackOutput {
  TextureUAP uap;
  PromptDelta delta;
  AttackTrace trace;
  uint64_t queries_used = 0;
  bool exhausted_midway = false;  // oracle ran dry inside an iteration
};

// The full joint black-box loop: sample a train batch, estimate both
// gradients, couple, step, reapply constraints, until the budget cannot cover
// another iteration.
AttackOutput run_attack(VictimOracle& oracle, const AttackCorpus& corpus,
                        const AttackConfig& config, const Executor& exec = {});

// Query cost of one loop iteration under this config.
uint64_t iteration_query_cost(const AttackConfig& config);

}  // namespace mma
