#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mma/executor.hpp"
#include "mma/oracle.hpp"
#include "mma/perturbation.hpp"
#include "mma/rng.hpp"

namespace mma {

struct GradientEstimate {
  std::vector<double> direction;  // flat; patch layout for the image modality
  int samples = 0;
  uint64_t queries_spent = 0;
  double baseline_loss = 0.0;
};

// Two-point direction estimate averaged over K probes sharing one baseline:
//   g = mean_k (L(x + eta_k) - L(x)) / ||eta_k||^2 * eta_k
// loss_at(offset) evaluates the loss at the current point plus offset and
// must be thread-safe; probes are pre-drawn so results do not depend on the
// worker count.
GradientEstimate estimate_zo(const std::function<double(const std::vector<double>&)>& loss_at,
                             const std::function<double(RngStream&)>& draw_probe_entry,
                             int dim, int k_samples, RngStream& rng,
                             const Executor& exec = {});

// Image-modality estimate in base-patch space: probes are uniform in
// [-eps_v, eps_v] per patch entry, rendered onto the image before querying.
GradientEstimate estimate_grad_image(VictimOracle& oracle, const ImageTensor& image,
                                     const TextureUAP& uap, const PromptEmbedding& prompt_adv,
                                     const std::string& target, int k_samples, double eps_v,
                                     RngStream& rng, const Executor& exec = {});

// Text-modality estimate: Gaussian probes of std eps_t in embedding space.
GradientEstimate estimate_grad_text(VictimOracle& oracle, const ImageTensor& image_adv,
                                    const PromptEmbedding& prompt, const PromptDelta& delta,
                                    const std::string& target, int k_samples, double eps_t,
                                    RngStream& rng, const Executor& exec = {});

// One corpus pair, referenced by stable indices so batch results are
// independent of list order.
struct BatchPair {
  int image_index = 0;
  int prompt_index = 0;
  const ImageTensor* image = nullptr;
  const std::string* prompt = nullptr;
};

struct BatchEstimates {
  GradientEstimate image;  // base-patch shape
  GradientEstimate text;   // prompt dim
  double mean_loss = 0.0;  // mean of per-pair baseline losses
  uint64_t queries_spent = 0;
};

// Per-pair estimates averaged with equal weight in canonical (image_index,
// prompt_index) order. Probe noise is keyed on the pair indices, so
// reordering the batch leaves the result bit-identical.
// Costs batch_size * modalities * (k_samples + 1) queries; both modalities
// are on by default, ablations disable one.
BatchEstimates batch_estimate(VictimOracle& oracle, const std::vector<BatchPair>& batch,
                              const TextureUAP& uap, const PromptDelta& delta,
                              const std::string& target, int k_samples, RngStream& rng,
                              const Executor& exec = {}, bool estimate_image = true,
                              bool estimate_text = true);

}  // namespace mma
