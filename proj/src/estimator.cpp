#include "mma/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mma {

GradientEstimate estimate_zo(const std::function<double(const std::vector<double>&)>& loss_at,
                             const std::function<double(RngStream&)>& draw_probe_entry,
                             int dim, int k_samples, RngStream& rng, const Executor& exec) {
  if (k_samples < 1) throw std::invalid_argument("estimate_zo: k_samples must be >= 1");
  if (dim < 1) throw std::invalid_argument("estimate_zo: dim must be positive");

  // Pre-draw probes so the stream advances identically for any worker count.
  std::vector<std::vector<double>> probes(k_samples);
  for (auto& eta : probes) {
    eta.resize(dim);
    for (double& v : eta) v = draw_probe_entry(rng);
  }

  GradientEstimate est;
  est.samples = k_samples;
  est.baseline_loss = loss_at(std::vector<double>(dim, 0.0));

  std::vector<double> losses(k_samples, 0.0);
  exec.parallel_for(static_cast<size_t>(k_samples),
                    [&](size_t k) { losses[k] = loss_at(probes[k]); });

  est.direction.assign(dim, 0.0);
  for (int k = 0; k < k_samples; ++k) {
    double sq = 0.0;
    for (double v : probes[k]) sq += v * v;
    if (sq <= 0.0) continue;
    const double scale = (losses[k] - est.baseline_loss) / (sq * k_samples);
    for (int i = 0; i < dim; ++i) est.direction[i] += scale * probes[k][i];
  }
  est.queries_spent = static_cast<uint64_t>(k_samples) + 1;
  return est;
}

GradientEstimate estimate_grad_image(VictimOracle& oracle, const ImageTensor& image,
                                     const TextureUAP& uap, const PromptEmbedding& prompt_adv,
                                     const std::string& target, int k_samples, double eps_v,
                                     RngStream& rng, const Executor& exec) {
  const int dim = static_cast<int>(uap.base_patch.size());
  auto loss_at = [&](const std::vector<double>& offset) {
    TextureUAP probe = uap;
    for (int i = 0; i < dim; ++i)
      probe.base_patch.data[i] += static_cast<float>(offset[i]);
    return oracle.loss(apply_to_image(image, probe), prompt_adv, target);
  };
  auto draw = [eps_v](RngStream& r) { return r.uniform(-eps_v, eps_v); };
  return estimate_zo(loss_at, draw, dim, k_samples, rng, exec);
}

GradientEstimate estimate_grad_text(VictimOracle& oracle, const ImageTensor& image_adv,
                                    const PromptEmbedding& prompt, const PromptDelta& delta,
                                    const std::string& target, int k_samples, double eps_t,
                                    RngStream& rng, const Executor& exec) {
  const int dim = static_cast<int>(delta.vector.size());
  const PromptEmbedding base = apply_to_prompt(prompt, delta);
  auto loss_at = [&](const std::vector<double>& offset) {
    PromptEmbedding probe = base;
    for (int i = 0; i < dim; ++i) probe.vector[i] += offset[i];
    return oracle.loss(image_adv, probe, target);
  };
  auto draw = [eps_t](RngStream& r) { return r.normal(0.0, eps_t); };
  return estimate_zo(loss_at, draw, dim, k_samples, rng, exec);
}

BatchEstimates batch_estimate(VictimOracle& oracle, const std::vector<BatchPair>& batch,
                              const TextureUAP& uap, const PromptDelta& delta,
                              const std::string& target, int k_samples, RngStream& rng,
                              const Executor& exec, bool estimate_image, bool estimate_text) {
  if (batch.empty()) throw std::invalid_argument("batch_estimate: empty batch");
  if (!estimate_image && !estimate_text)
    throw std::invalid_argument("batch_estimate: at least one modality required");
  const uint64_t nonce = rng.next_u64();

  struct PairResult {
    GradientEstimate image, text;
  };
  std::vector<PairResult> results(batch.size());

  exec.parallel_for(batch.size(), [&](size_t i) {
    const BatchPair& pair = batch[i];
    const uint64_t pair_key = (static_cast<uint64_t>(static_cast<uint32_t>(pair.image_index))
                               << 32) ^
                              static_cast<uint32_t>(pair.prompt_index);
    RngStream pair_stream = rng.fork(nonce).fork(pair_key);
    RngStream img_stream = pair_stream.fork("img-noise");
    RngStream txt_stream = pair_stream.fork("txt-noise");

    const PromptEmbedding e = oracle.encode(*pair.prompt);
    const PromptEmbedding e_adv = apply_to_prompt(e, delta);
    Executor inner;  // probes run inline; parallelism is across pairs
    if (estimate_image)
      results[i].image = estimate_grad_image(oracle, *pair.image, uap, e_adv, target,
                                             k_samples, uap.eps_v, img_stream, inner);
    if (estimate_text) {
      const ImageTensor v_adv = apply_to_image(*pair.image, uap);
      results[i].text = estimate_grad_text(oracle, v_adv, e, delta, target, k_samples,
                                           delta.eps_t, txt_stream, inner);
    }
  });

  // Fixed-order reduction: canonical pair order, independent of batch order.
  std::vector<size_t> order(batch.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (batch[a].image_index != batch[b].image_index)
      return batch[a].image_index < batch[b].image_index;
    return batch[a].prompt_index < batch[b].prompt_index;
  });

  BatchEstimates out;
  out.image.direction.assign(uap.base_patch.size(), 0.0);
  out.text.direction.assign(delta.vector.size(), 0.0);
  out.image.samples = estimate_image ? k_samples : 0;
  out.text.samples = estimate_text ? k_samples : 0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (size_t idx : order) {
    const PairResult& r = results[idx];
    if (estimate_image) {
      for (size_t i = 0; i < out.image.direction.size(); ++i)
        out.image.direction[i] += r.image.direction[i] * inv;
      out.image.baseline_loss += r.image.baseline_loss * inv;
      out.image.queries_spent += r.image.queries_spent;
    }
    if (estimate_text) {
      for (size_t i = 0; i < out.text.direction.size(); ++i)
        out.text.direction[i] += r.text.direction[i] * inv;
      out.text.baseline_loss += r.text.baseline_loss * inv;
      out.text.queries_spent += r.text.queries_spent;
    }
  }
  out.mean_loss = estimate_image ? out.image.baseline_loss : out.text.baseline_loss;
  out.queries_spent = out.image.queries_spent + out.text.queries_spent;
  return out;
}

}  // namespace mma
