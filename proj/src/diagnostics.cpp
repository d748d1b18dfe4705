#include "mma/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

#include "mma/oracle.hpp"
#include "mma/perturbation.hpp"

namespace mma {

double cosine_between(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_between: size mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  return denom == 0.0 ? 0.0 : dot / denom;
}

QuadraticFidelity quadratic_fidelity(int dim, int trials, int k_lo, int k_hi,
                                     double probe_eps, uint64_t seed) {
  QuadraticFidelity out;
  out.trials = trials;
  out.k_lo = k_lo;
  out.k_hi = k_hi;
  RngStream root(seed, "quadratic-fidelity");

  for (int t = 0; t < trials; ++t) {
    RngStream trial = root.fork(static_cast<uint64_t>(t));
    std::vector<double> minimum(dim);
    for (double& v : minimum) v = trial.normal(0.0, 1.0);

    // L(offset) = ||offset - minimum||^2; analytic gradient at 0 is
    // -2 * minimum.
    auto loss_at = [&](const std::vector<double>& offset) {
      double s = 0.0;
      for (int i = 0; i < dim; ++i) {
        const double d = offset[i] - minimum[i];
        s += d * d;
      }
      return s;
    };
    auto draw = [probe_eps](RngStream& r) { return r.uniform(-probe_eps, probe_eps); };
    std::vector<double> analytic(dim);
    for (int i = 0; i < dim; ++i) analytic[i] = -2.0 * minimum[i];

    RngStream probe_lo = trial.fork("probes-lo");
    RngStream probe_hi = trial.fork("probes-hi");
    const GradientEstimate lo = estimate_zo(loss_at, draw, dim, k_lo, probe_lo);
    const GradientEstimate hi = estimate_zo(loss_at, draw, dim, k_hi, probe_hi);
    out.mean_cosine_lo += cosine_between(lo.direction, analytic) / trials;
    out.mean_cosine_hi += cosine_between(hi.direction, analytic) / trials;
  }
  return out;
}

VictimFidelity victim_fidelity(const ToyVictim& victim, const AttackCorpus& corpus,
                               const std::string& target, int trials, int k_lo, int k_hi,
                               double eps_v, double eps_t, uint64_t seed) {
  if (corpus.images.empty() || corpus.prompts.empty())
    throw std::invalid_argument("victim_fidelity: empty corpus");
  VictimFidelity out;
  out.trials = trials;
  out.k_lo = k_lo;
  out.k_hi = k_hi;
  RngStream root(seed, "victim-fidelity");

  // Identity rendering (s=1, keep-all mask) so patch space coincides with
  // image space and estimates compare directly to the white-box gradient.
  const int channels = corpus.images.front().channels;
  const int side = corpus.images.front().height;
  if (side != kPatchSize || corpus.images.front().width != kPatchSize)
    throw std::invalid_argument("victim_fidelity: corpus images must match the patch size");

  for (int t = 0; t < trials; ++t) {
    RngStream trial = root.fork(static_cast<uint64_t>(t));
    const ImageTensor& image = corpus.images[trial.next_below(corpus.images.size())];
    const Prompt& prompt = corpus.prompts[trial.next_below(corpus.prompts.size())];

    QueryLedger ledger(static_cast<uint64_t>(2 * (k_hi + k_lo + 2)));
    LossOracle oracle(victim, ledger);
    const PromptEmbedding e = oracle.encode(prompt.text);

    TextureUAP zero_uap;
    zero_uap.base_patch = ImageTensor(kPatchSize, kPatchSize, channels, 0.0f);
    zero_uap.tile_scale = 1;
    zero_uap.eps_v = eps_v;
    zero_uap.mask = ScaleMask::keep_all(3);
    PromptDelta zero_delta;
    zero_delta.eps_t = eps_t;
    zero_delta.vector.assign(static_cast<size_t>(victim.prompt_dim()), 0.0);

    const VictimGradients analytic = victim.forward_with_grad(image, e, target);
    std::vector<double> grad_image_flat(analytic.grad_image.data.begin(),
                                        analytic.grad_image.data.end());

    RngStream img_lo = trial.fork("img-lo");
    RngStream img_hi = trial.fork("img-hi");
    const GradientEstimate gi_lo =
        estimate_grad_image(oracle, image, zero_uap, e, target, k_lo, eps_v, img_lo);
    const GradientEstimate gi_hi =
        estimate_grad_image(oracle, image, zero_uap, e, target, k_hi, eps_v, img_hi);
    out.image_cosine_lo += cosine_between(gi_lo.direction, grad_image_flat) / trials;
    out.image_cosine_hi += cosine_between(gi_hi.direction, grad_image_flat) / trials;

    QueryLedger ledger_t(static_cast<uint64_t>(k_hi + k_lo + 2));
    LossOracle oracle_t(victim, ledger_t);
    RngStream txt_lo = trial.fork("txt-lo");
    RngStream txt_hi = trial.fork("txt-hi");
    const GradientEstimate gt_lo =
        estimate_grad_text(oracle_t, image, e, zero_delta, target, k_lo, eps_t, txt_lo);
    const GradientEstimate gt_hi =
        estimate_grad_text(oracle_t, image, e, zero_delta, target, k_hi, eps_t, txt_hi);
    out.text_cosine_lo += cosine_between(gt_lo.direction, analytic.grad_prompt) / trials;
    out.text_cosine_hi += cosine_between(gt_hi.direction, analytic.grad_prompt) / trials;
  }
  return out;
}

}  // namespace mma
