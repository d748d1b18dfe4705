#pragma once

#include <vector>

#include "mma/rng.hpp"
#include "mma/tensor.hpp"
#include "mma/victim.hpp"
#include "mma/wavelet.hpp"

namespace mma {

// Universal image perturbation: a small texture patch that is wavelet-masked,
// linf-bounded, and tiled across the target image. One instance is shared by
// every image in a run.
struct TextureUAP {
  ImageTensor base_patch;  // 64x64xC by default
  int tile_scale = 4;      // in {1, 2, 4, 8}
  double eps_v = 8.0 / 255.0;
  ScaleMask mask;
};

// Universal prompt perturbation in the victim's embedding space.
struct PromptDelta {
  std::vector<double> vector;
  double eps_t = 0.5;
};

inline constexpr int kPatchSize = 64;

// Uniform draw in [-eps_v, eps_v] followed by the texture constraint.
TextureUAP init_uap(RngStream& rng, double eps_v, int tile_scale, const ScaleMask& mask,
                    int patch_size = kPatchSize, int channels = 3);

// Tiles the base patch into an s x s grid; each tile is the patch resampled
// to (height/s) x (width/s) with nearest neighbor.
ImageTensor render_uap(const TextureUAP& uap, int height, int width);

// Projects the base patch onto {wavelet mask subspace} ∩ {linf ball}.
// Alternates the subband mask and the clamp until a fixed point, so the
// result satisfies both constraints to float precision and the operation is
// idempotent. Non-unit level weights are applied once, in the first pass.
TextureUAP apply_texture_constraint(TextureUAP uap);

// clamp(v + rendered perturbation, 0, 1).
ImageTensor apply_to_image(const ImageTensor& v, const TextureUAP& uap);

// i.i.d. N(0, eps_t^2) draw projected onto the eps_t ball.
PromptDelta init_prompt_delta(RngStream& rng, double eps_t, int dim);

// e + delta, not renormalized; the perturbed embedding is fed raw to fusion.
PromptEmbedding apply_to_prompt(const PromptEmbedding& e, const PromptDelta& delta);

}  // namespace mma
