#include "mma/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mma/project.hpp"

namespace mma {

TextureUAP init_uap(RngStream& rng, double eps_v, int tile_scale, const ScaleMask& mask,
                    int patch_size, int channels) {
  if (!(eps_v > 0.0)) throw std::invalid_argument("init_uap: eps_v must be positive");
  if (tile_scale != 1 && tile_scale != 2 && tile_scale != 4 && tile_scale != 8)
    throw std::invalid_argument("init_uap: tile scale must be one of {1,2,4,8}, got " +
                                std::to_string(tile_scale));
  mask.validate();
  if (patch_size % (1 << mask.levels()) != 0)
    throw std::invalid_argument("init_uap: patch size not divisible by 2^levels");

  TextureUAP uap;
  uap.tile_scale = tile_scale;
  uap.eps_v = eps_v;
  uap.mask = mask;
  uap.base_patch = ImageTensor(patch_size, patch_size, channels);
  for (float& v : uap.base_patch.data)
    v = static_cast<float>(rng.uniform(-eps_v, eps_v));
  return apply_texture_constraint(std::move(uap));
}

ImageTensor render_uap(const TextureUAP& uap, int height, int width) {
  const int s = uap.tile_scale;
  if (height % s != 0)
    throw std::invalid_argument("render_uap: height " + std::to_string(height) +
                                " not divisible by tile scale " + std::to_string(s));
  if (width % s != 0)
    throw std::invalid_argument("render_uap: width " + std::to_string(width) +
                                " not divisible by tile scale " + std::to_string(s));
  const int tile_h = height / s, tile_w = width / s;
  const ImageTensor& p = uap.base_patch;
  ImageTensor out(height, width, p.channels);
  // Nearest-neighbor source row/col per tile-local position.
  std::vector<int> src_y(tile_h), src_x(tile_w);
  for (int y = 0; y < tile_h; ++y)
    src_y[y] = std::min(static_cast<int>(static_cast<int64_t>(y) * p.height / tile_h),
                        p.height - 1);
  for (int x = 0; x < tile_w; ++x)
    src_x[x] = std::min(static_cast<int>(static_cast<int64_t>(x) * p.width / tile_w),
                        p.width - 1);
  for (int y = 0; y < height; ++y) {
    const int py = src_y[y % tile_h];
    for (int x = 0; x < width; ++x) {
      const int px = src_x[x % tile_w];
      for (int ch = 0; ch < p.channels; ++ch)
        out.at(y, x, ch) = p.at(py, px, ch);
    }
  }
  return out;
}

TextureUAP apply_texture_constraint(TextureUAP uap) {
  uap.mask.validate();
  const int levels = uap.mask.levels();

  // First pass applies the mask as specified (level weights included), then
  // clamps to the linf ball.
  WaveletPyramid pyr = haar_dwt2(uap.base_patch, levels);
  uap.base_patch = project_linf(haar_idwt2(apply_scale_mask(pyr, uap.mask)), uap.eps_v);

  // Clamping can leak energy back into dropped subbands; alternate the
  // {0,1} mask and the clamp until both constraints hold at float precision.
  ScaleMask binary = uap.mask;
  for (double& w : binary.level_weights) w = w > 0.0 ? 1.0 : 0.0;
  for (int pass = 0; pass < 100; ++pass) {
    pyr = haar_dwt2(uap.base_patch, levels);
    if (max_abs_dropped(pyr, binary) <= 1e-8) break;
    ImageTensor next = project_linf(haar_idwt2(apply_scale_mask(pyr, binary)), uap.eps_v);
    float delta = 0.0f;
    for (size_t i = 0; i < next.data.size(); ++i)
      delta = std::max(delta, std::abs(next.data[i] - uap.base_patch.data[i]));
    uap.base_patch = std::move(next);
    if (delta <= 1e-8f) break;
  }
  return uap;
}

ImageTensor apply_to_image(const ImageTensor& v, const TextureUAP& uap) {
  if (v.channels != uap.base_patch.channels)
    throw std::invalid_argument("apply_to_image: channel count mismatch");
  const ImageTensor rendered = render_uap(uap, v.height, v.width);
  ImageTensor out = v;
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::clamp(out.data[i] + rendered.data[i], 0.0f, 1.0f);
  return out;
}

PromptDelta init_prompt_delta(RngStream& rng, double eps_t, int dim) {
  if (!(eps_t > 0.0)) throw std::invalid_argument("init_prompt_delta: eps_t must be positive");
  if (dim < 1) throw std::invalid_argument("init_prompt_delta: dim must be positive");
  PromptDelta d;
  d.eps_t = eps_t;
  d.vector.resize(dim);
  for (double& v : d.vector) v = rng.normal(0.0, eps_t);
  d.vector = project_l2(std::move(d.vector), eps_t);
  return d;
}

PromptEmbedding apply_to_prompt(const PromptEmbedding& e, const PromptDelta& delta) {
  if (e.vector.size() != delta.vector.size())
    throw std::invalid_argument("apply_to_prompt: dimension mismatch");
  PromptEmbedding out = e;
  for (size_t i = 0; i < out.vector.size(); ++i) out.vector[i] += delta.vector[i];
  return out;
}

}  // namespace mma
