#include <doctest.h>

#include <cmath>

#include "mma/perturbation.hpp"
#include "mma/project.hpp"
#include "mma/rng.hpp"

using namespace mma;

namespace {
constexpr double kEps = 8.0 / 255.0;
}

TEST_CASE("init_uap respects the budget and is deterministic") {
  RngStream a(1, "uap-init");
  const TextureUAP uap = init_uap(a, kEps, 4, ScaleMask::detail_only(3));
  CHECK(linf_norm(uap.base_patch) <= kEps + 1e-7);
  CHECK(uap.base_patch.height == 64);
  CHECK(uap.base_patch.channels == 3);

  RngStream b(1, "uap-init");
  const TextureUAP again = init_uap(b, kEps, 4, ScaleMask::detail_only(3));
  CHECK(again.base_patch.data == uap.base_patch.data);
}

TEST_CASE("approx-free patches have zero channel means") {
  RngStream rng(2, "uap-init");
  const TextureUAP uap = init_uap(rng, kEps, 2, ScaleMask::detail_only(3));
  for (int ch = 0; ch < 3; ++ch) {
    double mean = 0.0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) mean += uap.base_patch.at(y, x, ch);
    mean /= 64.0 * 64.0;
    CHECK(std::abs(mean) <= 1e-5);
  }
}

TEST_CASE("init_uap validates its arguments") {
  RngStream rng(3, "uap-init");
  CHECK_THROWS_AS(init_uap(rng, 0.0, 4, ScaleMask::detail_only(3)), std::invalid_argument);
  CHECK_THROWS_AS(init_uap(rng, kEps, 3, ScaleMask::detail_only(3)), std::invalid_argument);
  CHECK_THROWS_AS(init_uap(rng, kEps, 16, ScaleMask::detail_only(3)), std::invalid_argument);
}

TEST_CASE("render at scale 1 is the patch itself") {
  RngStream rng(4, "uap-init");
  const TextureUAP uap = init_uap(rng, kEps, 1, ScaleMask::detail_only(3));
  const ImageTensor r = render_uap(uap, 64, 64);
  CHECK(r.data == uap.base_patch.data);
}

TEST_CASE("render tiles follow the index arithmetic") {
  RngStream rng(5, "uap-init");
  TextureUAP uap = init_uap(rng, kEps, 4, ScaleMask::detail_only(3));
  const ImageTensor r = render_uap(uap, 64, 64);
  // 4x4 grid of 16x16 tiles; tile-local pixel (y, x) samples patch
  // (4y, 4x) by nearest neighbor.
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const float expect = uap.base_patch.at((y % 16) * 4, (x % 16) * 4, ch);
        REQUIRE(r.at(y, x, ch) == expect);
      }
}

TEST_CASE("rendered tiling is exactly periodic and value-preserving") {
  RngStream rng(6, "uap-init");
  for (int s : {1, 2, 4, 8}) {
    const TextureUAP uap = init_uap(rng, kEps, s, ScaleMask::detail_only(3));
    const ImageTensor r = render_uap(uap, 64, 64);
    const int period = 64 / s;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        for (int ch = 0; ch < 3; ++ch)
          REQUIRE(r.at(y, x, ch) == r.at(y % period, x % period, ch));
    CHECK(linf_norm(r) <= linf_norm(uap.base_patch));
  }
}

TEST_CASE("render rejects non-divisible dims") {
  RngStream rng(7, "uap-init");
  const TextureUAP uap = init_uap(rng, kEps, 8, ScaleMask::detail_only(3));
  CHECK_THROWS_WITH_AS(render_uap(uap, 60, 64), doctest::Contains("height"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(render_uap(uap, 64, 60), doctest::Contains("width"),
                       std::invalid_argument);
}

TEST_CASE("texture constraint is a fixed point on satisfying patches") {
  RngStream rng(8, "uap-init");
  const TextureUAP uap = init_uap(rng, kEps, 4, ScaleMask::detail_only(3));
  const TextureUAP again = apply_texture_constraint(uap);
  for (size_t i = 0; i < uap.base_patch.data.size(); ++i)
    REQUIRE(std::abs(again.base_patch.data[i] - uap.base_patch.data[i]) <= 1e-6f);
}

TEST_CASE("texture constraint annihilates pure-approximation content") {
  TextureUAP uap;
  uap.base_patch = ImageTensor(64, 64, 3, 0.02f);
  uap.tile_scale = 1;
  uap.eps_v = kEps;
  uap.mask = ScaleMask::detail_only(3);
  const TextureUAP out = apply_texture_constraint(uap);
  for (float v : out.base_patch.data) CHECK(std::abs(v) <= 1e-7f);
}

TEST_CASE("constraint closure: dropped subbands end at zero, budget holds") {
  // Random out-of-spec patch, including values beyond the budget.
  RngStream rng(9, "noise");
  TextureUAP uap;
  uap.base_patch = ImageTensor(64, 64, 3);
  for (float& v : uap.base_patch.data) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  uap.tile_scale = 4;
  uap.eps_v = kEps;
  uap.mask = ScaleMask::detail_only(3);
  uap.mask.keep_detail[1] = false;  // drop a detail level too

  const TextureUAP out = apply_texture_constraint(uap);
  CHECK(linf_norm(out.base_patch) <= kEps + 1e-7);
  const WaveletPyramid pyr = haar_dwt2(out.base_patch, 3);
  CHECK(max_abs_dropped(pyr, out.mask) <= 1e-6);
}

TEST_CASE("level weights scale kept bands once") {
  TextureUAP uap;
  uap.base_patch = ImageTensor(64, 64, 1);
  RngStream rng(10, "noise");
  for (float& v : uap.base_patch.data) v = static_cast<float>(rng.uniform(-0.002, 0.002));
  uap.tile_scale = 1;
  uap.eps_v = 1.0;  // inactive clamp isolates the weighting
  uap.mask = ScaleMask::detail_only(3);
  uap.mask.level_weights = {0.5, 1.0, 2.0};

  const WaveletPyramid before = haar_dwt2(uap.base_patch, 3);
  const TextureUAP out = apply_texture_constraint(uap);
  const WaveletPyramid after = haar_dwt2(out.base_patch, 3);
  for (size_t i = 0; i < after.details[0].lh.data.size(); ++i)
    REQUIRE(std::abs(after.details[0].lh.data[i] - 0.5f * before.details[0].lh.data[i]) <=
            1e-7f);
  for (size_t i = 0; i < after.details[2].hh.data.size(); ++i)
    REQUIRE(std::abs(after.details[2].hh.data[i] - 2.0f * before.details[2].hh.data[i]) <=
            1e-7f);
}

TEST_CASE("apply_to_image clamps and stays within budget") {
  RngStream rng(11, "uap-init");
  const TextureUAP uap = init_uap(rng, kEps, 4, ScaleMask::detail_only(3));

  // Zero perturbation leaves the image unchanged.
  TextureUAP zero = uap;
  zero.base_patch = ImageTensor(64, 64, 3, 0.0f);
  ImageTensor img(64, 64, 3);
  RngStream irng(12, "img");
  for (float& v : img.data) v = static_cast<float>(irng.next_double());
  CHECK(apply_to_image(img, zero).data == img.data);

  // Saturated image stays saturated under a positive patch.
  TextureUAP pos = uap;
  for (float& v : pos.base_patch.data) v = 0.01f;
  const ImageTensor ones(64, 64, 3, 1.0f);
  const ImageTensor still_ones = apply_to_image(ones, pos);
  for (float v : still_ones.data) REQUIRE(v == 1.0f);

  // Perturbation magnitude is bounded by eps on interior pixels.
  const ImageTensor mid(64, 64, 3, 0.5f);
  const ImageTensor adv = apply_to_image(mid, uap);
  for (size_t i = 0; i < adv.data.size(); ++i) {
    REQUIRE(adv.data[i] >= 0.0f);
    REQUIRE(adv.data[i] <= 1.0f);
    REQUIRE(std::abs(adv.data[i] - 0.5f) <= kEps + 1e-6);
  }
}

TEST_CASE("prompt delta init and application") {
  RngStream rng(13, "delta-init");
  const PromptDelta d = init_prompt_delta(rng, 0.5, 64);
  CHECK(d.vector.size() == 64);
  CHECK(l2_norm(d.vector) <= 0.5 * (1.0 + 1e-9));

  RngStream rng2(13, "delta-init");
  CHECK(init_prompt_delta(rng2, 0.5, 64).vector == d.vector);

  PromptEmbedding e;
  e.vector.assign(64, 0.1);
  const PromptEmbedding shifted = apply_to_prompt(e, d);
  // Additive inverse restores the original (up to one rounding step).
  PromptDelta neg = d;
  for (double& v : neg.vector) v = -v;
  const PromptEmbedding restored = apply_to_prompt(shifted, neg);
  for (size_t i = 0; i < e.vector.size(); ++i)
    REQUIRE(restored.vector[i] == doctest::Approx(e.vector[i]).epsilon(1e-15));

  PromptDelta zero;
  zero.eps_t = 0.5;
  zero.vector.assign(64, 0.0);
  CHECK(apply_to_prompt(e, zero).vector == e.vector);

  PromptDelta wrong;
  wrong.vector.assign(32, 0.0);
  CHECK_THROWS_AS(apply_to_prompt(e, wrong), std::invalid_argument);
  CHECK_THROWS_AS(init_prompt_delta(rng, 0.0, 64), std::invalid_argument);
}
