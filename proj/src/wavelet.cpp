#include "mma/wavelet.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mma {

ScaleMask ScaleMask::keep_all(int levels) {
  ScaleMask m;
  m.keep_approx = true;
  m.keep_detail.assign(levels, true);
  m.level_weights.assign(levels, 1.0);
  return m;
}

ScaleMask ScaleMask::detail_only(int levels) {
  ScaleMask m = keep_all(levels);
  m.keep_approx = false;
  return m;
}

void ScaleMask::validate() const {
  if (keep_detail.size() != level_weights.size())
    throw std::invalid_argument("ScaleMask: keep_detail and level_weights length mismatch");
  if (keep_detail.empty())
    throw std::invalid_argument("ScaleMask: at least one level required");
  bool any = keep_approx;
  for (size_t i = 0; i < keep_detail.size(); ++i) {
    if (level_weights[i] < 0.0)
      throw std::invalid_argument("ScaleMask: level weights must be nonnegative");
    any = any || (keep_detail[i] && level_weights[i] > 0.0);
  }
  if (!any)
    throw std::invalid_argument("ScaleMask: mask drops every subband");
}

namespace {

void check_divisible(const ImageTensor& image, int levels) {
  if (levels < 1) throw std::invalid_argument("haar_dwt2: levels must be >= 1");
  const int div = 1 << levels;
  if (image.height % div != 0)
    throw std::invalid_argument("haar_dwt2: height " + std::to_string(image.height) +
                                " not divisible by 2^" + std::to_string(levels));
  if (image.width % div != 0)
    throw std::invalid_argument("haar_dwt2: width " + std::to_string(image.width) +
                                " not divisible by 2^" + std::to_string(levels));
}

// One analysis step: (h, w, c) -> four (h/2, w/2, c) subbands.
void haar_step(const ImageTensor& in, ImageTensor& ll, DetailBand& band) {
  const int h2 = in.height / 2, w2 = in.width / 2, c = in.channels;
  ll = ImageTensor(h2, w2, c);
  band.lh = ImageTensor(h2, w2, c);
  band.hl = ImageTensor(h2, w2, c);
  band.hh = ImageTensor(h2, w2, c);
  for (int y = 0; y < h2; ++y) {
    for (int x = 0; x < w2; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        const float a = in.at(2 * y, 2 * x, ch);
        const float b = in.at(2 * y, 2 * x + 1, ch);
        const float cc = in.at(2 * y + 1, 2 * x, ch);
        const float d = in.at(2 * y + 1, 2 * x + 1, ch);
        ll.at(y, x, ch) = 0.5f * (a + b + cc + d);
        band.lh.at(y, x, ch) = 0.5f * (a + b - cc - d);
        band.hl.at(y, x, ch) = 0.5f * (a - b + cc - d);
        band.hh.at(y, x, ch) = 0.5f * (a - b - cc + d);
      }
    }
  }
}

ImageTensor haar_unstep(const ImageTensor& ll, const DetailBand& band) {
  if (!ll.same_shape(band.lh) || !ll.same_shape(band.hl) || !ll.same_shape(band.hh))
    throw std::invalid_argument("haar_idwt2: subband shape mismatch");
  const int h2 = ll.height, w2 = ll.width, c = ll.channels;
  ImageTensor out(h2 * 2, w2 * 2, c);
  for (int y = 0; y < h2; ++y) {
    for (int x = 0; x < w2; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        const float s = ll.at(y, x, ch);
        const float lh = band.lh.at(y, x, ch);
        const float hl = band.hl.at(y, x, ch);
        const float hh = band.hh.at(y, x, ch);
        out.at(2 * y, 2 * x, ch) = 0.5f * (s + lh + hl + hh);
        out.at(2 * y, 2 * x + 1, ch) = 0.5f * (s + lh - hl - hh);
        out.at(2 * y + 1, 2 * x, ch) = 0.5f * (s - lh + hl - hh);
        out.at(2 * y + 1, 2 * x + 1, ch) = 0.5f * (s - lh - hl + hh);
      }
    }
  }
  return out;
}

void accumulate_energy(const ImageTensor& t, double& acc) {
  for (float v : t.data) acc += static_cast<double>(v) * static_cast<double>(v);
}

void scale_inplace(ImageTensor& t, double factor) {
  const float f = static_cast<float>(factor);
  for (float& v : t.data) v *= f;
}

}  // namespace

WaveletPyramid haar_dwt2(const ImageTensor& image, int levels) {
  check_divisible(image, levels);
  WaveletPyramid pyr;
  pyr.levels = levels;
  pyr.details.resize(levels);
  ImageTensor current = image;
  for (int l = 0; l < levels; ++l) {
    ImageTensor next;
    haar_step(current, next, pyr.details[l]);
    current = std::move(next);
  }
  pyr.approx = std::move(current);
  return pyr;
}

ImageTensor haar_idwt2(const WaveletPyramid& pyramid) {
  if (pyramid.levels < 1 || pyramid.details.size() != static_cast<size_t>(pyramid.levels))
    throw std::invalid_argument("haar_idwt2: malformed pyramid");
  ImageTensor current = pyramid.approx;
  for (int l = pyramid.levels - 1; l >= 0; --l)
    current = haar_unstep(current, pyramid.details[l]);
  return current;
}

WaveletPyramid apply_scale_mask(const WaveletPyramid& pyramid, const ScaleMask& mask) {
  mask.validate();
  if (mask.levels() != pyramid.levels)
    throw std::invalid_argument("apply_scale_mask: mask has " + std::to_string(mask.levels()) +
                                " levels, pyramid has " + std::to_string(pyramid.levels));
  WaveletPyramid out = pyramid;
  if (!mask.keep_approx) scale_inplace(out.approx, 0.0);
  for (int l = 0; l < pyramid.levels; ++l) {
    const double w = mask.keep_detail[l] ? mask.level_weights[l] : 0.0;
    if (w != 1.0) {
      scale_inplace(out.details[l].lh, w);
      scale_inplace(out.details[l].hl, w);
      scale_inplace(out.details[l].hh, w);
    }
  }
  return out;
}

double max_abs_dropped(const WaveletPyramid& pyramid, const ScaleMask& mask) {
  if (mask.levels() != pyramid.levels)
    throw std::invalid_argument("max_abs_dropped: level count mismatch");
  double m = 0.0;
  if (!mask.keep_approx) m = std::max(m, linf_norm(pyramid.approx));
  for (int l = 0; l < pyramid.levels; ++l) {
    if (!mask.keep_detail[l] || mask.level_weights[l] == 0.0) {
      m = std::max(m, linf_norm(pyramid.details[l].lh));
      m = std::max(m, linf_norm(pyramid.details[l].hl));
      m = std::max(m, linf_norm(pyramid.details[l].hh));
    }
  }
  return m;
}

double coefficient_energy(const WaveletPyramid& pyramid) {
  double e = 0.0;
  accumulate_energy(pyramid.approx, e);
  for (const DetailBand& band : pyramid.details) {
    accumulate_energy(band.lh, e);
    accumulate_energy(band.hl, e);
    accumulate_energy(band.hh, e);
  }
  return e;
}

double pixel_energy(const ImageTensor& image) {
  double e = 0.0;
  accumulate_energy(image, e);
  return e;
}

}  // namespace mma
