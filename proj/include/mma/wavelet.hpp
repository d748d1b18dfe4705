#pragma once

#include <vector>

#include "mma/tensor.hpp"

namespace mma {

// The three detail subbands of one decomposition level.
struct DetailBand {
  ImageTensor lh;  // row-sum / column-difference
  ImageTensor hl;  // row-difference / column-sum
  ImageTensor hh;  // diagonal difference
};

// Multi-level orthonormal 2-D Haar pyramid. details[0] is the finest level
// (half the source size); approx is the coarsest approximation subband.
// Total coefficient count equals the source pixel count per channel.
struct WaveletPyramid {
  int levels = 0;
  ImageTensor approx;
  std::vector<DetailBand> details;

  int source_height() const { return approx.height << levels; }
  int source_width() const { return approx.width << levels; }
  int channels() const { return approx.channels; }
};

// Per-level subband selection with optional per-level scaling of kept detail
// bands. Dropping everything would annihilate the signal, so validate()
// requires at least one kept subband.
struct ScaleMask {
  bool keep_approx = false;
  std::vector<bool> keep_detail;      // index 0 = finest level
  std::vector<double> level_weights;  // applied to kept detail bands

  static ScaleMask keep_all(int levels);
  static ScaleMask detail_only(int levels);

  int levels() const { return static_cast<int>(keep_detail.size()); }
  void validate() const;
};

/*
 * Single Haar step on each 2x2 block [a b; c d]:
 *   LL = (a+b+c+d)/2   LH = (a+b-c-d)/2
 *   HL = (a-b+c-d)/2   HH = (a-b-c+d)/2
 * and back:
 *   a = (LL+LH+HL+HH)/2   b = (LL+LH-HL-HH)/2
 *   c = (LL-LH+HL-HH)/2   d = (LL-LH-HL+HH)/2
 * The /2 factor makes the transform orthonormal, so coefficient energy equals
 * pixel energy and the round trip is exact up to float rounding.
 */
WaveletPyramid haar_dwt2(const ImageTensor& image, int levels);
ImageTensor haar_idwt2(const WaveletPyramid& pyramid);

// Zeroes dropped subbands, scales kept detail bands by their level weight.
WaveletPyramid apply_scale_mask(const WaveletPyramid& pyramid, const ScaleMask& mask);

// Largest |coefficient| in the subbands the mask drops; diagnostic for the
// texture-constraint feasibility checks.
double max_abs_dropped(const WaveletPyramid& pyramid, const ScaleMask& mask);

double coefficient_energy(const WaveletPyramid& pyramid);
double pixel_energy(const ImageTensor& image);

}  // namespace mma
