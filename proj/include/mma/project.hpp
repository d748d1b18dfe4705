#pragma once

#include <vector>

#include "mma/tensor.hpp"

namespace mma {

// Euclidean projection onto the linf ball of radius eps (elementwise clamp).
ImageTensor project_linf(ImageTensor t, double eps);

// Euclidean projection onto the l2 ball of radius eps. Direction-preserving;
// interior points are returned unchanged bit-for-bit.
std::vector<double> project_l2(std::vector<double> v, double eps);

double l2_norm(const std::vector<double>& v);

}  // namespace mma
