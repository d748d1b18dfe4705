#include "mma/project.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mma {

ImageTensor project_linf(ImageTensor t, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("project_linf: eps must be positive");
  const float e = static_cast<float>(eps);
  for (float& v : t.data) v = std::clamp(v, -e, e);
  return t;
}

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> project_l2(std::vector<double> v, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("project_l2: eps must be positive");
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument("project_l2: non-finite component");
  const double norm = l2_norm(v);
  // The slack keeps the projection idempotent bit-for-bit: a vector scaled
  // onto the boundary re-enters as an interior point despite rounding.
  if (norm <= eps * (1.0 + 1e-12)) return v;
  const double scale = eps / norm;
  for (double& x : v) x *= scale;
  return v;
}

}  // namespace mma
