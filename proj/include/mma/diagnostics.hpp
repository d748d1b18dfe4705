#pragma once

#include <cstdint>
#include <vector>

#include "mma/corpus.hpp"
#include "mma/estimator.hpp"
#include "mma/victim.hpp"

namespace mma {

// Fidelity of the two-point estimator against analytic gradients of the test
// quadratic ||x - x*||^2, averaged over independently seeded trials.
struct QuadraticFidelity {
  double mean_cosine_lo = 0.0;  // at k_lo probes
  double mean_cosine_hi = 0.0;  // at k_hi probes
  int trials = 0;
  int k_lo = 0, k_hi = 0;
};

QuadraticFidelity quadratic_fidelity(int dim, int trials, int k_lo, int k_hi,
                                     double probe_eps, uint64_t seed);

// Same comparison on the toy victim: estimator directions versus the
// white-box analytic gradients, per modality.
struct VictimFidelity {
  double image_cosine_lo = 0.0, image_cosine_hi = 0.0;
  double text_cosine_lo = 0.0, text_cosine_hi = 0.0;
  int trials = 0;
  int k_lo = 0, k_hi = 0;
};

VictimFidelity victim_fidelity(const ToyVictim& victim, const AttackCorpus& corpus,
                               const std::string& target, int trials, int k_lo, int k_hi,
                               double eps_v, double eps_t, uint64_t seed);

double cosine_between(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mma
