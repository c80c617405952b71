#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cylising/kernelcalc.hpp"

namespace cylising::verify {

// Seeded generator of random kernels with small horizontal support (spread <= 3 columns).
class KernelSampler {
 public:
  explicit KernelSampler(std::uint64_t seed) : rng_(seed) {}

  double coefficient();
  int uniform(int lo, int hi);
  int omega();

  // `terms` random monomials from the given sectors; rows in [1, M] or, with closure, [0, M+1].
  Kernel local_kernel(const CylinderGeometry& geom, const std::vector<Sector>& sectors,
                      bool closure, int terms);
  // Sum of all horizontal translates of local_kernel, then symmetrize.
  Kernel symmetric_kernel(const CylinderGeometry& geom, const std::vector<Sector>& sectors,
                          bool closure, int terms);
  // Translation-invariant symmetrized source kernel in sectors (2,0,1) and (2,1,1).
  Kernel source_kernel(const CylinderGeometry& geom, int terms);
  // Random infinite-volume (2,0), (2,1) kernel of range one, restricted to the cylinder.
  Kernel bulk_form_kernel(const CylinderGeometry& geom);

 private:
  std::mt19937_64 rng_;
};

}  // namespace cylising::verify
