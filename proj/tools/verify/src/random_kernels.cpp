#include "cylising/verify/random_kernels.hpp"

#include <algorithm>

namespace cylising::verify {

double KernelSampler::coefficient() { return std::uniform_real_distribution<double>(-1.0, 1.0)(rng_); }

int KernelSampler::uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

int KernelSampler::omega() { return uniform(0, 1) ? 1 : -1; }

Kernel KernelSampler::local_kernel(const CylinderGeometry& geom, const std::vector<Sector>& sectors,
                                   bool closure, int terms) {
  Kernel k(geom);
  const int rlo = closure ? 0 : 1;
  const int rhi = closure ? geom.M() + 1 : geom.M();
  for (int t = 0; t < terms; ++t) {
    const Sector s = sectors[uniform(0, static_cast<int>(sectors.size()) - 1)];
    for (int tries = 0; tries < 100; ++tries) {
      const int x0 = uniform(1, geom.L());
      std::vector<FieldLabel> f(s.n);
      for (auto& l : f) {
        l.omega = omega();
        l.z = geom.wrap(x0 + uniform(-1, 2), uniform(rlo, rhi));
      }
      for (int q = 0; q < s.p; ++q) f[uniform(0, s.n - 1)].D[uniform(0, 1)]++;
      const bool ok = std::ranges::all_of(
          f, [&](const FieldLabel& l) { return l.order() <= 2 && l.z.x2 + l.D[1] <= rhi; });
      if (!ok) continue;
      k.add(std::move(f), {}, coefficient());
      break;
    }
  }
  return k;
}

Kernel KernelSampler::symmetric_kernel(const CylinderGeometry& geom,
                                       const std::vector<Sector>& sectors, bool closure, int terms) {
  const Kernel k = local_kernel(geom, sectors, closure, terms);
  Kernel ti(geom);
  for (int dx = 0; dx < geom.L(); ++dx) ti += translate(k, dx);
  return symmetrize(ti);
}

Kernel KernelSampler::source_kernel(const CylinderGeometry& geom, int terms) {
  Kernel k(geom);
  for (int t = 0; t < terms; ++t) {
    const Edge x{{uniform(1, geom.L()), uniform(1, geom.M() - 1)},
                 uniform(0, 1) ? Direction::horizontal : Direction::vertical};
    std::vector<FieldLabel> f(2);
    for (auto& l : f) {
      l.omega = omega();
      l.z = geom.wrap(x.base.x1 + uniform(-1, 2), std::clamp(x.base.x2 + uniform(-2, 2), 0, geom.M() + 1));
    }
    if (uniform(0, 1)) {
      const int i = uniform(0, 1);
      int j = uniform(0, 1);
      if (j == 1 && f[i].z.x2 == geom.M() + 1) j = 0;
      f[i].D[j] = 1;
    }
    k.add(std::move(f), {x}, coefficient());
  }
  Kernel ti(geom);
  for (int dx = 0; dx < geom.L(); ++dx) ti += translate(k, dx);
  return symmetrize(ti);
}

Kernel KernelSampler::bulk_form_kernel(const CylinderGeometry& geom) {
  InfiniteVolumeKernel w;
  for (int o1 : {1, -1})
    for (int o2 : {1, -1}) {
      w[KernelShape{{o1, o2}, {{0, 0}, {0, 0}}, {{0, 0}, {1, 1}}, {}}] = coefficient();
      w[KernelShape{{o1, o2}, {{0, 1}, {0, 0}}, {{0, 0}, {0, 1}}, {}}] = coefficient();
      w[KernelShape{{o1, o2}, {{0, 0}, {1, 0}}, {{0, 0}, {-1, 0}}, {}}] = coefficient();
    }
  return symmetrize(bulk_kernel(geom, w));
}

}  // namespace cylising::verify
