#pragma once

#include <array>
#include <vector>

#include "cylising/lattice.hpp"
#include "cylising/propagators.hpp"

namespace cylising {

// Littlewood–Paley partition of unity on E(k) = sqrt(D(k1, k2)).
class ScaleCutoff {
 public:
  ScaleCutoff(const CylinderGeometry& geom, const ModelParams& p);

  int h_star() const { return h_star_; }
  // 1 on [0, 1/2], 0 on [1, inf), C^2 polynomial transition in between.
  static double chi(double s);
  double dispersion(double k1, double k2) const;
  // Weight of the single scale h in [h* + 1, 0].
  double weight(int h, double k1, double k2) const;
  // Weight of all scales <= h*.
  double weight_leq(double k1, double k2) const;
  // chi(E): total weight of the smooth sector (scales <= 0).
  double weight_smooth(double k1, double k2) const;
  // 1 - chi(E): the complement assigned to scale 1.
  double weight_complement(double k1, double k2) const;

 private:
  ModelParams p_;
  int h_star_;
};

int h_star_for(const CylinderGeometry& geom);

// Scale-h critical propagator on rows [0, M+1]; throws std::out_of_range for h outside [h*+1, 0].
PropagatorTable scale_propagator(const CriticalFourier& f, const ScaleCutoff& c, int h);
PropagatorTable scale_propagator_leq(const CriticalFourier& f, const ScaleCutoff& c);
PropagatorTable smooth_sector_propagator(const CriticalFourier& f, const ScaleCutoff& c);

// Infinite-volume scale-h propagator on |d1| <= R1, |d2| <= R2.
InfiniteKernel infinite_scale_propagator(int h, int R1, int R2, const ModelParams& p,
                                         double tol = 1e-12);

struct BulkEdgeSplit {
  PropagatorTable bulk;
  PropagatorTable edge;
};

// bulk(dx, r, r') = sign * g_inf(per_L(dx), r - r'), with sign -1 when the representative wraps
// across the seam and 0 at dx = L/2; edge = full - bulk.
BulkEdgeSplit bulk_edge_split(const PropagatorTable& full, const InfiniteKernel& inf);
BulkEdgeSplit bulk_edge_split(int h, const CriticalFourier& f, const ScaleCutoff& c,
                              double tol = 1e-12);

// Boundary-weighted distance between (x, r) and (x + dx, r') for the edge part.
int edge_distance(const CylinderGeometry& geom, int dx, int r, int rp);

// Mixed forward differences r = (r1, r2, r1', r2') in (z1, z2, z1', z2'), each <= 2.
// Row ranges shrink by the vertical orders; horizontal shifts use the antiperiodic wrap.
PropagatorTable discrete_derivative(const PropagatorTable& t, const std::array<int, 4>& r);

struct ExponentialFit {
  double rate = 0;       // y ~ A exp(-rate x)
  double log_amplitude = 0;
  double r2 = 0;
  int points = 0;
};

// Least-squares line through (x, log y) over positive y.
ExponentialFit fit_exponential(const std::vector<double>& x, const std::vector<double>& y);

struct DecayProfile {
  std::vector<double> distance;
  std::vector<double> envelope;  // max block norm at each distance
};

// Max-norm envelope of |t(z, z')| grouped by 2^h ||z - z'||_1 (bulk rows only).
DecayProfile scale_decay_profile(const PropagatorTable& t, int h);
// Max-norm envelope of the edge part grouped by edge_distance (bulk rows only).
DecayProfile edge_decay_profile(const PropagatorTable& edge);

}  // namespace cylising
