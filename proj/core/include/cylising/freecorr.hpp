#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "cylising/lattice.hpp"
#include "cylising/propagators.hpp"
#include "cylising/skewlinalg.hpp"

namespace cylising {

enum class FieldKind : std::uint8_t { phi, xi };

// One Grassmann generator phi_{omega,z} or xi_{omega,z} with z in the cylinder.
struct ObservableField {
  FieldKind kind = FieldKind::phi;
  int omega = +1;
  Site site;
  friend auto operator<=>(const ObservableField&, const ObservableField&) = default;
};

struct FieldTerm {
  ObservableField field;
  double coeff = 1.0;
};

// Linear combination of generators.
using LinearField = std::vector<FieldTerm>;

struct GibbsResult {
  double Z = 0;
  std::vector<double> means;  // <eps_x> per observable
  SubsetMap moments;          // <prod_{i in S} eps_{x_i}> per nonempty subset mask
};

// Exact sum over all spin configurations (LM <= 24).
GibbsResult enumerate_gibbs(const CylinderGeometry& geom, double beta, double J1, double J2,
                            const std::vector<Edge>& observables);

struct PartitionFunctionParts {
  double log_prefactor = 0;  // log of 2^{LM} cosh^{LM}(beta J1) cosh^{L(M-1)}(beta J2)
  cplx pf_critical;
  cplx pf_massive;
  double value() const;
};

PartitionFunctionParts partition_function_parts(const CylinderGeometry& geom, double beta,
                                                double J1, double J2);
double partition_function_free(const CylinderGeometry& geom, double beta, double J1, double J2);
// Pf(A_m) as the product of per-row, per-momentum blocks.
cplx massive_pfaffian_blockwise(const CylinderGeometry& geom, double t1);

// Grassmann representation of the energy observables at lambda = 0.
class FreeEnergyCorrelator {
 public:
  // Uses the Fourier propagator on the critical line and direct inversion otherwise.
  FreeEnergyCorrelator(const CylinderGeometry& geom, const ModelParams& p);

  const CylinderGeometry& geometry() const { return geom_; }
  const ModelParams& params() const { return p_; }

  // Constituent fields (first, second) of the bilinear E_x.
  std::array<LinearField, 2> bilinear_fields(const Edge& x) const;
  double covariance(const LinearField& a, const LinearField& b) const;
  double field_pair(const ObservableField& a, const ObservableField& b) const;

  // prod_i (1 - t_{j(x_i)}^2) * <prod_i E_{x_i}> = prod_i (1 - t^2) Pf(G).
  double bilinear_moment(const std::vector<Edge>& xs) const;
  // <prod_i eps_{x_i}> with eps_x = t_{j(x)} + (1 - t_{j(x)}^2) E_x.
  double energy_moment(const std::vector<Edge>& xs) const;
  // Joint cumulant of the eps_{x_i} (order m = xs.size()).
  double energy_cumulant(const std::vector<Edge>& xs) const;
  // All moments / cumulants over subsets of xs.
  SubsetMap energy_moments(const std::vector<Edge>& xs) const;

 private:
  void check_edges(const std::vector<Edge>& xs) const;
  double t_of(const Edge& x) const;
  Block phi_block(Site z, Site zp) const;

  CylinderGeometry geom_;
  ModelParams p_;
  std::unique_ptr<PropagatorTable> phi_;       // off the critical line: direct inversion
  std::unique_ptr<CriticalFourier> fourier_;  // on the critical line: row pairs built on demand
  mutable std::map<std::pair<int, int>, std::vector<Block>> rows_;
  mutable std::mutex rows_mu_;
  std::unique_ptr<PropagatorTable> xi_;
  std::vector<cplx> s_plus_, s_minus_;  // s_{+-}(y) for y in [0, L)
};

// Continuum m-point energy correlation (2 t2*)^{m1} (1 - t2*^2)^{m2} Pf(M(z)).
double scaling_correlation(const std::vector<std::array<double, 2>>& points,
                           const std::vector<Direction>& labels, double ell1, double ell2,
                           const ModelParams& p);

}  // namespace cylising
