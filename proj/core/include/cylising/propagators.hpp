#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cylising/lattice.hpp"
#include "cylising/skewlinalg.hpp"

namespace cylising {

using Block = Eigen::Matrix2cd;  // indexed [omega][omega'] with 0 = '+', 1 = '-'

inline int omega_index(int omega) { return omega > 0 ? 0 : 1; }

struct ModelParams {
  double t1 = 0.5;
  double t2 = 1.0 / 3.0;
  double t1_star = 0.5;
  double t2_star = 1.0 / 3.0;
  double lambda = 0.0;

  // Critical line t2 = (1 - t1)/(1 + t1); dressed values equal to the bare ones.
  static ModelParams critical(double t1);
  // t_j = tanh(beta J_j); dressed values copied from the bare ones.
  static ModelParams from_couplings(double beta, double J1, double J2);

  bool is_critical(double tol = 1e-14) const;
  // Bare parameters replaced by the dressed ones.
  ModelParams dressed() const;
  void validate() const;
};

double critical_t2(double t1);
// Inverse temperature at which (beta J1, beta J2) lies on the critical line.
double critical_beta(double J1, double J2);

struct DispersionCoefficients {
  double b = 0;
  double Delta = 0;
  double B = 0;
  double D = 0;
};

DispersionCoefficients coeff_b_delta_B_D(double k1, double k2, const ModelParams& p);

// Antiperiodic horizontal momenta pi(2m-1)/L, m = -L/2+1..L/2.
std::vector<double> k1_values(int L);

double quantization_function(double k2, double B, int M);
// All roots in (-pi, pi) excluding 0 and +-pi, sorted; throws NumericalError on a count mismatch.
std::vector<double> solve_k2_roots(double k1, int M, const ModelParams& p);
double normalization_NM(double k1, double k2, int M, const ModelParams& p);
Block ghat(double k1, double k2, const ModelParams& p);

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MomentumGrid {
  std::vector<double> k1;
  std::vector<std::vector<double>> k2;
};

MomentumGrid build_momentum_grid(const CylinderGeometry& geom, const ModelParams& p);

enum class PropagatorVariant {
  massive,
  critical,
  critical_direct,
  infinite,
  bulk,
  edge,
  scale,
  scale_leq,
  scaling_limit,
  derivative
};

std::string to_string(PropagatorVariant v);

// Translation-invariant two-point table G(x - x', r, r'), extended antiperiodically in x - x'.
class PropagatorTable {
 public:
  PropagatorTable(CylinderGeometry geom, PropagatorVariant variant, int row_lo, int row_hi);
  PropagatorTable(CylinderGeometry geom, PropagatorVariant variant, int rowA_lo, int rowA_hi,
                  int rowB_lo, int rowB_hi);

  const CylinderGeometry& geometry() const { return geom_; }
  PropagatorVariant variant() const { return variant_; }
  int scale() const { return scale_; }
  void set_scale(int h) { scale_ = h; }

  int rowA_lo() const { return a_lo_; }
  int rowA_hi() const { return a_hi_; }
  int rowB_lo() const { return b_lo_; }
  int rowB_hi() const { return b_hi_; }
  bool has_rows(int r, int rp) const {
    return r >= a_lo_ && r <= a_hi_ && rp >= b_lo_ && rp <= b_hi_;
  }

  // delta in [0, L)
  Block& at(int delta, int r, int rp);
  const Block& at(int delta, int r, int rp) const;
  // Any integer horizontal displacement, with the antiperiodic sign.
  Block by_delta(int dx, int r, int rp) const;
  Block block(Site z, Site zp) const;
  cplx entry(int omega, Site z, int omega_p, Site zp) const;

  PropagatorTable& operator+=(const PropagatorTable& o);
  PropagatorTable& operator-=(const PropagatorTable& o);
  PropagatorTable& operator*=(cplx c);
  double max_abs() const;
  // Largest entrywise difference over the common row range.
  double max_abs_diff(const PropagatorTable& o) const;
  double max_imag() const;

 private:
  std::size_t index(int delta, int r, int rp) const;
  void check_compatible(const PropagatorTable& o) const;

  CylinderGeometry geom_;
  PropagatorVariant variant_;
  int a_lo_, a_hi_, b_lo_, b_hi_;
  int scale_ = 0;
  std::vector<Block> data_;
};

using MomentumWeight = std::function<cplx(double k1, double k2)>;

// Fourier representation of the critical propagator on the cylinder (critical line only).
class CriticalFourier {
 public:
  CriticalFourier(CylinderGeometry geom, ModelParams p);

  const MomentumGrid& grid() const { return grid_; }
  const CylinderGeometry& geometry() const { return geom_; }
  const ModelParams& params() const { return p_; }

  // Single block for arbitrary integer rows (the formula extends beyond the cylinder).
  Block block(Site z, Site zp, const MomentumWeight& w = {}) const;
  // Full table on rows [row_lo, row_hi] for both arguments.
  PropagatorTable table(const MomentumWeight& w = {}, int row_lo = 0, int row_hi = -1,
                        PropagatorVariant v = PropagatorVariant::critical) const;
  // Blocks G(delta, r, rp) for delta in [0, L).
  std::vector<Block> row_pair(int r, int rp, const MomentumWeight& w = {}) const;

  // Max residual of the momentum-space symmetry identities over the grid.
  double symmetry_residual() const;
  // Max residual of the quantization condition over the grid.
  double root_residual() const;

 private:
  struct Mode {
    double k2;
    double inv2N;
    Block g;        // ghat(k1, k2)
    cplx gpm_flip;  // ghat_{+-}(k1, -k2)
  };
  CylinderGeometry geom_;
  ModelParams p_;
  MomentumGrid grid_;
  std::vector<std::vector<Mode>> modes_;
  Block row_sum(std::size_t ik1, int r, int rp, const MomentumWeight& w) const;
};

PropagatorTable critical_propagator_fourier(const CylinderGeometry& geom, const ModelParams& p,
                                            bool closure_rows = true);

// Real-space quadratic forms: S = (1/2)(psi, A psi), index 2*((r-1)L + (x-1)) + (omega == - ? 1 : 0).
CMatrix critical_action_matrix(const CylinderGeometry& geom, double t1, double t2);
CMatrix massive_action_matrix(const CylinderGeometry& geom, double t1);
int field_index(const CylinderGeometry& geom, int omega, Site z);

// -A_c^{-1} as a dense matrix (cap 2LM <= 8192).
CMatrix critical_direct_matrix(const CylinderGeometry& geom, const ModelParams& p);
PropagatorTable critical_propagator_direct(const CylinderGeometry& geom, const ModelParams& p);

// s_{+-}(y) for any integer y (antiperiodic).
cplx massive_s(int sign, int y, int L, double t1);
PropagatorTable massive_propagator(const CylinderGeometry& geom, const ModelParams& p);
CMatrix massive_direct_matrix(const CylinderGeometry& geom, const ModelParams& p);

// Largest magnitude of the entries that must vanish at the ghost rows.
double boundary_residual(const PropagatorTable& t);
// Largest violation of the reflection covariance of the critical propagator.
double reflection_residual(const PropagatorTable& t);
// Largest violation of G(z,z')[w][w'] = -G(z',z)[w'][w].
double antisymmetry_residual(const PropagatorTable& t);

// Infinite-volume propagator without cutoff (k2 integral by residues, k1 by adaptive quadrature).
Block infinite_propagator_full(int d1, int d2, const ModelParams& p);

// Infinite-volume kernel on the window |d1| <= R1, |d2| <= R2.
class InfiniteKernel {
 public:
  InfiniteKernel(int R1, int R2) : R1_(R1), R2_(R2), data_((2 * R1 + 1) * (2 * R2 + 1)) {}
  int R1() const { return R1_; }
  int R2() const { return R2_; }
  Block& at(int d1, int d2) { return data_[(d1 + R1_) * (2 * R2_ + 1) + (d2 + R2_)]; }
  const Block& at(int d1, int d2) const { return data_[(d1 + R1_) * (2 * R2_ + 1) + (d2 + R2_)]; }
  int grid_size = 0;      // torus size at convergence
  double last_change = 0;  // max change in the final doubling

 private:
  int R1_, R2_;
  std::vector<Block> data_;
};

// Momentum integral of ghat * w by torus sums doubled until the change is below tol.
// The weight must vanish in a neighbourhood of k = 0.
InfiniteKernel infinite_propagator_cutoff(const MomentumWeight& w, int R1, int R2,
                                          const ModelParams& p, double tol = 1e-10,
                                          int n_start = 256, int n_max = 1 << 14);

// Scalar continuum propagator -(1/(2 pi t2 (1-t2))) z1/|z|^2 (uses t2_star).
double g_scal_scalar(double z1, double z2, const ModelParams& p);
// Continuum propagator on the cylinder of circumference ell1 and height ell2 (uses dressed values).
Block scaling_propagator(double z1, double z2, double zp1, double zp2, double ell1, double ell2,
                         const ModelParams& p);

// Lattice geometry and site associated with lattice spacing a on the continuum cylinder.
CylinderGeometry lattice_for_spacing(double ell1, double ell2, double a);
Site lattice_site_for_point(double z1, double z2, double a, const CylinderGeometry& geom);

}  // namespace cylising
