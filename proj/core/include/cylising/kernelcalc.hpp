#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cylising/lattice.hpp"
#include "cylising/propagators.hpp"

namespace cylising {

// omega = +1 / -1 for phi_{+-}; +2 / -2 for the massive xi_{+-} (the labels i / -i).
struct FieldLabel {
  int omega = +1;
  std::array<int, 2> D{0, 0};
  Site z;

  int order() const { return D[0] + D[1]; }
  bool massive() const { return omega == 2 || omega == -2; }
  friend auto operator<=>(const FieldLabel&, const FieldLabel&) = default;
};

struct KernelKey {
  std::vector<FieldLabel> fields;
  std::vector<Edge> edges;
  friend auto operator<=>(const KernelKey&, const KernelKey&) = default;
};

struct Sector {
  int n = 0;  // number of fields
  int p = 0;  // total derivative order
  int m = 0;  // number of probe edges
  friend auto operator<=>(const Sector&, const Sector&) = default;
};

Sector sector_of(const KernelKey& k);

enum class KernelTag : std::uint8_t { generic, bulk, edge };

struct KernelError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Sparse real coefficients W(Psi, x); the potential is sum W(Psi, x) phi(Psi) A(x).
class Kernel {
 public:
  using Map = std::map<KernelKey, double>;

  explicit Kernel(CylinderGeometry geom) : geom_(geom) {}

  const CylinderGeometry& geometry() const { return geom_; }
  const Map& coefficients() const { return c_; }
  bool empty() const { return c_.empty(); }
  std::size_t size() const { return c_.size(); }

  // Validates the labels (even n, |D| <= 2, z and z + D in the closure) and accumulates v.
  void add(const KernelKey& key, double v);
  void add(std::vector<FieldLabel> fields, std::vector<Edge> edges, double v);
  double at(const KernelKey& key) const;

  Kernel sector(Sector s) const;
  Kernel sourceless() const;  // m = 0 part
  Kernel source() const;      // m > 0 part
  std::vector<Sector> sectors() const;
  double max_abs() const;
  // Drops entries with |v| <= tol.
  void prune(double tol = 0.0);

  Kernel& operator+=(const Kernel& o);
  Kernel& operator-=(const Kernel& o);
  Kernel& operator*=(double c);
  friend Kernel operator+(Kernel a, const Kernel& b) { return a += b; }
  friend Kernel operator-(Kernel a, const Kernel& b) { return a -= b; }
  friend Kernel operator*(double c, Kernel a) { return a *= c; }

  bool antisymmetrized = false;
  bool reflection_symmetrized = false;
  KernelTag tag = KernelTag::generic;

 private:
  void check_geometry(const Kernel& o) const;

  CylinderGeometry geom_;
  Map c_;
};

// Canonical Grassmann polynomial: plain (D = 0) fields strictly increasing, edges sorted.
using Polynomial = std::map<KernelKey, double>;

// Derivatives expanded into point fields (antiperiodic horizontal wrap), null boundary fields
// (phi_+ on row 0, phi_- on row M+1) dropped, monomials reordered with their sign.
Polynomial expand_to_plain_fields(const Kernel& k);
double polynomial_distance(const Polynomial& a, const Polynomial& b);
bool kernels_equivalent(const Kernel& a, const Kernel& b, double tol = 1e-12);
// Polynomial viewed as a kernel on plain labels.
Kernel polynomial_kernel(const CylinderGeometry& geom, const Polynomial& p);

// ---- symmetries ----------------------------------------------------------------------------

Kernel translate(const Kernel& k, int dx);
Kernel reflect_horizontal(const Kernel& k);  // theta_1 with its field phases
Kernel reflect_vertical(const Kernel& k);    // theta_2 with its field phases
Kernel antisymmetrize(const Kernel& k);      // fields antisymmetrized, edges symmetrized
Kernel reflection_symmetrize(const Kernel& k);
// Antisymmetrization combined with the average over {1, theta_1, theta_2, theta_1 theta_2}.
Kernel symmetrize(const Kernel& k);

// ---- localization and interpolation --------------------------------------------------------

// Lattice path from a to b: vertical leg first, then the shorter horizontal leg (at a tie,
// the leg that does not cross the seam).
std::vector<Site> interpolation_path(Site a, Site b, const CylinderGeometry& geom);

// Coincident-point localization of V_{n,p}, (n,p) in {(2,0), (2,1), (4,0)}.
Kernel tilde_L(const Kernel& v);
// Path interpolation remainder V_{n,p} -> (n, p+1), same sectors.
Kernel tilde_R(const Kernel& v);

// Bulk family: V must be sourceless; its (2,0), (2,1), (4,0) parts need horizontal diameter at
// most L/3, which keeps the seam signs of the interpolation consistent.
Kernel L_bulk(const Kernel& v);
Kernel R_bulk(const Kernel& v);

// Edge family: localization at the nearest ghost row below / above the first point.
Site boundary_anchor(Site z1, const CylinderGeometry& geom);
Kernel tilde_L_edge(const Kernel& v);
Kernel tilde_R_edge(const Kernel& v);
Kernel L_edge(const Kernel& v);
Kernel R_edge(const Kernel& v);

// Source family (single probe edge x localized at its base vertex); the sourceless part must vanish.
Kernel tilde_L_source(const Kernel& b);
Kernel tilde_R_source(const Kernel& b);
Kernel L_source(const Kernel& b);
Kernel R_source(const Kernel& b);

// ---- bulk / edge split of kernels ----------------------------------------------------------

// Relative shape on Z^2: offsets of every point and edge base from the first point.
struct KernelShape {
  std::vector<int> omega;
  std::vector<std::array<int, 2>> D;
  std::vector<std::array<int, 2>> offset;
  std::vector<std::pair<std::array<int, 2>, Direction>> edges;
  friend auto operator<=>(const KernelShape&, const KernelShape&) = default;
};

// Translation-invariant infinite-volume kernel.
using InfiniteVolumeKernel = std::map<KernelShape, double>;

KernelShape representative_shape(const KernelKey& key, const CylinderGeometry& geom);
bool in_interior_support(const KernelKey& key, const CylinderGeometry& geom);

struct KernelSplit {
  Kernel bulk;
  Kernel edge;
};

// bulk(Psi, x) = (-1)^alpha(z) 1(Psi interior) 1(diam <= L/3) W_inf(representative).
KernelSplit bulk_edge_kernel_split(const Kernel& w, const InfiniteVolumeKernel& w_inf);
Kernel bulk_kernel(const CylinderGeometry& geom, const InfiniteVolumeKernel& w_inf);

// ---- weighted norms ------------------------------------------------------------------------

enum class NormFlavor : std::uint8_t { bulk, edge, source_bulk, source_edge };

// Exact sup-sum norm of sector s; the source flavors take the sup over probe tuples present.
double weighted_norm(const Kernel& k, Sector s, NormFlavor flavor, double kappa,
                     DistanceCache& dist);
double weighted_norm(const Kernel& k, Sector s, NormFlavor flavor, double kappa);
// Source norm at a fixed probe tuple.
double source_norm_at(const Kernel& k, Sector s, const std::vector<Edge>& x, NormFlavor flavor,
                      double kappa, DistanceCache& dist);

// ---- Gaussian expectations and the RG step -------------------------------------------------

// Two-point function of plain fields (labels with D = 0).
using Covariance = std::function<double(const FieldLabel&, const FieldLabel&)>;

// phi entries from the table (derivative labels are expanded first); xi pairs vanish.
Covariance phi_covariance(const PropagatorTable& g);
// xi entries from the massive table; phi pairs vanish.
Covariance xi_covariance(const PropagatorTable& g);

// Joint cumulant of the even monomials phi(Q_1), ..., phi(Q_s).
double truncated_expectation(const std::vector<std::vector<FieldLabel>>& qs, const Covariance& g,
                             const CylinderGeometry& geom);
double truncated_expectation(const std::vector<std::vector<FieldLabel>>& qs,
                             const PropagatorTable& g);

enum class FieldRole : std::uint8_t {
  external,    // not integrated at this step
  integrated,  // fully integrated (no external copy)
  split        // phi -> phi + psi with psi integrated
};

struct RgStepOptions {
  int s_max = 2;
  FieldRole phi_role = FieldRole::split;
  FieldRole xi_role = FieldRole::integrated;
  std::size_t budget = 50'000'000;  // cap on (tuple, contraction) evaluations
};

struct RgStepResult {
  Kernel kernel;     // W^{(h-1)}(Psi, x) with Psi nonempty, as a canonical plain polynomial
  Kernel constants;  // Psi empty, x nonempty
  double vacuum = 0;  // Psi and x empty (dropped by the normalization)
};

RgStepResult rg_step(const Kernel& w, const Covariance& g, const RgStepOptions& opts = {});

// ---- couplings -----------------------------------------------------------------------------

struct RunningCouplings {
  double nu = 0;
  double zeta = 0;
  double eta = 0;
  int h = 0;
  double residual = 0;  // max coefficient of the part orthogonal to the basis
};

struct VertexRenorm {
  double Z1 = 0;
  double Z2 = 0;
  int h = 0;
};

// sum_z phi_{+,z} phi_{-,z}
Kernel basis_F_nu(const CylinderGeometry& geom);
// sum_omega sum_z omega phi_{omega,z} dbar_1 phi_{omega,z}
Kernel basis_F_zeta(const CylinderGeometry& geom);
// sum_omega sum_z phi_{omega,z} dhat_2 phi_{-omega,z}
Kernel basis_F_eta(const CylinderGeometry& geom);

RunningCouplings extract_running_couplings(const Kernel& local, int h);

// Infinite-volume (2,0,1) source kernels at the probe edges e_1/2 and e_2/2.
struct SourceKernelPair {
  InfiniteVolumeKernel horizontal;
  InfiniteVolumeKernel vertical;
};

VertexRenorm extract_vertex_renorm(const SourceKernelPair& b, int h = 0);

// Free observable kernels (1 - t_j^2) E_x, antisymmetrized, reduced to their phi bilinear part
// (massive fields dropped); the horizontal H-field dressing uses a cylinder of width L_ref.
SourceKernelPair free_source_kernels(const ModelParams& p, int L_ref = 128);
// The same observable kernel on a finite cylinder, all probe edges, xi fields kept.
Kernel free_source_kernel(const CylinderGeometry& geom, const ModelParams& p);
// Initial sourceless potential Z^{-1}(S_c + S_m)(t) - (S_c + S_m)(t*) at lambda = 0.
Kernel initial_sourceless_potential(const CylinderGeometry& geom, const ModelParams& p,
                                    double Z = 1.0);

// ---- serialization -------------------------------------------------------------------------

std::string kernel_to_json(const Kernel& k);
Kernel kernel_from_json(const std::string& s);

}  // namespace cylising
