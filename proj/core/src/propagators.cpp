#include "cylising/propagators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace cylising {

namespace {
constexpr double kPi = std::numbers::pi;
const cplx kI{0.0, 1.0};
}  // namespace

double critical_t2(double t1) { return (1.0 - t1) / (1.0 + t1); }

ModelParams ModelParams::critical(double t1) {
  ModelParams p;
  p.t1 = p.t1_star = t1;
  p.t2 = p.t2_star = critical_t2(t1);
  p.validate();
  return p;
}

ModelParams ModelParams::from_couplings(double beta, double J1, double J2) {
  ModelParams p;
  p.t1 = p.t1_star = std::tanh(beta * J1);
  p.t2 = p.t2_star = std::tanh(beta * J2);
  return p;
}

bool ModelParams::is_critical(double tol) const {
  return std::abs(t1 * t2 + t1 + t2 - 1.0) <= tol;
}

ModelParams ModelParams::dressed() const {
  ModelParams q = *this;
  q.t1 = t1_star;
  q.t2 = t2_star;
  return q;
}

void ModelParams::validate() const {
  auto in01 = [](double t) { return t > 0.0 && t < 1.0; };
  if (!in01(t1) || !in01(t2)) throw std::invalid_argument("params: t1, t2 must lie in (0,1)");
  if (!in01(t1_star) || !in01(t2_star))
    throw std::invalid_argument("params: t1_star, t2_star must lie in (0,1)");
}

double critical_beta(double J1, double J2) {
  if (J1 <= 0 || J2 <= 0) throw std::invalid_argument("critical_beta: couplings must be positive");
  auto f = [&](double b) {
    double a = std::tanh(b * J1), c = std::tanh(b * J2);
    return a * c + a + c - 1.0;
  };
  double lo = 0.0, hi = 1.0;
  while (f(hi) < 0) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

DispersionCoefficients coeff_b_delta_B_D(double k1, double k2, const ModelParams& p) {
  const double mod2 = 1.0 + 2.0 * p.t1 * std::cos(k1) + p.t1 * p.t1;  // |1 + t1 e^{ik1}|^2
  DispersionCoefficients c;
  c.b = (1.0 - p.t1 * p.t1) / mod2;
  c.Delta = 2.0 * p.t1 * std::sin(k1) / mod2;
  c.B = p.t2 * mod2 / (1.0 - p.t1 * p.t1);
  const double s1 = std::sin(0.5 * k1), s2 = std::sin(0.5 * k2);
  c.D = 4.0 * (1.0 - p.t2) * (1.0 - p.t2) * s1 * s1 + 4.0 * (1.0 - p.t1) * (1.0 - p.t1) * s2 * s2;
  return c;
}

std::vector<double> k1_values(int L) {
  std::vector<double> k;
  for (int m = -L / 2 + 1; m <= L / 2; ++m) k.push_back(kPi * (2 * m - 1) / L);
  return k;
}

double quantization_function(double k2, double B, int M) {
  return std::sin(k2 * (M + 1)) - B * std::sin(k2 * M);
}

std::vector<double> solve_k2_roots(double k1, int M, const ModelParams& p) {
  if (M < 1) throw std::invalid_argument("solve_k2_roots: M must be >= 1");
  const double B = coeff_b_delta_B_D(k1, 0.0, p).B;
  const int n = 16 * (M + 1);
  auto f = [&](double k) { return quantization_function(k, B, M); };
  auto sgn = [](double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); };
  // f vanishes at 0 and pi; the one-sided signs there follow from the slopes.
  const double slope0 = (M + 1) - B * M;
  if (slope0 == 0.0) throw NumericalError("solve_k2_roots: degenerate root at k2 = 0");
  std::vector<double> xs{0.0};
  std::vector<int> ss{sgn(slope0)};
  for (int i = 1; i < n; ++i) {
    xs.push_back(kPi * i / n);
    ss.push_back(sgn(f(xs.back())));
  }
  xs.push_back(kPi);
  ss.push_back((M % 2 == 0) ? 1 : -1);
  std::vector<double> pos;
  int prev = ss[0];
  double a = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (ss[i] == 0) {  // grid point is an exact root
      pos.push_back(xs[i]);
      prev = -prev;
      a = xs[i];
      continue;
    }
    if (ss[i] != prev) {
      double lo = a, hi = xs[i];
      for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const int sm = sgn(f(mid));
        if (sm == 0) {
          lo = hi = mid;
          break;
        }
        (sm == prev ? lo : hi) = mid;
      }
      pos.push_back(0.5 * (lo + hi));
    }
    prev = ss[i];
    a = xs[i];
  }
  if (static_cast<int>(pos.size()) != M)
    throw NumericalError("solve_k2_roots: found " + std::to_string(pos.size()) +
                         " roots in (0,pi), expected " + std::to_string(M) +
                         " (k1=" + std::to_string(k1) + "); refine the root grid");
  std::vector<double> all;
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) all.push_back(-*it);
  all.insert(all.end(), pos.begin(), pos.end());
  return all;
}

double normalization_NM(double k1, double k2, int M, const ModelParams& p) {
  const double B = coeff_b_delta_B_D(k1, k2, p).B;
  const double num = B * M * std::cos(k2 * M) - (M + 1) * std::cos(k2 * (M + 1));
  const double den = B * std::cos(k2 * M) - std::cos(k2 * (M + 1));
  return num / den;
}

Block ghat(double k1, double k2, const ModelParams& p) {
  const auto c = coeff_b_delta_B_D(k1, k2, p);
  const double a = 1.0 - p.t1 * p.t1;
  Block g;
  g(0, 0) = -2.0 * kI * p.t1 * std::sin(k1);
  g(0, 1) = -a * (1.0 - c.B * std::exp(-kI * k2));
  g(1, 0) = a * (1.0 - c.B * std::exp(kI * k2));
  g(1, 1) = 2.0 * kI * p.t1 * std::sin(k1);
  return g / c.D;
}

MomentumGrid build_momentum_grid(const CylinderGeometry& geom, const ModelParams& p) {
  MomentumGrid g;
  g.k1 = k1_values(geom.L());
  for (double k1 : g.k1) g.k2.push_back(solve_k2_roots(k1, geom.M(), p));
  return g;
}

std::string to_string(PropagatorVariant v) {
  switch (v) {
    case PropagatorVariant::massive: return "massive";
    case PropagatorVariant::critical: return "critical";
    case PropagatorVariant::critical_direct: return "critical-direct";
    case PropagatorVariant::infinite: return "infinite";
    case PropagatorVariant::bulk: return "bulk";
    case PropagatorVariant::edge: return "edge";
    case PropagatorVariant::scale: return "scale";
    case PropagatorVariant::scale_leq: return "scale-leq";
    case PropagatorVariant::scaling_limit: return "scaling-limit";
    case PropagatorVariant::derivative: return "derivative";
  }
  return "unknown";
}

PropagatorTable::PropagatorTable(CylinderGeometry geom, PropagatorVariant variant, int row_lo,
                                 int row_hi)
    : PropagatorTable(geom, variant, row_lo, row_hi, row_lo, row_hi) {}

PropagatorTable::PropagatorTable(CylinderGeometry geom, PropagatorVariant variant, int rowA_lo,
                                 int rowA_hi, int rowB_lo, int rowB_hi)
    : geom_(geom), variant_(variant), a_lo_(rowA_lo), a_hi_(rowA_hi), b_lo_(rowB_lo),
      b_hi_(rowB_hi) {
  if (a_hi_ < a_lo_ || b_hi_ < b_lo_) throw std::invalid_argument("PropagatorTable: empty row range");
  data_.assign(static_cast<std::size_t>(geom_.L()) * (a_hi_ - a_lo_ + 1) * (b_hi_ - b_lo_ + 1),
               Block::Zero());
}

std::size_t PropagatorTable::index(int delta, int r, int rp) const {
  if (delta < 0 || delta >= geom_.L() || !has_rows(r, rp))
    throw std::out_of_range("PropagatorTable: index out of range");
  const int na = a_hi_ - a_lo_ + 1, nb = b_hi_ - b_lo_ + 1;
  return (static_cast<std::size_t>(delta) * na + (r - a_lo_)) * nb + (rp - b_lo_);
}

Block& PropagatorTable::at(int delta, int r, int rp) { return data_[index(delta, r, rp)]; }
const Block& PropagatorTable::at(int delta, int r, int rp) const {
  return data_[index(delta, r, rp)];
}

Block PropagatorTable::by_delta(int dx, int r, int rp) const {
  const int L = geom_.L();
  int q = dx >= 0 ? dx / L : -((-dx + L - 1) / L);
  int d = dx - q * L;
  Block b = at(d, r, rp);
  return (q & 1) ? Block(-b) : b;
}

Block PropagatorTable::block(Site z, Site zp) const { return by_delta(z.x1 - zp.x1, z.x2, zp.x2); }

cplx PropagatorTable::entry(int omega, Site z, int omega_p, Site zp) const {
  return block(z, zp)(omega_index(omega), omega_index(omega_p));
}

void PropagatorTable::check_compatible(const PropagatorTable& o) const {
  if (!(geom_ == o.geom_) || a_lo_ != o.a_lo_ || a_hi_ != o.a_hi_ || b_lo_ != o.b_lo_ ||
      b_hi_ != o.b_hi_)
    throw std::invalid_argument("PropagatorTable: incompatible tables");
}

PropagatorTable& PropagatorTable::operator+=(const PropagatorTable& o) {
  check_compatible(o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

PropagatorTable& PropagatorTable::operator-=(const PropagatorTable& o) {
  check_compatible(o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

PropagatorTable& PropagatorTable::operator*=(cplx c) {
  for (auto& b : data_) b *= c;
  return *this;
}

double PropagatorTable::max_abs() const {
  double m = 0;
  for (const auto& b : data_) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

double PropagatorTable::max_imag() const {
  double m = 0;
  for (const auto& b : data_) m = std::max(m, b.imag().cwiseAbs().maxCoeff());
  return m;
}

double PropagatorTable::max_abs_diff(const PropagatorTable& o) const {
  if (!(geom_ == o.geom_)) throw std::invalid_argument("PropagatorTable: geometry mismatch");
  const int alo = std::max(a_lo_, o.a_lo_), ahi = std::min(a_hi_, o.a_hi_);
  const int blo = std::max(b_lo_, o.b_lo_), bhi = std::min(b_hi_, o.b_hi_);
  double m = 0;
  for (int d = 0; d < geom_.L(); ++d)
    for (int r = alo; r <= ahi; ++r)
      for (int rp = blo; rp <= bhi; ++rp)
        m = std::max(m, (at(d, r, rp) - o.at(d, r, rp)).cwiseAbs().maxCoeff());
  return m;
}

CriticalFourier::CriticalFourier(CylinderGeometry geom, ModelParams p)
    : geom_(geom), p_(p) {
  p_.validate();
  if (!p_.is_critical(1e-12))
    throw std::invalid_argument("critical propagator: parameters are not on the critical line");
  grid_ = build_momentum_grid(geom_, p_);
  const int M = geom_.M();
  modes_.resize(grid_.k1.size());
  for (std::size_t i = 0; i < grid_.k1.size(); ++i) {
    const double k1 = grid_.k1[i];
    for (double k2 : grid_.k2[i]) {
      Mode m;
      m.k2 = k2;
      m.inv2N = 1.0 / (2.0 * normalization_NM(k1, k2, M, p_));
      m.g = ghat(k1, k2, p_);
      m.gpm_flip = ghat(k1, -k2, p_)(0, 1);
      modes_[i].push_back(m);
    }
  }
}

Block CriticalFourier::row_sum(std::size_t ik1, int r, int rp, const MomentumWeight& w) const {
  const int M = geom_.M();
  const double k1 = grid_.k1[ik1];
  Block acc = Block::Zero();
  for (const auto& m : modes_[ik1]) {
    cplx weight = m.inv2N;
    if (w) {
      cplx ww = w(k1, m.k2);
      if (ww == cplx{}) continue;
      weight *= ww;
    }
    const cplx ed = std::exp(-kI * (m.k2 * (r - rp)));
    const cplx es = std::exp(-kI * (m.k2 * (r + rp)));
    Block refl;
    refl(0, 0) = m.g(0, 0);
    refl(0, 1) = m.gpm_flip;
    refl(1, 0) = m.g(1, 0);
    refl(1, 1) = std::exp(2.0 * kI * (m.k2 * (M + 1))) * m.g(1, 1);
    acc += weight * (ed * m.g - es * refl);
  }
  return acc;
}

Block CriticalFourier::block(Site z, Site zp, const MomentumWeight& w) const {
  const int d = z.x1 - zp.x1;
  Block acc = Block::Zero();
  for (std::size_t i = 0; i < grid_.k1.size(); ++i)
    acc += std::exp(-kI * (grid_.k1[i] * d)) * row_sum(i, z.x2, zp.x2, w);
  return acc / static_cast<double>(geom_.L());
}

PropagatorTable CriticalFourier::table(const MomentumWeight& w, int row_lo, int row_hi,
                                       PropagatorVariant v) const {
  if (row_hi < row_lo) {
    row_lo = 0;
    row_hi = geom_.M() + 1;
  }
  const int L = geom_.L();
  PropagatorTable t(geom_, v, row_lo, row_hi);
  std::vector<std::vector<cplx>> phase(grid_.k1.size(), std::vector<cplx>(L));
  for (std::size_t i = 0; i < grid_.k1.size(); ++i)
    for (int d = 0; d < L; ++d) phase[i][d] = std::exp(-kI * (grid_.k1[i] * d)) / double(L);
  for (int r = row_lo; r <= row_hi; ++r)
    for (int rp = row_lo; rp <= row_hi; ++rp)
      for (std::size_t i = 0; i < grid_.k1.size(); ++i) {
        const Block s = row_sum(i, r, rp, w);
        for (int d = 0; d < L; ++d) t.at(d, r, rp) += phase[i][d] * s;
      }
  return t;
}

std::vector<Block> CriticalFourier::row_pair(int r, int rp, const MomentumWeight& w) const {
  const int L = geom_.L();
  std::vector<Block> out(L, Block::Zero());
  for (std::size_t i = 0; i < grid_.k1.size(); ++i) {
    const Block s = row_sum(i, r, rp, w);
    for (int d = 0; d < L; ++d) out[d] += std::exp(-kI * (grid_.k1[i] * d)) / double(L) * s;
  }
  return out;
}

double CriticalFourier::symmetry_residual() const {
  const int M = geom_.M();
  double res = 0;
  for (std::size_t i = 0; i < grid_.k1.size(); ++i) {
    const double k1 = grid_.k1[i];
    for (double k2 : grid_.k2[i]) {
      const Block g = ghat(k1, k2, p_);
      const Block gm2 = ghat(k1, -k2, p_);
      const Block gm1 = ghat(-k1, k2, p_);
      const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
      auto upd = [&](cplx v) { res = std::max(res, std::abs(v) / scale); };
      upd(g(0, 0) - gm2(0, 0));
      upd(g(0, 0) + gm1(0, 0));
      upd(g(0, 0) - gm1(1, 1));
      upd(g(0, 1) - gm1(0, 1));
      upd(g(0, 1) + gm2(1, 0));
      upd(g(0, 1) + std::exp(-2.0 * kI * (k2 * (M + 1))) * g(1, 0));
    }
  }
  return res;
}

double CriticalFourier::root_residual() const {
  double res = 0;
  for (std::size_t i = 0; i < grid_.k1.size(); ++i) {
    const double B = coeff_b_delta_B_D(grid_.k1[i], 0.0, p_).B;
    for (double k2 : grid_.k2[i])
      res = std::max(res, std::abs(quantization_function(k2, B, geom_.M())));
  }
  return res;
}

PropagatorTable critical_propagator_fourier(const CylinderGeometry& geom, const ModelParams& p,
                                            bool closure_rows) {
  CriticalFourier f(geom, p);
  return closure_rows ? f.table({}, 0, geom.M() + 1) : f.table({}, 1, geom.M());
}

int field_index(const CylinderGeometry& geom, int omega, Site z) {
  return 2 * ((z.x2 - 1) * geom.L() + (z.x1 - 1)) + (omega > 0 ? 0 : 1);
}

namespace {

// Real-space kernel (1/L) sum_k f(k) e^{ik d} for d = 0..L-1.
std::vector<cplx> momentum_kernel(int L, const std::function<cplx(double)>& f) {
  std::vector<cplx> out(L);
  const auto ks = k1_values(L);
  for (int d = 0; d < L; ++d) {
    cplx acc = 0;
    for (double k : ks) acc += f(k) * std::exp(kI * (k * d));
    out[d] = acc / double(L);
  }
  return out;
}

// Adds C_{(a,x,r),(b,y,rb)} = K(y - x) for all x, y and antisymmetrizes into A.
void add_bilinear(CMatrix& A, const CylinderGeometry& geom, int wa, int ra, int wb, int rb,
                  const std::vector<cplx>& K) {
  const int L = geom.L();
  for (int x = 1; x <= L; ++x)
    for (int y = 1; y <= L; ++y) {
      const int i = field_index(geom, wa, {x, ra});
      const int j = field_index(geom, wb, {y, rb});
      // antiperiodic momenta: K(d - L) = -K(d)
      const cplx c = (y >= x) ? K[y - x] : -K[y - x + L];
      A(i, j) += c;
      A(j, i) -= c;
    }
}

}  // namespace

CMatrix critical_action_matrix(const CylinderGeometry& geom, double t1, double t2) {
  ModelParams p;
  p.t1 = t1;
  p.t2 = t2;
  const int L = geom.L(), M = geom.M();
  const int n = 2 * L * M;
  CMatrix A = CMatrix::Zero(n, n);
  auto Kb = momentum_kernel(L, [&](double k) { return -coeff_b_delta_B_D(k, 0, p).b; });
  auto Kt = momentum_kernel(L, [&](double) { return cplx(t2); });
  auto Kpp = momentum_kernel(L, [&](double k) { return -0.5 * kI * coeff_b_delta_B_D(k, 0, p).Delta; });
  auto Kmm = momentum_kernel(L, [&](double k) { return 0.5 * kI * coeff_b_delta_B_D(k, 0, p).Delta; });
  for (int r = 1; r <= M; ++r) {
    add_bilinear(A, geom, +1, r, -1, r, Kb);
    if (r + 1 <= M) add_bilinear(A, geom, +1, r, -1, r + 1, Kt);
    add_bilinear(A, geom, +1, r, +1, r, Kpp);
    add_bilinear(A, geom, -1, r, -1, r, Kmm);
  }
  return A;
}

CMatrix massive_action_matrix(const CylinderGeometry& geom, double t1) {
  const int L = geom.L(), M = geom.M();
  CMatrix A = CMatrix::Zero(2 * L * M, 2 * L * M);
  auto K = momentum_kernel(L, [&](double k) { return 1.0 + t1 * std::exp(-kI * k); });
  for (int r = 1; r <= M; ++r) add_bilinear(A, geom, +1, r, -1, r, K);
  return A;
}

CMatrix critical_direct_matrix(const CylinderGeometry& geom, const ModelParams& p) {
  const int n = 2 * geom.L() * geom.M();
  if (n > 8192) throw std::invalid_argument("critical_propagator_direct: 2LM exceeds 8192");
  CMatrix A = critical_action_matrix(geom, p.t1, p.t2);
  Eigen::PartialPivLU<CMatrix> lu(A);
  const double rc = lu.rcond();
  if (!(rc > 1e-14)) throw NumericalError("critical_propagator_direct: singular action matrix");
  return -lu.inverse();
}

namespace {

PropagatorTable table_from_dense(const CylinderGeometry& geom, const CMatrix& G,
                                 PropagatorVariant v) {
  const int L = geom.L(), M = geom.M();
  PropagatorTable t(geom, v, 1, M);
  for (int d = 0; d < L; ++d)
    for (int r = 1; r <= M; ++r)
      for (int rp = 1; rp <= M; ++rp) {
        Block b;
        for (int w = 0; w < 2; ++w)
          for (int wp = 0; wp < 2; ++wp)
            b(w, wp) = G(field_index(geom, w == 0 ? 1 : -1, {1 + d, r}),
                         field_index(geom, wp == 0 ? 1 : -1, {1, rp}));
        t.at(d, r, rp) = b;
      }
  return t;
}

}  // namespace

PropagatorTable critical_propagator_direct(const CylinderGeometry& geom, const ModelParams& p) {
  return table_from_dense(geom, critical_direct_matrix(geom, p), PropagatorVariant::critical_direct);
}

cplx massive_s(int sign, int y, int L, double t1) {
  cplx acc = 0;
  for (double k : k1_values(L))
    acc += std::exp(-kI * (k * y)) / (1.0 + t1 * std::exp(double(sign) * kI * k));
  return acc / double(L);
}

PropagatorTable massive_propagator(const CylinderGeometry& geom, const ModelParams& p) {
  const int L = geom.L(), M = geom.M();
  PropagatorTable t(geom, PropagatorVariant::massive, 1, M);
  for (int d = 0; d < L; ++d) {
    const cplx sp = massive_s(+1, d, L, p.t1);
    const cplx sm = massive_s(-1, d, L, p.t1);
    for (int r = 1; r <= M; ++r) {
      Block b = Block::Zero();
      b(0, 1) = sp;
      b(1, 0) = -sm;
      t.at(d, r, r) = b;
    }
  }
  return t;
}

CMatrix massive_direct_matrix(const CylinderGeometry& geom, const ModelParams& p) {
  CMatrix A = massive_action_matrix(geom, p.t1);
  return -A.partialPivLu().inverse();
}

double boundary_residual(const PropagatorTable& t) {
  const int L = t.geometry().L(), M = t.geometry().M();
  double res = 0;
  auto upd = [&](cplx v) { res = std::max(res, std::abs(v)); };
  for (int d = 0; d < L; ++d) {
    for (int rp = t.rowB_lo(); rp <= t.rowB_hi(); ++rp) {
      if (t.has_rows(0, rp)) {
        upd(t.at(d, 0, rp)(0, 0));
        upd(t.at(d, 0, rp)(0, 1));
      }
      if (t.has_rows(M + 1, rp)) {
        upd(t.at(d, M + 1, rp)(1, 0));
        upd(t.at(d, M + 1, rp)(1, 1));
      }
    }
    for (int r = t.rowA_lo(); r <= t.rowA_hi(); ++r) {
      if (t.has_rows(r, 0)) {
        upd(t.at(d, r, 0)(0, 0));
        upd(t.at(d, r, 0)(1, 0));
      }
      if (t.has_rows(r, M + 1)) {
        upd(t.at(d, r, M + 1)(0, 1));
        upd(t.at(d, r, M + 1)(1, 1));
      }
    }
  }
  return res;
}

double reflection_residual(const PropagatorTable& t) {
  const int L = t.geometry().L(), M = t.geometry().M();
  double res = 0;
  for (int d = 0; d < L; ++d)
    for (int r = t.rowA_lo(); r <= t.rowA_hi(); ++r)
      for (int rp = t.rowB_lo(); rp <= t.rowB_hi(); ++rp) {
        const Block g = t.at(d, r, rp);
        // horizontal reflection: -w w' G(-d, r, r') = G(d, r, r')
        const Block h = t.by_delta(-d, r, rp);
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            const double s = (a == b) ? -1.0 : 1.0;
            res = std::max(res, std::abs(s * h(a, b) - g(a, b)));
          }
        // vertical reflection: -G_{-w,-w'}(d, M+1-r, M+1-r') = G_{w,w'}(d, r, r')
        if (t.has_rows(M + 1 - r, M + 1 - rp)) {
          const Block v = t.at(d, M + 1 - r, M + 1 - rp);
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) res = std::max(res, std::abs(-v(1 - a, 1 - b) - g(a, b)));
        }
      }
  return res;
}

double antisymmetry_residual(const PropagatorTable& t) {
  const int L = t.geometry().L();
  double res = 0;
  for (int d = 0; d < L; ++d)
    for (int r = t.rowA_lo(); r <= t.rowA_hi(); ++r)
      for (int rp = t.rowB_lo(); rp <= t.rowB_hi(); ++rp) {
        if (!t.has_rows(rp, r)) continue;
        const Block g = t.at(d, r, rp);
        const Block h = t.by_delta(-d, rp, r);
        res = std::max(res, (g + h.transpose()).cwiseAbs().maxCoeff());
      }
  return res;
}

Block infinite_propagator_full(int d1, int d2, const ModelParams& p) {
  using boost::math::quadrature::gauss_kronrod;
  const double t1 = p.t1, t2 = p.t2;
  const double C = 2.0 * (1.0 - t1) * (1.0 - t1);
  const double a1 = 1.0 - t1 * t1;
  // k2 integral in closed form: int dk2/(2pi) e^{-ik2 n}/(A - C cos k2) = r^|n| / sqrt(A^2 - C^2)
  auto integrand = [&](double k1, int comp) -> cplx {
    const double s = std::sin(0.5 * k1);
    const double a = 4.0 * (1.0 - t2) * (1.0 - t2) * s * s;
    const double A = a + C;
    const double root = std::sqrt(a * (a + 2.0 * C));
    const double r = C / (A + root);
    auto I = [&](int n) { return std::pow(r, std::abs(n)) / root; };
    const double B = coeff_b_delta_B_D(k1, 0, p).B;
    cplx v;
    switch (comp) {
      case 0: v = -2.0 * kI * t1 * std::sin(k1) * I(d2); break;
      case 1: v = -a1 * (I(d2) - B * I(d2 + 1)); break;
      case 2: v = a1 * (I(d2) - B * I(d2 - 1)); break;
      default: v = 2.0 * kI * t1 * std::sin(k1) * I(d2); break;
    }
    return v * std::exp(-kI * (k1 * d1)) / (2.0 * kPi);
  };
  Block out;
  for (int comp = 0; comp < 4; ++comp) {
    double parts[2];
    for (int part = 0; part < 2; ++part) {
      auto f = [&](double k) {
        cplx v = integrand(k, comp);
        return part == 0 ? v.real() : v.imag();
      };
      double err = 0;
      double lo = gauss_kronrod<double, 61>::integrate(f, -kPi, 0.0, 20, 1e-14, &err);
      double hi = gauss_kronrod<double, 61>::integrate(f, 0.0, kPi, 20, 1e-14, &err);
      parts[part] = lo + hi;
    }
    out(comp / 2, comp % 2) = cplx(parts[0], parts[1]);
  }
  return out;
}

namespace {

void torus_sum(const MomentumWeight& w, const ModelParams& p, int N, InfiniteKernel& out) {
  const int R1 = out.R1(), R2 = out.R2();
  std::vector<double> ks(N);
  for (int j = 0; j < N; ++j) ks[j] = -kPi + 2.0 * kPi * (j + 0.5) / N;
  std::vector<std::vector<Block>> partial(N, std::vector<Block>(2 * R2 + 1, Block::Zero()));
  std::vector<cplx> e2(2 * R2 + 1);
  for (int j1 = 0; j1 < N; ++j1) {
    for (int j2 = 0; j2 < N; ++j2) {
      const cplx ww = w(ks[j1], ks[j2]);
      if (ww == cplx{}) continue;
      const Block g = ghat(ks[j1], ks[j2], p) * ww;
      const cplx step = std::exp(-kI * ks[j2]);
      cplx e = std::exp(kI * (ks[j2] * R2));
      for (int d = 0; d <= 2 * R2; ++d) {
        partial[j1][d] += e * g;
        e *= step;
      }
    }
  }
  const double norm = 1.0 / (double(N) * double(N));
  for (int d1 = -R1; d1 <= R1; ++d1)
    for (int d2 = -R2; d2 <= R2; ++d2) out.at(d1, d2) = Block::Zero();
  for (int j1 = 0; j1 < N; ++j1) {
    const cplx step = std::exp(-kI * ks[j1]);
    cplx e = std::exp(kI * (ks[j1] * R1));
    for (int d1 = -R1; d1 <= R1; ++d1) {
      for (int d2 = -R2; d2 <= R2; ++d2) out.at(d1, d2) += (e * norm) * partial[j1][d2 + R2];
      e *= step;
    }
  }
}

}  // namespace

InfiniteKernel infinite_propagator_cutoff(const MomentumWeight& w, int R1, int R2,
                                          const ModelParams& p, double tol, int n_start,
                                          int n_max) {
  InfiniteKernel prev(R1, R2);
  torus_sum(w, p, n_start, prev);
  for (int N = 2 * n_start; N <= n_max; N *= 2) {
    InfiniteKernel cur(R1, R2);
    torus_sum(w, p, N, cur);
    double change = 0;
    for (int d1 = -R1; d1 <= R1; ++d1)
      for (int d2 = -R2; d2 <= R2; ++d2)
        change = std::max(change, (cur.at(d1, d2) - prev.at(d1, d2)).cwiseAbs().maxCoeff());
    cur.grid_size = N;
    cur.last_change = change;
    if (change < tol) return cur;
    prev = std::move(cur);
  }
  std::ostringstream msg;
  msg << "infinite_propagator_cutoff: torus doubling did not converge (last change " << prev.last_change
      << " at N = " << prev.grid_size << ", tol " << tol << ")";
  throw NumericalError(msg.str());
}

double g_scal_scalar(double z1, double z2, const ModelParams& p) {
  const double t2 = p.t2_star;
  const double n2 = z1 * z1 + z2 * z2;
  if (n2 == 0.0) throw std::invalid_argument("g_scal: coincident points");
  return -z1 / (2.0 * kPi * t2 * (1.0 - t2) * n2);
}

namespace {

// Alternating horizontal image sums of g1 and g2 at (p1, p2) in closed form (symmetric summation).
std::pair<double, double> image_row(double p1, double p2, double ell1, const ModelParams& p) {
  const double t1 = p.t1_star, t2 = p.t2_star;
  const double c = 1.0 / (2.0 * kPi * t2 * (1.0 - t2));
  const double ellp = ell1 / (1.0 - t2);
  const cplx w(p1 / (1.0 - t2), p2 / (1.0 - t1));
  const cplx s = std::sin(kPi * w / ellp);
  if (std::abs(s) == 0.0) throw std::invalid_argument("scaling_propagator: coincident image points");
  const cplx v = (kPi / ellp) / s;
  return {-c * v.real(), c * v.imag()};
}

}  // namespace

Block scaling_propagator(double z1, double z2, double zp1, double zp2, double ell1, double ell2,
                         const ModelParams& p) {
  if (z1 == zp1 && z2 == zp2) throw std::invalid_argument("scaling_propagator: coincident points");
  if (ell1 <= 0 || ell2 <= 0) throw std::invalid_argument("scaling_propagator: nonpositive size");
  const double d1 = z1 - zp1, d2 = z2 - zp2, s2 = z2 + zp2;
  auto shell = [&](int n2) {
    const auto [a1, a2] = image_row(d1, d2 + 2.0 * n2 * ell2, ell1, p);
    const auto [b1, b2] = image_row(d1, s2 + 2.0 * n2 * ell2, ell1, p);
    const auto [c1, c2] = image_row(d1, s2 + 2.0 * (n2 - 1) * ell2, ell1, p);
    Block m;
    m(0, 0) = a1 - b1;
    m(0, 1) = a2 + b2;
    m(1, 0) = a2 - b2;
    m(1, 1) = -a1 + c1;
    return (n2 % 2 == 0) ? m : Block(-m);
  };
  Block acc = shell(0);
  for (int n = 1; n < 10000; ++n) {
    Block sh = shell(n) + shell(-n);
    acc += sh;
    const double scale = std::max(1e-300, acc.cwiseAbs().maxCoeff());
    if (n >= 2 && sh.cwiseAbs().maxCoeff() < 1e-17 * scale) return acc;
  }
  throw NumericalError("scaling_propagator: image sum did not converge");
}

CylinderGeometry lattice_for_spacing(double ell1, double ell2, double a) {
  const int L = 2 * static_cast<int>(std::floor(ell1 / (2.0 * a)));
  const int M = static_cast<int>(std::floor(ell2 / a));
  return CylinderGeometry(L, M);
}

Site lattice_site_for_point(double z1, double z2, double a, const CylinderGeometry& geom) {
  Site s{static_cast<int>(std::floor(z1 / a)), static_cast<int>(std::floor(z2 / a))};
  if (s.x2 < 1 || s.x2 > geom.M()) throw std::invalid_argument("lattice point outside the cylinder");
  return s;
}

}  // namespace cylising
