#include "cylising/freecorr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "cylising/parallel.hpp"

namespace cylising {

GibbsResult enumerate_gibbs(const CylinderGeometry& geom, double beta, double J1, double J2,
                            const std::vector<Edge>& observables) {
  const int L = geom.L(), M = geom.M();
  const int n = L * M;
  if (n > 24) throw std::invalid_argument("enumerate_gibbs: LM exceeds 24");
  const int m = static_cast<int>(observables.size());
  if (m > 16) throw std::invalid_argument("enumerate_gibbs: too many observables");
  for (const auto& x : observables)
    if (!geom.valid_edge(x)) throw std::invalid_argument("enumerate_gibbs: invalid edge " + to_string(x));

  auto spin_index = [&](Site z) { return (z.x2 - 1) * L + (z.x1 - 1); };
  struct Bond {
    int a, b;
    double J;
  };
  std::vector<Bond> bonds;
  for (const auto& e : geom.edges())
    bonds.push_back({spin_index(e.base), spin_index(geom.other_end(e)),
                     e.dir == Direction::horizontal ? J1 : J2});
  std::vector<std::pair<int, int>> obs;
  for (const auto& x : observables) obs.push_back({spin_index(x.base), spin_index(geom.other_end(x))});

  const std::uint64_t total = 1ULL << n;
  const std::size_t chunks = static_cast<std::size_t>(std::min<std::uint64_t>(64, total));
  const std::size_t width = std::size_t(1) << m;
  std::vector<std::vector<double>> acc(chunks, std::vector<double>(width, 0.0));
  parallel_for(chunks, [&](std::size_t c) {
    const std::uint64_t lo = total * c / chunks, hi = total * (c + 1) / chunks;
    std::vector<double> prod(width);
    std::vector<double> eps(m);
    auto& out = acc[c];
    for (std::uint64_t cfg = lo; cfg < hi; ++cfg) {
      auto spin = [&](int i) { return ((cfg >> i) & 1ULL) ? 1.0 : -1.0; };
      double e = 0;
      for (const auto& b : bonds) e += b.J * spin(b.a) * spin(b.b);
      const double w = std::exp(beta * e);
      for (int i = 0; i < m; ++i) eps[i] = spin(obs[i].first) * spin(obs[i].second);
      prod[0] = w;
      for (std::size_t mask = 1; mask < width; ++mask) {
        const int low = __builtin_ctzll(mask);
        prod[mask] = prod[mask & (mask - 1)] * eps[low];
      }
      for (std::size_t mask = 0; mask < width; ++mask) out[mask] += prod[mask];
    }
  });
  // pairwise tree reduction in fixed order
  for (std::size_t stride = 1; stride < chunks; stride *= 2)
    for (std::size_t i = 0; i + stride < chunks; i += 2 * stride)
      for (std::size_t k = 0; k < width; ++k) acc[i][k] += acc[i + stride][k];

  GibbsResult r;
  r.Z = acc[0][0];
  for (std::size_t mask = 1; mask < width; ++mask) r.moments[static_cast<std::uint32_t>(mask)] = acc[0][mask] / r.Z;
  for (int i = 0; i < m; ++i) r.means.push_back(r.moments[1u << i].real());
  return r;
}

double PartitionFunctionParts::value() const {
  return std::exp(log_prefactor) * (pf_critical * pf_massive).real();
}

PartitionFunctionParts partition_function_parts(const CylinderGeometry& geom, double beta,
                                                double J1, double J2) {
  const int L = geom.L(), M = geom.M();
  if (2 * L * M > 4096) throw std::invalid_argument("partition_function_free: dimension cap exceeded");
  const double t1 = std::tanh(beta * J1), t2 = std::tanh(beta * J2);
  PartitionFunctionParts parts;
  parts.log_prefactor = L * M * std::log(2.0) + L * M * std::log(std::cosh(beta * J1)) +
                        L * (M - 1) * std::log(std::cosh(beta * J2));
  parts.pf_critical = pfaffian(critical_action_matrix(geom, t1, t2));
  parts.pf_massive = pfaffian(massive_action_matrix(geom, t1));
  return parts;
}

double partition_function_free(const CylinderGeometry& geom, double beta, double J1, double J2) {
  return partition_function_parts(geom, beta, J1, J2).value();
}

cplx massive_pfaffian_blockwise(const CylinderGeometry& geom, double t1) {
  cplx row = 1.0;
  for (double k : k1_values(geom.L())) row *= 1.0 + t1 * std::exp(cplx(0.0, -k));
  return std::pow(row, geom.M());
}

FreeEnergyCorrelator::FreeEnergyCorrelator(const CylinderGeometry& geom, const ModelParams& p)
    : geom_(geom), p_(p) {
  p_.validate();
  if (p_.is_critical(1e-12)) {
    fourier_ = std::make_unique<CriticalFourier>(geom_, p_);
  } else {
    phi_ = std::make_unique<PropagatorTable>(critical_propagator_direct(geom_, p_));
  }
  xi_ = std::make_unique<PropagatorTable>(massive_propagator(geom_, p_));
  for (int y = 0; y < geom_.L(); ++y) {
    s_plus_.push_back(massive_s(+1, y, geom_.L(), p_.t1));
    s_minus_.push_back(massive_s(-1, y, geom_.L(), p_.t1));
  }
}

std::array<LinearField, 2> FreeEnergyCorrelator::bilinear_fields(const Edge& x) const {
  if (!geom_.valid_edge(x)) throw std::invalid_argument("energy observable: invalid edge " + to_string(x));
  const int L = geom_.L();
  if (x.dir == Direction::vertical) {
    return {LinearField{{{FieldKind::phi, +1, x.base}, 1.0}},
            LinearField{{{FieldKind::phi, -1, {x.base.x1, x.base.x2 + 1}}, 1.0}}};
  }
  // H_{omega,z} with z1 possibly L+1 (antiperiodic continuation)
  auto H = [&](int omega, int z1, int r) {
    LinearField f;
    int parity = 0;
    Site s = geom_.wrap(z1, r, &parity);
    f.push_back({{FieldKind::xi, omega, s}, parity ? -1.0 : 1.0});
    const auto& tab = omega > 0 ? s_plus_ : s_minus_;
    for (int y = 1; y <= L; ++y) {
      int d = z1 - y;
      double sign = 1.0;
      while (d < 0) {
        d += L;
        sign = -sign;
      }
      while (d >= L) {
        d -= L;
        sign = -sign;
      }
      const double sv = sign * tab[d].real();
      if (sv == 0.0) continue;
      f.push_back({{FieldKind::phi, +1, {y, r}}, sv});
      f.push_back({{FieldKind::phi, -1, {y, r}}, -omega * sv});
    }
    return f;
  };
  return {H(+1, x.base.x1, x.base.x2), H(-1, x.base.x1 + 1, x.base.x2)};
}

Block FreeEnergyCorrelator::phi_block(Site z, Site zp) const {
  if (phi_) return phi_->block(z, zp);
  const int L = geom_.L();
  std::lock_guard lock(rows_mu_);
  auto it = rows_.find({z.x2, zp.x2});
  if (it == rows_.end()) it = rows_.emplace(std::pair{z.x2, zp.x2}, fourier_->row_pair(z.x2, zp.x2)).first;
  int d = z.x1 - zp.x1;
  double sign = 1.0;
  if (d < 0) {
    d += L;
    sign = -1.0;
  }
  return sign * it->second[d];
}

double FreeEnergyCorrelator::field_pair(const ObservableField& a, const ObservableField& b) const {
  if (a.kind != b.kind) return 0.0;
  if (a.kind == FieldKind::xi) return xi_->entry(a.omega, a.site, b.omega, b.site).real();
  return phi_block(a.site, b.site)(omega_index(a.omega), omega_index(b.omega)).real();
}

double FreeEnergyCorrelator::covariance(const LinearField& a, const LinearField& b) const {
  double acc = 0;
  for (const auto& fa : a)
    for (const auto& fb : b) acc += fa.coeff * fb.coeff * field_pair(fa.field, fb.field);
  return acc;
}

void FreeEnergyCorrelator::check_edges(const std::vector<Edge>& xs) const {
  auto sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("energy correlation: repeated edges");
  for (const auto& x : xs)
    if (!geom_.valid_edge(x)) throw std::invalid_argument("energy correlation: invalid edge " + to_string(x));
}

double FreeEnergyCorrelator::t_of(const Edge& x) const {
  return x.dir == Direction::horizontal ? p_.t1 : p_.t2;
}

double FreeEnergyCorrelator::bilinear_moment(const std::vector<Edge>& xs) const {
  check_edges(xs);
  std::vector<LinearField> fields;
  double pref = 1.0;
  for (const auto& x : xs) {
    auto f = bilinear_fields(x);
    fields.push_back(std::move(f[0]));
    fields.push_back(std::move(f[1]));
    pref *= 1.0 - t_of(x) * t_of(x);
  }
  const int n = static_cast<int>(fields.size());
  SkewMatrix G(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) G.set(i, j, covariance(fields[i], fields[j]));
  return pref * pfaffian(G).real();
}

SubsetMap FreeEnergyCorrelator::energy_moments(const std::vector<Edge>& xs) const {
  check_edges(xs);
  const int m = static_cast<int>(xs.size());
  const std::uint32_t full = (1u << m) - 1;
  std::vector<double> bil(full + 1, 1.0);
  for (std::uint32_t T = 1; T <= full; ++T) {
    std::vector<Edge> sub;
    for (int i = 0; i < m; ++i)
      if (T >> i & 1u) sub.push_back(xs[i]);
    bil[T] = bilinear_moment(sub);
  }
  SubsetMap out;
  for (std::uint32_t S = 1; S <= full; ++S) {
    double acc = 0;
    // T ranges over subsets of S carrying the bilinear part; the rest contribute t
    for (std::uint32_t T = S;; T = (T - 1) & S) {
      double w = bil[T];
      for (int i = 0; i < m; ++i)
        if ((S >> i & 1u) && !(T >> i & 1u)) w *= t_of(xs[i]);
      acc += w;
      if (T == 0) break;
    }
    out[S] = acc;
  }
  return out;
}

double FreeEnergyCorrelator::energy_moment(const std::vector<Edge>& xs) const {
  if (xs.empty()) return 1.0;
  return energy_moments(xs).at((1u << xs.size()) - 1).real();
}

double FreeEnergyCorrelator::energy_cumulant(const std::vector<Edge>& xs) const {
  if (xs.empty()) throw std::invalid_argument("energy_cumulant: empty edge tuple");
  const int m = static_cast<int>(xs.size());
  return moments_to_cumulants(energy_moments(xs), m).at((1u << m) - 1).real();
}

double scaling_correlation(const std::vector<std::array<double, 2>>& points,
                           const std::vector<Direction>& labels, double ell1, double ell2,
                           const ModelParams& p) {
  const int m = static_cast<int>(points.size());
  if (m < 1 || labels.size() != points.size())
    throw std::invalid_argument("scaling_correlation: points and labels must match");
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (points[i] == points[j]) throw std::invalid_argument("scaling_correlation: coincident points");
  CMatrix full = CMatrix::Zero(2 * m, 2 * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const Block g = scaling_propagator(points[i][0], points[i][1], points[j][0], points[j][1],
                                         ell1, ell2, p);
      full.block<2, 2>(2 * i, 2 * j) = g;
    }
  const double t2 = p.t2_star;
  double pref = 1.0;
  for (auto l : labels) pref *= (l == Direction::horizontal) ? 2.0 * t2 : 1.0 - t2 * t2;
  return pref * pfaffian(SkewMatrix::from_dense(full, 1e-9)).real();
}

}  // namespace cylising
