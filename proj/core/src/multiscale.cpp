#include "cylising/multiscale.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace cylising {

namespace {

double binom(int n, int k) {
  static constexpr double table[3][3] = {{1, 0, 0}, {1, 1, 0}, {1, 2, 1}};
  return table[n][k];
}

double scale_weight(double E, int h) {
  return ScaleCutoff::chi(std::ldexp(E, -h)) - ScaleCutoff::chi(std::ldexp(E, -h + 1));
}

}  // namespace

int h_star_for(const CylinderGeometry& geom) {
  const unsigned n = static_cast<unsigned>(std::min(geom.L(), geom.M()));
  return -(static_cast<int>(std::bit_width(n)) - 1);
}

ScaleCutoff::ScaleCutoff(const CylinderGeometry& geom, const ModelParams& p)
    : p_(p), h_star_(h_star_for(geom)) {}

double ScaleCutoff::chi(double s) {
  if (s <= 0.5) return 1.0;
  if (s >= 1.0) return 0.0;
  const double u = 2.0 * s - 1.0;
  return 1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

double ScaleCutoff::dispersion(double k1, double k2) const {
  return std::sqrt(coeff_b_delta_B_D(k1, k2, p_).D);
}

double ScaleCutoff::weight(int h, double k1, double k2) const {
  if (h <= h_star_ || h > 0)
    throw std::out_of_range("scale index " + std::to_string(h) + " outside [" +
                            std::to_string(h_star_ + 1) + ", 0]");
  return scale_weight(dispersion(k1, k2), h);
}

double ScaleCutoff::weight_leq(double k1, double k2) const {
  return chi(std::ldexp(dispersion(k1, k2), -h_star_));
}

double ScaleCutoff::weight_smooth(double k1, double k2) const { return chi(dispersion(k1, k2)); }

double ScaleCutoff::weight_complement(double k1, double k2) const {
  return 1.0 - chi(dispersion(k1, k2));
}

PropagatorTable scale_propagator(const CriticalFourier& f, const ScaleCutoff& c, int h) {
  c.weight(h, 0.0, 0.0);  // range check
  auto t = f.table([&](double k1, double k2) { return cplx(c.weight(h, k1, k2)); }, 0,
                   f.geometry().M() + 1, PropagatorVariant::scale);
  t.set_scale(h);
  return t;
}

PropagatorTable scale_propagator_leq(const CriticalFourier& f, const ScaleCutoff& c) {
  auto t = f.table([&](double k1, double k2) { return cplx(c.weight_leq(k1, k2)); }, 0,
                   f.geometry().M() + 1, PropagatorVariant::scale_leq);
  t.set_scale(c.h_star());
  return t;
}

PropagatorTable smooth_sector_propagator(const CriticalFourier& f, const ScaleCutoff& c) {
  return f.table([&](double k1, double k2) { return cplx(c.weight_smooth(k1, k2)); }, 0,
                 f.geometry().M() + 1, PropagatorVariant::critical);
}

InfiniteKernel infinite_scale_propagator(int h, int R1, int R2, const ModelParams& p, double tol) {
  if (h > 0) throw std::out_of_range("infinite_scale_propagator: h must be <= 0");
  auto w = [&](double k1, double k2) {
    return cplx(scale_weight(std::sqrt(coeff_b_delta_B_D(k1, k2, p).D), h));
  };
  return infinite_propagator_cutoff(w, R1, R2, p, tol);
}

BulkEdgeSplit bulk_edge_split(const PropagatorTable& full, const InfiniteKernel& inf) {
  const auto& geom = full.geometry();
  const int L = geom.L();
  PropagatorTable bulk(geom, PropagatorVariant::bulk, full.rowA_lo(), full.rowA_hi(), full.rowB_lo(),
                       full.rowB_hi());
  bulk.set_scale(full.scale());
  for (int d = 0; d < L; ++d) {
    if (2 * d == L) continue;
    const int rep = per_L(d, L);
    const double sign = rep == d ? 1.0 : -1.0;
    if (std::abs(rep) > inf.R1()) throw std::invalid_argument("bulk_edge_split: kernel window too small");
    for (int r = full.rowA_lo(); r <= full.rowA_hi(); ++r)
      for (int rp = full.rowB_lo(); rp <= full.rowB_hi(); ++rp) {
        if (std::abs(r - rp) > inf.R2())
          throw std::invalid_argument("bulk_edge_split: kernel window too small");
        bulk.at(d, r, rp) = sign * inf.at(rep, r - rp);
      }
  }
  PropagatorTable edge = full;
  edge -= bulk;
  return {std::move(bulk), std::move(edge)};
}

BulkEdgeSplit bulk_edge_split(int h, const CriticalFourier& f, const ScaleCutoff& c, double tol) {
  const auto& geom = f.geometry();
  const auto full = scale_propagator(f, c, h);
  const auto inf = infinite_scale_propagator(h, geom.L() / 2, geom.M() + 1, f.params(), tol);
  auto split = bulk_edge_split(full, inf);
  return split;
}

int edge_distance(const CylinderGeometry& geom, int dx, int r, int rp) {
  const int L = geom.L(), M = geom.M();
  const int d1 = std::abs(per_L(dx, L));
  const int s2 = r + rp;
  return std::min(d1 + std::min(s2, 2 * (M + 1) - s2), L - d1 + std::abs(r - rp));
}

PropagatorTable discrete_derivative(const PropagatorTable& t, const std::array<int, 4>& r) {
  for (int v : r)
    if (v < 0 || v > 2) throw std::invalid_argument("discrete_derivative: orders must lie in [0, 2]");
  const int a_hi = t.rowA_hi() - r[1], b_hi = t.rowB_hi() - r[3];
  if (a_hi < t.rowA_lo() || b_hi < t.rowB_lo())
    throw std::invalid_argument("discrete_derivative: row range exhausted");
  PropagatorTable out(t.geometry(), PropagatorVariant::derivative, t.rowA_lo(), a_hi, t.rowB_lo(), b_hi);
  out.set_scale(t.scale());
  const int L = t.geometry().L();
  for (int d = 0; d < L; ++d)
    for (int ra = t.rowA_lo(); ra <= a_hi; ++ra)
      for (int rb = t.rowB_lo(); rb <= b_hi; ++rb) {
        Block acc = Block::Zero();
        for (int j = 0; j <= r[0]; ++j)
          for (int i = 0; i <= r[1]; ++i)
            for (int jp = 0; jp <= r[2]; ++jp)
              for (int ip = 0; ip <= r[3]; ++ip) {
                const double c = binom(r[0], j) * binom(r[1], i) * binom(r[2], jp) * binom(r[3], ip) *
                                 (((r[0] - j + r[1] - i + r[2] - jp + r[3] - ip) & 1) ? -1.0 : 1.0);
                acc += c * t.by_delta(d + j - jp, ra + i, rb + ip);
              }
        out.at(d, ra, rb) = acc;
      }
  return out;
}

ExponentialFit fit_exponential(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_exponential: size mismatch");
  std::vector<double> xs, ls;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (y[i] > 0) {
      xs.push_back(x[i]);
      ls.push_back(std::log(y[i]));
    }
  ExponentialFit fit;
  fit.points = static_cast<int>(xs.size());
  if (fit.points < 2) return fit;
  const double n = fit.points;
  double mx = 0, my = 0;
  for (int i = 0; i < fit.points; ++i) {
    mx += xs[i];
    my += ls[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (int i = 0; i < fit.points; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ls[i] - my);
    syy += (ls[i] - my) * (ls[i] - my);
  }
  if (sxx == 0) return fit;
  const double slope = sxy / sxx;
  fit.rate = -slope;
  fit.log_amplitude = my - slope * mx;
  fit.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

namespace {

DecayProfile envelope(const std::map<double, double>& m) {
  DecayProfile p;
  for (const auto& [d, v] : m) {
    p.distance.push_back(d);
    p.envelope.push_back(v);
  }
  return p;
}

}  // namespace

DecayProfile scale_decay_profile(const PropagatorTable& t, int h) {
  const auto& geom = t.geometry();
  const int L = geom.L();
  std::map<double, double> env;
  for (int d = 0; d < L; ++d)
    for (int r = std::max(1, t.rowA_lo()); r <= std::min(geom.M(), t.rowA_hi()); ++r)
      for (int rp = std::max(1, t.rowB_lo()); rp <= std::min(geom.M(), t.rowB_hi()); ++rp) {
        const double x = std::ldexp(double(std::abs(per_L(d, L)) + std::abs(r - rp)), h);
        double& e = env[x];
        e = std::max(e, t.at(d, r, rp).cwiseAbs().maxCoeff());
      }
  return envelope(env);
}

DecayProfile edge_decay_profile(const PropagatorTable& edge) {
  const auto& geom = edge.geometry();
  std::map<double, double> env;
  for (int d = 0; d < geom.L(); ++d)
    for (int r = std::max(1, edge.rowA_lo()); r <= std::min(geom.M(), edge.rowA_hi()); ++r)
      for (int rp = std::max(1, edge.rowB_lo()); rp <= std::min(geom.M(), edge.rowB_hi()); ++rp) {
        double& e = env[edge_distance(geom, d, r, rp)];
        e = std::max(e, edge.at(d, r, rp).cwiseAbs().maxCoeff());
      }
  return envelope(env);
}

}  // namespace cylising
