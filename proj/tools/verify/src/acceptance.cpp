#include "cylising/verify/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <stdexcept>

#include "cylising/freecorr.hpp"
#include "cylising/kernelcalc.hpp"
#include "cylising/lattice.hpp"
#include "cylising/multiscale.hpp"
#include "cylising/propagators.hpp"
#include "cylising/skewlinalg.hpp"
#include "cylising/verify/oracles.hpp"
#include "cylising/verify/random_kernels.hpp"

namespace cylising::verify {

namespace {

using Clock = std::chrono::steady_clock;

Measurement upper(std::string name, double value, double limit) {
  return {std::move(name), value, limit, false};
}

Measurement lower(std::string name, double value, double limit) {
  return {std::move(name), value, limit, true};
}

CriterionResult criterion(int id, std::string title) {
  CriterionResult r;
  r.id = id;
  r.title = std::move(title);
  return r;
}

double relative(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

double distance(const Kernel& a, const Kernel& b) {
  return polynomial_distance(expand_to_plain_fields(a), expand_to_plain_fields(b));
}

double distance_to_zero(const Kernel& a) { return polynomial_distance(expand_to_plain_fields(a), {}); }

// ---- 1: Pfaffians ---------------------------------------------------------------------------

CriterionResult pfaffian_correctness(const AcceptanceOptions& opts) {
  auto r = criterion(1, "Pfaffian correctness");
  r.time_limit = 5.0;
  std::mt19937_64 rng(opts.seed + 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto random_skew = [&](int n) {
    SkewMatrix a(n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) a.set(i, j, cplx(u(rng), u(rng)));
    return a;
  };
  double det_err = 0, brute_err = 0;
  for (int n = 4; n <= 40; n += 2)
    for (int k = 0; k < 100; ++k) {
      const SkewMatrix a = random_skew(n);
      const cplx pf = pfaffian(a);
      det_err = std::max(det_err, relative(pf * pf, determinant(a.dense())));
    }
  for (int n = 2; n <= 12; n += 2)
    for (int k = 0; k < 100; ++k) {
      const SkewMatrix a = random_skew(n);
      brute_err = std::max(brute_err, relative(pfaffian(a), pfaffian_bruteforce(a)));
    }
  r.measurements.push_back(upper("max relative |Pf^2 - det|, n = 4..40", det_err, 1e-10));
  r.measurements.push_back(upper("max relative |Pf - brute force|, n <= 12", brute_err, 1e-12));
  return r;
}

// ---- 2: partition function ------------------------------------------------------------------

CriterionResult partition_function_identity(const AcceptanceOptions&) {
  auto r = criterion(2, "Partition-function identity");
  r.time_limit = 10.0;
  const double bc = critical_beta(1.0, 1.0);
  double worst = 0;
  for (auto [L, M] : std::vector<std::pair<int, int>>{{2, 1}, {4, 2}, {4, 3}})
    for (double beta : {0.3, bc, 0.7}) {
      const CylinderGeometry geom(L, M);
      const double enumerated = enumerate_gibbs(geom, beta, 1.0, 1.0, {}).Z;
      const double pf = partition_function_free(geom, beta, 1.0, 1.0);
      worst = std::max(worst, std::abs(pf - enumerated) / enumerated);
    }
  r.measurements.push_back(upper("max relative |Z_pf - Z_enum|", worst, 1e-10));
  return r;
}

// ---- 3 / 4: critical propagator -------------------------------------------------------------

struct PropagatorSweep {
  double oracle = 0, boundary = 0, symmetry = 0;
};

PropagatorSweep propagator_sweep() {
  PropagatorSweep s;
  for (int L : {4, 8})
    for (int M : {3, 5})
      for (double t1 : {0.3, 0.5, std::sqrt(2.0) - 1.0}) {
        const CylinderGeometry geom(L, M);
        const auto p = ModelParams::critical(t1);
        const CriticalFourier f(geom, p);
        const auto fourier = f.table({}, 0, M + 1);
        s.oracle = std::max(s.oracle, fourier.max_abs_diff(critical_propagator_direct(geom, p)));
        s.boundary = std::max(s.boundary, boundary_residual(fourier));
        s.symmetry = std::max(s.symmetry, f.symmetry_residual());
      }
  return s;
}

CriterionResult propagator_oracle(const AcceptanceOptions&) {
  auto r = criterion(3, "Propagator oracle equivalence");
  r.time_limit = 30.0;
  r.measurements.push_back(upper("max |g_fourier - (-A_c^-1)|", propagator_sweep().oracle, 1e-10));
  return r;
}

CriterionResult boundary_and_symmetry(const AcceptanceOptions&) {
  auto r = criterion(4, "Boundary cancellations and momentum symmetries");
  const auto s = propagator_sweep();
  r.measurements.push_back(upper("max boundary-row residual", s.boundary, 1e-12));
  r.measurements.push_back(upper("max momentum-symmetry residual", s.symmetry, 1e-12));
  return r;
}

// ---- 5: free energy correlations ------------------------------------------------------------

CriterionResult free_energy_correlations(const AcceptanceOptions& opts) {
  auto r = criterion(5, "Free energy correlations");
  r.time_limit = 60.0;
  const CylinderGeometry geom(4, 3);
  const double bc = critical_beta(1.0, 1.0);
  const auto p = ModelParams::from_couplings(bc, 1.0, 1.0);
  const FreeEnergyCorrelator corr(geom, p);
  const auto edges = geom.edges();

  double worst[3][2] = {};  // [horizontal, vertical, mixed][m - 2]
  auto check = [&](const std::vector<Edge>& xs) {
    const int m = static_cast<int>(xs.size());
    const auto e = enumerate_gibbs(geom, bc, 1.0, 1.0, xs);
    const double exact = moments_to_cumulants(e.moments, m).at((1u << m) - 1).real();
    const double err = std::abs(corr.energy_cumulant(xs) - exact);
    const auto nh = std::ranges::count_if(xs, [](const Edge& x) { return x.dir == Direction::horizontal; });
    const int kind = nh == m ? 0 : nh == 0 ? 1 : 2;
    worst[kind][m - 2] = std::max(worst[kind][m - 2], err);
  };
  for (std::size_t i = 0; i < edges.size(); ++i)
    for (std::size_t j = i + 1; j < edges.size(); ++j) check({edges[i], edges[j]});
  std::mt19937_64 rng(opts.seed + 5);
  std::set<std::vector<std::size_t>> triples;
  std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
  while (triples.size() < 90) {
    std::vector<std::size_t> t{pick(rng), pick(rng), pick(rng)};
    std::ranges::sort(t);
    if (t[0] == t[1] || t[1] == t[2]) continue;
    triples.insert(t);
  }
  for (const auto& t : triples) check({edges[t[0]], edges[t[1]], edges[t[2]]});
  const char* kinds[] = {"horizontal", "vertical", "mixed"};
  for (int m = 2; m <= 3; ++m)
    for (int k = 0; k < 3; ++k)
      r.measurements.push_back(upper("m=" + std::to_string(m) + " " + kinds[k] + " |pfaffian - enumeration|",
                                     worst[k][m - 2], 1e-9));
  r.notes.push_back("all 190 edge pairs and 90 random edge triples on L=4, M=3 at beta_c");
  return r;
}

// ---- 6: scaling limit -----------------------------------------------------------------------

CriterionResult scaling_limit(const AcceptanceOptions&) {
  auto r = criterion(6, "Scaling limit");
  r.time_limit = 300.0;
  const auto p = ModelParams::critical(0.5);
  const std::array<double, 2> z{0.25, 0.375}, w{0.75, 0.625};
  const Block limit = scaling_propagator(z[0], z[1], w[0], w[1], 1.0, 1.0, p);
  const std::vector<std::array<double, 2>> pts{z, w};
  double prop_drop = INFINITY, corr_drop[2] = {INFINITY, INFINITY};
  double prop_prev = INFINITY, corr_prev[2] = {INFINITY, INFINITY};
  double prop_last = 0, corr_last[2] = {};
  for (int n = 0; n <= 4; ++n) {
    const double a = std::ldexp(1.0, -4 - n);
    const CylinderGeometry geom = lattice_for_spacing(1.0, 1.0, a);
    const CriticalFourier f(geom, p);
    const Site s = lattice_site_for_point(z[0], z[1], a, geom);
    const Site sp = lattice_site_for_point(w[0], w[1], a, geom);
    const double perr = (f.block(s, sp) / a - limit).cwiseAbs().maxCoeff();
    if (n > 0) prop_drop = std::min(prop_drop, prop_prev - perr);
    prop_prev = prop_last = perr;
    const FreeEnergyCorrelator corr(geom, p);
    for (int d = 0; d < 2; ++d) {
      const Direction dir = d ? Direction::horizontal : Direction::vertical;
      const double lim = scaling_correlation(pts, {dir, dir}, 1.0, 1.0, p);
      const double cerr = std::abs(corr.energy_cumulant({Edge{s, dir}, Edge{sp, dir}}) / (a * a) - lim);
      if (n > 0) corr_drop[d] = std::min(corr_drop[d], corr_prev[d] - cerr);
      corr_prev[d] = corr_last[d] = cerr;
    }
  }
  // Strict decrease: every successive drop is positive.
  r.measurements.push_back(lower("propagator error: smallest drop per halving", prop_drop, 1e-300));
  r.measurements.push_back(lower("vertical energy pair: smallest drop per halving", corr_drop[0], 1e-300));
  r.measurements.push_back(lower("horizontal energy pair: smallest drop per halving", corr_drop[1], 1e-300));
  r.notes.push_back("points (1/4,3/8), (3/4,5/8); a = 1/16 .. 1/256; final errors: propagator " +
                    std::to_string(prop_last) + ", vertical " + std::to_string(corr_last[0]) +
                    ", horizontal " + std::to_string(corr_last[1]));
  return r;
}

// ---- 7: multiscale --------------------------------------------------------------------------

CriterionResult multiscale_reconstruction(const AcceptanceOptions&) {
  auto r = criterion(7, "Multiscale reconstruction");
  const CylinderGeometry geom(32, 32);
  const auto p = ModelParams::critical(std::sqrt(2.0) - 1.0);
  const CriticalFourier f(geom, p);
  const ScaleCutoff c(geom, p);
  const auto smooth = smooth_sector_propagator(f, c);
  auto acc = scale_propagator_leq(f, c);
  double bres = boundary_residual(acc);
  for (int h = c.h_star() + 1; h <= 0; ++h) {
    const auto t = scale_propagator(f, c, h);
    bres = std::max(bres, boundary_residual(t));
    acc += t;
  }
  r.measurements.push_back(upper("max |sum of scales - smooth sector|", acc.max_abs_diff(smooth), 1e-12));
  r.measurements.push_back(upper("max scale-wise boundary residual", bres, 1e-12));
  for (int h : {0, -1}) {
    const auto full = scale_propagator(f, c, h);
    const auto split = bulk_edge_split(h, f, c, 1e-10);
    auto sum = split.bulk;
    sum += split.edge;
    r.measurements.push_back(upper("h=" + std::to_string(h) + " max |bulk + edge - full|",
                                   sum.max_abs_diff(full), 1e-15 * std::max(1.0, full.max_abs())));
    const auto prof = edge_decay_profile(split.edge);
    const auto fit = fit_exponential(prof.distance, prof.envelope);
    r.measurements.push_back(lower("h=" + std::to_string(h) + " edge decay rate", fit.rate, 1e-300));
    r.measurements.push_back(lower("h=" + std::to_string(h) + " edge fit R^2", fit.r2, 0.9));
  }
  return r;
}

// ---- 8: cancellations and decompositions ----------------------------------------------------

CriterionResult kernel_cancellations(const AcceptanceOptions& opts) {
  auto r = criterion(8, "Kernel-calculus cancellations");
  r.measurements = cancellation_battery({12, 5, 50, opts.seed + 8});
  r.notes.push_back("L = 12, M = 5; bulk-family inputs have horizontal diameter <= L/3");
  return r;
}

// ---- 9: norm inequalities -------------------------------------------------------------------

CriterionResult norm_inequalities(const AcceptanceOptions& opts) {
  auto r = criterion(9, "Norm-inequality battery");
  r.measurements = norm_battery({12, 5, 50, opts.seed + 9});
  r.notes.push_back("kappa = 0.1, eps = eps' = 0.05; 50 kernels per inequality on L = 12, M = 5");
  return r;
}

// ---- 10: vertex constants -------------------------------------------------------------------

CriterionResult vertex_constants(const AcceptanceOptions&) {
  auto r = criterion(10, "Free-theory vertex constants");
  for (double t1 : {0.3, 0.5}) {
    const auto p = ModelParams::critical(t1);
    const auto z = extract_vertex_renorm(free_source_kernels(p));
    const std::string tag = "t1*=" + std::string(t1 == 0.3 ? "0.3" : "0.5");
    r.measurements.push_back(upper(tag + " |Z1 - 2 t2*|", std::abs(z.Z1 - 2 * p.t2_star), 1e-12));
    r.measurements.push_back(upper(tag + " |Z2 - (1 - t2*^2)|", std::abs(z.Z2 - (1 - p.t2_star * p.t2_star)), 1e-12));
  }
  return r;
}

// ---- 11: RG step ----------------------------------------------------------------------------

// Largest change of the expanded kernel under a unit translation, theta_1 and theta_2.
double symmetry_defect(const Kernel& k) {
  const auto base = expand_to_plain_fields(k);
  double worst = 0;
  for (const Kernel& t : {translate(k, 1), reflect_horizontal(k), reflect_vertical(k)})
    worst = std::max(worst, polynomial_distance(expand_to_plain_fields(t), base));
  return worst;
}

CriterionResult rg_step_sanity(const AcceptanceOptions& opts) {
  auto r = criterion(11, "RG-step sanity");
  const auto p = ModelParams::critical(0.5);

  {
    const CylinderGeometry geom(4, 3);
    const CriticalFourier f(geom, p);
    const ScaleCutoff c(geom, p);
    const auto g = phi_covariance(scale_propagator(f, c, 0));
    RgStepOptions o;
    o.s_max = 2;
    const Kernel source = free_source_kernel(geom, p);
    const auto out = rg_step(initial_sourceless_potential(geom, p, 1.0) + source, g, o);
    r.measurements.push_back(upper("lambda=0, Z=1: max sourceless output", out.kernel.sourceless().max_abs(), 1e-12));
    const auto control = rg_step(initial_sourceless_potential(geom, p, 0.9) + source, g, o);
    r.notes.push_back("control Z=0.9: max sourceless output " + std::to_string(control.kernel.sourceless().max_abs()));
  }

  {
    const CylinderGeometry geom(6, 4);
    const CriticalFourier f(geom, p);
    const ScaleCutoff c(geom, p);
    const auto g = phi_covariance(scale_propagator(f, c, 0));
    KernelSampler rs(opts.seed + 11);
    double worst = 0;
    for (int i = 0; i < 5; ++i) {
      const auto v = rs.symmetric_kernel(geom, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}}, false, 2);
      worst = std::max(worst, symmetry_defect(rg_step(v, g).kernel));
    }
    r.measurements.push_back(upper("symmetry defect of rg_step output (translation, theta_1, theta_2)", worst, 1e-12));
  }

  {
    const CylinderGeometry geom(8, 4);
    const CriticalFourier f(geom, p);
    const ScaleCutoff c(geom, p);
    const auto g = phi_covariance(scale_propagator(f, c, 0));
    std::mt19937_64 rng(opts.seed + 111);
    auto rnd = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto monomial = [&] {
      std::vector<FieldLabel> q;
      while (q.size() < 4) {
        FieldLabel l{rnd(0, 1) ? 1 : -1, {0, 0}, {rnd(3, 5), rnd(1, 4)}};
        if (std::ranges::find(q, l) == q.end()) q.push_back(l);
      }
      return q;
    };
    double e2 = 0, e3 = 0;
    for (int i = 0; i < 20; ++i) {
      const auto a = monomial(), b = monomial(), cq = monomial();
      const double s2 = truncated_expectation({a, b}, g, geom);
      e2 = std::max(e2, std::abs(s2 - (gaussian_moment({a, b}, g) - gaussian_moment({a}, g) * gaussian_moment({b}, g))));
      const double s3 = truncated_expectation({a, b, cq}, g, geom);
      e3 = std::max(e3, std::abs(s3 - cumulant_by_finite_differences({a, b, cq}, g)));
    }
    r.measurements.push_back(upper("s=2 |E^T - (E(AB) - E(A)E(B))|", e2, 1e-9));
    r.measurements.push_back(upper("s=3 |E^T - finite-difference oracle|", e3, 1e-9));
  }
  return r;
}

using CriterionFn = CriterionResult (*)(const AcceptanceOptions&);

constexpr CriterionFn criteria[acceptance_criterion_count] = {
    pfaffian_correctness,     partition_function_identity, propagator_oracle,
    boundary_and_symmetry,    free_energy_correlations,    scaling_limit,
    multiscale_reconstruction, kernel_cancellations,        norm_inequalities,
    vertex_constants,         rg_step_sanity};

}  // namespace

std::vector<Measurement> cancellation_battery(const BatteryOptions& b) {
  const CylinderGeometry geom(b.L, b.M);
  KernelSampler rs(b.seed);
  const int many = 4 * b.samples;
  double pauli = 0, edge = 0, dec_b = 0, dec_e = 0, dec_s = 0;
  for (int i = 0; i < many; ++i)
    pauli = std::max(pauli, distance_to_zero(L_bulk(rs.symmetric_kernel(geom, {{4, 0, 0}}, false, 3))));
  for (int i = 0; i < many; ++i) {
    const auto v = rs.local_kernel(geom, {{2, 0, 0}, {2, 1, 0}, {2, 2, 0}, {4, 0, 0}, {4, 1, 0}}, true, 4);
    edge = std::max(edge, distance_to_zero(L_edge(v)));
  }
  for (int i = 0; i < b.samples; ++i) {
    const auto v = rs.symmetric_kernel(geom, {{2, 0, 0}, {2, 1, 0}, {2, 2, 0}, {4, 0, 0}, {4, 1, 0}}, false, 3);
    dec_b = std::max(dec_b, distance(v, L_bulk(v) + R_bulk(v)));
    const auto e = rs.symmetric_kernel(geom, {{2, 0, 0}, {2, 1, 0}, {2, 2, 0}, {4, 0, 0}}, true, 3);
    dec_e = std::max(dec_e, distance(e, L_edge(e) + R_edge(e)));
    const auto s = rs.source_kernel(geom, 3);
    dec_s = std::max(dec_s, distance(s, L_source(s) + R_source(s)));
  }
  const std::string nm = ", " + std::to_string(many) + " kernels", n = ", " + std::to_string(b.samples) + " kernels";
  return {upper("L_B(V_{4,0}) residual" + nm, pauli, 1e-14), upper("L_E V residual" + nm, edge, 1e-14),
          upper("V - L_B V - R_B V" + n, dec_b, 1e-12), upper("V - L_E V - R_E V" + n, dec_e, 1e-12),
          upper("B - L_B B - R_B B" + n + " (source)", dec_s, 1e-12)};
}

std::vector<Measurement> norm_battery(const BatteryOptions& b) {
  const CylinderGeometry geom(b.L, b.M);
  const double kappa = 0.1, eps = 0.05;
  KernelSampler rs(b.seed);
  DistanceCache dc(geom);
  // Excess (lhs - rhs) / rhs; the inequality holds when the worst excess is <= 0.  Kernels
  // without a lower-order part saturate the bounds, where summation order leaves ~1e-16.
  const double round_off = 1e-12;
  auto excess = [](double lhs, double rhs) { return rhs > 0 ? (lhs - rhs) / rhs : (lhs > 0 ? 1.0 : -1.0); };
  double ok0 = -INFINITY, ok = -INFINITY, re = -INFINITY, rbb = -INFINITY;
  auto nb = [&](const Kernel& k, Sector s, double kp) { return weighted_norm(k, s, NormFlavor::bulk, kp, dc); };
  auto ne = [&](const Kernel& k, Sector s, double kp) { return weighted_norm(k, s, NormFlavor::edge, kp, dc); };
  for (int i = 0; i < b.samples; ++i) {
    const auto v = rs.symmetric_kernel(geom, {{2, 0, 0}, {2, 1, 0}, {2, 2, 0}}, false, 4);
    const auto rv = R_bulk(v);
    ok0 = std::max(ok0, excess(nb(rv, {2, 2, 0}, kappa),
                               nb(v, {2, 2, 0}, kappa) + nb(v, {2, 1, 0}, kappa + eps) / eps +
                                   nb(v, {2, 0, 0}, kappa + 2 * eps) / (eps * eps)));
  }
  for (int i = 0; i < b.samples; ++i) {
    const auto v = rs.symmetric_kernel(geom, {{4, 0, 0}, {4, 1, 0}}, false, 4);
    ok = std::max(ok, excess(nb(R_bulk(v), {4, 1, 0}, kappa),
                             nb(v, {4, 1, 0}, kappa) + 3 * nb(v, {4, 0, 0}, kappa + eps) / eps));
  }
  for (int i = 0; i < b.samples; ++i) {
    const auto v = rs.symmetric_kernel(geom, {{2, 0, 0}, {2, 1, 0}}, true, 4);
    re = std::max(re, excess(ne(R_edge(v), {2, 1, 0}, kappa),
                             ne(v, {2, 1, 0}, kappa) + 2 * ne(v, {2, 0, 0}, kappa + eps) / eps));
  }
  for (int i = 0; i < b.samples; ++i) {
    const auto src = rs.source_kernel(geom, 3);
    const auto rb = R_source(src);
    std::set<std::vector<Edge>> probes;
    for (const auto& [key, v] : src.coefficients()) probes.insert(key.edges);
    for (const auto& x : probes) {
      auto ns = [&](const Kernel& k, Sector s, double kp) {
        return source_norm_at(k, s, x, NormFlavor::source_bulk, kp, dc);
      };
      rbb = std::max(rbb, excess(ns(rb, {2, 1, 1}, kappa),
                                 ns(src, {2, 1, 1}, kappa) + 2 * ns(src, {2, 0, 1}, kappa + eps) / eps));
    }
  }
  return {upper("R_B (2,2) bound: worst relative excess", ok0, round_off),
          upper("R_B (4,1) bound: worst relative excess", ok, round_off),
          upper("R_E (2,1) bound: worst relative excess", re, round_off),
          upper("R_B source (2,1,1) bound: worst relative excess", rbb, round_off)};
}

bool CriterionResult::passed() const {
  if (measurements.empty()) return false;
  if (time_limit > 0 && seconds > time_limit) return false;
  return std::ranges::all_of(measurements, [](const Measurement& m) { return m.ok(); });
}

CriterionResult run_criterion(int id, const AcceptanceOptions& opts) {
  if (id < 1 || id > acceptance_criterion_count)
    throw std::out_of_range("run_criterion: id must lie in [1, " +
                            std::to_string(acceptance_criterion_count) + "]");
  const auto t0 = Clock::now();
  CriterionResult r;
  try {
    r = criteria[id - 1](opts);
  } catch (const std::exception& e) {
    r.id = id;
    r.title = "criterion " + std::to_string(id);
    r.measurements.clear();
    r.notes.push_back(std::string("exception: ") + e.what());
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= acceptance_criterion_count; ++id) out.push_back(run_criterion(id, opts));
  return out;
}

std::string summary_line(const CriterionResult& r) {
  std::string s = (r.passed() ? "[PASS] " : "[FAIL] ") + std::to_string(r.id) + " " + r.title + ":";
  char buf[64];
  for (std::size_t i = 0; i < r.measurements.size(); ++i) {
    const auto& m = r.measurements[i];
    std::snprintf(buf, sizeof buf, " %.3e %s %.1e", m.value, m.at_least ? ">=" : "<=", m.limit);
    s += (i ? ";" : "") + std::string(" ") + m.name + buf + (m.ok() ? "" : " (violated)");
  }
  if (r.measurements.empty())
    for (const auto& n : r.notes) s += " " + n;
  std::snprintf(buf, sizeof buf, " (%.1f s", r.seconds);
  s += buf;
  if (r.time_limit > 0) {
    std::snprintf(buf, sizeof buf, ", limit %.0f s", r.time_limit);
    s += buf;
  }
  return s + ")";
}

}  // namespace cylising::verify
