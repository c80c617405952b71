#include "commands.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <regex>
#include <set>
#include <sstream>

#include "cylising/freecorr.hpp"
#include "cylising/kernelcalc.hpp"
#include "cylising/lattice.hpp"
#include "cylising/multiscale.hpp"
#include "cylising/propagators.hpp"
#include "cylising/skewlinalg.hpp"
#include "cylising/verify/acceptance.hpp"

namespace cylising::cli {

namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

class Errors {
 public:
  void add(std::string field, const std::string& problem) { f_.push_back(std::move(field) + ": " + problem); }
  void raise() const {
    if (!f_.empty()) throw ConfigError(f_);
  }

 private:
  std::vector<std::string> f_;
};

// ---- configuration ------------------------------------------------------------------------

struct Setup {
  CylinderGeometry geom{2, 1};
  ModelParams p;
  double beta = 1, J1 = 1, J2 = 1;
  bool critical = false;
};

bool in01(double t) { return t > 0 && t < 1; }

Setup resolve(const RunConfig& c, int L0, int M0, bool need_critical, Errors& e) {
  Setup s;
  const int L = c.L.value_or(L0), M = c.M.value_or(M0);
  if (L < 2 || L % 2 != 0) e.add("L", "must be even and >= 2 (got " + std::to_string(L) + ")");
  if (M < 1) e.add("M", "must be >= 1 (got " + std::to_string(M) + ")");
  if (L >= 2 && L % 2 == 0 && M >= 1) s.geom = CylinderGeometry(L, M);

  if (c.beta) {
    if (c.t1 || c.t2) e.add("beta", "give either --beta/--J1/--J2 or --t1/--t2, not both");
    if (c.critical) e.add("critical", "derives t2 from t1; use --t1 instead of --beta");
    s.beta = *c.beta;
    s.J1 = c.J1.value_or(1.0);
    s.J2 = c.J2.value_or(1.0);
    if (!(s.beta > 0)) e.add("beta", "must be positive");
    if (!(s.J1 > 0)) e.add("J1", "must be positive");
    if (!(s.J2 > 0)) e.add("J2", "must be positive");
    if (s.beta > 0 && s.J1 > 0 && s.J2 > 0) s.p = ModelParams::from_couplings(s.beta, s.J1, s.J2);
  } else {
    if (c.J1 || c.J2) e.add("J1", "couplings need --beta");
    const double t1 = c.t1.value_or(0.5);
    if (!in01(t1)) e.add("t1", "must lie in (0,1)");
    if (c.critical && c.t2) e.add("t2", "conflicts with --critical (t2 is derived from t1)");
    const double t2 = c.t2 ? *c.t2 : (in01(t1) ? critical_t2(t1) : 0.5);
    if (!in01(t2)) e.add("t2", "must lie in (0,1)");
    s.p = c.t2 ? ModelParams{t1, t2, t1, t2, 0.0} : ModelParams::critical(in01(t1) ? t1 : 0.5);
    s.beta = 1.0;
    s.J1 = std::atanh(s.p.t1);
    s.J2 = std::atanh(s.p.t2);
  }
  s.critical = s.p.is_critical(1e-12);
  if (s.critical) s.p = ModelParams::critical(s.p.t1);
  if (need_critical && !s.critical) e.add(c.beta ? "beta" : "t2", "command '" + c.command + "' requires the critical line");
  return s;
}

json base_config(const RunConfig& c, const Setup& s) {
  json j;
  j["command"] = c.command;
  j["L"] = s.geom.L();
  j["M"] = s.geom.M();
  j["t1"] = s.p.t1;
  j["t2"] = s.p.t2;
  j["critical"] = s.critical;
  if (c.beta) j["couplings"] = {{"beta", s.beta}, {"J1", s.J1}, {"J2", s.J2}};
  return j;
}

json cplx_json(cplx z) { return json::array({z.real(), z.imag()}); }

std::string edge_string(const Edge& x) {
  return "(" + std::to_string(x.base.x1) + "," + std::to_string(x.base.x2) + "," +
         (x.dir == Direction::horizontal ? "h" : "v") + ")";
}

// "(a,b),(c,d)" -> groups; each group is the list of its comma-separated entries.
std::optional<std::vector<std::vector<std::string>>> parse_tuples(const std::string& text) {
  static const std::regex item(R"(\s*\(([^()]*)\)\s*(,|$))");
  std::vector<std::vector<std::string>> out;
  auto it = text.cbegin();
  std::smatch m;
  while (it != text.cend()) {
    if (!std::regex_search(it, text.cend(), m, item, std::regex_constants::match_continuous)) return std::nullopt;
    std::vector<std::string> parts;
    std::stringstream ss(m[1].str());
    for (std::string p; std::getline(ss, p, ',');) {
      p.erase(0, p.find_first_not_of(" \t"));
      p.erase(p.find_last_not_of(" \t") + 1);
      parts.push_back(p);
    }
    out.push_back(parts);
    it = m[0].second;
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<int> parse_int(const std::string& s) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<std::vector<int>> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) {
    p.erase(0, p.find_first_not_of(" \t"));
    p.erase(p.find_last_not_of(" \t") + 1);
    const auto v = parse_int(p);
    if (!v) return std::nullopt;
    out.push_back(*v);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

Check upper(std::string name, double value, double limit) { return {std::move(name), value, limit, false}; }

json measurements_json(const std::vector<verify::Measurement>& ms) {
  json a = json::array();
  for (const auto& m : ms)
    a.push_back({{"name", m.name}, {"value", m.value}, {"limit", m.limit},
                 {"bound", m.at_least ? "lower" : "upper"}, {"ok", m.ok()}});
  return a;
}

void add_checks(CommandOutput& o, const std::vector<verify::Measurement>& ms) {
  for (const auto& m : ms) o.checks.push_back({m.name, m.value, m.limit, m.at_least});
}

// ---- propagator ---------------------------------------------------------------------------

Table propagator_table(const PropagatorTable& t) {
  Table tab;
  tab.columns = {"dx", "r", "rp", "re_pp", "im_pp", "re_pm", "im_pm", "re_mp", "im_mp", "re_mm", "im_mm"};
  const int L = t.geometry().L();
  for (int dx = 0; dx < L; ++dx)
    for (int r = t.rowA_lo(); r <= t.rowA_hi(); ++r)
      for (int rp = t.rowB_lo(); rp <= t.rowB_hi(); ++rp) {
        const Block b = t.by_delta(dx, r, rp);
        std::vector<json> row{dx, r, rp};
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            row.push_back(b(i, j).real());
            row.push_back(b(i, j).imag());
          }
        tab.rows.push_back(std::move(row));
      }
  return tab;
}

CommandOutput cmd_propagator(const RunConfig& c) {
  Errors e;
  const Setup s = resolve(c, 8, 5, false, e);
  if (c.field != "phi" && c.field != "xi") e.add("field", "must be 'phi' or 'xi'");
  e.raise();
  CommandOutput o;
  o.config = base_config(c, s);
  o.config["field"] = c.field;
  const double tol = c.tol.value_or(1e-10);
  o.tolerances = {{"oracle", tol}};
  const auto& g = s.geom;

  if (c.field == "xi") {
    const auto t = massive_propagator(g, s.p);
    o.results["variant"] = "massive";
    o.results["residuals"] = {{"antisymmetry", antisymmetry_residual(t)}};
    o.table = propagator_table(t);
    if (c.verify) {
      const CMatrix d = massive_direct_matrix(g, s.p);
      double worst = 0;
      for (int r = t.rowA_lo(); r <= t.rowA_hi(); ++r)
        for (int rp = t.rowB_lo(); rp <= t.rowB_hi(); ++rp)
          for (int x = 1; x <= g.L(); ++x)
            for (int w : {1, -1})
              for (int wp : {1, -1}) {
                const Site z{1, r}, zp{x, rp};
                worst = std::max(worst, std::abs(t.entry(w, z, wp, zp) -
                                                 d(field_index(g, w, z), field_index(g, wp, zp))));
              }
      o.checks.push_back(upper("max |g_xi - (-A_m^-1)|", worst, tol));
    }
  } else if (s.critical) {
    const CriticalFourier f(g, s.p);
    const auto t = f.table({}, 0, g.M() + 1);
    o.results["variant"] = "critical";
    o.results["residuals"] = {{"boundary", boundary_residual(t)},
                              {"reflection", reflection_residual(t)},
                              {"antisymmetry", antisymmetry_residual(t)},
                              {"momentum_symmetry", f.symmetry_residual()},
                              {"quantization", f.root_residual()}};
    o.table = propagator_table(t);
    if (c.verify)
      o.checks.push_back(upper("max |g_fourier - (-A_c^-1)|", t.max_abs_diff(critical_propagator_direct(g, s.p)), tol));
  } else {
    const auto t = critical_propagator_direct(g, s.p);
    o.results["variant"] = "critical_direct";
    o.results["residuals"] = {{"antisymmetry", antisymmetry_residual(t)}};
    o.table = propagator_table(t);
    // Off the critical line the dense inverse is the only representation; check its structure.
    if (c.verify) o.checks.push_back(upper("antisymmetry residual of -A_c^-1", antisymmetry_residual(t), tol));
  }
  return o;
}

// ---- partition ----------------------------------------------------------------------------

CommandOutput cmd_partition(const RunConfig& c) {
  Errors e;
  const Setup s = resolve(c, 4, 2, false, e);
  if (c.verify && s.geom.site_count() > 24) e.add("verify", "enumeration needs L*M <= 24");
  e.raise();
  CommandOutput o;
  o.config = base_config(c, s);
  const double tol = c.tol.value_or(1e-10);
  o.tolerances = {{"relative", tol}};
  const auto parts = partition_function_parts(s.geom, s.beta, s.J1, s.J2);
  const double logZ = parts.log_prefactor + std::log(std::abs(parts.pf_critical * parts.pf_massive));
  const double Z = parts.value();
  o.results = {{"Z", Z},
               {"log_Z", logZ},
               {"log_prefactor", parts.log_prefactor},
               {"pf_critical", cplx_json(parts.pf_critical)},
               {"pf_massive", cplx_json(parts.pf_massive)}};
  if (c.verify) {
    const double Zenum = enumerate_gibbs(s.geom, s.beta, s.J1, s.J2, {}).Z;
    o.checks.push_back(upper("relative |Z_pfaffian - Z_enumeration|", std::abs(Z - Zenum) / Zenum, tol));
  }
  return o;
}

// ---- correlate ----------------------------------------------------------------------------

std::vector<Edge> parse_edges(const std::string& text, const CylinderGeometry& g, Errors& e) {
  std::vector<Edge> xs;
  const auto tuples = parse_tuples(text);
  if (!tuples) {
    e.add("edges", "expected a list like \"(1,1,h),(3,2,v)\"");
    return xs;
  }
  for (const auto& t : *tuples) {
    const auto x1 = t.size() == 3 ? parse_int(t[0]) : std::nullopt;
    const auto x2 = t.size() == 3 ? parse_int(t[1]) : std::nullopt;
    if (!x1 || !x2 || (t[2] != "h" && t[2] != "v")) {
      e.add("edges", "entry (" + join(t, ",") + ") must read (x1,x2,h|v)");
      continue;
    }
    const Edge x{{*x1, *x2}, t[2] == "h" ? Direction::horizontal : Direction::vertical};
    if (!g.valid_edge(x)) {
      e.add("edges", edge_string(x) + " is not an edge of the " + std::to_string(g.L()) + " x " +
                         std::to_string(g.M()) + " cylinder");
      continue;
    }
    if (std::ranges::find(xs, x) != xs.end()) {
      e.add("edges", edge_string(x) + " is repeated");
      continue;
    }
    xs.push_back(x);
  }
  if (xs.size() > 12) e.add("edges", "at most 12 edges");
  return xs;
}

std::string subset_label(std::uint32_t S, int m) {
  std::vector<std::string> v;
  for (int i = 0; i < m; ++i)
    if (S >> i & 1u) v.push_back(std::to_string(i));
  return join(v, "+");
}

CommandOutput cmd_correlate(const RunConfig& c) {
  Errors e;
  const Setup s = resolve(c, 4, 3, false, e);
  if (c.edges.empty()) e.add("edges", "required, e.g. --edges \"(1,1,h),(3,2,v)\"");
  const auto xs = c.edges.empty() ? std::vector<Edge>{} : parse_edges(c.edges, s.geom, e);
  if (c.verify && s.geom.site_count() > 24) e.add("verify", "enumeration needs L*M <= 24");
  e.raise();
  CommandOutput o;
  o.config = base_config(c, s);
  json names = json::array();
  for (const auto& x : xs) names.push_back(edge_string(x));
  o.config["edges"] = names;
  const double tol = c.tol.value_or(1e-9);
  o.tolerances = {{"absolute", tol}};

  const int m = static_cast<int>(xs.size());
  const FreeEnergyCorrelator corr(s.geom, s.p);
  const SubsetMap moments = corr.energy_moments(xs);
  const SubsetMap cumulants = moments_to_cumulants(moments, m);
  Table tab;
  tab.columns = {"subset", "moment", "cumulant"};
  for (const auto& [S, v] : moments)
    tab.rows.push_back({subset_label(S, m), v.real(), cumulants.at(S).real()});
  const std::uint32_t full = (1u << m) - 1;
  o.results = {{"edges", names}, {"moment", moments.at(full).real()}, {"cumulant", cumulants.at(full).real()}};
  o.table = std::move(tab);
  if (c.verify) {
    const auto gibbs = enumerate_gibbs(s.geom, s.beta, s.J1, s.J2, xs);
    const SubsetMap gc = moments_to_cumulants(gibbs.moments, m);
    double dm = 0, dc = 0;
    for (const auto& [S, v] : moments) {
      dm = std::max(dm, std::abs(v - gibbs.moments.at(S)));
      dc = std::max(dc, std::abs(cumulants.at(S) - gc.at(S)));
    }
    o.checks.push_back(upper("max |moment - enumeration| over subsets", dm, tol));
    o.checks.push_back(upper("max |cumulant - enumeration| over subsets", dc, tol));
  }
  return o;
}

// ---- scaling ------------------------------------------------------------------------------

CommandOutput cmd_scaling(const RunConfig& c) {
  Errors e;
  Setup s = resolve(c, 2, 1, true, e);
  if (c.L || c.M) e.add("L", "the lattice follows from --a0 and --halvings; do not give L or M");
  if (!(c.ell1 > 0)) e.add("ell1", "must be positive");
  if (!(c.ell2 > 0)) e.add("ell2", "must be positive");
  if (!(c.a0 > 0) || c.a0 > std::min(c.ell1, c.ell2) / 2) e.add("a0", "must lie in (0, min(ell1, ell2)/2]");
  if (c.halvings < 1 || c.halvings > 8) e.add("halvings", "must lie in [1, 8]");
  std::vector<std::array<double, 2>> pts;
  if (const auto tuples = parse_tuples(c.points)) {
    for (const auto& t : *tuples) {
      const auto a = t.size() == 2 ? parse_double(t[0]) : std::nullopt;
      const auto b = t.size() == 2 ? parse_double(t[1]) : std::nullopt;
      if (!a || !b) {
        e.add("points", "entry (" + join(t, ",") + ") must read (z1,z2)");
        continue;
      }
      if (!(*a > 0 && *a < c.ell1 && *b > 0 && *b < c.ell2))
        e.add("points", "(" + join(t, ",") + ") lies outside (0,ell1) x (0,ell2)");
      pts.push_back({*a, *b});
    }
    if (pts.size() != 2) e.add("points", "exactly two points are required");
    else if (pts[0] == pts[1]) e.add("points", "points coincide");
  } else {
    e.add("points", "expected a list like \"(0.3,0.4),(0.7,0.6)\"");
  }
  e.raise();

  CommandOutput o;
  o.config = base_config(c, s);
  o.config.erase("L");
  o.config.erase("M");
  o.config["points"] = {{pts[0][0], pts[0][1]}, {pts[1][0], pts[1][1]}};
  o.config["a0"] = c.a0;
  o.config["halvings"] = c.halvings;
  o.config["ell"] = {c.ell1, c.ell2};
  o.tolerances = {{"propagator_error", "strictly decreasing"}};

  const auto& p = s.p;
  const Block limit = scaling_propagator(pts[0][0], pts[0][1], pts[1][0], pts[1][1], c.ell1, c.ell2, p);
  double elim[2];
  for (int d = 0; d < 2; ++d) {
    const Direction dir = d ? Direction::horizontal : Direction::vertical;
    elim[d] = scaling_correlation(pts, {dir, dir}, c.ell1, c.ell2, p);
  }
  Table tab;
  tab.columns = {"a", "L", "M", "propagator_error", "vertical_energy_error", "horizontal_energy_error"};
  std::vector<double> errs[3];
  for (int n = 0; n <= c.halvings; ++n) {
    const double a = std::ldexp(c.a0, -n);
    const CylinderGeometry g = lattice_for_spacing(c.ell1, c.ell2, a);
    const Site z = lattice_site_for_point(pts[0][0], pts[0][1], a, g);
    const Site w = lattice_site_for_point(pts[1][0], pts[1][1], a, g);
    if (z == w) {
      Errors late;
      late.add("points", "both points fall on one lattice site at a = " + std::to_string(a) + "; decrease --a0");
      late.raise();
    }
    const CriticalFourier f(g, p);
    std::vector<json> row{a, g.L(), g.M()};
    errs[0].push_back((f.block(z, w) / a - limit).cwiseAbs().maxCoeff());
    row.push_back(errs[0].back());
    const FreeEnergyCorrelator corr(g, p);
    for (int d = 0; d < 2; ++d) {
      const Direction dir = d ? Direction::horizontal : Direction::vertical;
      const Edge x{z, dir}, y{w, dir};
      if (g.valid_edge(x) && g.valid_edge(y)) {
        errs[1 + d].push_back(std::abs(corr.energy_cumulant({x, y}) / (a * a) - elim[d]));
        row.push_back(errs[1 + d].back());
      } else {
        row.push_back(nullptr);
      }
    }
    tab.rows.push_back(std::move(row));
  }
  auto smallest_drop = [](const std::vector<double>& v) {
    double d = INFINITY;
    for (std::size_t i = 1; i < v.size(); ++i) d = std::min(d, v[i - 1] - v[i]);
    return d;
  };
  json block = json::array();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) block.push_back(cplx_json(limit(i, j)));
  o.results["limit"] = {{"propagator", block}, {"vertical_energy", elim[0]}, {"horizontal_energy", elim[1]}};
  const char* names[3] = {"propagator_error", "vertical_energy_error", "horizontal_energy_error"};
  for (int k = 0; k < 3; ++k)
    o.results["strictly_decreasing"][names[k]] =
        errs[k].size() == std::size_t(c.halvings + 1) && smallest_drop(errs[k]) > 0;
  o.table = std::move(tab);
  if (c.verify) o.checks.push_back({"propagator error: smallest drop per halving", smallest_drop(errs[0]), DBL_MIN, true});
  return o;
}

// ---- multiscale ---------------------------------------------------------------------------

json fit_json(const DecayProfile& prof) {
  if (prof.distance.size() < 2) return nullptr;
  const auto f = fit_exponential(prof.distance, prof.envelope);
  return {{"rate", f.rate}, {"log_amplitude", f.log_amplitude}, {"r2", f.r2}, {"points", f.points}};
}

CommandOutput cmd_multiscale(const RunConfig& c) {
  Errors e;
  const Setup s = resolve(c, 32, 32, true, e);
  if (!(c.inf_tol > 0)) e.add("inf-tol", "must be positive");
  const auto hs = parse_int_list(c.scales);
  if (!hs) e.add("scales", "expected a comma-separated list of integers");
  e.raise();
  const int hstar = h_star_for(s.geom);
  for (int h : *hs)
    if (h < hstar + 1 || h > 0)
      e.add("scales", std::to_string(h) + " outside [h*+1, 0] = [" + std::to_string(hstar + 1) + ", 0]");
  e.raise();

  CommandOutput o;
  o.config = base_config(c, s);
  o.config["scales"] = *hs;
  const double tol = c.tol.value_or(1e-12);
  o.tolerances = {{"reconstruction", tol}, {"boundary", tol}, {"split_relative", 1e-15}, {"infinite_kernel", c.inf_tol}};

  const CriticalFourier f(s.geom, s.p);
  const ScaleCutoff cut(s.geom, s.p);
  const auto smooth = smooth_sector_propagator(f, cut);
  auto acc = scale_propagator_leq(f, cut);
  double bres = boundary_residual(acc);
  json scales = json::array();
  for (int h = hstar + 1; h <= 0; ++h) {
    const auto t = scale_propagator(f, cut, h);
    const double mx = t.max_abs(), br = boundary_residual(t);
    bres = std::max(bres, br);
    acc += t;
    scales.push_back({{"h", h}, {"max_abs", mx}, {"scaled_max_abs", std::ldexp(mx, -h)},
                      {"empty", mx == 0.0}, {"boundary_residual", br}});
  }
  const double rec = acc.max_abs_diff(smooth);
  o.results["h_star"] = hstar;
  o.results["scales"] = scales;
  o.results["reconstruction_residual"] = rec;

  Table tab;
  tab.columns = {"h", "profile", "distance", "envelope"};
  json splits = json::array();
  std::vector<Check> checks{upper("max |sum of scales - smooth sector|", rec, tol),
                            upper("max scale-wise boundary residual", bres, tol)};
  for (int h : *hs) {
    const auto full = scale_propagator(f, cut, h);
    const auto split = bulk_edge_split(h, f, cut, c.inf_tol);
    auto sum = split.bulk;
    sum += split.edge;
    const double sres = sum.max_abs_diff(full);
    const auto scale_prof = scale_decay_profile(full, h);
    const auto edge_prof = edge_decay_profile(split.edge);
    for (const auto& [name, prof] : {std::pair{"scale", &scale_prof}, std::pair{"edge", &edge_prof}})
      for (std::size_t i = 0; i < prof->distance.size(); ++i)
        tab.rows.push_back({h, name, prof->distance[i], prof->envelope[i]});
    splits.push_back({{"h", h},
                      {"split_residual", sres},
                      {"edge_max_abs", split.edge.max_abs()},
                      {"bulk_max_abs", split.bulk.max_abs()},
                      {"scale_fit", fit_json(scale_prof)},
                      {"edge_fit", fit_json(edge_prof)}});
    checks.push_back(upper("h=" + std::to_string(h) + " max |bulk + edge - full|", sres,
                           1e-15 * std::max(1.0, full.max_abs())));
  }
  o.results["splits"] = splits;
  o.table = std::move(tab);
  if (c.verify) o.checks = std::move(checks);
  return o;
}

// ---- kernels ------------------------------------------------------------------------------

double symmetry_defect(const Kernel& k) {
  const auto base = expand_to_plain_fields(k);
  double worst = 0;
  for (const Kernel& t : {translate(k, 1), reflect_horizontal(k), reflect_vertical(k)})
    worst = std::max(worst, polynomial_distance(expand_to_plain_fields(t), base));
  return worst;
}

CommandOutput cmd_kernels(const RunConfig& c) {
  Errors e;
  const Setup s = resolve(c, 12, 5, true, e);
  static const std::set<std::string> demos{"cancellations", "norms", "rg", "all"};
  if (!demos.contains(c.demo)) e.add("demo", "must be one of cancellations, norms, rg, all");
  if (c.samples < 1 || c.samples > 1000) e.add("samples", "must lie in [1, 1000]");
  if (c.s_max < 1 || c.s_max > 3) e.add("s-max", "must lie in [1, 3]");
  if (!(c.Z > 0)) e.add("Z", "must be positive");
  if (c.tol) e.add("tol", "not used by 'kernels' (every measurement carries its own bound)");
  if (c.rg_L < 2 || c.rg_L % 2 != 0) e.add("rg-L", "must be even and >= 2");
  if (c.rg_M < 1) e.add("rg-M", "must be >= 1");
  e.raise();

  CommandOutput o;
  o.config = base_config(c, s);
  o.config["demo"] = c.demo;
  o.config["samples"] = c.samples;
  o.config["seed"] = c.seed;
  o.tolerances = json::object();
  const bool all = c.demo == "all";
  const verify::BatteryOptions b{s.geom.L(), s.geom.M(), c.samples, c.seed};

  if (all || c.demo == "cancellations") {
    const auto ms = verify::cancellation_battery(b);
    o.results["cancellations"] = measurements_json(ms);
    add_checks(o, ms);
  }
  if (all || c.demo == "norms") {
    const auto ms = verify::norm_battery(b);
    o.results["norms"] = measurements_json(ms);
    add_checks(o, ms);
  }
  if (all || c.demo == "rg") {
    o.config["Z"] = c.Z;
    o.config["s_max"] = c.s_max;
    o.config["rg_geometry"] = {c.rg_L, c.rg_M};
    const CylinderGeometry rg(c.rg_L, c.rg_M);
    const CriticalFourier f(rg, s.p);
    const ScaleCutoff cut(rg, s.p);
    const auto g = phi_covariance(scale_propagator(f, cut, 0));
    RgStepOptions opts;
    opts.s_max = c.s_max;
    const auto out = rg_step(initial_sourceless_potential(rg, s.p, c.Z) + free_source_kernel(rg, s.p), g, opts);
    const double sourceless = out.kernel.sourceless().max_abs(), defect = symmetry_defect(out.kernel);
    o.results["rg"] = {{"covariance", "scale 0"},
                       {"max_sourceless_output", sourceless},
                       {"max_source_output", out.kernel.source().max_abs()},
                       {"terms", out.kernel.coefficients().size()},
                       {"vacuum", out.vacuum},
                       {"symmetry_defect", defect}};
    o.tolerances["rg"] = 1e-12;
    if (c.Z == 1.0) o.checks.push_back(upper("lambda=0, Z=1: max sourceless output", sourceless, 1e-12));
    o.checks.push_back(upper("rg_step output symmetry defect", defect, 1e-12));
  }
  return o;
}

// ---- selftest -----------------------------------------------------------------------------

CommandOutput cmd_selftest(const RunConfig& c) {
  Errors e;
  std::vector<int> ids;
  if (c.criteria.empty()) {
    for (int i = 1; i <= verify::acceptance_criterion_count; ++i) ids.push_back(i);
  } else if (const auto v = parse_int_list(c.criteria)) {
    for (int i : *v)
      if (i < 1 || i > verify::acceptance_criterion_count)
        e.add("criteria", std::to_string(i) + " outside [1, " + std::to_string(verify::acceptance_criterion_count) + "]");
    ids = *v;
  } else {
    e.add("criteria", "expected a comma-separated list of criterion numbers");
  }
  if (c.tol) e.add("tol", "acceptance bounds are fixed");
  if (c.L || c.M || c.t1 || c.t2 || c.beta) e.add("L", "selftest runs fixed geometries and parameters");
  e.raise();

  CommandOutput o;
  o.config = {{"command", c.command}, {"criteria", ids}, {"seed", c.seed}};
  o.tolerances = "per criterion";
  o.always_checked = true;
  json list = json::array();
  int failed = 0;
  for (int id : ids) {
    const auto r = verify::run_criterion(id, {c.seed});
    o.log.push_back(verify::summary_line(r));
    failed += !r.passed();
    list.push_back({{"id", r.id},
                    {"title", r.title},
                    {"passed", r.passed()},
                    {"time_limit_seconds", r.time_limit},
                    {"measurements", measurements_json(r.measurements)},
                    {"notes", r.notes}});
    o.checks.push_back({"criterion " + std::to_string(id) + " passed", r.passed() ? 1.0 : 0.0, 1.0, true});
  }
  o.results = {{"criteria", list}, {"failed", failed}, {"total", ids.size()}};
  return o;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> f)
    : std::invalid_argument("invalid configuration: " + join(f, "; ")), fields(std::move(f)) {}

CommandOutput run_command(const RunConfig& cfg) {
  static const std::set<std::string> tabular{"propagator", "correlate", "scaling", "multiscale"};
  Errors e;
  if (cfg.format != "json" && cfg.format != "csv") e.add("format", "must be 'json' or 'csv'");
  if (cfg.format == "csv" && !tabular.contains(cfg.command))
    e.add("format", "csv is available for propagator, correlate, scaling and multiscale");
  e.raise();
  if (cfg.command == "propagator") return cmd_propagator(cfg);
  if (cfg.command == "partition") return cmd_partition(cfg);
  if (cfg.command == "correlate") return cmd_correlate(cfg);
  if (cfg.command == "scaling") return cmd_scaling(cfg);
  if (cfg.command == "multiscale") return cmd_multiscale(cfg);
  if (cfg.command == "kernels") return cmd_kernels(cfg);
  if (cfg.command == "selftest") return cmd_selftest(cfg);
  throw ConfigError({"command: unknown command '" + cfg.command + "'"});
}

std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string render(const RunConfig& cfg, const CommandOutput& out) {
  const json meta = {{"program", "cylising"},
                     {"version", program_version},
                     {"command", cfg.command},
                     {"config", out.config},
                     {"config_hash", config_hash(out.config)},
                     {"tolerances", out.tolerances}};
  if (cfg.format == "csv") {
    std::string s = "# program: cylising\n# version: " + std::string(program_version) +
                    "\n# command: " + cfg.command + "\n# config: " + out.config.dump() +
                    "\n# config_hash: " + config_hash(out.config) + "\n# tolerances: " + out.tolerances.dump() + "\n";
    s += join(out.table->columns, ",") + "\n";
    for (const auto& row : out.table->rows) {
      std::vector<std::string> cells;
      for (const auto& v : row) cells.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      s += join(cells, ",") + "\n";
    }
    return s;
  }
  json doc = {{"metadata", meta}, {"results", out.results}};
  if (out.table) {
    json rows = json::array();
    for (const auto& r : out.table->rows) rows.push_back(r);
    doc["results"]["table"] = {{"columns", out.table->columns}, {"rows", rows}};
  }
  if (cfg.verify || out.always_checked) {
    json checks = json::array();
    bool ok = true;
    for (const auto& c : out.checks) {
      checks.push_back({{"name", c.name}, {"value", c.value}, {"limit", c.limit},
                        {"bound", c.at_least ? "lower" : "upper"}, {"ok", c.ok()}});
      ok = ok && c.ok();
    }
    doc["verification"] = {{"passed", ok}, {"checks", checks}};
  }
  return doc.dump(2) + "\n";
}

}  // namespace cylising::cli
