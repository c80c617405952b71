#include "cylising/kernelcalc.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <tuple>

#include <Eigen/Dense>
#include <json.hpp>

#include "cylising/freecorr.hpp"
#include "cylising/parallel.hpp"
#include "cylising/skewlinalg.hpp"

namespace cylising {

namespace {

double parity_sign(int p) { return (p & 1) ? -1.0 : 1.0; }

std::vector<Site> points_of(const std::vector<FieldLabel>& f) {
  std::vector<Site> z;
  z.reserve(f.size());
  for (const auto& l : f) z.push_back(l.z);
  return z;
}

double alpha_factor(const std::vector<FieldLabel>& f, const CylinderGeometry& geom) {
  if (f.empty()) return 1.0;
  const auto z = points_of(f);
  return parity_sign(alpha_sign(z, geom));
}

bool is_null(int omega, Site z, const CylinderGeometry& geom) {
  return (omega == +1 && z.x2 == 0) || (omega == -1 && z.x2 == geom.M() + 1);
}

void validate_label(const FieldLabel& l, const CylinderGeometry& geom) {
  if (l.omega != 1 && l.omega != -1 && l.omega != 2 && l.omega != -2)
    throw KernelError("field label: omega must be one of +-1 (phi) or +-2 (xi)");
  if (l.D[0] < 0 || l.D[1] < 0 || l.order() > 2)
    throw KernelError("field label: derivative orders must be nonnegative with |D| <= 2");
  if (!geom.in_closure(l.z)) throw KernelError("field label: site " + to_string(l.z) + " outside the closure");
  if (l.z.x2 + l.D[1] > geom.M() + 1) throw KernelError("field label: z + D outside the closure");
  if (l.massive() && (l.order() != 0 || !geom.in_bulk(l.z)))
    throw KernelError("field label: massive fields live on rows 1..M without derivatives");
}

// Sorts in place; returns the permutation sign, or 0 on a repeated entry.
template <class T>
int sort_sign(std::vector<T>& v) {
  int sign = 1;
  for (std::size_t i = 1; i < v.size(); ++i)
    for (std::size_t j = i; j > 0 && v[j] < v[j - 1]; --j) {
      std::swap(v[j], v[j - 1]);
      sign = -sign;
    }
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] == v[i - 1]) return 0;
  return sign;
}

int permutation_parity(const std::vector<int>& p) {
  int inv = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j)
      if (p[i] > p[j]) ++inv;
  return inv & 1;
}

double factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

using LinComb = std::vector<std::pair<FieldLabel, double>>;

LinComb expand_label(const FieldLabel& l, const CylinderGeometry& geom) {
  static constexpr double binom[3][3] = {{1, 0, 0}, {1, 1, 0}, {1, 2, 1}};
  LinComb out;
  for (int a = 0; a <= l.D[0]; ++a)
    for (int b = 0; b <= l.D[1]; ++b) {
      const double c = binom[l.D[0]][a] * binom[l.D[1]][b] * parity_sign(l.D[0] - a + l.D[1] - b);
      int parity = 0;
      const Site s = geom.wrap(l.z.x1 + a, l.z.x2 + b, &parity);
      if (is_null(l.omega, s, geom)) continue;
      out.push_back({FieldLabel{l.omega, {0, 0}, s}, c * parity_sign(parity)});
    }
  return out;
}

void accumulate_expanded(Polynomial& poly, const KernelKey& key, double v, const CylinderGeometry& geom) {
  const std::size_t n = key.fields.size();
  std::vector<LinComb> parts(n);
  for (std::size_t i = 0; i < n; ++i) {
    parts[i] = expand_label(key.fields[i], geom);
    if (parts[i].empty()) return;
  }
  auto edges = key.edges;
  std::sort(edges.begin(), edges.end());
  std::vector<std::size_t> idx(n, 0);
  std::vector<FieldLabel> mono(n);
  while (true) {
    double c = v;
    for (std::size_t i = 0; i < n; ++i) {
      mono[i] = parts[i][idx[i]].first;
      c *= parts[i][idx[i]].second;
    }
    auto sorted = mono;
    const int s = sort_sign(sorted);
    if (s != 0) poly[KernelKey{std::move(sorted), edges}] += s * c;
    std::size_t k = 0;
    while (k < n && ++idx[k] == parts[k].size()) idx[k++] = 0;
    if (k == n) break;
  }
}

}  // namespace

// ---- Kernel ----------------------------------------------------------------------------------

Sector sector_of(const KernelKey& k) {
  Sector s;
  s.n = static_cast<int>(k.fields.size());
  for (const auto& f : k.fields) s.p += f.order();
  s.m = static_cast<int>(k.edges.size());
  return s;
}

void Kernel::add(const KernelKey& key, double v) {
  if (key.fields.size() % 2) throw KernelError("kernel: odd number of fields");
  for (const auto& f : key.fields) validate_label(f, geom_);
  for (const auto& e : key.edges)
    if (!geom_.valid_edge(e)) throw KernelError("kernel: invalid edge " + to_string(e));
  if (v == 0.0) return;
  c_[key] += v;
}

void Kernel::add(std::vector<FieldLabel> fields, std::vector<Edge> edges, double v) {
  add(KernelKey{std::move(fields), std::move(edges)}, v);
}

double Kernel::at(const KernelKey& key) const {
  auto it = c_.find(key);
  return it == c_.end() ? 0.0 : it->second;
}

Kernel Kernel::sector(Sector s) const {
  Kernel out(geom_);
  out.antisymmetrized = antisymmetrized;
  out.reflection_symmetrized = reflection_symmetrized;
  out.tag = tag;
  for (const auto& [k, v] : c_)
    if (sector_of(k) == s) out.c_.emplace(k, v);
  return out;
}

Kernel Kernel::sourceless() const {
  Kernel out(geom_);
  out.tag = tag;
  for (const auto& [k, v] : c_)
    if (k.edges.empty()) out.c_.emplace(k, v);
  return out;
}

Kernel Kernel::source() const {
  Kernel out(geom_);
  out.tag = tag;
  for (const auto& [k, v] : c_)
    if (!k.edges.empty()) out.c_.emplace(k, v);
  return out;
}

std::vector<Sector> Kernel::sectors() const {
  std::vector<Sector> s;
  for (const auto& [k, v] : c_) s.push_back(sector_of(k));
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

double Kernel::max_abs() const {
  double m = 0;
  for (const auto& [k, v] : c_) m = std::max(m, std::abs(v));
  return m;
}

void Kernel::prune(double tol) {
  std::erase_if(c_, [&](const auto& kv) { return std::abs(kv.second) <= tol; });
}

void Kernel::check_geometry(const Kernel& o) const {
  if (!(geom_ == o.geom_)) throw KernelError("kernel: geometry mismatch");
}

Kernel& Kernel::operator+=(const Kernel& o) {
  check_geometry(o);
  for (const auto& [k, v] : o.c_) c_[k] += v;
  antisymmetrized = antisymmetrized && o.antisymmetrized;
  reflection_symmetrized = reflection_symmetrized && o.reflection_symmetrized;
  return *this;
}

Kernel& Kernel::operator-=(const Kernel& o) {
  check_geometry(o);
  for (const auto& [k, v] : o.c_) c_[k] -= v;
  antisymmetrized = antisymmetrized && o.antisymmetrized;
  reflection_symmetrized = reflection_symmetrized && o.reflection_symmetrized;
  return *this;
}

Kernel& Kernel::operator*=(double c) {
  for (auto& [k, v] : c_) v *= c;
  return *this;
}

// ---- expansion and equivalence ---------------------------------------------------------------

Polynomial expand_to_plain_fields(const Kernel& k) {
  Polynomial poly;
  for (const auto& [key, v] : k.coefficients()) accumulate_expanded(poly, key, v, k.geometry());
  return poly;
}

double polynomial_distance(const Polynomial& a, const Polynomial& b) {
  double d = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      d = std::max(d, std::abs(ia->second));
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      d = std::max(d, std::abs(ib->second));
      ++ib;
    } else {
      d = std::max(d, std::abs(ia->second - ib->second));
      ++ia;
      ++ib;
    }
  }
  return d;
}

bool kernels_equivalent(const Kernel& a, const Kernel& b, double tol) {
  if (!(a.geometry() == b.geometry())) return false;
  return polynomial_distance(expand_to_plain_fields(a), expand_to_plain_fields(b)) <= tol;
}

Kernel polynomial_kernel(const CylinderGeometry& geom, const Polynomial& p) {
  Kernel k(geom);
  for (const auto& [key, v] : p) k.add(key, v);
  return k;
}

// ---- symmetries ------------------------------------------------------------------------------

Kernel translate(const Kernel& k, int dx) {
  const auto& geom = k.geometry();
  Kernel out(geom);
  out.antisymmetrized = k.antisymmetrized;
  out.reflection_symmetrized = k.reflection_symmetrized;
  out.tag = k.tag;
  for (const auto& [key, v] : k.coefficients()) {
    KernelKey nk = key;
    int parity = 0;
    for (auto& f : nk.fields) {
      int p = 0;
      f.z = geom.wrap(f.z.x1 + dx, f.z.x2, &p);
      parity += p;
    }
    for (auto& e : nk.edges) e = geom.translate(e, dx);
    out.add(nk, v * parity_sign(parity));
  }
  return out;
}

namespace {

Kernel reflect(const Kernel& k, int which) {
  const auto& geom = k.geometry();
  const int L = geom.L(), M = geom.M();
  Kernel out(geom);
  out.antisymmetrized = k.antisymmetrized;
  out.tag = k.tag;
  for (const auto& [key, v] : k.coefficients()) {
    KernelKey nk = key;
    double c = parity_sign(static_cast<int>(key.fields.size()) / 2);  // i^n
    for (auto& f : nk.fields) {
      if (which == 1) {
        if (f.massive()) {
          f.omega = -f.omega;
        } else {
          c *= f.omega;
        }
        int p = 0;
        f.z = geom.wrap(L + 1 - f.z.x1 - f.D[0], f.z.x2, &p);
        c *= parity_sign(p + f.D[0]);
      } else {
        if (f.massive()) {
          c *= f.omega > 0 ? -1.0 : 1.0;
        } else {
          f.omega = -f.omega;
        }
        f.z = Site{f.z.x1, M + 1 - f.z.x2 - f.D[1]};
        c *= parity_sign(f.D[1]);
      }
    }
    for (auto& e : nk.edges) e = which == 1 ? geom.reflect1(e) : geom.reflect2(e);
    out.add(nk, v * c);
  }
  return out;
}

}  // namespace

Kernel reflect_horizontal(const Kernel& k) { return reflect(k, 1); }
Kernel reflect_vertical(const Kernel& k) { return reflect(k, 2); }

Kernel antisymmetrize(const Kernel& k) {
  Kernel out(k.geometry());
  out.tag = k.tag;
  out.reflection_symmetrized = k.reflection_symmetrized;
  for (const auto& [key, v] : k.coefficients()) {
    const int n = static_cast<int>(key.fields.size());
    const int m = static_cast<int>(key.edges.size());
    const double w = v / (factorial(n) * factorial(m));
    std::vector<int> pf(n), pe(m);
    std::iota(pf.begin(), pf.end(), 0);
    do {
      const double s = parity_sign(permutation_parity(pf));
      std::iota(pe.begin(), pe.end(), 0);
      do {
        KernelKey nk;
        nk.fields.reserve(n);
        nk.edges.reserve(m);
        for (int i : pf) nk.fields.push_back(key.fields[i]);
        for (int i : pe) nk.edges.push_back(key.edges[i]);
        out.add(nk, s * w);
      } while (std::next_permutation(pe.begin(), pe.end()));
    } while (std::next_permutation(pf.begin(), pf.end()));
  }
  out.antisymmetrized = true;
  return out;
}

Kernel reflection_symmetrize(const Kernel& k) {
  Kernel out = k;
  const Kernel r1 = reflect_horizontal(k);
  out += r1;
  out += reflect_vertical(k);
  out += reflect_vertical(r1);
  out *= 0.25;
  out.antisymmetrized = k.antisymmetrized;
  out.reflection_symmetrized = true;
  out.tag = k.tag;
  return out;
}

Kernel symmetrize(const Kernel& k) {
  Kernel out = antisymmetrize(reflection_symmetrize(k));
  out.reflection_symmetrized = true;
  return out;
}

// ---- localization and interpolation ----------------------------------------------------------

namespace {

struct PathStep {
  Site y;  // base of the derivative label
  int j;   // 0: horizontal, 1: vertical
  int sigma;
};

std::vector<PathStep> path_steps(Site a, Site b, const CylinderGeometry& geom) {
  const int L = geom.L();
  std::vector<PathStep> steps;
  Site cur = a;
  while (cur.x2 != b.x2) {
    if (b.x2 > cur.x2) {
      steps.push_back({cur, 1, +1});
      ++cur.x2;
    } else {
      --cur.x2;
      steps.push_back({cur, 1, -1});
    }
  }
  int dx = per_L(b.x1 - a.x1, L);
  if (2 * std::abs(dx) == L) dx = b.x1 - a.x1;
  const int dir = dx > 0 ? 1 : -1;
  for (int i = 0; i < std::abs(dx); ++i) {
    const Site next = geom.wrap(cur.x1 + dir, cur.x2);
    if (dir > 0) {
      steps.push_back({cur, 0, +1});
    } else {
      steps.push_back({next, 0, -1});
    }
    cur = next;
  }
  return steps;
}

bool in_set(Sector s, std::initializer_list<Sector> set) {
  return std::find(set.begin(), set.end(), s) != set.end();
}

Kernel excluded(const Kernel& v, std::initializer_list<Sector> set) {
  Kernel out(v.geometry());
  for (const auto& [k, c] : v.coefficients())
    if (!in_set(sector_of(k), set)) out.add(k, c);
  return out;
}

void require_sectors(const Kernel& v, std::initializer_list<Sector> set, const char* who) {
  for (const auto& [k, c] : v.coefficients())
    if (!in_set(sector_of(k), set)) throw KernelError(std::string(who) + ": unsupported sector");
}

// Adds sum over steps of path(anchor -> key.fields[slot].z) with slot relabelled, the other
// slots given by `fixed`; coefficient (-1)^{alpha(z) + alpha(y)} sigma v.
void add_interpolation(Kernel& out, const KernelKey& key, const std::vector<FieldLabel>& fixed,
                       std::size_t slot, Site anchor, double v_alpha) {
  const auto& geom = out.geometry();
  for (const auto& st : path_steps(anchor, key.fields[slot].z, geom)) {
    KernelKey nk{fixed, key.edges};
    nk.fields[slot].z = st.y;
    nk.fields[slot].D[st.j] += 1;
    if (nk.fields[slot].order() > 2) throw KernelError("interpolation: derivative order exceeds 2");
    out.add(nk, v_alpha * st.sigma * alpha_factor(nk.fields, geom));
  }
}

void check_bulk_support(const Kernel& v, const char* who) {
  const auto& geom = v.geometry();
  for (const auto& [k, c] : v.coefficients()) {
    if (!k.edges.empty()) throw KernelError(std::string(who) + ": source terms present");
    if (!in_set(sector_of(k), {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}})) continue;
    if (3 * horizontal_diameter(points_of(k.fields), geom) > geom.L())
      throw KernelError(std::string(who) + ": support violation");
  }
}

void check_source_only(const Kernel& b, const char* who) {
  for (const auto& [k, c] : b.coefficients())
    if (k.edges.empty()) throw KernelError(std::string(who) + ": nonzero sourceless part");
}

}  // namespace

std::vector<Site> interpolation_path(Site a, Site b, const CylinderGeometry& geom) {
  std::vector<Site> path{a};
  Site cur = a;
  for (const auto& st : path_steps(a, b, geom)) {
    if (st.sigma > 0) {
      cur = st.j == 0 ? geom.wrap(st.y.x1 + 1, st.y.x2) : Site{st.y.x1, st.y.x2 + 1};
    } else {
      cur = st.y;
    }
    path.push_back(cur);
  }
  return path;
}

Kernel tilde_L(const Kernel& v) {
  require_sectors(v, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}}, "tilde_L");
  const auto& geom = v.geometry();
  Kernel out(geom);
  for (const auto& [k, c] : v.coefficients()) {
    KernelKey nk = k;
    for (auto& f : nk.fields) f.z = k.fields[0].z;
    out.add(nk, c * alpha_factor(k.fields, geom));
  }
  return out;
}

Kernel tilde_R(const Kernel& v) {
  require_sectors(v, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}}, "tilde_R");
  const auto& geom = v.geometry();
  Kernel out(geom);
  for (const auto& [k, c] : v.coefficients()) {
    const double ca = c * alpha_factor(k.fields, geom);
    const Site z1 = k.fields[0].z;
    const std::size_t n = k.fields.size();
    for (std::size_t slot = n - 1; slot >= 1; --slot) {
      auto fixed = k.fields;
      for (std::size_t j = 1; j < slot; ++j) fixed[j].z = z1;
      add_interpolation(out, k, fixed, slot, z1, ca);
    }
  }
  return out;
}

Kernel L_bulk(const Kernel& v) {
  check_bulk_support(v, "L_bulk");
  const Kernel v20 = v.sector({2, 0, 0});
  const Kernel v21 = v.sector({2, 1, 0});
  Kernel out = symmetrize(tilde_L(v20));
  out += symmetrize(tilde_L(v21) + tilde_L(tilde_R(v20)));
  out.antisymmetrized = out.reflection_symmetrized = true;
  return out;
}

Kernel R_bulk(const Kernel& v) {
  check_bulk_support(v, "R_bulk");
  const Kernel v20 = v.sector({2, 0, 0});
  const Kernel v21 = v.sector({2, 1, 0});
  const Kernel v40 = v.sector({4, 0, 0});
  Kernel out = symmetrize(v.sector({2, 2, 0}) + tilde_R(v21) + tilde_R(tilde_R(v20)));
  out += symmetrize(v.sector({4, 1, 0}) + tilde_R(v40));
  out += excluded(v, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}, {2, 2, 0}, {4, 1, 0}});
  return out;
}

Site boundary_anchor(Site z1, const CylinderGeometry& geom) {
  return z1.x2 <= geom.M() / 2 ? Site{z1.x1, 0} : Site{z1.x1, geom.M() + 1};
}

Kernel tilde_L_edge(const Kernel& v) {
  require_sectors(v, {{2, 0, 0}}, "tilde_L_edge");
  const auto& geom = v.geometry();
  Kernel out(geom);
  for (const auto& [k, c] : v.coefficients()) {
    KernelKey nk = k;
    const Site b = boundary_anchor(k.fields[0].z, geom);
    for (auto& f : nk.fields) f.z = b;
    out.add(nk, c * alpha_factor(k.fields, geom));
  }
  return out;
}

Kernel tilde_R_edge(const Kernel& v) {
  require_sectors(v, {{2, 0, 0}}, "tilde_R_edge");
  const auto& geom = v.geometry();
  Kernel out(geom);
  for (const auto& [k, c] : v.coefficients()) {
    const double ca = c * alpha_factor(k.fields, geom);
    const Site b = boundary_anchor(k.fields[0].z, geom);
    add_interpolation(out, k, k.fields, 1, b, ca);
    auto fixed = k.fields;
    fixed[1].z = b;
    add_interpolation(out, k, fixed, 0, b, ca);
  }
  return out;
}

Kernel L_edge(const Kernel& v) {
  Kernel out = symmetrize(tilde_L_edge(v.sector({2, 0, 0})));
  out.tag = KernelTag::edge;
  return out;
}

Kernel R_edge(const Kernel& v) {
  Kernel out = symmetrize(v.sector({2, 1, 0}) + tilde_R_edge(v.sector({2, 0, 0})));
  out += excluded(v, {{2, 0, 0}, {2, 1, 0}});
  out.tag = KernelTag::edge;
  return out;
}

Kernel tilde_L_source(const Kernel& b) {
  require_sectors(b, {{2, 0, 1}}, "tilde_L_source");
  const auto& geom = b.geometry();
  Kernel out(geom);
  for (const auto& [k, c] : b.coefficients()) {
    KernelKey nk = k;
    for (auto& f : nk.fields) f.z = k.edges[0].base;
    out.add(nk, c * alpha_factor(k.fields, geom));
  }
  return out;
}

Kernel tilde_R_source(const Kernel& b) {
  require_sectors(b, {{2, 0, 1}}, "tilde_R_source");
  const auto& geom = b.geometry();
  Kernel out(geom);
  for (const auto& [k, c] : b.coefficients()) {
    const double ca = c * alpha_factor(k.fields, geom);
    const Site zx = k.edges[0].base;
    auto fixed = k.fields;
    fixed[0].z = zx;
    add_interpolation(out, k, fixed, 1, zx, ca);
    add_interpolation(out, k, k.fields, 0, zx, ca);
  }
  return out;
}

Kernel L_source(const Kernel& b) {
  check_source_only(b, "L_source");
  return symmetrize(tilde_L_source(b.sector({2, 0, 1})));
}

Kernel R_source(const Kernel& b) {
  check_source_only(b, "R_source");
  Kernel out = symmetrize(b.sector({2, 1, 1}) + tilde_R_source(b.sector({2, 0, 1})));
  out += excluded(b, {{2, 0, 1}, {2, 1, 1}});
  return out;
}

// ---- bulk / edge split -----------------------------------------------------------------------

KernelShape representative_shape(const KernelKey& key, const CylinderGeometry& geom) {
  const int L = geom.L();
  if (key.fields.empty() && key.edges.empty()) return {};
  const Site o = key.fields.empty() ? key.edges[0].base : key.fields[0].z;
  auto rel = [&](Site s) { return std::array<int, 2>{per_L(s.x1 - o.x1, L), s.x2 - o.x2}; };
  KernelShape sh;
  for (const auto& f : key.fields) {
    sh.omega.push_back(f.omega);
    sh.D.push_back(f.D);
    sh.offset.push_back(rel(f.z));
  }
  for (const auto& e : key.edges) sh.edges.push_back({rel(e.base), e.dir});
  return sh;
}

bool in_interior_support(const KernelKey& key, const CylinderGeometry& geom) {
  for (const auto& f : key.fields)
    if (f.z.x2 < 1 || f.z.x2 + f.D[1] > geom.M()) return false;
  return true;
}

Kernel bulk_kernel(const CylinderGeometry& geom, const InfiniteVolumeKernel& w_inf) {
  const int L = geom.L(), M = geom.M();
  Kernel out(geom);
  out.tag = KernelTag::bulk;
  for (const auto& [sh, v] : w_inf) {
    int lo = 0, hi = 0, xlo = 0, xhi = 0;
    auto extend = [&](std::array<int, 2> o, int top) {
      lo = std::min(lo, o[1]);
      hi = std::max(hi, o[1] + top);
      xlo = std::min(xlo, o[0]);
      xhi = std::max(xhi, o[0]);
    };
    for (std::size_t i = 0; i < sh.offset.size(); ++i) extend(sh.offset[i], sh.D[i][1]);
    for (const auto& [o, d] : sh.edges) {
      extend(o, d == Direction::vertical ? 1 : 0);
      if (d == Direction::horizontal) extend({o[0] + 1, o[1]}, 0);
    }
    if (3 * (xhi - xlo) > L) continue;
    for (int r0 = 1 - lo; r0 + hi <= M; ++r0)
      for (int x0 = 1; x0 <= L; ++x0) {
        KernelKey key;
        for (std::size_t i = 0; i < sh.offset.size(); ++i)
          key.fields.push_back({sh.omega[i], sh.D[i], geom.wrap(x0 + sh.offset[i][0], r0 + sh.offset[i][1])});
        bool ok = true;
        for (const auto& [o, d] : sh.edges) {
          Edge e{geom.wrap(x0 + o[0], r0 + o[1]), d};
          if (!geom.valid_edge(e)) ok = false;
          key.edges.push_back(e);
        }
        if (!ok || !in_interior_support(key, geom)) continue;
        out.add(key, alpha_factor(key.fields, geom) * v);
      }
  }
  return out;
}

KernelSplit bulk_edge_kernel_split(const Kernel& w, const InfiniteVolumeKernel& w_inf) {
  KernelSplit s{bulk_kernel(w.geometry(), w_inf), w};
  s.edge -= s.bulk;
  s.edge.prune(0.0);
  s.edge.tag = KernelTag::edge;
  return s;
}

// ---- norms -----------------------------------------------------------------------------------

namespace {

// sup_D |K| grouped by (omega tuple, base points, edges).
using NormGroup = std::tuple<std::vector<int>, std::vector<Site>, std::vector<Edge>>;

std::map<NormGroup, double> sup_over_D(const Kernel& k, Sector s) {
  std::map<NormGroup, double> g;
  for (const auto& [key, v] : k.coefficients()) {
    if (!(sector_of(key) == s)) continue;
    std::vector<int> om;
    for (const auto& f : key.fields) om.push_back(f.omega);
    double& e = g[{om, points_of(key.fields), key.edges}];
    e = std::max(e, std::abs(v));
  }
  return g;
}

}  // namespace

double weighted_norm(const Kernel& k, Sector s, NormFlavor flavor, double kappa, DistanceCache& dist) {
  if (kappa < 0) throw KernelError("weighted_norm: kappa must be nonnegative");
  const auto groups = sup_over_D(k, s);
  if (flavor == NormFlavor::source_bulk || flavor == NormFlavor::source_edge) {
    std::set<std::vector<Edge>> xs;
    for (const auto& [g, v] : groups) xs.insert(std::get<2>(g));
    double best = 0;
    for (const auto& x : xs) best = std::max(best, source_norm_at(k, s, x, flavor, kappa, dist));
    return best;
  }
  // keyed by (omega, anchor): anchor is z1 (bulk) or the column of z1 (edge)
  std::map<std::pair<std::vector<int>, Site>, double> sums;
  for (const auto& [g, v] : groups) {
    const auto& [om, z, x] = g;
    if (z.empty()) continue;
    const int d = flavor == NormFlavor::bulk ? dist.tree(z, x) : dist.edge_tree(z, x);
    const Site anchor = flavor == NormFlavor::bulk ? z[0] : Site{z[0].x1, 0};
    sums[{om, anchor}] += std::exp(kappa * d) * v;
  }
  double best = 0;
  for (const auto& [a, v] : sums) best = std::max(best, v);
  return best;
}

double weighted_norm(const Kernel& k, Sector s, NormFlavor flavor, double kappa) {
  DistanceCache dist(k.geometry());
  return weighted_norm(k, s, flavor, kappa, dist);
}

double source_norm_at(const Kernel& k, Sector s, const std::vector<Edge>& x, NormFlavor flavor,
                      double kappa, DistanceCache& dist) {
  std::map<std::vector<int>, double> sums;
  for (const auto& [g, v] : sup_over_D(k, s)) {
    const auto& [om, z, xs] = g;
    if (xs != x) continue;
    const int d = flavor == NormFlavor::source_edge || flavor == NormFlavor::edge ? dist.edge_tree(z, xs)
                                                                                  : dist.tree(z, xs);
    sums[om] += std::exp(kappa * d) * v;
  }
  double best = 0;
  for (const auto& [om, v] : sums) best = std::max(best, v);
  return best;
}

// ---- expectations ----------------------------------------------------------------------------

Covariance phi_covariance(const PropagatorTable& g) {
  auto t = std::make_shared<const PropagatorTable>(g);
  return [t](const FieldLabel& a, const FieldLabel& b) {
    if (a.massive() || b.massive()) return 0.0;
    if (!t->has_rows(a.z.x2, b.z.x2)) throw KernelError("phi_covariance: rows outside the table");
    return t->entry(a.omega, a.z, b.omega, b.z).real();
  };
}

Covariance xi_covariance(const PropagatorTable& g) {
  auto t = std::make_shared<const PropagatorTable>(g);
  return [t](const FieldLabel& a, const FieldLabel& b) {
    if (!a.massive() || !b.massive()) return 0.0;
    return t->entry(a.omega > 0 ? 1 : -1, a.z, b.omega > 0 ? 1 : -1, b.z).real();
  };
}

namespace {

// Joint cumulant of Grassmann monomials of either parity; the moment of a sub-collection is the
// ordered product, and partitions carry the sign of regrouping the odd entries.
double graded_cumulant(const std::vector<std::vector<LinComb>>& qs, const Covariance& g) {
  const int s = static_cast<int>(qs.size());
  if (s == 1 && qs[0].empty()) return 1.0;
  for (const auto& q : qs)
    if (q.empty()) return 0.0;
  std::vector<const LinComb*> flat;
  std::vector<int> owner;
  for (int i = 0; i < s; ++i)
    for (const auto& f : qs[i]) {
      flat.push_back(&f);
      owner.push_back(i);
    }
  const int n = static_cast<int>(flat.size());
  SkewMatrix G(n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      double acc = 0;
      for (const auto& [fa, ca] : *flat[a])
        for (const auto& [fb, cb] : *flat[b]) acc += ca * cb * g(fa, fb);
      G.set(a, b, acc);
    }
  const std::uint32_t full = (1u << s) - 1;
  std::vector<double> moment(full + 1, 0.0);
  for (std::uint32_t S = 1; S <= full; ++S) {
    std::vector<int> idx;
    for (int a = 0; a < n; ++a)
      if (S >> owner[a] & 1u) idx.push_back(a);
    if (idx.size() % 2) continue;
    moment[S] = pfaffian(G.minor(idx)).real();
  }
  std::vector<int> odd(s);
  for (int i = 0; i < s; ++i) odd[i] = qs[i].size() % 2;
  double result = 0;
  for_each_partition(full, [&](const std::vector<std::uint32_t>& blocks) {
    double prod = 1;
    std::vector<int> order;
    for (auto B : blocks) {
      prod *= moment[B];
      if (prod == 0.0) return;
      for (int i = 0; i < s; ++i)
        if ((B >> i & 1u) && odd[i]) order.push_back(i);
    }
    const int k = static_cast<int>(blocks.size());
    const double c = parity_sign(k - 1) * factorial(k - 1) * parity_sign(permutation_parity(order));
    result += c * prod;
  });
  return result;
}

LinComb single(const FieldLabel& f) { return LinComb{{f, 1.0}}; }

}  // namespace

double truncated_expectation(const std::vector<std::vector<FieldLabel>>& qs, const Covariance& g,
                             const CylinderGeometry& geom) {
  if (qs.empty()) throw KernelError("truncated_expectation: s must be at least 1");
  std::vector<std::vector<LinComb>> lin;
  for (const auto& q : qs) {
    if (q.size() % 2) throw KernelError("truncated_expectation: odd-length monomial");
    std::vector<LinComb> l;
    for (const auto& f : q) {
      validate_label(f, geom);
      l.push_back(expand_label(f, geom));
    }
    lin.push_back(std::move(l));
  }
  return graded_cumulant(lin, g);
}

double truncated_expectation(const std::vector<std::vector<FieldLabel>>& qs, const PropagatorTable& g) {
  return truncated_expectation(qs, phi_covariance(g), g.geometry());
}

// ---- RG step ---------------------------------------------------------------------------------

namespace {

struct SplitItem {
  std::vector<FieldLabel> ext;
  std::vector<LinComb> con;
  std::vector<Edge> edges;
  double c;
};

FieldRole role_of(const FieldLabel& f, const RgStepOptions& o) {
  return f.massive() ? o.xi_role : o.phi_role;
}

void accumulate_term(std::map<KernelKey, double>& out, std::vector<FieldLabel> ext,
                     std::vector<Edge> edges, double v) {
  const int s = sort_sign(ext);
  if (s == 0) return;
  std::sort(edges.begin(), edges.end());
  out[KernelKey{std::move(ext), std::move(edges)}] += s * v;
}

}  // namespace

RgStepResult rg_step(const Kernel& w, const Covariance& g, const RgStepOptions& opts) {
  if (opts.s_max < 1 || opts.s_max > 3) throw KernelError("rg_step: s_max must lie in [1, 3]");
  const auto& geom = w.geometry();
  const Polynomial poly = expand_to_plain_fields(w);

  std::vector<SplitItem> items;
  for (const auto& [key, c] : poly) {
    const int n = static_cast<int>(key.fields.size());
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {  // bit set: contracted
      bool ok = true;
      SplitItem it;
      std::vector<int> order, con_idx;
      for (int i = 0; i < n; ++i) {
        const bool contracted = mask >> i & 1u;
        const FieldRole r = role_of(key.fields[i], opts);
        if ((contracted && r == FieldRole::external) || (!contracted && r == FieldRole::integrated)) {
          ok = false;
          break;
        }
        if (contracted) {
          con_idx.push_back(i);
          it.con.push_back(single(key.fields[i]));
        } else {
          order.push_back(i);
          it.ext.push_back(key.fields[i]);
        }
      }
      if (!ok) continue;
      order.insert(order.end(), con_idx.begin(), con_idx.end());
      it.edges = key.edges;
      it.c = c * parity_sign(permutation_parity(order));
      items.push_back(std::move(it));
    }
  }

  std::vector<std::size_t> contracting;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (!items[i].con.empty()) contracting.push_back(i);
  double work = static_cast<double>(items.size());
  for (int s = 2; s <= opts.s_max; ++s) work += std::pow(static_cast<double>(contracting.size()), s);
  if (work > static_cast<double>(opts.budget)) throw KernelError("rg_step: support budget exceeded");

  struct Partial {
    std::map<KernelKey, double> terms;
    double vacuum = 0;
  };
  auto emit = [](Partial& p, const std::vector<const SplitItem*>& tuple, double v) {
    std::vector<FieldLabel> ext;
    std::vector<Edge> edges;
    int parity = 0, ext_after = 0;
    for (auto it = tuple.rbegin(); it != tuple.rend(); ++it) {
      parity += static_cast<int>((*it)->con.size()) * ext_after;
      ext_after += static_cast<int>((*it)->ext.size());
    }
    for (const auto* t : tuple) {
      ext.insert(ext.end(), t->ext.begin(), t->ext.end());
      edges.insert(edges.end(), t->edges.begin(), t->edges.end());
    }
    v *= parity_sign(parity);
    if (ext.empty() && edges.empty()) {
      p.vacuum += v;
    } else {
      accumulate_term(p.terms, std::move(ext), std::move(edges), v);
    }
  };

  // s = 1
  Partial first;
  for (const auto& it : items) {
    const double e = graded_cumulant({it.con}, g);
    if (e != 0.0) emit(first, {&it}, it.c * e);
  }
  // s >= 2, chunked over the first factor; merged in index order
  std::vector<Partial> parts(contracting.size());
  if (opts.s_max >= 2) {
    parallel_for(contracting.size(), [&](std::size_t a) {
      auto& out = parts[a];
      const SplitItem& A = items[contracting[a]];
      for (std::size_t b : contracting) {
        const SplitItem& B = items[b];
        const double e2 = graded_cumulant({A.con, B.con}, g);
        if (e2 != 0.0) emit(out, {&A, &B}, A.c * B.c * e2 / 2.0);
        if (opts.s_max < 3) continue;
        for (std::size_t c : contracting) {
          const SplitItem& C = items[c];
          const double e3 = graded_cumulant({A.con, B.con, C.con}, g);
          if (e3 != 0.0) emit(out, {&A, &B, &C}, A.c * B.c * C.c * e3 / 6.0);
        }
      }
    });
  }

  RgStepResult r{Kernel(geom), Kernel(geom), 0.0};
  auto merge = [&](const Partial& p) {
    for (const auto& [k, v] : p.terms) (k.fields.empty() ? r.constants : r.kernel).add(k, v);
    r.vacuum += p.vacuum;
  };
  merge(first);
  for (const auto& p : parts) merge(p);
  r.kernel.prune(0.0);
  r.constants.prune(0.0);
  r.kernel.antisymmetrized = false;
  return r;
}

// ---- couplings -------------------------------------------------------------------------------

Kernel basis_F_nu(const CylinderGeometry& geom) {
  Kernel k(geom);
  for (int r = 1; r <= geom.M(); ++r)
    for (int x = 1; x <= geom.L(); ++x) k.add({{+1, {0, 0}, {x, r}}, {-1, {0, 0}, {x, r}}}, {}, 1.0);
  return k;
}

Kernel basis_F_zeta(const CylinderGeometry& geom) {
  Kernel k(geom);
  for (int omega : {+1, -1})
    for (int r = 1; r <= geom.M(); ++r)
      for (int x = 1; x <= geom.L(); ++x) {
        const FieldLabel f{omega, {0, 0}, {x, r}};
        k.add({f, {omega, {1, 0}, {x, r}}}, {}, 0.5 * omega);
        int parity = 0;
        const Site back = geom.wrap(x - 1, r, &parity);
        k.add({f, {omega, {1, 0}, back}}, {}, 0.5 * omega * parity_sign(parity));
      }
  return k;
}

Kernel basis_F_eta(const CylinderGeometry& geom) {
  Kernel k(geom);
  const int M = geom.M();
  for (int omega : {+1, -1})
    for (int r = 1; r <= M; ++r)
      for (int x = 1; x <= geom.L(); ++x) {
        const FieldLabel f{omega, {0, 0}, {x, r}};
        if (r + 1 <= M) k.add({f, {-omega, {0, 1}, {x, r}}}, {}, 0.5);
        if (r - 1 >= 1) k.add({f, {-omega, {0, 1}, {x, r - 1}}}, {}, 0.5);
      }
  return k;
}

RunningCouplings extract_running_couplings(const Kernel& local, int h) {
  const auto& geom = local.geometry();
  // Localized: the stencils {z + a : 0 <= a <= D} of all fields share a site.
  auto stencil = [&](const FieldLabel& f) {
    std::set<Site> s;
    for (int a = 0; a <= f.D[0]; ++a)
      for (int b = 0; b <= f.D[1]; ++b) s.insert(geom.wrap(f.z.x1 + a, f.z.x2 + b));
    return s;
  };
  for (const auto& [k, v] : local.coefficients()) {
    if (!k.edges.empty()) throw KernelError("extract_running_couplings: source terms present");
    if (k.fields.empty()) continue;
    std::set<Site> common = stencil(k.fields[0]);
    for (const auto& f : k.fields) {
      std::set<Site> next;
      for (const Site& s : stencil(f))
        if (common.count(s)) next.insert(s);
      common = std::move(next);
    }
    if (common.empty()) throw KernelError("extract_running_couplings: non-localized input");
  }
  const Polynomial target = expand_to_plain_fields(local);
  const Polynomial basis[3] = {expand_to_plain_fields(basis_F_nu(geom)),
                               expand_to_plain_fields(basis_F_zeta(geom)),
                               expand_to_plain_fields(basis_F_eta(geom))};
  std::map<KernelKey, int> rows;
  auto row = [&](const KernelKey& k) { return rows.emplace(k, static_cast<int>(rows.size())).first->second; };
  for (const auto& [k, v] : target) row(k);
  for (const auto& b : basis)
    for (const auto& [k, v] : b) row(k);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), 3);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
  for (int j = 0; j < 3; ++j)
    for (const auto& [k, v] : basis[j]) A(rows.at(k), j) = v;
  for (const auto& [k, v] : target) y(rows.at(k)) = v;
  const Eigen::Vector3d c = A.colPivHouseholderQr().solve(y);
  RunningCouplings rc;
  rc.h = h;
  rc.nu = std::ldexp(c(0), -h);
  rc.zeta = c(1);
  rc.eta = c(2);
  rc.residual = (A * c - y).cwiseAbs().maxCoeff();
  return rc;
}

VertexRenorm extract_vertex_renorm(const SourceKernelPair& b, int h) {
  auto sum = [](const InfiniteVolumeKernel& k, Direction dir) {
    double acc = 0;
    for (const auto& [sh, v] : k) {
      if (sh.omega != std::vector<int>{+1, -1} || sh.edges.size() != 1 || sh.edges[0].second != dir) continue;
      if (sh.D[0] != std::array<int, 2>{0, 0} || sh.D[1] != std::array<int, 2>{0, 0}) continue;
      acc += v;
    }
    return 2.0 * acc;
  };
  return {sum(b.horizontal, Direction::horizontal), sum(b.vertical, Direction::vertical), h};
}

namespace {

FieldLabel label_of(const ObservableField& f) {
  const int omega = f.kind == FieldKind::xi ? 2 * f.omega : f.omega;
  return {omega, {0, 0}, f.site};
}

void add_free_source_terms(Kernel& k, const FreeEnergyCorrelator& corr, const Edge& x) {
  const auto& p = corr.params();
  const double t = x.dir == Direction::horizontal ? p.t1 : p.t2;
  const auto [f1, f2] = corr.bilinear_fields(x);
  for (const auto& a : f1)
    for (const auto& b : f2) {
      const FieldLabel la = label_of(a.field), lb = label_of(b.field);
      if (la == lb) continue;
      k.add({la, lb}, {x}, (1.0 - t * t) * a.coeff * b.coeff);
    }
}

}  // namespace

Kernel free_source_kernel(const CylinderGeometry& geom, const ModelParams& p) {
  FreeEnergyCorrelator corr(geom, p);
  Kernel k(geom);
  for (const auto& x : geom.edges()) add_free_source_terms(k, corr, x);
  return antisymmetrize(k);
}

SourceKernelPair free_source_kernels(const ModelParams& p, int L_ref) {
  const CylinderGeometry geom(L_ref, 3);
  FreeEnergyCorrelator corr(geom, p);
  const Edge xh{{L_ref / 2, 2}, Direction::horizontal};
  const Edge xv{{L_ref / 2, 1}, Direction::vertical};
  Kernel k(geom);
  add_free_source_terms(k, corr, xh);
  add_free_source_terms(k, corr, xv);
  k = antisymmetrize(k);
  SourceKernelPair out;
  for (const auto& [key, v] : k.coefficients()) {
    if (key.fields[0].massive() || key.fields[1].massive()) continue;
    if (key.edges[0] == xh) out.horizontal[representative_shape(key, geom)] += v;
    if (key.edges[0] == xv) out.vertical[representative_shape(key, geom)] += v;
  }
  return out;
}

Kernel initial_sourceless_potential(const CylinderGeometry& geom, const ModelParams& p, double Z) {
  const int L = geom.L();
  auto site_of = [&](int i) {
    const int cell = i / 2;
    return std::pair<int, Site>{i % 2 == 0 ? +1 : -1, Site{cell % L + 1, cell / L + 1}};
  };
  Kernel k(geom);
  auto add_action = [&](const CMatrix& A, bool massive, double c) {
    for (int i = 0; i < A.rows(); ++i)
      for (int j = i + 1; j < A.cols(); ++j) {
        const double a = c * A(i, j).real();
        if (a == 0.0) continue;
        auto [oi, zi] = site_of(i);
        auto [oj, zj] = site_of(j);
        const int m = massive ? 2 : 1;
        k.add({{m * oi, {0, 0}, zi}, {m * oj, {0, 0}, zj}}, {}, a);
      }
  };
  // (1/2) psi^T A psi
  add_action(critical_action_matrix(geom, p.t1, p.t2), false, 1.0 / Z);
  add_action(massive_action_matrix(geom, p.t1), true, 1.0 / Z);
  add_action(critical_action_matrix(geom, p.t1_star, p.t2_star), false, -1.0);
  add_action(massive_action_matrix(geom, p.t1_star), true, -1.0);
  k.prune(0.0);
  return antisymmetrize(k);
}

// ---- serialization ---------------------------------------------------------------------------

namespace {

const char* tag_name(KernelTag t) {
  switch (t) {
    case KernelTag::bulk: return "bulk";
    case KernelTag::edge: return "edge";
    default: return "generic";
  }
}

}  // namespace

std::string kernel_to_json(const Kernel& k) {
  using nlohmann::json;
  json j;
  j["geometry"] = {{"L", k.geometry().L()}, {"M", k.geometry().M()}};
  j["tag"] = tag_name(k.tag);
  j["antisymmetrized"] = k.antisymmetrized;
  j["reflection_symmetrized"] = k.reflection_symmetrized;
  json sectors = json::array();
  for (const auto& s : k.sectors()) sectors.push_back({s.n, s.p, s.m});
  j["sectors"] = sectors;
  json terms = json::array();
  for (const auto& [key, v] : k.coefficients()) {
    json fields = json::array(), edges = json::array();
    for (const auto& f : key.fields) fields.push_back({f.omega, f.D[0], f.D[1], f.z.x1, f.z.x2});
    for (const auto& e : key.edges)
      edges.push_back({e.base.x1, e.base.x2, e.dir == Direction::horizontal ? "h" : "v"});
    terms.push_back({{"fields", fields}, {"edges", edges}, {"value", v}});
  }
  j["terms"] = terms;
  return j.dump();
}

Kernel kernel_from_json(const std::string& s) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(s);
    Kernel k(CylinderGeometry(j.at("geometry").at("L").get<int>(), j.at("geometry").at("M").get<int>()));
    const std::string tag = j.value("tag", "generic");
    k.tag = tag == "bulk" ? KernelTag::bulk : tag == "edge" ? KernelTag::edge : KernelTag::generic;
    k.antisymmetrized = j.value("antisymmetrized", false);
    k.reflection_symmetrized = j.value("reflection_symmetrized", false);
    for (const auto& t : j.at("terms")) {
      KernelKey key;
      for (const auto& f : t.at("fields"))
        key.fields.push_back({f.at(0).get<int>(), {f.at(1).get<int>(), f.at(2).get<int>()},
                              {f.at(3).get<int>(), f.at(4).get<int>()}});
      for (const auto& e : t.at("edges"))
        key.edges.push_back({{e.at(0).get<int>(), e.at(1).get<int>()},
                             e.at(2).get<std::string>() == "h" ? Direction::horizontal : Direction::vertical});
      k.add(key, t.at("value").get<double>());
    }
    return k;
  } catch (const json::exception& e) {
    throw KernelError(std::string("kernel_from_json: ") + e.what());
  }
}

}  // namespace cylising
