#include "cylising/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace cylising {

CylinderGeometry::CylinderGeometry(int L, int M) : L_(L), M_(M) {
  if (L < 2 || L % 2 != 0) throw std::invalid_argument("geometry: L must be even and >= 2");
  if (M < 1) throw std::invalid_argument("geometry: M must be >= 1");
}

bool CylinderGeometry::in_bulk(Site z) const {
  return z.x1 >= 1 && z.x1 <= L_ && z.x2 >= 1 && z.x2 <= M_;
}

bool CylinderGeometry::in_closure(Site z) const {
  return z.x1 >= 1 && z.x1 <= L_ && z.x2 >= 0 && z.x2 <= M_ + 1;
}

bool CylinderGeometry::valid_edge(const Edge& e) const {
  if (e.base.x1 < 1 || e.base.x1 > L_) return false;
  if (e.dir == Direction::horizontal) return e.base.x2 >= 1 && e.base.x2 <= M_;
  return e.base.x2 >= 1 && e.base.x2 <= M_ - 1;
}

Site CylinderGeometry::wrap(int x1, int x2, int* seam_parity) const {
  // floor division so that x1 - 1 lands in [0, L)
  int q = (x1 - 1) >= 0 ? (x1 - 1) / L_ : -((L_ - x1) / L_);
  if (seam_parity) *seam_parity = q & 1;
  return {x1 - q * L_, x2};
}

Site CylinderGeometry::translate(Site z, int dx) const { return wrap(z.x1 + dx, z.x2); }

Site CylinderGeometry::other_end(const Edge& e) const {
  if (e.dir == Direction::horizontal) return wrap(e.base.x1 + 1, e.base.x2);
  return {e.base.x1, e.base.x2 + 1};
}

Edge CylinderGeometry::translate(const Edge& e, int dx) const {
  return {translate(e.base, dx), e.dir};
}

Edge CylinderGeometry::reflect1(const Edge& e) const {
  if (e.dir == Direction::horizontal) return {wrap(L_ - e.base.x1, e.base.x2), e.dir};
  return {wrap(L_ + 1 - e.base.x1, e.base.x2), e.dir};
}

Edge CylinderGeometry::reflect2(const Edge& e) const {
  if (e.dir == Direction::horizontal) return {{e.base.x1, M_ + 1 - e.base.x2}, e.dir};
  return {{e.base.x1, M_ - e.base.x2}, e.dir};
}

std::vector<Edge> CylinderGeometry::edges() const {
  std::vector<Edge> out;
  for (int r = 1; r <= M_; ++r)
    for (int x = 1; x <= L_; ++x) out.push_back({{x, r}, Direction::horizontal});
  for (int r = 1; r < M_; ++r)
    for (int x = 1; x <= L_; ++x) out.push_back({{x, r}, Direction::vertical});
  return out;
}

int CylinderGeometry::cyclic_distance(int a, int b) const { return std::abs(per_L(a - b, L_)); }

int per_L(long long y, int L) {
  if (L < 2 || L % 2 != 0) throw std::invalid_argument("per_L: L must be even and >= 2");
  // floor(y/L + 1/2) = floor((2y + L) / (2L))
  long long num = 2 * y + L;
  long long den = 2LL * L;
  long long q = num >= 0 ? num / den : -((-num + den - 1) / den);
  return static_cast<int>(y - L * q);
}

int alpha_sign(std::span<const Site> zs, const CylinderGeometry& geom) {
  if (zs.empty()) return 0;
  auto [lo, hi] = std::minmax_element(zs.begin(), zs.end(),
                                      [](const Site& a, const Site& b) { return a.x1 < b.x1; });
  const int L = geom.L();
  if (3 * (hi->x1 - lo->x1) < 2 * L) return 0;
  int count = 0;
  for (const auto& z : zs)
    if (3 * z.x1 <= L) ++count;
  return count & 1;
}

int horizontal_diameter(std::span<const Site> zs, const CylinderGeometry& geom) {
  int d = 0;
  for (std::size_t i = 0; i < zs.size(); ++i)
    for (std::size_t j = i + 1; j < zs.size(); ++j)
      d = std::max(d, geom.cyclic_distance(zs[i].x1, zs[j].x1));
  return d;
}

namespace {

constexpr int kInf = std::numeric_limits<int>::max() / 4;

// Closure grid graph with per-edge weights; vertices are rows 0..M+1 times columns 1..L.
struct Grid {
  int L;
  int R;  // number of rows (M + 2)
  std::vector<std::uint8_t> hw;  // weight of edge v -> v+e1
  std::vector<std::uint8_t> vw;  // weight of edge v -> v+e2

  explicit Grid(const CylinderGeometry& g)
      : L(g.L()), R(g.M() + 2), hw(L * R, 1), vw(L * R, 1) {}

  int id(Site z) const { return z.x2 * L + (z.x1 - 1); }
  int size() const { return L * R; }

  template <class F>
  void neighbors(int v, F&& f) const {
    int x = v % L, r = v / L;
    f(r * L + (x + 1) % L, hw[v]);
    f(r * L + (x + L - 1) % L, hw[r * L + (x + L - 1) % L]);
    if (r + 1 < R) f(v + L, vw[v]);
    if (r > 0) f(v - L, vw[v - L]);
  }

  void relax(std::vector<int>& d) const {
    using P = std::pair<int, int>;
    std::priority_queue<P, std::vector<P>, std::greater<P>> pq;
    for (int v = 0; v < size(); ++v)
      if (d[v] < kInf) pq.push({d[v], v});
    while (!pq.empty()) {
      auto [dv, v] = pq.top();
      pq.pop();
      if (dv != d[v]) continue;
      neighbors(v, [&](int u, int w) {
        if (dv + w < d[u]) {
          d[u] = dv + w;
          pq.push({d[u], u});
        }
      });
    }
  }
};

using Group = std::vector<int>;

// Dreyfus-Wagner Steiner DP where each terminal is a vertex group.
int steiner_groups(const Grid& g, const std::vector<Group>& groups) {
  const int k = static_cast<int>(groups.size());
  if (k <= 1) return 0;
  const int n = g.size();
  const int full = (1 << k) - 1;
  std::vector<std::vector<int>> dp(full + 1, std::vector<int>(n, kInf));
  for (int t = 0; t < k; ++t) {
    auto& d = dp[1 << t];
    for (int v : groups[t]) d[v] = 0;
    g.relax(d);
  }
  for (int S = 1; S <= full; ++S) {
    if ((S & (S - 1)) == 0) continue;
    auto& d = dp[S];
    const int low = S & -S;
    for (int A = (S - 1) & S; A > 0; A = (A - 1) & S) {
      if (!(A & low)) continue;
      const auto& da = dp[A];
      const auto& db = dp[S ^ A];
      for (int v = 0; v < n; ++v)
        if (da[v] < kInf && db[v] < kInf) d[v] = std::min(d[v], da[v] + db[v]);
    }
    g.relax(d);
  }
  return *std::min_element(dp[full].begin(), dp[full].end());
}

// Spanning-tree surrogate on the metric closure of the groups (at most twice the optimum).
int mst_groups(const Grid& g, const std::vector<Group>& groups) {
  const int k = static_cast<int>(groups.size());
  if (k <= 1) return 0;
  std::vector<std::vector<int>> dist(k);
  for (int t = 0; t < k; ++t) {
    std::vector<int> d(g.size(), kInf);
    for (int v : groups[t]) d[v] = 0;
    g.relax(d);
    dist[t].resize(k);
    for (int u = 0; u < k; ++u) {
      int best = kInf;
      for (int v : groups[u]) best = std::min(best, d[v]);
      dist[t][u] = best;
    }
  }
  std::vector<int> key(k, kInf);
  std::vector<bool> in(k, false);
  key[0] = 0;
  int total = 0;
  for (int it = 0; it < k; ++it) {
    int best = -1;
    for (int u = 0; u < k; ++u)
      if (!in[u] && (best < 0 || key[u] < key[best])) best = u;
    in[best] = true;
    total += key[best];
    for (int u = 0; u < k; ++u)
      if (!in[u]) key[u] = std::min(key[u], dist[best][u]);
  }
  return total;
}

struct Problem {
  Grid grid;
  std::vector<Group> groups;  // one per forced-edge component and per uncovered site
  int forced = 0;             // number of distinct forced edges
  std::vector<Site> touched;  // all vertices that must be in the tree
  bool sites_only = false;
};

Problem build_problem(std::span<const Site> zs, std::span<const Edge> xs,
                      const CylinderGeometry& geom) {
  Problem p{Grid(geom), {}, 0, {}, xs.empty()};
  const int n = p.grid.size();
  for (const auto& z : zs)
    if (!geom.in_closure(z)) throw std::invalid_argument("tree distance: site outside closure: " + to_string(z));
  std::vector<Edge> edges(xs.begin(), xs.end());
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  p.forced = static_cast<int>(edges.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::vector<bool> marked(n, false);
  for (const auto& e : edges) {
    if (!geom.valid_edge(e)) throw std::invalid_argument("tree distance: invalid edge: " + to_string(e));
    int a = p.grid.id(e.base), b = p.grid.id(geom.other_end(e));
    if (e.dir == Direction::horizontal)
      p.grid.hw[a] = 0;
    else
      p.grid.vw[a] = 0;
    parent[find(a)] = find(b);
    marked[a] = marked[b] = true;
    p.touched.push_back(e.base);
    p.touched.push_back(geom.other_end(e));
  }
  std::map<int, Group> comps;
  for (int v = 0; v < n; ++v)
    if (marked[v]) comps[find(v)].push_back(v);
  for (auto& [root, grp] : comps) p.groups.push_back({grp.front()});
  std::vector<int> sites;
  for (const auto& z : zs) {
    int v = p.grid.id(z);
    if (!marked[v]) sites.push_back(v);
    p.touched.push_back(z);
  }
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  for (int v : sites) p.groups.push_back({v});
  return p;
}

// Closed forms for up to three plain sites (rectilinear Steiner on the cylinder).
int small_site_tree(std::span<const Site> pts, const CylinderGeometry& geom) {
  const int L = geom.L();
  if (pts.size() <= 1) return 0;
  if (pts.size() == 2)
    return geom.cyclic_distance(pts[0].x1, pts[1].x1) + std::abs(pts[0].x2 - pts[1].x2);
  std::vector<int> xs;
  int rlo = pts[0].x2, rhi = pts[0].x2;
  for (const auto& z : pts) {
    xs.push_back(z.x1);
    rlo = std::min(rlo, z.x2);
    rhi = std::max(rhi, z.x2);
  }
  std::sort(xs.begin(), xs.end());
  int gap = xs.front() + L - xs.back();
  for (std::size_t i = 1; i < xs.size(); ++i) gap = std::max(gap, xs[i] - xs[i - 1]);
  return (L - gap) + (rhi - rlo);
}

TreeDistanceResult solve(const Problem& p, const TreeDistanceOptions& opts) {
  const int k = static_cast<int>(p.groups.size());
  if (k <= opts.exact_cap) return {steiner_groups(p.grid, p.groups) + p.forced, false};
  if (!opts.allow_surrogate)
    throw std::length_error("tree distance: terminal count exceeds the exact-solver cap");
  return {mst_groups(p.grid, p.groups) + p.forced, true};
}

}  // namespace

TreeDistanceResult tree_distance(std::span<const Site> zs, std::span<const Edge> xs,
                                 const CylinderGeometry& geom, const TreeDistanceOptions& opts) {
  if (xs.empty()) {
    std::vector<Site> pts(zs.begin(), zs.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    for (const auto& z : pts)
      if (!geom.in_closure(z)) throw std::invalid_argument("tree distance: site outside closure: " + to_string(z));
    if (pts.size() <= 3) return {small_site_tree(pts, geom), false};
  }
  return solve(build_problem(zs, xs, geom), opts);
}

TreeDistanceResult edge_tree_distance(std::span<const Site> zs, std::span<const Edge> xs,
                                      const CylinderGeometry& geom,
                                      const TreeDistanceOptions& opts) {
  if (zs.empty() && xs.empty()) return {0, false};
  Problem p = build_problem(zs, xs, geom);
  const int L = geom.L();
  const int M = geom.M();

  Group boundary;
  for (int x = 1; x <= L; ++x) {
    boundary.push_back(p.grid.id({x, 0}));
    boundary.push_back(p.grid.id({x, M + 1}));
  }
  Problem pa = p;
  pa.groups.push_back(boundary);
  TreeDistanceResult a = solve(pa, opts);

  TreeDistanceResult plain = solve(p, opts);
  const int wind = L / 3 + 1;  // cyclic distance strictly above L/3
  for (std::size_t i = 0; i < p.touched.size(); ++i)
    for (std::size_t j = i + 1; j < p.touched.size(); ++j)
      if (3 * geom.cyclic_distance(p.touched[i].x1, p.touched[j].x1) > L) {
        if (plain.value <= a.value) return plain;
        return a;
      }
  if (std::max(plain.value, wind) >= a.value) return a;

  TreeDistanceResult best = a;
  for (int c = 1; c <= L; ++c) {
    Group col, far;
    for (int x = 1; x <= L; ++x) {
      bool is_far = 3 * geom.cyclic_distance(x, c) > L;
      if (x != c && !is_far) continue;
      for (int r = 0; r <= M + 1; ++r) (x == c ? col : far).push_back(p.grid.id({x, r}));
    }
    if (far.empty()) continue;
    Problem pb = p;
    pb.groups.push_back(col);
    pb.groups.push_back(far);
    TreeDistanceResult b = solve(pb, opts);
    if (b.value < best.value) best = b;
  }
  return best;
}

DistanceCache::DistanceCache(CylinderGeometry geom, TreeDistanceOptions opts)
    : geom_(geom), opts_(opts) {}

DistanceCache::Key DistanceCache::normalize(std::span<const Site> zs,
                                            std::span<const Edge> xs) const {
  Key best;
  bool have = false;
  std::vector<int> shifts;
  for (const auto& z : zs) shifts.push_back(1 - z.x1);
  for (const auto& e : xs) shifts.push_back(1 - e.base.x1);
  if (shifts.empty()) shifts.push_back(0);
  for (int s : shifts) {
    Key k;
    for (const auto& z : zs) k.first.push_back(geom_.translate(z, s));
    for (const auto& e : xs) k.second.push_back(geom_.translate(e, s));
    std::sort(k.first.begin(), k.first.end());
    k.first.erase(std::unique(k.first.begin(), k.first.end()), k.first.end());
    std::sort(k.second.begin(), k.second.end());
    k.second.erase(std::unique(k.second.begin(), k.second.end()), k.second.end());
    if (!have || k < best) {
      best = std::move(k);
      have = true;
    }
  }
  return best;
}

int DistanceCache::tree(std::span<const Site> zs, std::span<const Edge> xs) {
  Key k = normalize(zs, xs);
  {
    std::lock_guard lock(mu_);
    if (auto it = tree_.find(k); it != tree_.end()) return it->second;
  }
  auto r = tree_distance(k.first, k.second, geom_, opts_);
  std::lock_guard lock(mu_);
  approximate_ = approximate_ || r.approximate;
  tree_.emplace(std::move(k), r.value);
  return r.value;
}

int DistanceCache::edge_tree(std::span<const Site> zs, std::span<const Edge> xs) {
  Key k = normalize(zs, xs);
  {
    std::lock_guard lock(mu_);
    if (auto it = edge_.find(k); it != edge_.end()) return it->second;
  }
  auto r = edge_tree_distance(k.first, k.second, geom_, opts_);
  std::lock_guard lock(mu_);
  approximate_ = approximate_ || r.approximate;
  edge_.emplace(std::move(k), r.value);
  return r.value;
}

std::string to_string(const Site& z) {
  return "(" + std::to_string(z.x1) + "," + std::to_string(z.x2) + ")";
}

std::string to_string(const Edge& e) {
  return to_string(e.base) + (e.dir == Direction::horizontal ? "h" : "v");
}

}  // namespace cylising
