#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace cylising {

// Site on the cylinder closure: x1 in 1..L (periodic), x2 in 0..M+1.
struct Site {
  int x1 = 1;
  int x2 = 1;
  friend auto operator<=>(const Site&, const Site&) = default;
};

enum class Direction : std::uint8_t { horizontal = 0, vertical = 1 };

// Nearest-neighbour edge identified by its left/bottom endpoint.
struct Edge {
  Site base;
  Direction dir = Direction::horizontal;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

class CylinderGeometry {
 public:
  CylinderGeometry(int L, int M);

  int L() const { return L_; }
  int M() const { return M_; }
  int site_count() const { return L_ * M_; }
  int closure_site_count() const { return L_ * (M_ + 2); }

  bool in_bulk(Site z) const;
  bool in_closure(Site z) const;
  bool valid_edge(const Edge& e) const;

  // Reduce x1 into 1..L; the returned parity counts seam crossings (antiperiodic sign).
  Site wrap(int x1, int x2, int* seam_parity = nullptr) const;
  Site translate(Site z, int dx) const;
  Site reflect1(Site z) const { return wrap(L_ + 1 - z.x1, z.x2); }
  Site reflect2(Site z) const { return {z.x1, M_ + 1 - z.x2}; }

  Site other_end(const Edge& e) const;
  Edge translate(const Edge& e, int dx) const;
  Edge reflect1(const Edge& e) const;
  Edge reflect2(const Edge& e) const;

  // All edges of the cylinder (both orientations), horizontal first.
  std::vector<Edge> edges() const;

  // Cyclic horizontal distance |per_L(a-b)|.
  int cyclic_distance(int a, int b) const;

  friend bool operator==(const CylinderGeometry&, const CylinderGeometry&) = default;

 private:
  int L_;
  int M_;
};

// y - L*floor(y/L + 1/2), with values in [-L/2, L/2).
int per_L(long long y, int L);

// Parity of the number of sites with x1 <= L/3, when the plain horizontal spread is >= 2L/3.
int alpha_sign(std::span<const Site> zs, const CylinderGeometry& geom);

// Largest cyclic horizontal distance between any two of the given sites.
int horizontal_diameter(std::span<const Site> zs, const CylinderGeometry& geom);

struct TreeDistanceOptions {
  int exact_cap = 6;          // terminal groups solved exactly by Dreyfus-Wagner
  bool allow_surrogate = true;  // beyond the cap, fall back to a spanning-tree bound
};

struct TreeDistanceResult {
  int value = 0;
  bool approximate = false;
};

// Size of the smallest connected edge set containing xs and touching every site in zs.
TreeDistanceResult tree_distance(std::span<const Site> zs, std::span<const Edge> xs,
                                 const CylinderGeometry& geom,
                                 const TreeDistanceOptions& opts = {});

// Same, with the set additionally required to reach a ghost row or to wind more than L/3.
TreeDistanceResult edge_tree_distance(std::span<const Site> zs, std::span<const Edge> xs,
                                      const CylinderGeometry& geom,
                                      const TreeDistanceOptions& opts = {});

// Memoizing front end; keys are normalized under horizontal translation.  Thread-safe.
class DistanceCache {
 public:
  explicit DistanceCache(CylinderGeometry geom, TreeDistanceOptions opts = {});

  int tree(std::span<const Site> zs, std::span<const Edge> xs = {});
  int edge_tree(std::span<const Site> zs, std::span<const Edge> xs = {});
  bool any_approximate() const { return approximate_; }
  const CylinderGeometry& geometry() const { return geom_; }

 private:
  using Key = std::pair<std::vector<Site>, std::vector<Edge>>;
  Key normalize(std::span<const Site> zs, std::span<const Edge> xs) const;

  CylinderGeometry geom_;
  TreeDistanceOptions opts_;
  std::mutex mu_;
  std::map<Key, int> tree_;
  std::map<Key, int> edge_;
  bool approximate_ = false;
};

std::string to_string(const Site& z);
std::string to_string(const Edge& e);

}  // namespace cylising
