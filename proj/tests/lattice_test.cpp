#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "cylising/lattice.hpp"

namespace cylising {
namespace {

TEST(Geometry, RejectsOddCircumference) {
  EXPECT_THROW(CylinderGeometry(5, 3), std::invalid_argument);
  EXPECT_THROW(CylinderGeometry(4, 0), std::invalid_argument);
  const CylinderGeometry g(4, 3);
  EXPECT_EQ(g.site_count(), 12);
  EXPECT_EQ(g.closure_site_count(), 20);
}

TEST(Geometry, WrapCountsSeamCrossings) {
  const CylinderGeometry g(8, 3);
  int parity = 0;
  EXPECT_EQ(g.wrap(9, 2, &parity), (Site{1, 2}));
  EXPECT_EQ(parity, 1);
  EXPECT_EQ(g.wrap(0, 2, &parity), (Site{8, 2}));
  EXPECT_EQ(parity, 1);
  EXPECT_EQ(g.wrap(17, 2, &parity), (Site{1, 2}));
  EXPECT_EQ(parity, 0);
}

TEST(Geometry, EdgeValidity) {
  const CylinderGeometry g(4, 3);
  EXPECT_TRUE(g.valid_edge({{4, 1}, Direction::horizontal}));
  EXPECT_TRUE(g.valid_edge({{1, 2}, Direction::vertical}));
  EXPECT_FALSE(g.valid_edge({{1, 3}, Direction::vertical}));
  EXPECT_FALSE(g.valid_edge({{1, 0}, Direction::horizontal}));
  EXPECT_EQ(g.other_end({{4, 1}, Direction::horizontal}), (Site{1, 1}));
  EXPECT_EQ(g.edges().size(), 4u * 3u + 4u * 2u);
}

TEST(PerL, Examples) {
  EXPECT_EQ(per_L(7, 8), -1);
  EXPECT_EQ(per_L(0, 8), 0);
  // Floor formula at the tie: 4 - 8 * floor(1) = -4, so the range is [-L/2, L/2).
  EXPECT_EQ(per_L(4, 8), -4);
  EXPECT_EQ(per_L(-4, 8), -4);
}

TEST(PerL, PeriodicWithRange) {
  for (int L : {2, 4, 8, 12})
    for (int y = -3 * L; y <= 3 * L; ++y) {
      const int v = per_L(y, L);
      EXPECT_EQ(v, per_L(y + L, L));
      EXPECT_GE(2 * v, -L);
      EXPECT_LT(2 * v, L);
      EXPECT_EQ((y - v) % L, 0);
    }
}

TEST(AlphaSign, Examples) {
  const CylinderGeometry g(12, 4);
  const std::vector<Site> a{{1, 1}, {2, 1}}, b{{1, 1}, {12, 1}}, c{{2, 1}, {12, 2}, {11, 3}};
  EXPECT_EQ(alpha_sign(a, g), 0);
  EXPECT_EQ(alpha_sign(b, g), 1);
  EXPECT_EQ(alpha_sign(c, g), 1);
}

TEST(TreeDistance, Examples) {
  const CylinderGeometry g(8, 5);
  const std::vector<Edge> one_edge{{{3, 2}, Direction::horizontal}};
  EXPECT_EQ(tree_distance({}, one_edge, g).value, 1);
  const std::vector<Site> pair{{3, 2}, {4, 2}}, gap{{1, 1}, {3, 1}};
  EXPECT_EQ(tree_distance(pair, {}, g).value, 1);
  EXPECT_EQ(tree_distance(gap, {}, g).value, 2);
}

TEST(TreeDistance, SteinerPointBeatsSpanningTree) {
  const CylinderGeometry g(8, 5);
  const std::vector<Site> tri{{1, 2}, {3, 1}, {2, 3}};
  EXPECT_EQ(tree_distance(tri, {}, g).value, 4);
}

TEST(EdgeTreeDistance, Examples) {
  const CylinderGeometry g(8, 5);
  const std::vector<Site> low{{1, 1}};
  EXPECT_EQ(edge_tree_distance(low, {}, g).value, 1);
  const CylinderGeometry tall(40, 9);
  const std::vector<Site> mid{{1, 5}};
  EXPECT_EQ(edge_tree_distance(mid, {}, tall).value, 5);
  EXPECT_EQ(edge_tree_distance({}, {}, g).value, 0);
}

TEST(EdgeTreeDistance, WindingCountsAsEdgeCondition) {
  const CylinderGeometry g(12, 21);
  const std::vector<Site> far{{1, 11}, {6, 11}};
  EXPECT_EQ(edge_tree_distance(far, {}, g).value, tree_distance(far, {}, g).value);
}

class TreeDistanceProperties : public ::testing::Test {
 protected:
  CylinderGeometry g{8, 5};
  std::mt19937_64 rng{42};
  Site random_site(int lo = 1) {
    return {std::uniform_int_distribution<int>(1, g.L())(rng),
            std::uniform_int_distribution<int>(lo, g.M())(rng)};
  }
};

TEST_F(TreeDistanceProperties, PairsMatchCylinderMetric) {
  for (int i = 0; i < 200; ++i) {
    const std::vector<Site> zs{random_site(), random_site()};
    const int expected = std::abs(per_L(zs[0].x1 - zs[1].x1, g.L())) + std::abs(zs[0].x2 - zs[1].x2);
    EXPECT_EQ(tree_distance(zs, {}, g).value, expected);
    TreeDistanceOptions surrogate;
    surrogate.exact_cap = 0;
    EXPECT_EQ(tree_distance(zs, {}, g, surrogate).value, expected);
  }
}

TEST_F(TreeDistanceProperties, SymmetryInvariance) {
  for (int i = 0; i < 100; ++i) {
    std::vector<Site> zs{random_site(), random_site(), random_site()};
    const std::vector<Edge> xs{{random_site(), Direction::horizontal}};
    const int d = tree_distance(zs, xs, g).value;
    const int de = edge_tree_distance(zs, xs, g).value;
    std::ranges::reverse(zs);
    EXPECT_EQ(tree_distance(zs, xs, g).value, d);
    const int dx = std::uniform_int_distribution<int>(1, g.L())(rng);
    std::vector<Site> moved, r1, r2;
    for (const auto& z : zs) {
      moved.push_back(g.translate(z, dx));
      r1.push_back(g.reflect1(z));
      r2.push_back(g.reflect2(z));
    }
    const std::vector<Edge> xm{g.translate(xs[0], dx)}, x1{g.reflect1(xs[0])}, x2{g.reflect2(xs[0])};
    EXPECT_EQ(tree_distance(moved, xm, g).value, d);
    EXPECT_EQ(tree_distance(r1, x1, g).value, d);
    EXPECT_EQ(tree_distance(r2, x2, g).value, d);
    EXPECT_EQ(edge_tree_distance(moved, xm, g).value, de);
    EXPECT_EQ(edge_tree_distance(r2, x2, g).value, de);
  }
}

TEST_F(TreeDistanceProperties, MonotoneAndEdgeBound) {
  for (int i = 0; i < 100; ++i) {
    std::vector<Site> zs{random_site(), random_site()};
    const int d = tree_distance(zs, {}, g).value;
    const int de = edge_tree_distance(zs, {}, g).value;
    int to_boundary = g.M();
    for (const auto& z : zs) to_boundary = std::min({to_boundary, z.x2, g.M() + 1 - z.x2});
    EXPECT_LE(de, d + to_boundary);
    EXPECT_GE(de, d);
    zs.push_back(random_site());
    EXPECT_GE(tree_distance(zs, {}, g).value, d);
    EXPECT_GE(edge_tree_distance(zs, {}, g).value, de);
  }
}

TEST(DistanceCache, MatchesDirectEvaluation) {
  const CylinderGeometry g(12, 5);
  DistanceCache cache(g);
  const std::vector<Site> zs{{2, 1}, {4, 3}, {3, 5}};
  EXPECT_EQ(cache.tree(zs), tree_distance(zs, {}, g).value);
  EXPECT_EQ(cache.edge_tree(zs), edge_tree_distance(zs, {}, g).value);
  std::vector<Site> shifted;
  for (const auto& z : zs) shifted.push_back(g.translate(z, 5));
  EXPECT_EQ(cache.tree(shifted), cache.tree(zs));
  EXPECT_FALSE(cache.any_approximate());
}

}  // namespace
}  // namespace cylising
