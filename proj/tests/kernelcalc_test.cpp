#include <gtest/gtest.h>

#include <cmath>

#include "cylising/kernelcalc.hpp"
#include "cylising/verify/random_kernels.hpp"

namespace cylising {
namespace {

using verify::KernelSampler;

FieldLabel phi(int omega, Site z, std::array<int, 2> D = {0, 0}) { return {omega, D, z}; }

Polynomial plain(const CylinderGeometry& g, std::vector<std::pair<std::vector<FieldLabel>, double>> terms) {
  Kernel k(g);
  for (auto& [f, v] : terms) k.add(f, {}, v);
  return expand_to_plain_fields(k);
}

double distance(const Kernel& a, const Kernel& b) {
  return polynomial_distance(expand_to_plain_fields(a), expand_to_plain_fields(b));
}

// Largest coefficient of a - b over monomials whose fields all lie on rows [lo, hi].
double distance_on_rows(const Kernel& a, const Kernel& b, int lo, int hi) {
  auto pa = expand_to_plain_fields(a), pb = expand_to_plain_fields(b);
  for (const auto& [k, v] : pb) pa[k] -= v;
  double d = 0;
  for (const auto& [k, v] : pa) {
    bool inside = true;
    for (const auto& f : k.fields) inside = inside && f.z.x2 >= lo && f.z.x2 <= hi;
    if (inside) d = std::max(d, std::abs(v));
  }
  return d;
}

// ---- labels and expansion --------------------------------------------------------------------

TEST(Kernel, RejectsInvalidLabels) {
  const CylinderGeometry g(12, 5);
  Kernel k(g);
  EXPECT_THROW(k.add({phi(1, {1, 1})}, {}, 1.0), KernelError);
  EXPECT_THROW(k.add({phi(1, {1, 1}, {2, 1}), phi(-1, {1, 1})}, {}, 1.0), KernelError);
  EXPECT_THROW(k.add({phi(3, {1, 1}), phi(-1, {1, 1})}, {}, 1.0), KernelError);
  EXPECT_THROW(k.add({phi(1, {1, 7}), phi(-1, {1, 1})}, {}, 1.0), KernelError);
  EXPECT_THROW(k.add({phi(1, {1, 6}, {0, 1}), phi(-1, {1, 1})}, {}, 1.0), KernelError);
  EXPECT_THROW(k.add({phi(2, {1, 1}, {1, 0}), phi(-2, {1, 1})}, {}, 1.0), KernelError);
  EXPECT_THROW(k.add({phi(2, {1, 0}), phi(-2, {1, 1})}, {}, 1.0), KernelError);
  EXPECT_THROW(k.add({phi(1, {1, 1}), phi(-1, {1, 1})}, {{{1, 5}, Direction::vertical}}, 1.0), KernelError);
  k.add({phi(1, {1, 0}), phi(-1, {1, 6})}, {}, 1.0);
  EXPECT_EQ(k.size(), 1u);
  EXPECT_EQ(sector_of(k.coefficients().begin()->first), (Sector{2, 0, 0}));
}

TEST(Expansion, HorizontalDerivativeAcrossSeam) {
  const CylinderGeometry g(12, 5);
  Kernel k(g);
  k.add({phi(1, {12, 2}, {1, 0}), phi(-1, {5, 3})}, {}, 1.0);
  // d_1 phi_{(L, r)} = -phi_{(1, r)} - phi_{(L, r)} with the antiperiodic wrap.
  const auto expect = plain(g, {{{phi(1, {1, 2}), phi(-1, {5, 3})}, -1.0}, {{phi(1, {12, 2}), phi(-1, {5, 3})}, -1.0}});
  EXPECT_EQ(polynomial_distance(expand_to_plain_fields(k), expect), 0.0);
}

TEST(Expansion, SecondDerivativeBinomial) {
  const CylinderGeometry g(12, 5);
  Kernel k(g);
  k.add({phi(1, {3, 2}, {0, 2}), phi(-1, {8, 1})}, {}, 1.0);
  const auto expect = plain(g, {{{phi(1, {3, 4}), phi(-1, {8, 1})}, 1.0},
                                {{phi(1, {3, 3}), phi(-1, {8, 1})}, -2.0},
                                {{phi(1, {3, 2}), phi(-1, {8, 1})}, 1.0}});
  EXPECT_EQ(polynomial_distance(expand_to_plain_fields(k), expect), 0.0);
}

TEST(Expansion, NullBoundaryFieldsAndPauli) {
  const CylinderGeometry g(12, 5);
  Kernel k(g);
  k.add({phi(1, {4, 0}), phi(-1, {2, 3})}, {}, 1.0);
  k.add({phi(-1, {4, 6}), phi(1, {2, 3})}, {}, 1.0);
  k.add({phi(1, {2, 3}), phi(1, {2, 3})}, {}, 1.0);
  EXPECT_TRUE(expand_to_plain_fields(k).empty());

  Kernel d(g);
  d.add({phi(1, {4, 0}, {0, 1}), phi(-1, {2, 3})}, {}, 1.0);
  const auto expect = plain(g, {{{phi(1, {4, 1}), phi(-1, {2, 3})}, 1.0}});
  EXPECT_EQ(polynomial_distance(expand_to_plain_fields(d), expect), 0.0);
}

TEST(Expansion, ReorderingSign) {
  const CylinderGeometry g(12, 5);
  Kernel a(g), b(g);
  a.add({phi(1, {2, 2}), phi(-1, {3, 2})}, {}, 1.5);
  b.add({phi(-1, {3, 2}), phi(1, {2, 2})}, {}, -1.5);
  EXPECT_TRUE(kernels_equivalent(a, b));
  EXPECT_FALSE(kernels_equivalent(a, 2.0 * b));
}

TEST(Equivalence, TrivialCases) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(1);
  const Kernel v = s.local_kernel(g, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}}, true, 20);
  EXPECT_TRUE(kernels_equivalent(v, v));
  Kernel padded = v;
  padded.add({phi(1, {7, 0}), phi(-1, {7, 2})}, {}, 3.0);
  padded.add({phi(-1, {7, 6}), phi(1, {7, 2}), phi(1, {8, 2}), phi(-1, {8, 1})}, {}, -1.0);
  EXPECT_TRUE(kernels_equivalent(v, padded));
  const Polynomial p = expand_to_plain_fields(v);
  EXPECT_EQ(polynomial_distance(expand_to_plain_fields(polynomial_kernel(g, p)), p), 0.0);
}

// ---- symmetries ------------------------------------------------------------------------------

TEST(Symmetries, GroupRelations) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(2);
  const Kernel v = s.local_kernel(g, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}}, false, 15);
  EXPECT_LT(distance(translate(v, g.L()), v), 1e-15);
  EXPECT_LT(distance(translate(translate(v, 5), 7), translate(v, 12)), 1e-15);
  EXPECT_LT(distance(reflect_horizontal(reflect_horizontal(v)), v), 1e-15);
  EXPECT_LT(distance(reflect_vertical(reflect_vertical(v)), v), 1e-15);
  EXPECT_LT(distance(antisymmetrize(v), v), 1e-15);
}

TEST(Symmetries, SymmetrizedKernelIsInvariant) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(3);
  const Kernel v = s.symmetric_kernel(g, {{2, 0, 0}, {2, 1, 0}}, false, 6);
  EXPECT_TRUE(v.antisymmetrized);
  EXPECT_TRUE(v.reflection_symmetrized);
  EXPECT_LT(distance(translate(v, 1), v), 1e-14);
  EXPECT_LT(distance(reflect_horizontal(v), v), 1e-14);
  EXPECT_LT(distance(reflect_vertical(v), v), 1e-14);
  EXPECT_LT(distance(symmetrize(v), v), 1e-14);
}

// ---- localization and interpolation ----------------------------------------------------------

TEST(InterpolationPath, VerticalThenShorterHorizontal) {
  const CylinderGeometry g(12, 5);
  const auto p = interpolation_path({2, 1}, {11, 3}, g);
  const std::vector<Site> expect{{2, 1}, {2, 2}, {2, 3}, {1, 3}, {12, 3}, {11, 3}};
  EXPECT_EQ(p, expect);
  // At a tie the leg stays away from the seam.
  const auto tie = interpolation_path({3, 2}, {9, 2}, g);
  EXPECT_EQ(tie.size(), 7u);
  EXPECT_EQ(tie[1], (Site{4, 2}));
}

TEST(TildeL, NeighbourPairsLocalizeWithSeamSign) {
  const CylinderGeometry g(12, 5);
  Kernel v(g);
  for (int r = 1; r <= g.M(); ++r)
    for (int x = 1; x <= g.L(); ++x) v.add({phi(1, {x, r}), phi(-1, g.wrap(x + 1, r))}, {}, 1.0);
  const Kernel out = tilde_L(v);
  EXPECT_EQ(out.size(), static_cast<std::size_t>(g.site_count()));
  double total = 0;
  for (int r = 1; r <= g.M(); ++r)
    for (int x = 1; x <= g.L(); ++x) {
      const double value = out.at({{phi(1, {x, r}), phi(-1, {x, r})}, {}});
      // The pair (L, 1) straddles the seam and carries (-1)^alpha = -1.
      EXPECT_EQ(value, x == g.L() ? -1.0 : 1.0);
      total += value;
    }
  EXPECT_EQ(total, g.site_count() - 2 * g.M());
}

TEST(TildeL, CommutesWithTranslation) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(4);
  const Kernel v = s.local_kernel(g, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}}, false, 20);
  for (int dx : {1, 5, 11}) {
    EXPECT_LT(distance(tilde_L(translate(v, dx)), translate(tilde_L(v), dx)), 1e-15);
    EXPECT_LT(distance(tilde_R(translate(v, dx)), translate(tilde_R(v), dx)), 1e-15);
  }
}

TEST(TildeR, SingleStepPath) {
  const CylinderGeometry g(12, 5);
  Kernel v(g);
  v.add({phi(1, {3, 2}), phi(-1, {4, 2})}, {}, 1.0);
  const Kernel r = tilde_R(v);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r.at({{phi(1, {3, 2}), phi(-1, {3, 2}, {1, 0})}, {}}), 1.0);
  EXPECT_TRUE(kernels_equivalent(tilde_L(v) + r, v));

  Kernel down(g);
  down.add({phi(1, {3, 4}), phi(-1, {3, 3})}, {}, 1.0);
  const Kernel rd = tilde_R(down);
  ASSERT_EQ(rd.size(), 1u);
  EXPECT_EQ(rd.at({{phi(1, {3, 4}), phi(-1, {3, 3}, {0, 1})}, {}}), -1.0);
}

TEST(TildeR, CoincidentPairsGiveNothing) {
  const CylinderGeometry g(12, 5);
  Kernel v(g);
  v.add({phi(1, {3, 2}), phi(-1, {3, 2})}, {}, 1.0);
  v.add({phi(1, {5, 2}, {1, 0}), phi(-1, {5, 2})}, {}, 1.0);
  EXPECT_TRUE(tilde_R(v).empty());
}

TEST(TildeLR, ReconstructRandomKernels) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(5);
  for (int i = 0; i < 30; ++i) {
    const Kernel v = s.local_kernel(g, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}}, false, 10);
    EXPECT_LT(distance(tilde_L(v) + tilde_R(v), v), 1e-13);
  }
  Kernel bad(g);
  bad.add({phi(1, {1, 1}, {1, 1}), phi(-1, {2, 1})}, {}, 1.0);
  EXPECT_THROW(tilde_L(bad), KernelError);
}

// ---- bulk family -----------------------------------------------------------------------------

TEST(BulkFamily, PauliCancellation) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(6);
  for (int i = 0; i < 20; ++i) {
    const Kernel v = s.local_kernel(g, {{4, 0, 0}}, false, 8);
    EXPECT_TRUE(expand_to_plain_fields(tilde_L(v)).empty());
    EXPECT_TRUE(expand_to_plain_fields(L_bulk(v)).empty());
  }
}

TEST(BulkFamily, DecompositionOfSymmetricKernels) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(7);
  for (int i = 0; i < 5; ++i) {
    const Kernel v = s.symmetric_kernel(g, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}, {2, 2, 0}}, false, 4);
    const Kernel l = L_bulk(v), r = R_bulk(v);
    EXPECT_LT(distance(l + r, v), 1e-12);
    for (const auto& sec : l.sectors()) EXPECT_TRUE(sec == (Sector{2, 0, 0}) || sec == (Sector{2, 1, 0}));
    EXPECT_TRUE(r.sector({2, 0, 0}).empty());
    EXPECT_TRUE(r.sector({2, 1, 0}).empty());
    EXPECT_TRUE(r.sector({4, 0, 0}).empty());
  }
}

TEST(BulkFamily, ProjectorRelations) {
  const CylinderGeometry g(12, 9);
  KernelSampler s(8);
  for (int i = 0; i < 3; ++i) {
    const Kernel v = s.bulk_form_kernel(g);
    const Kernel l = L_bulk(v), r = R_bulk(v);
    EXPECT_TRUE(L_bulk(r).empty());
    EXPECT_LT(distance(R_bulk(r), r), 1e-14);
    // Away from the ghost rows localization is idempotent; next to them the null fields make
    // the expanded comparison differ.
    EXPECT_LT(distance_on_rows(L_bulk(l), l, 3, g.M() - 2), 1e-13);
    EXPECT_LT(distance_on_rows(R_bulk(l), Kernel(g), 3, g.M() - 2), 1e-13);
  }
}

TEST(BulkFamily, RejectsWideSupportAndSources) {
  const CylinderGeometry g(12, 5);
  Kernel wide(g);
  wide.add({phi(1, {1, 2}), phi(-1, {6, 2})}, {}, 1.0);
  EXPECT_THROW(L_bulk(wide), KernelError);
  EXPECT_THROW(R_bulk(wide), KernelError);
  Kernel ok(g);
  ok.add({phi(1, {1, 2}), phi(-1, {5, 2})}, {}, 1.0);
  EXPECT_NO_THROW(L_bulk(ok));
  Kernel src(g);
  src.add({phi(1, {1, 2}), phi(-1, {1, 2})}, {{{1, 2}, Direction::horizontal}}, 1.0);
  EXPECT_THROW(L_bulk(src), KernelError);
}

// ---- edge family -----------------------------------------------------------------------------

TEST(EdgeFamily, AnchorIsNearestGhostRow) {
  const CylinderGeometry g(12, 5);
  EXPECT_EQ(boundary_anchor({4, 1}, g), (Site{4, 0}));
  EXPECT_EQ(boundary_anchor({4, 2}, g), (Site{4, 0}));
  EXPECT_EQ(boundary_anchor({4, 3}, g), (Site{4, 6}));
  EXPECT_EQ(boundary_anchor({4, 5}, g), (Site{4, 6}));
}

TEST(EdgeFamily, LocalizationCancels) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(9);
  for (int i = 0; i < 30; ++i) {
    const Kernel v = s.local_kernel(g, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}}, true, 10);
    EXPECT_TRUE(expand_to_plain_fields(tilde_L_edge(v.sector({2, 0, 0}))).empty());
    EXPECT_TRUE(expand_to_plain_fields(L_edge(v)).empty());
    EXPECT_EQ(L_edge(v).tag, KernelTag::edge);
  }
}

TEST(EdgeFamily, RemainderKeepsOtherSectors) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(10);
  for (int i = 0; i < 10; ++i) {
    const Kernel v = s.local_kernel(g, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}, {2, 2, 0}}, true, 12);
    const Kernel r = R_edge(v);
    for (Sector sec : {Sector{4, 0, 0}, Sector{2, 2, 0}}) {
      const Kernel a = r.sector(sec), b = v.sector(sec);
      EXPECT_EQ(a.coefficients(), b.coefficients());
    }
    EXPECT_LT(distance(tilde_L_edge(v.sector({2, 0, 0})) + tilde_R_edge(v.sector({2, 0, 0})), v.sector({2, 0, 0})),
              1e-13);
  }
}

TEST(EdgeFamily, DecompositionOfSymmetricKernels) {
  // R_E symmetrizes its (2,1) part, so the decomposition needs a symmetric input.
  const CylinderGeometry g(12, 5);
  KernelSampler s(15);
  for (int i = 0; i < 5; ++i) {
    const Kernel v = s.symmetric_kernel(g, {{2, 0, 0}, {2, 1, 0}, {4, 0, 0}}, true, 4);
    EXPECT_LT(distance(L_edge(v) + R_edge(v), v), 1e-12);
  }
}

// ---- source family ---------------------------------------------------------------------------

TEST(SourceFamily, LocalizesAtEdgeBase) {
  const CylinderGeometry g(12, 5);
  const Edge x{{4, 2}, Direction::horizontal};
  Kernel b(g);
  b.add({phi(1, {4, 2}), phi(-1, {5, 2})}, {x}, 1.0);
  const Kernel l = tilde_L_source(b);
  ASSERT_EQ(l.size(), 1u);
  EXPECT_EQ(l.at({{phi(1, {4, 2}), phi(-1, {4, 2})}, {x}}), 1.0);
  EXPECT_TRUE(kernels_equivalent(l + tilde_R_source(b), b));
}

TEST(SourceFamily, DecompositionAndRemainder) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(11);
  for (int i = 0; i < 5; ++i) {
    const Kernel b = s.source_kernel(g, 3);
    const Kernel r = R_source(b);
    EXPECT_TRUE(r.sector({2, 0, 1}).empty());
    EXPECT_LT(distance(L_source(b) + r, b), 1e-12);
  }
  Kernel mixed(g);
  mixed.add({phi(1, {4, 2}), phi(-1, {5, 2})}, {}, 1.0);
  EXPECT_THROW(L_source(mixed), KernelError);
  EXPECT_THROW(R_source(mixed), KernelError);
}

// ---- bulk / edge split -----------------------------------------------------------------------

TEST(KernelSplit, BulkFormHasNoEdgePart) {
  const CylinderGeometry g(12, 5);
  InfiniteVolumeKernel w;
  KernelShape sh;
  sh.omega = {+1, -1};
  sh.D = {{0, 0}, {1, 0}};
  sh.offset = {{0, 0}, {1, 1}};
  w[sh] = 0.7;
  const Kernel bulk = bulk_kernel(g, w);
  EXPECT_EQ(bulk.tag, KernelTag::bulk);
  EXPECT_EQ(bulk.size(), static_cast<std::size_t>(g.L() * (g.M() - 1)));
  const auto split = bulk_edge_kernel_split(bulk, w);
  EXPECT_TRUE(split.edge.empty());
  for (const auto& [k, v] : bulk.coefficients()) {
    EXPECT_TRUE(in_interior_support(k, g));
    EXPECT_EQ(representative_shape(k, g), sh);
  }
}

TEST(KernelSplit, WideShapesAreEdgeOnly) {
  const CylinderGeometry g(12, 5);
  InfiniteVolumeKernel w;
  KernelShape sh;
  sh.omega = {+1, -1};
  sh.D = {{0, 0}, {0, 0}};
  sh.offset = {{0, 0}, {5, 0}};
  w[sh] = 1.0;
  EXPECT_TRUE(bulk_kernel(g, w).empty());
  Kernel k(g);
  k.add({phi(1, {2, 2}), phi(-1, {7, 2})}, {}, 1.0);
  const auto split = bulk_edge_kernel_split(k, w);
  EXPECT_TRUE(split.bulk.empty());
  EXPECT_EQ(split.edge.coefficients(), k.coefficients());
}

TEST(KernelSplit, InteriorSupportAndShapes) {
  const CylinderGeometry g(12, 5);
  EXPECT_FALSE(in_interior_support({{phi(1, {2, 0}), phi(-1, {2, 1})}, {}}, g));
  EXPECT_FALSE(in_interior_support({{phi(1, {2, 5}, {0, 1}), phi(-1, {2, 1})}, {}}, g));
  EXPECT_TRUE(in_interior_support({{phi(1, {2, 4}, {0, 1}), phi(-1, {2, 1})}, {}}, g));
  const KernelKey across{{phi(1, {12, 3}), phi(-1, {1, 3})}, {}};
  const KernelShape sh = representative_shape(across, g);
  EXPECT_EQ(sh.offset[1], (std::array<int, 2>{1, 0}));
  const KernelKey moved{{phi(1, {5, 3}), phi(-1, {6, 3})}, {}};
  EXPECT_EQ(representative_shape(moved, g), sh);
}

// ---- norms -----------------------------------------------------------------------------------

TEST(Norms, CoincidentPointIsAbsoluteValue) {
  const CylinderGeometry g(12, 5);
  Kernel k(g);
  k.add({phi(1, {3, 3}), phi(-1, {3, 3})}, {}, -2.5);
  for (double kappa : {0.0, 0.1, 1.0}) EXPECT_DOUBLE_EQ(weighted_norm(k, {2, 0, 0}, NormFlavor::bulk, kappa), 2.5);
  EXPECT_THROW(weighted_norm(k, {2, 0, 0}, NormFlavor::bulk, -0.1), KernelError);
}

TEST(Norms, PairWeightAndSupOverAnchors) {
  const CylinderGeometry g(12, 5);
  Kernel k(g);
  k.add({phi(1, {3, 3}), phi(-1, {5, 3})}, {}, 1.0);
  k.add({phi(1, {3, 3}), phi(-1, {3, 4})}, {}, 1.0);
  k.add({phi(1, {8, 3}), phi(-1, {8, 3})}, {}, 3.0);
  const double kappa = 0.2;
  EXPECT_NEAR(weighted_norm(k, {2, 0, 0}, NormFlavor::bulk, kappa), 3.0, 1e-15);
  k *= 0.0;
  k.prune();
  k.add({phi(1, {3, 3}), phi(-1, {5, 3})}, {}, 1.0);
  k.add({phi(1, {3, 3}), phi(-1, {3, 4})}, {}, -1.0);
  EXPECT_NEAR(weighted_norm(k, {2, 0, 0}, NormFlavor::bulk, kappa), std::exp(2 * kappa) + std::exp(kappa), 1e-14);
  // The edge weight measures the distance to a ghost row as well.
  EXPECT_GE(weighted_norm(k, {2, 0, 0}, NormFlavor::edge, kappa), weighted_norm(k, {2, 0, 0}, NormFlavor::bulk, kappa));
}

TEST(Norms, SeminormProperties) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(12);
  for (int i = 0; i < 20; ++i) {
    const Kernel a = s.local_kernel(g, {{2, 0, 0}}, false, 8);
    const Kernel b = s.local_kernel(g, {{2, 0, 0}}, false, 8);
    for (auto flavor : {NormFlavor::bulk, NormFlavor::edge}) {
      const double na = weighted_norm(a, {2, 0, 0}, flavor, 0.1);
      const double nb = weighted_norm(b, {2, 0, 0}, flavor, 0.1);
      EXPECT_NEAR(weighted_norm(-3.0 * a, {2, 0, 0}, flavor, 0.1), 3.0 * na, 1e-12 * na);
      EXPECT_LE(weighted_norm(a + b, {2, 0, 0}, flavor, 0.1), (na + nb) * (1 + 1e-14));
      EXPECT_LE(na, weighted_norm(a, {2, 0, 0}, flavor, 0.2));
      EXPECT_EQ(weighted_norm(a, {4, 0, 0}, flavor, 0.1), 0.0);
    }
  }
}

TEST(Norms, SourceNormTakesSupOverProbes) {
  const CylinderGeometry g(12, 5);
  const Edge x{{4, 2}, Direction::horizontal}, y{{9, 3}, Direction::vertical};
  Kernel k(g);
  k.add({phi(1, {4, 2}), phi(-1, {4, 2})}, {x}, 1.0);
  k.add({phi(1, {9, 3}), phi(-1, {9, 3})}, {y}, 2.0);
  DistanceCache dist(g);
  const double at_x = source_norm_at(k, {2, 0, 1}, {x}, NormFlavor::source_bulk, 0.1, dist);
  const double at_y = source_norm_at(k, {2, 0, 1}, {y}, NormFlavor::source_bulk, 0.1, dist);
  EXPECT_GT(at_y, at_x);
  EXPECT_EQ(weighted_norm(k, {2, 0, 1}, NormFlavor::source_bulk, 0.1), std::max(at_x, at_y));
}

// ---- couplings and serialization -------------------------------------------------------------

TEST(RunningCouplings, BasisElements) {
  const CylinderGeometry g(8, 5);
  const auto nu = extract_running_couplings(basis_F_nu(g), 0);
  EXPECT_NEAR(nu.nu, 1.0, 1e-14);
  EXPECT_NEAR(nu.zeta, 0.0, 1e-14);
  EXPECT_NEAR(nu.eta, 0.0, 1e-14);
  EXPECT_LT(nu.residual, 1e-14);
  const auto scaled = extract_running_couplings(std::ldexp(1.0, -3) * basis_F_nu(g), -3);
  EXPECT_NEAR(scaled.nu, 1.0, 1e-14);
  EXPECT_EQ(scaled.h, -3);
}

TEST(RunningCouplings, RandomCombination) {
  const CylinderGeometry g(8, 5);
  const double a = 0.37, b = -1.25, c = 0.81;
  const Kernel k = a * basis_F_nu(g) + b * basis_F_zeta(g) + c * basis_F_eta(g);
  const auto rc = extract_running_couplings(k, 0);
  EXPECT_NEAR(rc.nu, a, 1e-13);
  EXPECT_NEAR(rc.zeta, b, 1e-13);
  EXPECT_NEAR(rc.eta, c, 1e-13);
  EXPECT_LT(rc.residual, 1e-13);
  Kernel extra = k;
  extra.add({phi(1, {2, 2}), phi(1, {2, 2}, {1, 0})}, {}, 0.5);
  EXPECT_GT(extract_running_couplings(extra, 0).residual, 0.1);
}

TEST(RunningCouplings, LocalizedBulkOutputIsAccepted) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(13);
  const Kernel v = s.symmetric_kernel(g, {{2, 0, 0}, {2, 1, 0}}, false, 4);
  EXPECT_NO_THROW(extract_running_couplings(L_bulk(v), 0));
  Kernel spread(g);
  spread.add({phi(1, {2, 2}), phi(-1, {3, 2})}, {}, 1.0);
  EXPECT_THROW(extract_running_couplings(spread, 0), KernelError);
  Kernel src(g);
  src.add({phi(1, {2, 2}), phi(-1, {2, 2})}, {{{2, 2}, Direction::vertical}}, 1.0);
  EXPECT_THROW(extract_running_couplings(src, 0), KernelError);
}

TEST(VertexRenorm, FreeObservableKernels) {
  for (double t1 : {0.3, 0.5, std::sqrt(2.0) - 1.0}) {
    const auto p = ModelParams::critical(t1);
    const auto z = extract_vertex_renorm(free_source_kernels(p));
    EXPECT_NEAR(z.Z1, 2 * p.t2_star, 1e-9);
    EXPECT_NEAR(z.Z2, 1 - p.t2_star * p.t2_star, 1e-12);
  }
}

TEST(InitialPotential, VanishesAtDressedEqualsBare) {
  const CylinderGeometry g(4, 3);
  const auto p = ModelParams::critical(0.5);
  EXPECT_TRUE(expand_to_plain_fields(initial_sourceless_potential(g, p)).empty() ||
              initial_sourceless_potential(g, p).max_abs() < 1e-15);
  EXPECT_GT(initial_sourceless_potential(g, p, 0.9).max_abs(), 1e-3);
}

TEST(Serialization, JsonRoundTrip) {
  const CylinderGeometry g(12, 5);
  KernelSampler s(14);
  Kernel k = s.source_kernel(g, 2) + s.local_kernel(g, {{2, 1, 0}, {4, 0, 0}}, true, 5);
  k.tag = KernelTag::edge;
  const Kernel back = kernel_from_json(kernel_to_json(k));
  EXPECT_EQ(back.coefficients(), k.coefficients());
  EXPECT_EQ(back.tag, KernelTag::edge);
  EXPECT_EQ(back.geometry(), g);
  EXPECT_EQ(back.antisymmetrized, k.antisymmetrized);
  EXPECT_THROW(kernel_from_json("{\"terms\": []}"), KernelError);
  EXPECT_THROW(kernel_from_json("not json"), KernelError);
}

}  // namespace
}  // namespace cylising
