#include <gtest/gtest.h>

#include <cmath>
#include <tuple>

#include "cylising/freecorr.hpp"

namespace cylising {
namespace {

double enumerated_cumulant(const CylinderGeometry& g, double beta, double J1, double J2,
                           const std::vector<Edge>& xs) {
  const int m = static_cast<int>(xs.size());
  const auto e = enumerate_gibbs(g, beta, J1, J2, xs);
  return moments_to_cumulants(e.moments, m).at((1u << m) - 1).real();
}

TEST(Enumeration, SmallestCylinderByHand) {
  // L = 2: both horizontal bonds join the same pair of spins, so Z = 4 cosh(2 beta J1).
  const double beta = 0.3;
  EXPECT_NEAR(enumerate_gibbs(CylinderGeometry(2, 1), beta, 1.0, 1.0, {}).Z, 4 * std::cosh(2 * beta), 1e-12);
}

TEST(Enumeration, InfiniteTemperatureMeansVanish) {
  const CylinderGeometry g(4, 2);
  const auto e = enumerate_gibbs(g, 0.0, 1.0, 1.0, g.edges());
  EXPECT_NEAR(e.Z, std::ldexp(1.0, 8), 1e-9);
  for (double m : e.means) EXPECT_NEAR(m, 0.0, 1e-15);
}

TEST(PartitionFunction, MatchesEnumeration) {
  const double bc = critical_beta(1.0, 1.0);
  for (auto [L, M, beta] : std::vector<std::tuple<int, int, double>>{{2, 1, 0.3}, {4, 2, bc}, {4, 3, 0.7}}) {
    const CylinderGeometry g(L, M);
    const double z = enumerate_gibbs(g, beta, 1.0, 1.0, {}).Z;
    EXPECT_NEAR(partition_function_free(g, beta, 1.0, 1.0) / z, 1.0, 1e-10);
  }
  const CylinderGeometry g(4, 3);
  EXPECT_NEAR(partition_function_free(g, 0.4, 1.0, 1.7) / enumerate_gibbs(g, 0.4, 1.0, 1.7, {}).Z, 1.0, 1e-10);
}

TEST(PartitionFunction, MassivePfaffianFactorizes) {
  const CylinderGeometry g(4, 3);
  const double beta = 0.5;
  const auto parts = partition_function_parts(g, beta, 1.0, 1.0);
  EXPECT_LT(std::abs(parts.pf_massive - massive_pfaffian_blockwise(g, std::tanh(beta))), 1e-12);
}

class CriticalCorrelations : public ::testing::Test {
 protected:
  CylinderGeometry g{4, 3};
  double beta = critical_beta(1.0, 1.0);
  ModelParams p = ModelParams::from_couplings(beta, 1.0, 1.0);
  FreeEnergyCorrelator corr{g, p};
};

TEST_F(CriticalCorrelations, SingleVerticalEdge) {
  const Edge x{{2, 1}, Direction::vertical};
  const auto table = critical_propagator_fourier(g, p);
  const double g_pm = table.entry(+1, {2, 1}, -1, {2, 2}).real();
  EXPECT_NEAR(corr.bilinear_moment({x}), (1 - p.t2 * p.t2) * g_pm, 1e-14);
  EXPECT_NEAR(corr.energy_moment({x}), p.t2 + (1 - p.t2 * p.t2) * g_pm, 1e-14);
  EXPECT_NEAR(corr.energy_moment({x}), enumerate_gibbs(g, beta, 1.0, 1.0, {x}).means[0], 1e-12);
}

TEST_F(CriticalCorrelations, PairMomentsMatchEnumeration) {
  const auto edges = g.edges();
  for (std::size_t i = 0; i < edges.size(); i += 3)
    for (std::size_t j = i + 1; j < edges.size(); j += 2) {
      const std::vector<Edge> xs{edges[i], edges[j]};
      const auto e = enumerate_gibbs(g, beta, 1.0, 1.0, xs);
      EXPECT_NEAR(corr.energy_moment(xs), e.moments.at(3u).real(), 1e-10);
      EXPECT_NEAR(corr.energy_cumulant(xs), enumerated_cumulant(g, beta, 1.0, 1.0, xs), 1e-10);
      EXPECT_NEAR(corr.energy_cumulant(xs),
                  corr.energy_moment(xs) - corr.energy_moment({xs[0]}) * corr.energy_moment({xs[1]}), 1e-14);
    }
}

TEST_F(CriticalCorrelations, TriplesMatchEnumeration) {
  const std::vector<std::vector<Edge>> tuples{
      {{{1, 1}, Direction::horizontal}, {{2, 2}, Direction::horizontal}, {{4, 3}, Direction::horizontal}},
      {{{1, 1}, Direction::vertical}, {{2, 2}, Direction::vertical}, {{3, 1}, Direction::vertical}},
      {{{4, 1}, Direction::horizontal}, {{2, 2}, Direction::vertical}, {{1, 3}, Direction::horizontal}}};
  for (const auto& xs : tuples)
    EXPECT_NEAR(corr.energy_cumulant(xs), enumerated_cumulant(g, beta, 1.0, 1.0, xs), 1e-9);
}

TEST_F(CriticalCorrelations, RepeatedEdgesRejected) {
  const Edge x{{1, 1}, Direction::horizontal};
  EXPECT_THROW(corr.energy_moment({x, x}), std::invalid_argument);
  EXPECT_THROW(corr.energy_moment({Edge{{1, 3}, Direction::vertical}}), std::invalid_argument);
}

TEST_F(CriticalCorrelations, MomentsFromCumulantsRoundTrip) {
  const std::vector<Edge> xs{{{1, 1}, Direction::horizontal}, {{2, 2}, Direction::vertical},
                             {{3, 2}, Direction::horizontal}, {{4, 3}, Direction::horizontal}};
  const SubsetMap moments = corr.energy_moments(xs);
  const SubsetMap back = cumulants_to_moments(moments_to_cumulants(moments, 4), 4);
  for (const auto& [s, v] : moments) EXPECT_LT(std::abs(back.at(s) - v), 1e-13);
}

TEST_F(CriticalCorrelations, TranslationAndReflectionInvariance) {
  const std::vector<Edge> xs{{{1, 1}, Direction::horizontal}, {{2, 2}, Direction::vertical},
                             {{3, 3}, Direction::horizontal}};
  const double base = corr.energy_cumulant(xs);
  for (int dx = 1; dx < 4; ++dx) {
    std::vector<Edge> moved;
    for (const auto& x : xs) moved.push_back(g.translate(x, dx));
    EXPECT_NEAR(corr.energy_cumulant(moved), base, 1e-12);
  }
  std::vector<Edge> r1, r2;
  for (const auto& x : xs) {
    r1.push_back(g.reflect1(x));
    r2.push_back(g.reflect2(x));
  }
  EXPECT_NEAR(corr.energy_cumulant(r1), base, 1e-12);
  EXPECT_NEAR(corr.energy_cumulant(r2), base, 1e-12);
}

TEST(OffCritical, DirectInversionMatchesEnumeration) {
  const CylinderGeometry g(4, 3);
  const double beta = 0.35;
  const auto p = ModelParams::from_couplings(beta, 1.0, 1.3);
  const FreeEnergyCorrelator corr(g, p);
  const std::vector<Edge> xs{{{4, 1}, Direction::horizontal}, {{2, 2}, Direction::vertical},
                             {{1, 3}, Direction::horizontal}};
  const auto e = enumerate_gibbs(g, beta, 1.0, 1.3, xs);
  const SubsetMap moments = corr.energy_moments(xs);
  for (const auto& [s, v] : e.moments) EXPECT_NEAR(moments.at(s).real(), v.real(), 1e-12);
}

TEST(ScalingCorrelation, TwoPointPfaffian) {
  const auto p = ModelParams::critical(0.5);
  const std::vector<std::array<double, 2>> pts{{0.3, 0.4}, {0.7, 0.6}};
  const Block g = scaling_propagator(0.3, 0.4, 0.7, 0.6, 1.0, 1.0, p);
  const double pf = (-g(0, 0) * g(1, 1) + g(0, 1) * g(1, 0)).real();
  const double t2 = p.t2_star;
  EXPECT_NEAR(scaling_correlation(pts, {Direction::vertical, Direction::vertical}, 1, 1, p),
              (1 - t2 * t2) * (1 - t2 * t2) * pf, 1e-12);
  EXPECT_NEAR(scaling_correlation(pts, {Direction::horizontal, Direction::vertical}, 1, 1, p),
              2 * t2 * (1 - t2 * t2) * pf, 1e-12);
}

TEST(ScalingCorrelation, RescalingCovariance) {
  const auto p = ModelParams::critical(0.5);
  const std::vector<std::array<double, 2>> pts{{0.3, 0.4}, {0.7, 0.6}, {0.5, 0.2}};
  const std::vector<Direction> labels{Direction::vertical, Direction::horizontal, Direction::vertical};
  const double base = scaling_correlation(pts, labels, 1, 1, p);
  for (double xi : {2.0, 0.5}) {
    std::vector<std::array<double, 2>> scaled;
    for (const auto& q : pts) scaled.push_back({xi * q[0], xi * q[1]});
    EXPECT_NEAR(scaling_correlation(scaled, labels, xi, xi, p) * std::pow(xi, 3), base, 1e-10 * std::abs(base));
  }
  EXPECT_THROW(scaling_correlation({{0.3, 0.4}, {0.3, 0.4}}, {Direction::vertical, Direction::vertical}, 1, 1, p),
               std::invalid_argument);
}

TEST(ScalingCorrelation, LatticeCumulantConverges) {
  const auto p = ModelParams::critical(0.5);
  const std::vector<std::array<double, 2>> pts{{0.25, 0.375}, {0.75, 0.625}};
  const double limit = scaling_correlation(pts, {Direction::vertical, Direction::vertical}, 1, 1, p);
  double previous = INFINITY;
  for (int n = 4; n <= 7; ++n) {
    const double a = std::ldexp(1.0, -n);
    const auto g = lattice_for_spacing(1.0, 1.0, a);
    const FreeEnergyCorrelator corr(g, p);
    const std::vector<Edge> xs{{lattice_site_for_point(0.25, 0.375, a, g), Direction::vertical},
                               {lattice_site_for_point(0.75, 0.625, a, g), Direction::vertical}};
    const double err = std::abs(corr.energy_cumulant(xs) / (a * a) - limit);
    EXPECT_LT(err, previous);
    previous = err;
  }
}

}  // namespace
}  // namespace cylising
