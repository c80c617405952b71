#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "cylising/skewlinalg.hpp"

namespace cylising {
namespace {

class RandomSkew : public ::testing::Test {
 protected:
  std::mt19937_64 rng{7};
  std::uniform_real_distribution<double> u{-1.0, 1.0};
  SkewMatrix random(int n) {
    SkewMatrix a(n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) a.set(i, j, cplx(u(rng), u(rng)));
    return a;
  }
};

TEST(Pfaffian, SmallCases) {
  EXPECT_EQ(pfaffian(SkewMatrix(0)), cplx(1.0));
  SkewMatrix two(2);
  two.set(0, 1, cplx(2.5, -1.0));
  EXPECT_EQ(pfaffian(two), cplx(2.5, -1.0));
  EXPECT_EQ(pfaffian_bruteforce(two), cplx(2.5, -1.0));

  SkewMatrix four(4);
  const double a12 = 1.1, a13 = -0.7, a14 = 0.3, a23 = 2.0, a24 = -1.3, a34 = 0.9;
  four.set(0, 1, a12);
  four.set(0, 2, a13);
  four.set(0, 3, a14);
  four.set(1, 2, a23);
  four.set(1, 3, a24);
  four.set(2, 3, a34);
  const double expected = a12 * a34 - a13 * a24 + a14 * a23;
  EXPECT_NEAR(pfaffian(four).real(), expected, 1e-15);
  EXPECT_NEAR(pfaffian_bruteforce(four).real(), expected, 1e-15);
  EXPECT_EQ(pfaffian(SkewMatrix(3)), cplx(0.0));
}

TEST(Pfaffian, StorageIsAntisymmetric) {
  SkewMatrix a(3);
  a.set(2, 0, cplx(1.5));
  EXPECT_EQ(a(0, 2), cplx(-1.5));
  EXPECT_EQ(a(1, 1), cplx(0.0));
  CMatrix bad = CMatrix::Zero(2, 2);
  bad(0, 1) = 1.0;
  bad(1, 0) = 1.0;
  EXPECT_THROW(SkewMatrix::from_dense(bad), std::invalid_argument);
}

TEST_F(RandomSkew, SquareEqualsDeterminant) {
  for (int n : {4, 10, 20, 40})
    for (int k = 0; k < 20; ++k) {
      const SkewMatrix a = random(n);
      const cplx pf = pfaffian(a);
      const cplx det = determinant(a.dense());
      EXPECT_LE(std::abs(pf * pf - det), 1e-10 * std::abs(det)) << "n = " << n;
    }
}

TEST_F(RandomSkew, MatchesBruteForce) {
  for (int n = 2; n <= 12; n += 2)
    for (int k = 0; k < 100; ++k) {
      const SkewMatrix a = random(n);
      const cplx bf = pfaffian_bruteforce(a);
      EXPECT_LE(std::abs(pfaffian(a) - bf), 1e-12 * std::max(1.0, std::abs(bf)));
    }
  EXPECT_THROW(pfaffian_bruteforce(SkewMatrix(14)), std::invalid_argument);
}

TEST_F(RandomSkew, PermutationMultipliesBySignature) {
  for (int k = 0; k < 50; ++k) {
    const int n = 8;
    const SkewMatrix a = random(n);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    int inversions = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) inversions += perm[i] > perm[j];
    const cplx sign = inversions % 2 ? -1.0 : 1.0;
    EXPECT_LE(std::abs(pfaffian(a.minor(perm)) - sign * pfaffian(a)), 1e-12 * std::abs(pfaffian(a)));
  }
}

TEST(Cumulants, LowOrders) {
  SubsetMap m{{1u, 0.3}};
  EXPECT_EQ(moments_to_cumulants(m, 1).at(1u), cplx(0.3));
  SubsetMap m2{{1u, 0.3}, {2u, -0.5}, {3u, 0.7}};
  EXPECT_NEAR(moments_to_cumulants(m2, 2).at(3u).real(), 0.7 - 0.3 * -0.5, 1e-15);
  SubsetMap missing{{1u, 0.3}, {3u, 0.7}};
  EXPECT_THROW(moments_to_cumulants(missing, 2), std::invalid_argument);
}

TEST(Cumulants, ThirdOrderMatchesLogExpansion) {
  // log(1 + x) expanded to third order in the multilinear generating function.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SubsetMap m;
  for (std::uint32_t s = 1; s < 8; ++s) m[s] = u(rng);
  auto mo = [&](std::uint32_t s) { return m.at(s).real(); };
  const double k123 = mo(7) - mo(1) * mo(6) - mo(2) * mo(5) - mo(4) * mo(3) + 2 * mo(1) * mo(2) * mo(4);
  EXPECT_NEAR(moments_to_cumulants(m, 3).at(7u).real(), k123, 1e-13);
}

TEST(Cumulants, RoundTrip) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int m = 1; m <= 6; ++m) {
    SubsetMap moments;
    for (std::uint32_t s = 1; s < (1u << m); ++s) moments[s] = cplx(u(rng), u(rng));
    const SubsetMap back = cumulants_to_moments(moments_to_cumulants(moments, m), m);
    for (const auto& [s, v] : moments) EXPECT_LE(std::abs(back.at(s) - v), 1e-12) << "m = " << m;
  }
}

TEST(Partitions, CountsAreBellNumbers) {
  const int bell[] = {1, 1, 2, 5, 15, 52, 203};
  for (int k = 1; k <= 6; ++k) {
    int count = 0;
    for_each_partition((1u << k) - 1, [&](const std::vector<std::uint32_t>& blocks) {
      std::uint32_t seen = 0;
      for (auto b : blocks) {
        EXPECT_EQ(seen & b, 0u);
        seen |= b;
      }
      EXPECT_EQ(seen, (1u << k) - 1);
      ++count;
    });
    EXPECT_EQ(count, bell[k]);
  }
}

}  // namespace
}  // namespace cylising
