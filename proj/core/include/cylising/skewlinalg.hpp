#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include <Eigen/Dense>

namespace cylising {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

// Antisymmetric complex matrix; only the strict upper triangle is stored.
class SkewMatrix {
 public:
  SkewMatrix() = default;
  explicit SkewMatrix(int dim);
  // Builds from a full matrix; throws if the antisymmetry defect exceeds tol.
  static SkewMatrix from_dense(const CMatrix& a, double tol = 1e-12);

  int dim() const { return dim_; }
  cplx operator()(int i, int j) const;
  void set(int i, int j, cplx v);  // sets A[i][j] = v and A[j][i] = -v (i != j)
  CMatrix dense() const;
  // Principal submatrix on the given indices (in the given order).
  SkewMatrix minor(const std::vector<int>& idx) const;

 private:
  int dim_ = 0;
  std::vector<cplx> upper_;
  std::size_t offset(int i, int j) const;
};

// Pivoted skew elimination (Parlett-Reid); Pf of dimension 0 is 1, odd dimension gives 0.
cplx pfaffian(const SkewMatrix& a);
cplx pfaffian(const CMatrix& a);

// Perfect-matching expansion; dimension <= 12.
cplx pfaffian_bruteforce(const SkewMatrix& a);

cplx determinant(const CMatrix& a);

// Subsets of {0..m-1} are encoded as bit masks.
using SubsetMap = std::map<std::uint32_t, cplx>;

// Set-partition Moebius inversion; every nonempty subset of {0..m-1} must be present.
SubsetMap moments_to_cumulants(const SubsetMap& moments, int m);
// Inverse map: moment(S) = sum over partitions of S of the product of cumulants.
SubsetMap cumulants_to_moments(const SubsetMap& cumulants, int m);

// Calls f(blocks) for every set partition of the bits in mask.
void for_each_partition(std::uint32_t mask,
                        const std::function<void(const std::vector<std::uint32_t>&)>& f);

}  // namespace cylising
