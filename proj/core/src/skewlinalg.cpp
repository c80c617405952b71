#include "cylising/skewlinalg.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace cylising {

SkewMatrix::SkewMatrix(int dim) : dim_(dim) {
  if (dim < 0) throw std::invalid_argument("SkewMatrix: negative dimension");
  upper_.assign(static_cast<std::size_t>(dim) * (dim > 0 ? dim - 1 : 0) / 2, cplx{});
}

std::size_t SkewMatrix::offset(int i, int j) const {
  // row-major strict upper triangle, i < j
  return static_cast<std::size_t>(i) * (2 * dim_ - i - 1) / 2 + (j - i - 1);
}

cplx SkewMatrix::operator()(int i, int j) const {
  if (i == j) return {};
  return i < j ? upper_[offset(i, j)] : -upper_[offset(j, i)];
}

void SkewMatrix::set(int i, int j, cplx v) {
  if (i == j) throw std::invalid_argument("SkewMatrix: diagonal entries are zero");
  if (i < j)
    upper_[offset(i, j)] = v;
  else
    upper_[offset(j, i)] = -v;
}

SkewMatrix SkewMatrix::from_dense(const CMatrix& a, double tol) {
  if (a.rows() != a.cols()) throw std::invalid_argument("SkewMatrix: matrix not square");
  const int n = static_cast<int>(a.rows());
  double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  double defect = (a + a.transpose()).cwiseAbs().maxCoeff();
  if (defect > tol * scale)
    throw std::invalid_argument("SkewMatrix: antisymmetry defect " + std::to_string(defect));
  SkewMatrix s(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) s.set(i, j, 0.5 * (a(i, j) - a(j, i)));
  return s;
}

CMatrix SkewMatrix::dense() const {
  CMatrix a = CMatrix::Zero(dim_, dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = i + 1; j < dim_; ++j) {
      a(i, j) = (*this)(i, j);
      a(j, i) = -a(i, j);
    }
  return a;
}

SkewMatrix SkewMatrix::minor(const std::vector<int>& idx) const {
  const int n = static_cast<int>(idx.size());
  SkewMatrix s(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) s.set(i, j, (*this)(idx[i], idx[j]));
  return s;
}

cplx pfaffian(const CMatrix& input) {
  const int n = static_cast<int>(input.rows());
  if (n == 0) return 1.0;
  if (n % 2 != 0) return 0.0;
  CMatrix a = input;
  cplx pf = 1.0;
  for (int k = 0; k + 1 < n; k += 2) {
    int kp = k + 1;
    double best = std::abs(a(k + 1, k));
    for (int i = k + 2; i < n; ++i)
      if (std::abs(a(i, k)) > best) {
        best = std::abs(a(i, k));
        kp = i;
      }
    if (kp != k + 1) {
      a.row(k + 1).swap(a.row(kp));
      a.col(k + 1).swap(a.col(kp));
      pf = -pf;
    }
    if (a(k + 1, k) == cplx{}) return 0.0;
    pf *= a(k, k + 1);
    if (k + 2 < n) {
      const int r = n - k - 2;
      Eigen::VectorXcd tau = a.row(k).tail(r).transpose() / a(k, k + 1);
      Eigen::VectorXcd col = a.col(k + 1).tail(r);
      a.bottomRightCorner(r, r) += tau * col.transpose() - col * tau.transpose();
    }
  }
  return pf;
}

cplx pfaffian(const SkewMatrix& a) { return pfaffian(a.dense()); }

namespace {

cplx matching_sum(const SkewMatrix& a, std::vector<int>& rest) {
  if (rest.empty()) return 1.0;
  const int first = rest.front();
  cplx total = 0.0;
  for (std::size_t p = 1; p < rest.size(); ++p) {
    const int partner = rest[p];
    cplx w = a(first, partner);
    if (w == cplx{}) continue;
    std::vector<int> sub;
    sub.reserve(rest.size() - 2);
    for (std::size_t q = 1; q < rest.size(); ++q)
      if (q != p) sub.push_back(rest[q]);
    const double sign = (p % 2 == 1) ? 1.0 : -1.0;
    total += sign * w * matching_sum(a, sub);
  }
  return total;
}

}  // namespace

cplx pfaffian_bruteforce(const SkewMatrix& a) {
  if (a.dim() > 12) throw std::invalid_argument("pfaffian_bruteforce: dimension > 12");
  if (a.dim() % 2 != 0) return 0.0;
  std::vector<int> idx(a.dim());
  for (int i = 0; i < a.dim(); ++i) idx[i] = i;
  return matching_sum(a, idx);
}

cplx determinant(const CMatrix& a) {
  if (a.rows() == 0) return 1.0;
  return a.partialPivLu().determinant();
}

void for_each_partition(std::uint32_t mask,
                        const std::function<void(const std::vector<std::uint32_t>&)>& f) {
  std::vector<std::uint32_t> blocks;
  std::function<void(std::uint32_t)> rec = [&](std::uint32_t rest) {
    if (rest == 0) {
      f(blocks);
      return;
    }
    const std::uint32_t low = rest & (~rest + 1);
    const std::uint32_t others = rest ^ low;
    // enumerate all subsets of `others` to join the lowest element
    std::uint32_t sub = others;
    while (true) {
      blocks.push_back(low | sub);
      rec(others ^ sub);
      blocks.pop_back();
      if (sub == 0) break;
      sub = (sub - 1) & others;
    }
  };
  rec(mask);
}

namespace {

cplx lookup(const SubsetMap& m, std::uint32_t s) {
  auto it = m.find(s);
  if (it == m.end()) throw std::invalid_argument("cumulant map: missing subset " + std::to_string(s));
  return it->second;
}

}  // namespace

SubsetMap moments_to_cumulants(const SubsetMap& moments, int m) {
  if (m < 0 || m > 20) throw std::invalid_argument("moments_to_cumulants: unsupported size");
  std::vector<double> fact(m + 1, 1.0);
  for (int i = 1; i <= m; ++i) fact[i] = fact[i - 1] * i;
  SubsetMap out;
  const std::uint32_t full = (1u << m) - 1;
  for (std::uint32_t s = 1; s <= full; ++s) {
    cplx acc = 0.0;
    for_each_partition(s, [&](const std::vector<std::uint32_t>& blocks) {
      const int k = static_cast<int>(blocks.size());
      cplx term = ((k - 1) % 2 == 0 ? 1.0 : -1.0) * fact[k - 1];
      for (auto b : blocks) term *= lookup(moments, b);
      acc += term;
    });
    out[s] = acc;
  }
  return out;
}

SubsetMap cumulants_to_moments(const SubsetMap& cumulants, int m) {
  if (m < 0 || m > 20) throw std::invalid_argument("cumulants_to_moments: unsupported size");
  SubsetMap out;
  const std::uint32_t full = (1u << m) - 1;
  for (std::uint32_t s = 1; s <= full; ++s) {
    cplx acc = 0.0;
    for_each_partition(s, [&](const std::vector<std::uint32_t>& blocks) {
      cplx term = 1.0;
      for (auto b : blocks) term *= lookup(cumulants, b);
      acc += term;
    });
    out[s] = acc;
  }
  return out;
}

}  // namespace cylising
