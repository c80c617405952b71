#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "cylising/kernelcalc.hpp"

namespace cylising::verify {

// E[phi(Q_1) ... phi(Q_k)] for plain labels: Pfaffian of the covariance of the concatenated tuple.
double gaussian_moment(const std::vector<std::vector<FieldLabel>>& qs, const Covariance& g);

// Mixed derivative d^s/da_1..da_s of log E[prod_i (1 + a_i phi(Q_i))] at a = 0, by central
// differences with two Richardson levels (s <= 4).
double cumulant_by_finite_differences(const std::vector<std::vector<FieldLabel>>& qs,
                                      const Covariance& g, double step = 1e-2);

// Dense Grassmann algebra on at most 64 generators; monomials are bit masks in increasing order.
class GrassmannElement {
 public:
  using Map = std::map<std::uint64_t, double>;

  GrassmannElement() = default;
  static GrassmannElement scalar(double c);
  static GrassmannElement generator(int i);

  const Map& terms() const { return c_; }
  double constant() const;

  GrassmannElement& operator+=(const GrassmannElement& o);
  GrassmannElement& operator*=(double c);
  friend GrassmannElement operator+(GrassmannElement a, const GrassmannElement& b) { return a += b; }
  friend GrassmannElement operator*(double c, GrassmannElement a) { return a *= c; }
  friend GrassmannElement operator*(const GrassmannElement& a, const GrassmannElement& b);

  // Terms with |coefficient| <= tol removed.
  void prune(double tol);

 private:
  Map c_;
};

// exp(x) for x with a nilpotent non-constant part.
GrassmannElement grassmann_exp(const GrassmannElement& x);
// log(x) for x with a positive constant term.
GrassmannElement grassmann_log(const GrassmannElement& x);

// log E_psi exp V(phi + psi) computed in the full algebra: sourceless plain-field kernel V,
// phi generators 0..n-1 for the n labels (sorted), psi generators n..2n-1, Gaussian psi with
// covariance g.  Returns the polynomial in phi keyed like expand_to_plain_fields, vacuum at {}.
Polynomial exact_effective_potential(const Kernel& v, const Covariance& g);

}  // namespace cylising::verify
