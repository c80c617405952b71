#include "cylising/verify/oracles.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include "cylising/skewlinalg.hpp"

namespace cylising::verify {

double gaussian_moment(const std::vector<std::vector<FieldLabel>>& qs, const Covariance& g) {
  std::vector<FieldLabel> f;
  for (const auto& q : qs) f.insert(f.end(), q.begin(), q.end());
  if (f.size() % 2) return 0.0;
  const int n = static_cast<int>(f.size());
  SkewMatrix a(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) a.set(i, j, g(f[i], f[j]));
  return pfaffian(a).real();
}

double cumulant_by_finite_differences(const std::vector<std::vector<FieldLabel>>& qs,
                                      const Covariance& g, double step) {
  const int s = static_cast<int>(qs.size());
  if (s < 1 || s > 4) throw std::invalid_argument("cumulant_by_finite_differences: 1 <= s <= 4");
  std::vector<long double> m(1u << s);
  for (unsigned mask = 0; mask < m.size(); ++mask) {
    std::vector<std::vector<FieldLabel>> sub;
    for (int i = 0; i < s; ++i)
      if (mask >> i & 1u) sub.push_back(qs[i]);
    m[mask] = mask ? gaussian_moment(sub, g) : 1.0;
  }
  auto log_f = [&](const std::vector<long double>& a) {
    long double v = 0;
    for (unsigned mask = 0; mask < m.size(); ++mask) {
      long double w = m[mask];
      for (int i = 0; i < s; ++i)
        if (mask >> i & 1u) w *= a[i];
      v += w;
    }
    return std::log(v);
  };
  auto central = [&](long double h) {
    long double acc = 0;
    std::vector<long double> a(s);
    for (unsigned signs = 0; signs < (1u << s); ++signs) {
      long double sign = 1;
      for (int i = 0; i < s; ++i) {
        const bool neg = signs >> i & 1u;
        a[i] = neg ? -h : h;
        if (neg) sign = -sign;
      }
      acc += sign * log_f(a);
    }
    return acc / std::pow(2 * h, static_cast<long double>(s));
  };
  const long double h = step;
  const long double d0 = central(h), d1 = central(h / 2), d2 = central(h / 4);
  const long double r0 = (4 * d1 - d0) / 3, r1 = (4 * d2 - d1) / 3;
  return static_cast<double>((16 * r1 - r0) / 15);
}

GrassmannElement GrassmannElement::scalar(double c) {
  GrassmannElement e;
  if (c != 0) e.c_[0] = c;
  return e;
}

GrassmannElement GrassmannElement::generator(int i) {
  if (i < 0 || i >= 64) throw std::out_of_range("GrassmannElement: generator index");
  GrassmannElement e;
  e.c_[std::uint64_t{1} << i] = 1.0;
  return e;
}

double GrassmannElement::constant() const {
  auto it = c_.find(0);
  return it == c_.end() ? 0.0 : it->second;
}

GrassmannElement& GrassmannElement::operator+=(const GrassmannElement& o) {
  for (const auto& [k, v] : o.c_) c_[k] += v;
  return *this;
}

GrassmannElement& GrassmannElement::operator*=(double c) {
  for (auto& [k, v] : c_) v *= c;
  return *this;
}

GrassmannElement operator*(const GrassmannElement& a, const GrassmannElement& b) {
  GrassmannElement out;
  for (const auto& [ma, va] : a.c_)
    for (const auto& [mb, vb] : b.c_) {
      if (ma & mb) continue;
      int swaps = 0;
      for (std::uint64_t rest = mb; rest; rest &= rest - 1) {
        const int j = std::countr_zero(rest);
        swaps += j == 63 ? 0 : std::popcount(ma >> (j + 1));
      }
      out.c_[ma | mb] += (swaps & 1 ? -1.0 : 1.0) * va * vb;
    }
  return out;
}

void GrassmannElement::prune(double tol) {
  std::erase_if(c_, [tol](const auto& kv) { return std::abs(kv.second) <= tol; });
}

GrassmannElement grassmann_exp(const GrassmannElement& x) {
  const double c = x.constant();
  GrassmannElement nil = x + GrassmannElement::scalar(-c);
  nil.prune(0.0);
  GrassmannElement sum = GrassmannElement::scalar(1.0), term = sum;
  for (int k = 1; k <= 64; ++k) {
    term = (1.0 / k) * (term * nil);
    term.prune(0.0);
    if (term.terms().empty()) break;
    sum += term;
  }
  return std::exp(c) * sum;
}

GrassmannElement grassmann_log(const GrassmannElement& x) {
  const double c = x.constant();
  if (!(c > 0)) throw std::domain_error("grassmann_log: constant term must be positive");
  GrassmannElement y = (1.0 / c) * x + GrassmannElement::scalar(-1.0);
  y.prune(0.0);
  GrassmannElement sum = GrassmannElement::scalar(std::log(c)), power = y;
  for (int k = 1; k <= 64 && !power.terms().empty(); ++k) {
    sum += ((k & 1 ? 1.0 : -1.0) / k) * power;
    power = power * y;
    power.prune(0.0);
  }
  return sum;
}

Polynomial exact_effective_potential(const Kernel& v, const Covariance& g) {
  if (!v.source().empty())
    throw std::invalid_argument("exact_effective_potential: sourceless kernels only");
  const Polynomial pv = expand_to_plain_fields(v);
  std::map<FieldLabel, int> index;
  for (const auto& [key, c] : pv)
    for (const auto& f : key.fields) index.emplace(f, 0);
  const int n = static_cast<int>(index.size());
  if (2 * n > 64) throw std::invalid_argument("exact_effective_potential: too many fields");
  std::vector<FieldLabel> labels;
  for (auto& [f, i] : index) {
    i = static_cast<int>(labels.size());
    labels.push_back(f);
  }

  GrassmannElement potential;
  for (const auto& [key, c] : pv) {
    GrassmannElement mono = GrassmannElement::scalar(c);
    for (const auto& f : key.fields) {
      const int i = index.at(f);
      mono = mono * (GrassmannElement::generator(i) + GrassmannElement::generator(n + i));
    }
    potential += mono;
  }
  const GrassmannElement e = grassmann_exp(potential);

  const std::uint64_t phi_mask = n == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  GrassmannElement integrated;
  for (const auto& [mask, c] : e.terms()) {
    const std::uint64_t psi = mask >> n;
    const int k = std::popcount(psi);
    if (k % 2) continue;
    std::vector<int> idx;
    for (std::uint64_t rest = psi; rest; rest &= rest - 1) idx.push_back(std::countr_zero(rest));
    SkewMatrix a(k);
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j) a.set(i, j, g(labels[idx[i]], labels[idx[j]]));
    const double w = c * pfaffian(a).real();
    GrassmannElement mono = GrassmannElement::scalar(w);
    for (std::uint64_t rest = mask & phi_mask; rest; rest &= rest - 1)
      mono = mono * GrassmannElement::generator(std::countr_zero(rest));
    integrated += mono;
  }
  const GrassmannElement l = grassmann_log(integrated);

  Polynomial out;
  for (const auto& [mask, c] : l.terms()) {
    KernelKey key;
    for (std::uint64_t rest = mask; rest; rest &= rest - 1)
      key.fields.push_back(labels[std::countr_zero(rest)]);
    out[key] += c;
  }
  return out;
}

}  // namespace cylising::verify
