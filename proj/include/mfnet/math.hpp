#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>

namespace mfnet {

template <typename Scalar>
Scalar logistic(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

/// Derivative of the logistic function, sigma(x) * sigma(-x).
template <typename Scalar>
Scalar logistic_prime(Scalar x) {
  const Scalar s = logistic(x);
  return s * (Scalar(1) - s);
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

/// Max-shifted softmax. Throws if any input is non-finite.
template <typename Derived>
typename Derived::PlainObject softmax(const Eigen::MatrixBase<Derived>& x) {
  if (!x.allFinite()) throw std::domain_error("softmax: non-finite utility");
  typename Derived::PlainObject e = (x.array() - x.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// Binomial(l, p) pmf over M = 0..l, built from a log-space recurrence.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> binomial_pmf(int l, Scalar p) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pmf(l + 1);
  if (p <= Scalar(0)) {
    pmf.setZero();
    pmf(0) = 1;
    return pmf;
  }
  if (p >= Scalar(1)) {
    pmf.setZero();
    pmf(l) = 1;
    return pmf;
  }
  const Scalar log_ratio = std::log(p) - std::log1p(-p);
  Scalar log_term = l * std::log1p(-p);
  pmf(0) = std::exp(log_term);
  for (int m = 1; m <= l; ++m) {
    log_term += std::log(Scalar(l - m + 1)) - std::log(Scalar(m)) + log_ratio;
    pmf(m) = std::exp(log_term);
  }
  return pmf;
}

/// log of l! / prod n_z!.
inline double log_multinomial_coefficient(std::span<const int> counts) {
  int total = 0;
  double denom = 0.0;
  for (int c : counts) {
    total += c;
    denom += std::lgamma(c + 1.0);
  }
  return std::lgamma(total + 1.0) - denom;
}

/// Number of compositions of l into k nonnegative parts, C(l+k-1, k-1).
inline long long composition_count(int l, int k) {
  long long r = 1;
  for (int i = 1; i <= k - 1; ++i) r = r * (l + i) / i;
  return r;
}

}  // namespace mfnet
