#pragma once

// Special functions and small combinatorial polynomials used throughout the
// library: Laguerre polynomials, 0F1, modified Bessel I, log-gamma,
// elementary / complete homogeneous symmetric functions, Vandermonde products
// and the partial-fraction identity for products of simple poles.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "biortho/error.hpp"

namespace biortho {

inline double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma: argument must be positive");
  return std::lgamma(x);
}

/// Generalized Laguerre polynomial L^alpha_n(x) by the three-term recurrence
///   (k+1) L_{k+1} = (2k+1+alpha-x) L_k - (k+alpha) L_{k-1}.
inline double laguerre(int n, double alpha, double x) {
  if (!(alpha > -1.0)) throw DomainError("laguerre: alpha must exceed -1");
  if (n < 0) throw DomainError("laguerre: negative degree");
  double prev = 1.0;
  if (n == 0) return prev;
  double cur = 1.0 + alpha - x;
  for (int k = 1; k < n; ++k) {
    const double next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

/// All of L^alpha_0(x), ..., L^alpha_n(x) in one recurrence sweep.
inline std::vector<double> laguerre_all(int n, double alpha, double x) {
  if (!(alpha > -1.0)) throw DomainError("laguerre: alpha must exceed -1");
  std::vector<double> out(static_cast<std::size_t>(std::max(n, 0)) + 1);
  out[0] = 1.0;
  if (n >= 1) out[1] = 1.0 + alpha - x;
  for (int k = 1; k < n; ++k)
    out[k + 1] = ((2.0 * k + 1.0 + alpha - x) * out[k] - (k + alpha) * out[k - 1]) / (k + 1.0);
  return out;
}

/// Monomial coefficients of L^alpha_n, ascending:
///   L^alpha_n(x) = sum_k (-1)^k binom(n+alpha, n-k) x^k / k!.
inline std::vector<double> laguerre_coefficients(int n, double alpha) {
  if (!(alpha > -1.0)) throw DomainError("laguerre: alpha must exceed -1");
  std::vector<double> c(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    const double log_binom =
        std::lgamma(n + alpha + 1.0) - std::lgamma(n - k + 1.0) - std::lgamma(alpha + k + 1.0);
    const double mag = std::exp(log_binom - std::lgamma(k + 1.0));
    c[k] = (k % 2 == 0) ? mag : -mag;
  }
  return c;
}

namespace detail {

inline bool is_nonpositive_integer(double c) {
  return c <= 0.0 && std::floor(c) == c;
}

// Below this argument the alternating 0F1 series loses more than ~e^10 to
// cancellation, so the Bessel-J representation takes over.
inline constexpr double kHyp0f1BesselSwitch = -25.0;

}  // namespace detail

/// Confluent hypergeometric limit function 0F1(;c;z) = sum_k z^k / ((c)_k k!).
///
/// Direct Taylor series for z > -25 (stopped at relative 1e-16, at most 500
/// terms). For z <= -25 and c >= 1 the value is taken from
///   0F1(;c;-s) = Gamma(c) s^{(1-c)/2} J_{c-1}(2 sqrt(s)),
/// which avoids the catastrophic cancellation of the alternating series.
inline double hyp0f1(double c, double z) {
  if (detail::is_nonpositive_integer(c)) throw DomainError("hyp0f1: c is a non-positive integer");
  if (z <= detail::kHyp0f1BesselSwitch && c >= 1.0) {
    const double s = -z;
    const double j = std::cyl_bessel_j(c - 1.0, 2.0 * std::sqrt(s));
    return std::exp(std::lgamma(c) + 0.5 * (1.0 - c) * std::log(s)) * j;
  }
  double term = 1.0;
  double sum = 1.0;
  constexpr int kMaxTerms = 500;
  for (int k = 0; k < kMaxTerms; ++k) {
    term *= z / ((c + k) * (k + 1.0));
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum) && std::abs(z) < (k + 1.0) * (std::abs(c) + k + 1.0))
      return sum;
    if (term == 0.0) return sum;
  }
  throw NumericError("hyp0f1: series did not converge", sum);
}

/// Modified Bessel function I_alpha(z) for z >= 0, through
///   I_alpha(2 sqrt(s)) = s^{alpha/2} / Gamma(alpha+1) * 0F1(;alpha+1;s).
/// Negative integer orders use I_{-n} = I_n.
inline double bessel_i(double alpha, double z) {
  if (z < 0.0) throw DomainError("bessel_i: z must be non-negative");
  if (alpha <= -1.0) {
    if (std::floor(alpha) != alpha) throw DomainError("bessel_i: non-integer order below -1");
    alpha = -alpha;
  }
  if (alpha < 0.0 && std::floor(alpha) == alpha) alpha = -alpha;
  if (z == 0.0) {
    if (alpha == 0.0) return 1.0;
    return alpha > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  const double half = 0.5 * z;
  const double pref = std::exp(alpha * std::log(half) - std::lgamma(alpha + 1.0));
  return pref * hyp0f1(alpha + 1.0, half * half);
}

/// Elementary symmetric functions (e_0, ..., e_N) of the inputs, defined by
///   prod_i (t + a_i) = sum_n t^n e_{N-n}.
inline std::vector<double> elem_sym(std::span<const double> a) {
  std::vector<double> e(a.size() + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = i + 1; k >= 1; --k) e[k] += a[i] * e[k - 1];
  return e;
}

/// Complete homogeneous symmetric polynomials h_0..h_degree of the inputs.
/// h_j(a_1..a_N) is the divided difference of v^{j+N-1} on the nodes a.
inline std::vector<double> complete_homogeneous(std::span<const double> a, std::size_t degree) {
  std::vector<double> h(degree + 1, 0.0);
  h[0] = 1.0;
  for (double ai : a)
    for (std::size_t j = 1; j <= degree; ++j) h[j] += ai * h[j - 1];
  return h;
}

/// Vandermonde product prod_{i<j} (x_j - x_i).
inline double vandermonde(std::span<const double> x) {
  double p = 1.0;
  for (std::size_t j = 1; j < x.size(); ++j)
    for (std::size_t i = 0; i < j; ++i) p *= x[j] - x[i];
  return p;
}

/// Both sides of
///   sum_i 1/(z - x_i) prod_{j != i} 1/(x_i - x_j) = prod_i 1/(z - x_i).
struct PartialFraction {
  std::complex<double> partial_sum;
  std::complex<double> product;
};

/// Nodes closer than 1e-10 (relative) are rejected; confluent nodes need
/// their own formulas.
inline PartialFraction partial_fraction_weights(std::complex<double> z, std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (z == std::complex<double>(x[i], 0.0)) throw DomainError("partial_fraction_weights: z coincides with a node");
    for (std::size_t j = 0; j < i; ++j) {
      const double scale = std::max({1.0, std::abs(x[i]), std::abs(x[j])});
      if (std::abs(x[i] - x[j]) < 1e-10 * scale)
        throw DomainError("partial_fraction_weights: coincident nodes");
    }
  }
  PartialFraction out{{0.0, 0.0}, {1.0, 0.0}};
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::complex<double> term = 1.0 / (z - x[i]);
    for (std::size_t j = 0; j < x.size(); ++j)
      if (j != i) term /= (x[i] - x[j]);
    out.partial_sum += term;
    out.product /= (z - x[i]);
  }
  return out;
}

/// Minimum pairwise distance among the inputs (infinity for fewer than two).
inline double min_separation(std::span<const double> a) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) best = std::min(best, std::abs(a[i] - a[j]));
  return best;
}

}  // namespace biortho
