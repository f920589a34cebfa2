#pragma once

// Gaussian quadrature rules built by Golub-Welsch: the symmetric tridiagonal
// Jacobi matrix of the weight's orthogonal polynomials is diagonalized by
// implicit-shift QL. Nodes are then polished by Newton steps on the
// orthonormal recurrence and weights are recomputed from the Christoffel
// function, which keeps the tiny tail weights relatively accurate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "biortho/error.hpp"

namespace biortho {

enum class RuleKind { GaussLegendre, GaussLaguerre, GaussHermite };

struct QuadratureRule {
  RuleKind kind = RuleKind::GaussLegendre;
  double alpha = 0.0;  // GaussLaguerre only
  double lo = -1.0;    // GaussLegendre only
  double hi = 1.0;
  std::vector<double> nodes;
  std::vector<double> weights;
  /// weights[k] / rho(nodes[k]), i.e. weights for integrals with respect to dx.
  std::vector<double> plain_weights;

  std::size_t size() const { return nodes.size(); }

  /// log of the rule's weight function rho(x).
  double log_weight_function(double x) const {
    switch (kind) {
      case RuleKind::GaussLegendre: return 0.0;
      case RuleKind::GaussLaguerre: return alpha * std::log(x) - x;
      case RuleKind::GaussHermite: return -x * x;
    }
    return 0.0;
  }
  double weight_function(double x) const { return std::exp(log_weight_function(x)); }

  /// sum_k w_k f(x_k), the integral of rho(x) f(x).
  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) s += weights[k] * f(nodes[k]);
    return s;
  }

  /// Integral of f(x) dx, with f carrying its own decay.
  template <class F>
  double integrate_plain(F&& f) const {
    double s = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) s += plain_weights[k] * f(nodes[k]);
    return s;
  }
};

namespace detail {

// Eigenvalues and first eigenvector components of the symmetric tridiagonal
// matrix (diag d, off-diagonal e[1..n-1]) by implicit QL with Wilkinson-type
// shifts. On return d holds eigenvalues and z the first components.
inline void tridiagonal_ql(std::vector<double>& d, std::vector<double> e, std::vector<double>& z) {
  const std::size_t n = d.size();
  z.assign(n, 0.0);
  if (n == 0) return;
  z[0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  constexpr int kMaxSweeps = 50;
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= 1e-14 * dd) break;
      }
      if (m != l) {
        if (iter++ == kMaxSweeps) throw NumericError("Golub-Welsch: QL iteration did not converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0 ? std::abs(r) : -std::abs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        std::size_t i = m;
        bool underflow = false;
        while (i-- > l) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            underflow = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          f = z[i + 1];
          z[i + 1] = s * z[i] + c * f;
          z[i] = c * z[i] - s * f;
        }
        if (underflow) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

// Orthonormal recurrence b_{j+1} p_{j+1} = (x - a_j) p_j - b_j p_{j-1} with
// p_0 = 1. Returns p_n(x) and its derivative; sum_sq accumulates
// sum_{j<n} p_j(x)^2.
struct OrthonormalEval {
  double value;
  double derivative;
  double sum_sq;
};

inline OrthonormalEval orthonormal_eval(std::span<const double> a, std::span<const double> b, double x) {
  const std::size_t n = a.size();
  double p_prev = 0.0, p = 1.0, dp_prev = 0.0, dp = 0.0, sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sum += p * p;
    const double bj = j == 0 ? 0.0 : b[j];
    const double bnext = b[j + 1];
    const double p_next = ((x - a[j]) * p - bj * p_prev) / bnext;
    const double dp_next = (p + (x - a[j]) * dp - bj * dp_prev) / bnext;
    p_prev = p;
    p = p_next;
    dp_prev = dp;
    dp = dp_next;
  }
  return {p, dp, sum};
}

// a[0..n-1]: diagonal; b[1..n]: off-diagonal (b[n] only used for the
// degree-n polynomial whose zeros are the nodes). mu0 = total mass.
inline QuadratureRule golub_welsch(std::vector<double> a, std::vector<double> b, double mu0) {
  const std::size_t n = a.size();
  std::vector<double> d = a;
  std::vector<double> e(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) e[i] = b[i];
  std::vector<double> z;
  tridiagonal_ql(d, e, z);
  std::sort(d.begin(), d.end());
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    double x = d[k];
    for (int it = 0; it < 6; ++it) {
      const OrthonormalEval ev = orthonormal_eval(a, b, x);
      if (ev.derivative == 0.0) break;
      const double step = ev.value / ev.derivative;
      x -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    const OrthonormalEval ev = orthonormal_eval(a, b, x);
    rule.nodes[k] = x;
    rule.weights[k] = mu0 / ev.sum_sq;
  }
  return rule;
}

inline void fill_plain_weights(QuadratureRule& rule) {
  rule.plain_weights.resize(rule.size());
  for (std::size_t k = 0; k < rule.size(); ++k)
    rule.plain_weights[k] = std::exp(std::log(rule.weights[k]) - rule.log_weight_function(rule.nodes[k]));
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [lo, hi].
inline QuadratureRule gauss_legendre(std::size_t n, double lo = -1.0, double hi = 1.0) {
  if (n < 1) throw DomainError("gauss_legendre: need at least one node");
  std::vector<double> a(n, 0.0), b(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) b[k] = k / std::sqrt(4.0 * k * k - 1.0);
  QuadratureRule rule = detail::golub_welsch(std::move(a), std::move(b), 2.0);
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  for (std::size_t k = 0; k < n; ++k) {
    rule.nodes[k] = mid + half * rule.nodes[k];
    rule.weights[k] *= half;
  }
  rule.kind = RuleKind::GaussLegendre;
  rule.lo = lo;
  rule.hi = hi;
  detail::fill_plain_weights(rule);
  return rule;
}

/// n-point generalized Gauss-Laguerre rule for x^alpha e^{-x} on [0, inf).
inline QuadratureRule gauss_laguerre(std::size_t n, double alpha = 0.0) {
  if (n < 1) throw DomainError("gauss_laguerre: need at least one node");
  if (!(alpha > -1.0)) throw DomainError("gauss_laguerre: alpha must exceed -1");
  std::vector<double> a(n), b(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) a[k] = 2.0 * k + alpha + 1.0;
  for (std::size_t k = 1; k <= n; ++k) b[k] = std::sqrt(k * (k + alpha));
  QuadratureRule rule = detail::golub_welsch(std::move(a), std::move(b), std::tgamma(alpha + 1.0));
  rule.kind = RuleKind::GaussLaguerre;
  rule.alpha = alpha;
  rule.lo = 0.0;
  rule.hi = std::numeric_limits<double>::infinity();
  detail::fill_plain_weights(rule);
  return rule;
}

/// n-point Gauss-Hermite rule for e^{-x^2} on the real line.
inline QuadratureRule gauss_hermite(std::size_t n) {
  if (n < 1) throw DomainError("gauss_hermite: need at least one node");
  std::vector<double> a(n, 0.0), b(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) b[k] = std::sqrt(0.5 * k);
  QuadratureRule rule = detail::golub_welsch(std::move(a), std::move(b), std::sqrt(std::numbers::pi));
  rule.kind = RuleKind::GaussHermite;
  rule.lo = -std::numeric_limits<double>::infinity();
  rule.hi = std::numeric_limits<double>::infinity();
  detail::fill_plain_weights(rule);
  return rule;
}

enum class Measure { Weighted, Lebesgue };

/// Tensor-product quadrature over up to four dimensions, summed in
/// lexicographic node order. With Measure::Weighted f excludes the rule
/// weights; with Measure::Lebesgue f is the full integrand.
inline double integrate_nd(const std::function<double(std::span<const double>)>& f,
                           std::span<const QuadratureRule> rules,
                           Measure measure = Measure::Weighted) {
  const std::size_t dim = rules.size();
  if (dim > 4) throw CapacityError("integrate_nd: at most 4 dimensions");
  if (dim == 0) return f({});
  std::vector<std::size_t> idx(dim, 0);
  std::vector<double> point(dim);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (std::size_t d = 0; d < dim; ++d) {
      point[d] = rules[d].nodes[idx[d]];
      w *= measure == Measure::Weighted ? rules[d].weights[idx[d]] : rules[d].plain_weights[idx[d]];
    }
    total += w * f(point);
    std::size_t d = dim;
    while (d-- > 0) {
      if (++idx[d] < rules[d].size()) break;
      idx[d] = 0;
      if (d == 0) return total;
    }
  }
}

}  // namespace biortho
