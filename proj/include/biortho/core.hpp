#pragma once

// Generic biorthogonal ensembles: joint density
//   p(x_1..x_N) = det[eta_i(x_j)] det[xi_i(x_j)] / Z_N,
// Gram matrix g_{ij} = int eta_i xi_j, kernel K_N(x,y) = sum eta_i(x) c_ij xi_j(y)
// with c = g^{-T}, correlation determinants, and the orthogonal-polynomial
// special case with its Christoffel-Darboux identity.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biortho/error.hpp"
#include "biortho/linalg.hpp"
#include "biortho/quadrature.hpp"

namespace biortho {

using RealFn = std::function<double(double)>;

struct Interval {
  enum class Kind { HalfLine, RealLine, Segment };
  Kind kind = Kind::HalfLine;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();

  static Interval half_line() { return {Kind::HalfLine, 0.0, std::numeric_limits<double>::infinity()}; }
  static Interval real_line() {
    return {Kind::RealLine, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
  static Interval segment(double a, double b) {
    if (!(a < b)) throw DomainError("Interval: segment needs a < b");
    return {Kind::Segment, a, b};
  }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

inline constexpr std::size_t kDefaultRuleSize = 64;

/// Fixed high-order rule matched to the interval: Gauss-Laguerre(alpha) on the
/// half line, Gauss-Hermite on the real line, Gauss-Legendre on a segment.
inline QuadratureRule default_rule(const Interval& iv, double laguerre_alpha = 0.0,
                                   std::size_t n = kDefaultRuleSize) {
  switch (iv.kind) {
    case Interval::Kind::HalfLine: return gauss_laguerre(n, laguerre_alpha);
    case Interval::Kind::RealLine: return gauss_hermite(n);
    case Interval::Kind::Segment: return gauss_legendre(n, iv.lo, iv.hi);
  }
  throw DomainError("default_rule: unknown interval kind");
}

/// Largest N accepted by Gram-based routines; BIORTHO_MAX_N overrides the default 12.
inline int max_ensemble_size() {
  if (const char* env = std::getenv("BIORTHO_MAX_N")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(v);
  }
  return 12;
}

struct EnsembleSpec {
  int n = 0;
  Interval interval;
  std::vector<RealFn> eta;
  std::vector<RealFn> xi;
  QuadratureRule quad;
};

inline EnsembleSpec make_ensemble(Interval interval, std::vector<RealFn> eta, std::vector<RealFn> xi,
                                  QuadratureRule quad) {
  if (eta.empty()) throw DomainError("EnsembleSpec: need at least one function");
  if (eta.size() != xi.size()) throw DomainError("EnsembleSpec: eta and xi must have the same length");
  const int n = static_cast<int>(eta.size());
  if (n > max_ensemble_size())
    throw CapacityError("EnsembleSpec: N = " + std::to_string(n) + " exceeds the guard " +
                        std::to_string(max_ensemble_size()) + " (set BIORTHO_MAX_N to override)");
  return EnsembleSpec{n, interval, std::move(eta), std::move(xi), std::move(quad)};
}

/// eta_i(x) = x^{i-1}, i = 1..n.
inline std::vector<RealFn> monomials(int n) {
  std::vector<RealFn> out;
  for (int i = 0; i < n; ++i) out.emplace_back([i](double x) { return std::pow(x, i); });
  return out;
}

struct KernelData {
  Matrix gram;
  Matrix coeffs;  // c = g^{-T}
  /// Z_N = N! det g, held as sign and log-magnitude.
  int zn_sign = 1;
  double zn_log = 0.0;
  std::shared_ptr<const EnsembleSpec> spec;

  int n() const { return spec->n; }
};

/// g_{ij} = int eta_i xi_j by the spec's fixed rule.
inline Matrix quadrature_gram(const EnsembleSpec& spec) {
  const std::size_t n = static_cast<std::size_t>(spec.n);
  const std::size_t m = spec.quad.size();
  Matrix eta_t(n, m), xi_t(n, m);
  for (std::size_t k = 0; k < m; ++k) {
    const double x = spec.quad.nodes[k];
    const double w = spec.quad.plain_weights[k];
    for (std::size_t i = 0; i < n; ++i) {
      eta_t(i, k) = spec.eta[i](x);
      xi_t(i, k) = w * spec.xi[i](x);
    }
  }
  return eta_t * xi_t.transpose();
}

/// Builds kernel data from a given Gram matrix (closed forms skip quadrature).
inline KernelData build_kernel(std::shared_ptr<const EnsembleSpec> spec, Matrix gram) {
  const Eigen::Index n = gram.rows();
  if (n != spec->n || gram.cols() != n) throw DomainError("build_kernel: Gram shape does not match spec");
  KernelData k;
  k.coeffs = solve(gram.transpose(), Matrix::Identity(n, n));
  const LogDet ld = log_det(gram);
  k.zn_sign = ld.sign;
  k.zn_log = std::lgamma(static_cast<double>(n) + 1.0) + ld.log_abs;
  k.gram = std::move(gram);
  k.spec = std::move(spec);
  return k;
}

inline KernelData build_kernel(const EnsembleSpec& spec) {
  auto shared = std::make_shared<const EnsembleSpec>(spec);
  Matrix g = quadrature_gram(*shared);
  return build_kernel(std::move(shared), std::move(g));
}

inline double kernel_eval(const KernelData& k, double x, double y) {
  const EnsembleSpec& s = *k.spec;
  const Eigen::Index n = s.n;
  Eigen::VectorXd ex(n), xy(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ex(i) = s.eta[static_cast<std::size_t>(i)](x);
    xy(i) = s.xi[static_cast<std::size_t>(i)](y);
  }
  return ex.dot(k.coeffs * xy);
}

/// rho_n(x_1..x_n) = det[K_N(x_i, x_j)].
inline double correlation(const KernelData& k, std::span<const double> points) {
  if (points.size() > static_cast<std::size_t>(k.n())) throw DomainError("correlation: n exceeds N");
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = kernel_eval(k, points[i], points[j]);
  return det(m);
}

/// Joint density det[eta_i(x_j)] det[xi_i(x_j)] / Z_N.
inline double pdf_eval(const KernelData& k, std::span<const double> x) {
  const EnsembleSpec& s = *k.spec;
  if (x.size() != static_cast<std::size_t>(s.n)) throw DomainError("pdf_eval: need exactly N points");
  const Eigen::Index n = s.n;
  Matrix e(n, n), w(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      e(i, j) = s.eta[static_cast<std::size_t>(i)](x[j]);
      w(i, j) = s.xi[static_cast<std::size_t>(i)](x[j]);
    }
  return k.zn_sign * det(e) * det(w) * std::exp(-k.zn_log);
}

/// n-point correlation from its definition as a marginal of the joint
/// density, N!/(N-n)! times the integral over the remaining N-n variables.
/// Cost grows like rule_size^{N-n}; meant for cross-checks only.
inline double correlation_by_marginal(const KernelData& k, std::span<const double> points,
                                      std::optional<QuadratureRule> rule = std::nullopt) {
  const int big_n = k.n();
  const int n = static_cast<int>(points.size());
  if (n > big_n) throw DomainError("correlation_by_marginal: n exceeds N");
  const int rest = big_n - n;
  const QuadratureRule& r = rule ? *rule : k.spec->quad;
  std::vector<QuadratureRule> rules(static_cast<std::size_t>(rest), r);
  std::vector<double> full(static_cast<std::size_t>(big_n));
  std::copy(points.begin(), points.end(), full.begin());
  const double integral = integrate_nd(
      [&](std::span<const double> tail) {
        std::copy(tail.begin(), tail.end(), full.begin() + n);
        return pdf_eval(k, full);
      },
      rules, Measure::Lebesgue);
  return std::exp(std::lgamma(big_n + 1.0) - std::lgamma(rest + 1.0)) * integral;
}

/// Monic orthogonal polynomials p_{n+1} = (x - diag_n) p_n - offdiag_n p_{n-1}
/// for a positive weight, with squared norms h_n = int w p_n^2.
struct OrthoPolySystem {
  RealFn weight;
  Interval interval;
  std::vector<double> diag;     // diag_0 .. diag_{N-1}
  std::vector<double> offdiag;  // offdiag_0 = 0, offdiag_n = h_n / h_{n-1}
  std::vector<double> norms;    // h_0 .. h_N

  int max_degree() const { return static_cast<int>(diag.size()); }

  /// p_0(x) .. p_n(x).
  std::vector<double> eval_all(int n, double x) const {
    if (n > max_degree()) throw DomainError("OrthoPolySystem: degree beyond recurrence");
    std::vector<double> p(static_cast<std::size_t>(n) + 1);
    p[0] = 1.0;
    if (n >= 1) p[1] = x - diag[0];
    for (int k = 1; k < n; ++k) p[k + 1] = (x - diag[k]) * p[k] - offdiag[k] * p[k - 1];
    return p;
  }
  double eval(int n, double x) const { return eval_all(n, x)[static_cast<std::size_t>(n)]; }
};

/// Recurrence coefficients by the discretized Stieltjes procedure on a
/// fixed rule (default: 64-point rule matched to the interval).
inline OrthoPolySystem op_from_weight(RealFn w, Interval interval, int n,
                                      std::optional<QuadratureRule> rule = std::nullopt) {
  if (n < 0) throw DomainError("op_from_weight: negative degree");
  const QuadratureRule r = rule ? *rule : default_rule(interval);
  const std::size_t m = r.size();
  std::vector<double> mass(m);
  for (std::size_t k = 0; k < m; ++k) mass[k] = r.plain_weights[k] * w(r.nodes[k]);

  OrthoPolySystem sys{w, interval, {}, {}, {}};
  std::vector<double> p_prev(m, 0.0), p(m, 1.0), p_next(m);
  double h = 0.0;
  for (std::size_t k = 0; k < m; ++k) h += mass[k];
  if (!(h > 0.0)) throw NumericError("op_from_weight: weight has non-positive mass");
  sys.norms.push_back(h);
  sys.offdiag.push_back(0.0);
  for (int deg = 0; deg < n; ++deg) {
    double num = 0.0;
    for (std::size_t k = 0; k < m; ++k) num += mass[k] * r.nodes[k] * p[k] * p[k];
    const double a = num / sys.norms.back();
    sys.diag.push_back(a);
    const double b = sys.offdiag.back();
    double h_next = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      p_next[k] = (r.nodes[k] - a) * p[k] - b * p_prev[k];
      h_next += mass[k] * p_next[k] * p_next[k];
    }
    if (!(h_next > 0.0) || !std::isfinite(h_next))
      throw NumericError("op_from_weight: norm lost positivity at degree " + std::to_string(deg + 1) +
                         "; use a smaller N");
    sys.offdiag.push_back(h_next / sys.norms.back());
    sys.norms.push_back(h_next);
    std::swap(p_prev, p);
    std::swap(p, p_next);
  }
  sys.offdiag.pop_back();
  return sys;
}

/// Kernel data for the orthogonal-polynomial ensemble of weight w:
/// eta_i = x^{i-1}, xi_i = x^{i-1} w(x).
inline EnsembleSpec op_ensemble(const RealFn& w, Interval interval, int n, QuadratureRule quad) {
  std::vector<RealFn> xi;
  for (int i = 0; i < n; ++i) xi.emplace_back([w, i](double x) { return std::pow(x, i) * w(x); });
  return make_ensemble(interval, monomials(n), std::move(xi), std::move(quad));
}

struct CdCheck {
  double lhs;
  double rhs;
};

/// lhs = sum_{n<N} p_n(x) p_n(y) / h_n,
/// rhs = (p_N(x) p_{N-1}(y) - p_{N-1}(x) p_N(y)) / (h_{N-1} (x - y)).
inline CdCheck cd_check(const OrthoPolySystem& sys, int n, double x, double y) {
  if (n < 1) throw DomainError("cd_check: N must be positive");
  if (std::abs(x - y) < 1e-12) throw DomainError("cd_check: x and y must differ");
  const std::vector<double> px = sys.eval_all(n, x), py = sys.eval_all(n, y);
  double lhs = 0.0;
  for (int k = 0; k < n; ++k) lhs += px[k] * py[k] / sys.norms[k];
  const double rhs = (px[n] * py[n - 1] - px[n - 1] * py[n]) / (sys.norms[n - 1] * (x - y));
  return {lhs, rhs};
}

/// Christoffel-Darboux kernel w(y) sum_{n<N} p_n(x) p_n(y) / h_n.
inline double op_kernel(const OrthoPolySystem& sys, int n, double x, double y) {
  const std::vector<double> px = sys.eval_all(n, x), py = sys.eval_all(n, y);
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += px[k] * py[k] / sys.norms[k];
  return sys.weight(y) * s;
}

}  // namespace biortho
