#pragma once

// Chiral GUE with an external source, V(x) = x.
//
//   w_alpha(x, a) = x^alpha e^{-x} 0F1(alpha+1; a x) / Gamma(alpha+1)
//   eta_k(x)      = (-1)^{k-1} (k-1)! L^alpha_{k-1}(x)
//   g_ij          = a_j^{i-1} e^{a_j}
//
// With these choices the type II polynomial has the Laguerre expansion
//   P(x) = (-1)^N sum_n n! e_{N-n}(a) L^alpha_n(x),
// the type I function is w_alpha(x, 0) times the divided difference of
// e^{-v} 0F1(alpha+1; x v) over the nodes a, and the kernel follows from a
// residue sum under one Laguerre-weighted integral.

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "biortho/core.hpp"
#include "biortho/error.hpp"
#include "biortho/linalg.hpp"
#include "biortho/multiple_poly.hpp"
#include "biortho/quadrature.hpp"
#include "biortho/special.hpp"

namespace biortho {

inline constexpr double kMinSourceSeparation = 1e-8;

struct ChgueParams {
  double alpha = 0.0;
  std::vector<double> a;

  int n() const { return static_cast<int>(a.size()); }

  void validate() const {
    if (!(alpha >= 0.0)) throw DomainError("ChgueParams: alpha must be >= 0");
    if (a.empty()) throw DomainError("ChgueParams: need at least one source parameter");
    for (double v : a)
      if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("ChgueParams: source parameters must be finite and >= 0");
  }

  bool distinct() const { return min_separation(a) >= kMinSourceSeparation; }
};

inline double w_alpha_value(double alpha, double a, double x) {
  if (x < 0.0) return 0.0;
  const double base = x == 0.0 ? (alpha == 0.0 ? 1.0 : 0.0) : std::exp(alpha * std::log(x) - x - std::lgamma(alpha + 1.0));
  if (base == 0.0) return 0.0;
  return base * hyp0f1(alpha + 1.0, a * x);
}

inline RealFn w_alpha(double alpha, double a) {
  if (!(alpha > -1.0)) throw DomainError("w_alpha: alpha must exceed -1");
  return [alpha, a](double x) { return w_alpha_value(alpha, a, x); };
}

/// eta_k = (-1)^{k-1} (k-1)! L^alpha_{k-1}, k = 1..n.
inline std::vector<RealFn> eta_laguerre(double alpha, int n) {
  std::vector<RealFn> out;
  for (int k = 0; k < n; ++k) {
    const double scale = (k % 2 == 0 ? 1.0 : -1.0) * std::tgamma(k + 1.0);
    out.emplace_back([alpha, k, scale](double x) { return scale * laguerre(k, alpha, x); });
  }
  return out;
}

/// Ensemble spec with xi_i = w_alpha(., a_i) and a Gauss-Laguerre(alpha) rule.
inline EnsembleSpec chgue_ensemble(const ChgueParams& p, std::size_t rule_size = kDefaultRuleSize) {
  p.validate();
  std::vector<RealFn> xi;
  for (double ai : p.a) xi.push_back(w_alpha(p.alpha, ai));
  return make_ensemble(Interval::half_line(), eta_laguerre(p.alpha, p.n()), std::move(xi),
                       gauss_laguerre(rule_size, p.alpha));
}

/// Closed-form Gram matrix g_ij = a_j^{i-1} e^{a_j}.
inline Matrix chgue_gram(const ChgueParams& p) {
  p.validate();
  const int n = p.n();
  Matrix g(n, n);
  for (int j = 0; j < n; ++j) {
    double pw = std::exp(p.a[j]);
    for (int i = 0; i < n; ++i) {
      g(i, j) = pw;
      pw *= p.a[j];
    }
  }
  return g;
}

/// Kernel data on the chGUE spec using the closed-form Gram.
inline KernelData chgue_kernel_data(const ChgueParams& p, std::size_t rule_size = kDefaultRuleSize) {
  auto spec = std::make_shared<const EnsembleSpec>(chgue_ensemble(p, rule_size));
  return build_kernel(std::move(spec), chgue_gram(p));
}

namespace detail {

inline void require_distinct(const ChgueParams& p, const char* what) {
  if (!p.distinct())
    throw ConfluentError(std::string(what) +
                         ": source parameters closer than 1e-8; use confluent_weights with the generic kernel");
}

}  // namespace detail

/// Eigenvalue density for pairwise distinct a, normalized by N! prod e^{a_i}.
inline double chgue_pdf(const ChgueParams& p, std::span<const double> x) {
  p.validate();
  detail::require_distinct(p, "chgue_pdf");
  const int n = p.n();
  if (static_cast<int>(x.size()) != n) throw DomainError("chgue_pdf: need exactly N points");
  double log_pref = -std::lgamma(n + 1.0);
  for (int i = 0; i < n; ++i) {
    if (x[i] < 0.0) return 0.0;
    log_pref -= p.a[i];
    if (x[i] == 0.0 && p.alpha > 0.0) return 0.0;
    if (x[i] > 0.0) log_pref += p.alpha * std::log(x[i]);
    log_pref -= x[i];
  }
  double ratio = 1.0;
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i) ratio *= (x[j] - x[i]) / (p.a[j] - p.a[i]);
  Matrix m(n, n);
  const double inv_gamma = std::exp(-std::lgamma(p.alpha + 1.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = hyp0f1(p.alpha + 1.0, p.a[i] * x[j]) * inv_gamma;
  return std::exp(log_pref) * ratio * det(m);
}

namespace detail {

/// Coefficients of u^k in sum_j 0F1(alpha+1; a_j y) e^{-a_j} prod_{l != j} (u + a_l)/(a_l - a_j).
inline std::vector<double> kernel_u_poly(const ChgueParams& p, double y) {
  const int n = p.n();
  std::vector<double> poly(static_cast<std::size_t>(n), 0.0);
  std::vector<double> rest;
  for (int j = 0; j < n; ++j) {
    rest.clear();
    double denom = 1.0;
    for (int l = 0; l < n; ++l) {
      if (l == j) continue;
      rest.push_back(p.a[l]);
      denom *= p.a[l] - p.a[j];
    }
    const double fj = hyp0f1(p.alpha + 1.0, p.a[j] * y) * std::exp(-p.a[j]) / denom;
    const std::vector<double> e = elem_sym(rest);
    for (int k = 0; k < n; ++k) poly[k] += fj * e[static_cast<std::size_t>(n - 1 - k)];
  }
  return poly;
}

inline void check_kernel_args(const ChgueParams& p, double x, double y, const char* what) {
  p.validate();
  require_distinct(p, what);
  if (x < 0.0 || y < 0.0) throw DomainError(std::string(what) + ": x and y must be >= 0");
}

inline double y_power(double alpha, double y) { return y == 0.0 ? (alpha == 0.0 ? 1.0 : 0.0) : std::pow(y, alpha); }

}  // namespace detail

/// K_N(x, y) = y^alpha e^{x-y} / Gamma(alpha+1)^2
///   * int_0^inf u^alpha e^{-u} 0F1(alpha+1; -x u)
///       sum_j 0F1(alpha+1; a_j y) e^{-a_j} prod_{l != j} (u + a_l)/(a_l - a_j) du.
/// Expanding the polynomial factor in u, each moment is exact:
///   int u^{alpha+k} e^{-u} 0F1(alpha+1; -x u) du = e^{-x} k! Gamma(alpha+1) L^alpha_k(x),
/// so the e^x prefactor cancels and no oscillatory quadrature is needed.
inline double chgue_kernel(const ChgueParams& p, double x, double y) {
  detail::check_kernel_args(p, x, y, "chgue_kernel");
  const std::vector<double> poly = detail::kernel_u_poly(p, y);
  double s = 0.0, fact = 1.0;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    if (k > 0) fact *= static_cast<double>(k);
    s += poly[k] * fact * laguerre(static_cast<int>(k), p.alpha, x);
  }
  return detail::y_power(p.alpha, y) * std::exp(-y - std::lgamma(p.alpha + 1.0)) * s;
}

/// The same kernel with the u integral taken by an n-point generalized
/// Gauss-Laguerre rule (default 2N+40). Accurate for moderate x only: the
/// integrand oscillates and the e^x prefactor amplifies the quadrature error.
inline double chgue_kernel_quadrature(const ChgueParams& p, double x, double y, std::size_t rule_size = 0) {
  detail::check_kernel_args(p, x, y, "chgue_kernel_quadrature");
  if (rule_size == 0) rule_size = static_cast<std::size_t>(2 * p.n() + 40);
  const std::vector<double> poly = detail::kernel_u_poly(p, y);
  const QuadratureRule rule = gauss_laguerre(rule_size, p.alpha);
  double integral = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double u = rule.nodes[q];
    double s = 0.0;
    for (std::size_t k = poly.size(); k-- > 0;) s = s * u + poly[k];
    integral += rule.weights[q] * hyp0f1(p.alpha + 1.0, -x * u) * s;
  }
  return detail::y_power(p.alpha, y) * std::exp(x - y - 2.0 * std::lgamma(p.alpha + 1.0)) * integral;
}

/// Type I function of the chGUE, Q(x) = sum_i w_alpha(x, a_i) e^{-a_i} / prod_{j != i}(a_i - a_j).
/// Well separated nodes use that sum directly. Otherwise Q is evaluated as
///   w_alpha(x, 0) sum_{k >= N-1} c_k(x) h_{k-N+1}(a),
/// with c_k the Taylor coefficients of e^{-v} 0F1(alpha+1; x v), which stays
/// accurate for close or coincident a.
class ChgueTypeOne {
 public:
  ChgueTypeOne(double alpha, std::vector<double> a) : alpha_(alpha), a_(std::move(a)) {
    if (a_.empty()) throw DomainError("chgue_type_one: need at least one source parameter");
    use_residues_ = min_separation(a_) >= kSeriesSwitch;
  }

  double operator()(double x) const { return use_residues_ ? residue_sum(x) : series(x); }

  double residue_sum(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) {
      double d = 1.0;
      for (std::size_t j = 0; j < a_.size(); ++j)
        if (j != i) d *= a_[i] - a_[j];
      s += w_alpha_value(alpha_, a_[i], x) * std::exp(-a_[i]) / d;
    }
    return s;
  }

  double series(double x) const {
    const std::size_t n = a_.size();
    const double w0 = w_alpha_value(alpha_, 0.0, x);
    if (w0 == 0.0) return 0.0;
    constexpr std::size_t kMaxTerms = 400;
    const std::vector<double> h = complete_homogeneous(a_, kMaxTerms);
    // t_m = x^m / ((alpha+1)_m m!), the Taylor coefficients of 0F1(alpha+1; x v).
    std::vector<double> t{1.0};
    double sum = 0.0;
    int small_run = 0;
    for (std::size_t k = 0; k + 1 < n + kMaxTerms; ++k) {
      if (k > 0) t.push_back(t.back() * x / ((alpha_ + k) * k));
      if (k + 1 < n) continue;
      double ck = 0.0;
      double inv_fact = 1.0;  // 1/(k-m)!
      for (std::size_t m = k + 1; m-- > 0;) {
        const std::size_t j = k - m;
        if (j > 0) inv_fact /= static_cast<double>(j);
        ck += (j % 2 == 0 ? 1.0 : -1.0) * inv_fact * t[m];
      }
      const double term = ck * h[k + 1 - n];
      sum += term;
      if (std::abs(term) <= 1e-17 * std::abs(sum)) {
        if (++small_run == 3) return w0 * sum;
      } else {
        small_run = 0;
      }
    }
    throw NumericError("chgue_type_one: series did not converge", w0 * sum);
  }

  double alpha() const { return alpha_; }
  const std::vector<double>& a() const { return a_; }

 private:
  static constexpr double kSeriesSwitch = 0.05;
  double alpha_;
  std::vector<double> a_;
  bool use_residues_ = true;
};

inline ChgueTypeOne chgue_type_one(const ChgueParams& p) {
  p.validate();
  return ChgueTypeOne(p.alpha, p.a);
}

/// Polynomial held by its Laguerre expansion sum_n coeffs[n] L^alpha_n(x).
struct LaguerreSeries {
  double alpha = 0.0;
  std::vector<double> coeffs;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }

  double operator()(double x) const {
    const std::vector<double> l = laguerre_all(degree(), alpha, x);
    double s = 0.0;
    for (std::size_t k = 0; k < coeffs.size(); ++k) s += coeffs[k] * l[k];
    return s;
  }

  /// Ascending monomial coefficients.
  std::vector<double> monomial_coefficients() const {
    std::vector<double> out(coeffs.size(), 0.0);
    for (std::size_t n = 0; n < coeffs.size(); ++n) {
      const std::vector<double> c = laguerre_coefficients(static_cast<int>(n), alpha);
      for (std::size_t k = 0; k < c.size(); ++k) out[k] += coeffs[n] * c[k];
    }
    return out;
  }
};

/// P(x) = (-1)^N sum_{n=0}^N n! e_{N-n}(a) L^alpha_n(x); valid for any a.
inline LaguerreSeries chgue_type_two(double alpha, std::span<const double> a) {
  if (!(alpha > -1.0)) throw DomainError("chgue_type_two: alpha must exceed -1");
  const int n = static_cast<int>(a.size());
  const std::vector<double> e = elem_sym(a);
  LaguerreSeries p{alpha, std::vector<double>(static_cast<std::size_t>(n) + 1)};
  const double sign = n % 2 == 0 ? 1.0 : -1.0;
  for (int k = 0; k <= n; ++k) p.coeffs[k] = sign * std::tgamma(k + 1.0) * e[static_cast<std::size_t>(n - k)];
  return p;
}

inline LaguerreSeries chgue_type_two(const ChgueParams& p) {
  p.validate();
  return chgue_type_two(p.alpha, p.a);
}

struct KernelSum {
  double kernel;
  double sum;
};

/// Both sides of K_N(x, y) = sum_{i<N} P_i(x) Q_i(y), where P_i uses
/// (a_1..a_i) and Q_i uses (a_1..a_{i+1}). Needs a_1 > ... > a_N >= 0.
inline KernelSum kernel_sum_check(const ChgueParams& p, double x, double y) {
  p.validate();
  for (int i = 1; i < p.n(); ++i)
    if (!(p.a[i - 1] > p.a[i])) throw DomainError("kernel_sum_check: a must be strictly decreasing");
  KernelSum out{chgue_kernel(p, x, y), 0.0};
  std::span<const double> a(p.a);
  for (int i = 0; i < p.n(); ++i) {
    const double pi = chgue_type_two(p.alpha, a.first(static_cast<std::size_t>(i)))(x);
    const ChgueTypeOne qi(p.alpha, std::vector<double>(a.begin(), a.begin() + i + 1));
    out.sum += pi * qi(y);
  }
  return out;
}

struct ConfluentSpec {
  std::vector<double> b;  // strictly decreasing, b.back() >= 0
  Composition m;          // multiplicities, each >= 1
};

/// Weight system for coincident sources. Each b_k > 0 contributes
/// w_alpha(., b_k) and w_{alpha+1}(., b_k) with multiplicities
/// ceil(m_k/2) and floor(m_k/2); b_d = 0 contributes w_alpha(., 0) alone
/// with multiplicity m_d.
inline std::pair<WeightSystem, Composition> confluent_weights(const ConfluentSpec& c, double alpha,
                                                              std::size_t rule_size = kDefaultRuleSize) {
  if (!(alpha >= 0.0)) throw DomainError("confluent_weights: alpha must be >= 0");
  if (c.b.empty() || c.b.size() != c.m.size()) throw DomainError("confluent_weights: b and m must have equal, positive length");
  for (std::size_t k = 0; k < c.b.size(); ++k) {
    if (!(c.b[k] >= 0.0)) throw DomainError("confluent_weights: b must be >= 0");
    if (k > 0 && !(c.b[k - 1] > c.b[k])) throw DomainError("confluent_weights: b must be strictly decreasing");
    if (c.m.parts[k] < 1) throw DomainError("confluent_weights: multiplicities must be >= 1");
  }
  WeightSystem ws{{}, Interval::half_line(), gauss_laguerre(rule_size, alpha)};
  std::vector<int> parts;
  for (std::size_t k = 0; k < c.b.size(); ++k) {
    const int mk = c.m.parts[k];
    if (c.b[k] == 0.0) {
      ws.weights.push_back(w_alpha(alpha, 0.0));
      parts.push_back(mk);
    } else {
      ws.weights.push_back(w_alpha(alpha, c.b[k]));
      ws.weights.push_back(w_alpha(alpha + 1.0, c.b[k]));
      parts.push_back((mk + 1) / 2);
      parts.push_back(mk / 2);
    }
  }
  return {std::move(ws), Composition(std::move(parts))};
}

/// Ensemble spec for coincident sources: Laguerre eta with the confluent xi family.
inline EnsembleSpec confluent_ensemble(const ConfluentSpec& c, double alpha, std::size_t rule_size = kDefaultRuleSize) {
  auto [ws, comp] = confluent_weights(c, alpha, rule_size);
  std::vector<RealFn> xi = xi_family(ws, comp);
  return make_ensemble(Interval::half_line(), eta_laguerre(alpha, comp.weight()), std::move(xi), ws.quad);
}

/// Groups a source list into distinct values (descending) with multiplicities.
inline ConfluentSpec group_sources(std::span<const double> a, double tol = kMinSourceSeparation) {
  std::vector<double> s(a.begin(), a.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  ConfluentSpec c;
  std::vector<int> m;
  for (double v : s) {
    if (!c.b.empty() && c.b.back() - v < tol) {
      ++m.back();
    } else {
      c.b.push_back(v);
      m.push_back(1);
    }
  }
  c.m = Composition(std::move(m));
  return c;
}

/// Unperturbed Laguerre kernel
///   Kbar_n(x, y) = n!/Gamma(n+alpha) y^alpha e^{-y} / (x-y)
///                  * (L_{n-1}(x) L_n(y) - L_n(x) L_{n-1}(y)),
/// switching to the summed form sum_k k!/Gamma(k+alpha+1) L_k(x) L_k(y) near x = y.
inline double laguerre_cd_kernel(int n, double alpha, double x, double y) {
  if (n < 0) throw DomainError("laguerre_cd_kernel: negative n");
  if (n == 0) return 0.0;
  const double wy = w_alpha_value(alpha, 0.0, y) * std::tgamma(alpha + 1.0);
  const std::vector<double> lx = laguerre_all(n, alpha, x), ly = laguerre_all(n, alpha, y);
  if (std::abs(x - y) > 1e-4 * std::max(1.0, std::abs(x))) {
    const double c = std::exp(std::lgamma(n + 1.0) - std::lgamma(n + alpha));
    return c * wy / (x - y) * (lx[n - 1] * ly[n] - lx[n] * ly[n - 1]);
  }
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += std::exp(std::lgamma(k + 1.0) - std::lgamma(k + alpha + 1.0)) * lx[k] * ly[k];
  return wy * s;
}

struct RankDecomposition {
  double full;
  double unperturbed;
  double correction;
};

/// K_N = Kbar_{N-r} + sum_{k<=r} p_k(x) q_k(y) for a = (a_1 > ... > a_r > 0, 0, ..., 0).
///   p_k(x) = sum_{n<k} e_{k-1-n}(a_1..a_{k-1}) (N-r+n)! L^alpha_{N-r+n}(x)
///   q_k(y) = w_alpha(y, 0) * sum of residues of
///            e^v 0F1(alpha+1; -y v) / (v^{N-r} prod_{i<=k}(v + a_i))
///            at v = -a_1, ..., -a_k and at v = 0.
inline RankDecomposition rank_decomposition(const ChgueParams& p, int r, double x, double y) {
  p.validate();
  const int n = p.n();
  if (r < 0 || r >= n) throw DomainError("rank_decomposition: need 0 <= r < N");
  for (int i = 0; i < n; ++i) {
    if (i < r && !(p.a[i] > 0.0)) throw DomainError("rank_decomposition: leading r sources must be positive");
    if (i >= r && p.a[i] != 0.0) throw DomainError("rank_decomposition: trailing N-r sources must vanish");
    if (i > 0 && i < r && !(p.a[i - 1] > p.a[i])) throw DomainError("rank_decomposition: sources must be strictly decreasing");
  }
  const int n0 = n - r;
  const double alpha = p.alpha;
  RankDecomposition out{0.0, laguerre_cd_kernel(n0, alpha, x, y), 0.0};
  if (r == 0) {
    out.full = out.unperturbed;
    return out;
  }

  const std::vector<double> lx = laguerre_all(n0 + r, alpha, x);
  // Taylor coefficients of f(v) = e^v 0F1(alpha+1; -y v) up to v^{n0-1}.
  std::vector<double> f(static_cast<std::size_t>(n0), 0.0);
  {
    std::vector<double> ev(n0), hv(n0);
    double te = 1.0, th = 1.0;
    for (int i = 0; i < n0; ++i) {
      if (i > 0) {
        te /= i;
        th *= -y / ((alpha + i) * i);
      }
      ev[i] = te;
      hv[i] = th;
    }
    for (int i = 0; i < n0; ++i)
      for (int j = 0; j <= i; ++j) f[i] += ev[j] * hv[i - j];
  }
  const double wy = w_alpha_value(alpha, 0.0, y);

  for (int k = 1; k <= r; ++k) {
    const std::span<const double> ak(p.a.data(), static_cast<std::size_t>(k));
    const std::vector<double> e = elem_sym(ak.first(static_cast<std::size_t>(k - 1)));
    double pk = 0.0;
    for (int m = 0; m < k; ++m)
      pk += e[static_cast<std::size_t>(k - 1 - m)] * std::tgamma(n0 + m + 1.0) * lx[n0 + m];

    double res = 0.0;
    for (int i = 0; i < k; ++i) {
      const double v = -ak[i];
      double d = std::pow(v, n0);
      for (int j = 0; j < k; ++j)
        if (j != i) d *= ak[j] - ak[i];
      res += std::exp(v) * hyp0f1(alpha + 1.0, -y * v) / d;
    }
    // residue at v = 0: coefficient of v^{n0-1} in f(v) / prod_i (v + a_i)
    std::vector<double> inv_a(ak.size());
    double inv_prod = 1.0;
    for (std::size_t i = 0; i < ak.size(); ++i) {
      inv_a[i] = 1.0 / ak[i];
      inv_prod *= inv_a[i];
    }
    const std::vector<double> h = complete_homogeneous(inv_a, static_cast<std::size_t>(n0));
    for (int m = 0; m < n0; ++m) {
      const int j = n0 - 1 - m;
      res += f[m] * (j % 2 == 0 ? 1.0 : -1.0) * h[static_cast<std::size_t>(j)] * inv_prod;
    }
    out.correction += pk * wy * res;
  }
  out.full = out.unperturbed + out.correction;
  return out;
}

}  // namespace biortho
