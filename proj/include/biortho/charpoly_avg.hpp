#pragma once

// Averages of characteristic polynomials over random matrices with a source,
// used as an independent check on the algebraic kernel and polynomials:
//   P(x) = <det(x - X)>,  Q(x) = Res_{z=x} <1/det(z - X)>,
//   K(x, y) = Res_{z=y} <det(x - X)/det(z - X)> / (x - y).
// Averages come either from exact Gaussian sampling or, for N <= 3, from a
// tensor-quadrature oracle over the joint density. Residues are taken as
// (1/pi) Im F(x - i eps) on a halving eps schedule with Richardson
// extrapolation.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "biortho/chgue.hpp"
#include "biortho/core.hpp"
#include "biortho/error.hpp"
#include "biortho/parallel.hpp"
#include "biortho/quadrature.hpp"

namespace biortho {

using Complex = std::complex<double>;

template <class T>
struct AvgEstimate {
  T value{};
  double std_error = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

struct SourceModel {
  enum class Kind { Hermitian, Chiral };
  enum class Potential { Gaussian, Custom };
  Kind kind = Kind::Chiral;
  double alpha = 0.0;      // chiral only, M = N + alpha
  std::vector<double> a;   // diagonal of A (Hermitian) or a_i = t_i^2/4 (chiral)
  Potential potential = Potential::Gaussian;

  int n() const { return static_cast<int>(a.size()); }

  static SourceModel chiral(double alpha, std::vector<double> a) { return {Kind::Chiral, alpha, std::move(a)}; }
  static SourceModel hermitian(std::vector<double> a) { return {Kind::Hermitian, 0.0, std::move(a)}; }

  void validate() const {
    if (a.empty()) throw DomainError("SourceModel: need N >= 1");
    if (kind == Kind::Chiral) ChgueParams{alpha, a}.validate();
  }
};

namespace detail {

inline void eig2(double p, double q, Complex c, double* out) {
  const double mid = 0.5 * (p + q), half = 0.5 * (p - q);
  const double r = std::hypot(half, std::abs(c));
  out[0] = mid - r;
  out[1] = mid + r;
}

}  // namespace detail

/// One draw from the model. Hermitian: eigenvalues of A/2 + H with H ~ e^{-tr H^2}.
/// Chiral: eigenvalues of X^dagger X for X = A/2 + G, G ~ e^{-tr G^dagger G}
/// (M x N complex), A/2 carrying singular values sqrt(a_i). Ascending order.
template <class Rng>
std::vector<double> sample_matrix(const SourceModel& m, Rng& rng) {
  if (m.potential != SourceModel::Potential::Gaussian)
    throw UnsupportedModelError("sample_matrix: exact sampling needs the Gaussian potential");
  const int n = m.n();
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> ev(static_cast<std::size_t>(n));

  if (m.kind == SourceModel::Kind::Hermitian) {
    const double sd_diag = std::sqrt(0.5), sd_off = 0.5;
    Eigen::MatrixXcd h(n, n);
    for (int i = 0; i < n; ++i) {
      h(i, i) = 0.5 * m.a[i] + sd_diag * gauss(rng);
      for (int j = i + 1; j < n; ++j) {
        const double re = sd_off * gauss(rng), im = sd_off * gauss(rng);
        h(i, j) = Complex(re, im);
        h(j, i) = Complex(re, -im);
      }
    }
    if (n == 1) {
      ev[0] = h(0, 0).real();
    } else if (n == 2) {
      detail::eig2(h(0, 0).real(), h(1, 1).real(), h(0, 1), ev.data());
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
      for (int i = 0; i < n; ++i) ev[i] = es.eigenvalues()(i);
    }
    return ev;
  }

  const double alpha_int = std::round(m.alpha);
  if (std::abs(m.alpha - alpha_int) > 1e-12)
    throw DomainError("sample_matrix: chiral sampling needs integer alpha = M - N");
  const int rows = n + static_cast<int>(alpha_int);
  const double sd = std::sqrt(0.5);
  Eigen::MatrixXcd x(rows, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < rows; ++i) {
      const double re = sd * gauss(rng), im = sd * gauss(rng);
      x(i, j) = Complex(re + (i == j ? std::sqrt(m.a[j]) : 0.0), im);
    }
  const Eigen::MatrixXcd s = x.adjoint() * x;
  if (n == 1) {
    ev[0] = s(0, 0).real();
  } else if (n == 2) {
    detail::eig2(s(0, 0).real(), s(1, 1).real(), s(0, 1), ev.data());
    // the small root loses digits to cancellation; recover it from the determinant
    const double d = s(0, 0).real() * s(1, 1).real() - std::norm(s(0, 1));
    if (ev[1] > 0.0) ev[0] = std::max(0.0, d / ev[1]);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s, Eigen::EigenvaluesOnly);
    for (int i = 0; i < n; ++i) ev[i] = std::max(0.0, es.eigenvalues()(i));
  }
  return ev;
}

/// Spectra for samples 0..count-1; sample i always uses stream (seed, i).
inline std::vector<std::vector<double>> sample_spectra(const SourceModel& m, std::size_t count, std::uint64_t seed,
                                                       std::size_t workers = 0) {
  m.validate();
  return parallel_map<std::vector<double>>(count, workers, [&](std::size_t i) {
    SplitMix64 rng = sample_stream(seed, i);
    return sample_matrix(m, rng);
  });
}

namespace detail {

inline double abs2(double v) { return v * v; }
inline double abs2(Complex v) { return std::norm(v); }

template <class T>
AvgEstimate<T> summarize(const std::vector<T>& v, std::uint64_t seed) {
  AvgEstimate<T> est;
  est.samples = v.size();
  est.seed = seed;
  if (v.empty()) return est;
  const double n = static_cast<double>(v.size());
  est.value = pairwise_sum<T>(v) / n;
  if (v.size() > 1) {
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = abs2(v[i] - est.value);
    est.std_error = std::sqrt(pairwise_sum<double>(dev) / (n - 1.0) / n);
  }
  return est;
}

/// Per-sample values g(spectrum) summarized into an estimate.
template <class T, class G>
AvgEstimate<T> monte_carlo(const SourceModel& m, std::size_t samples, std::uint64_t seed, std::size_t workers, G&& g) {
  m.validate();
  if (samples < 1) throw DomainError("monte_carlo: need at least one sample");
  const std::vector<T> vals = parallel_map<T>(samples, workers, [&](std::size_t i) {
    SplitMix64 rng = sample_stream(seed, i);
    return g(sample_matrix(m, rng));
  });
  return summarize(vals, seed);
}

}  // namespace detail

/// <det(x - X)>.
inline AvgEstimate<double> avg_charpoly(const SourceModel& m, double x, std::size_t samples, std::uint64_t seed,
                                        std::size_t workers = 0) {
  return detail::monte_carlo<double>(m, samples, seed, workers, [x](const std::vector<double>& ev) {
    double p = 1.0;
    for (double l : ev) p *= x - l;
    return p;
  });
}

/// <1/det(z - X)> for Im z != 0.
inline AvgEstimate<Complex> avg_inv_charpoly(const SourceModel& m, Complex z, std::size_t samples, std::uint64_t seed,
                                             std::size_t workers = 0) {
  if (z.imag() == 0.0) throw DomainError("avg_inv_charpoly: z must be off the real axis");
  return detail::monte_carlo<Complex>(m, samples, seed, workers, [z](const std::vector<double>& ev) {
    Complex p = 1.0;
    for (double l : ev) p *= z - l;
    return 1.0 / p;
  });
}

/// eps_k = eps0 / 2^k for k < levels; the smoothing error is modelled as
/// sum_{j >= leading_order} c_j eps^j.
struct ResidueSchedule {
  double eps0 = 1e-2;
  int levels = 3;
  int leading_order = 1;

  std::vector<double> eps() const {
    std::vector<double> e;
    for (int k = 0; k < levels; ++k) e.push_back(eps0 / std::pow(2.0, k));
    return e;
  }
};

/// Weights w with sum w_k = 1 and sum w_k eps_k^j = 0 for
/// j = leading_order .. leading_order + levels - 2.
inline std::vector<double> richardson_weights(const ResidueSchedule& s) {
  if (s.levels < 1) throw DomainError("ResidueSchedule: need at least one level");
  if (!(s.eps0 > 0.0)) throw DomainError("ResidueSchedule: eps0 must be positive");
  if (s.leading_order < 1) throw DomainError("ResidueSchedule: leading order must be >= 1");
  const std::vector<double> e = s.eps();
  const int l = s.levels;
  Matrix a(l, l);
  Matrix rhs = Matrix::Zero(l, 1);
  rhs(0, 0) = 1.0;
  for (int k = 0; k < l; ++k) {
    a(0, k) = 1.0;
    for (int r = 1; r < l; ++r) a(r, k) = std::pow(e[k] / s.eps0, s.leading_order + r - 1);
  }
  const Matrix w = solve(a, rhs);
  return std::vector<double>(w.data(), w.data() + l);
}

struct ResidueResult {
  double value = 0.0;
  std::vector<double> raw;  // (1/pi) Im F(x - i eps_k)
  bool converged = true;
  std::string warning;
  double std_error = 0.0;  // Monte Carlo paths only
  std::size_t samples = 0;
};

namespace detail {

inline void judge_convergence(ResidueResult& r) {
  if (r.raw.size() < 3) return;
  for (std::size_t k = 2; k < r.raw.size(); ++k) {
    const double d1 = r.raw[k - 1] - r.raw[k - 2], d2 = r.raw[k] - r.raw[k - 1];
    if (std::abs(d2) >= std::abs(d1) || (d1 != 0.0 && d2 != 0.0 && (d1 > 0) != (d2 > 0))) {
      r.converged = false;
      r.warning = "residue_extract: non-monotone convergence across the eps schedule";
      return;
    }
  }
}

}  // namespace detail

/// Residue of F at the real point x through the Poisson-smoothed density
/// (1/pi) Im F(x - i eps), extrapolated to eps -> 0.
inline ResidueResult residue_extract(const std::function<Complex(Complex)>& f, double x,
                                     const ResidueSchedule& schedule = {}) {
  const std::vector<double> w = richardson_weights(schedule);
  ResidueResult r;
  for (double e : schedule.eps()) r.raw.push_back(f(Complex(x, -e)).imag() / std::numbers::pi);
  for (std::size_t k = 0; k < w.size(); ++k) r.value += w[k] * r.raw[k];
  detail::judge_convergence(r);
  return r;
}

namespace detail {

/// Residue estimate where each sample carries its own extrapolated value,
/// so the standard error reflects the full estimator.
template <class G>
ResidueResult monte_carlo_residue(const SourceModel& m, double x, const ResidueSchedule& schedule,
                                  std::size_t samples, std::uint64_t seed, std::size_t workers, G&& g) {
  const std::vector<double> w = richardson_weights(schedule);
  const std::vector<double> eps = schedule.eps();
  const std::size_t l = eps.size();
  m.validate();
  if (samples < 1) throw DomainError("monte_carlo_residue: need at least one sample");
  const std::vector<std::vector<double>> per = parallel_map<std::vector<double>>(samples, workers, [&](std::size_t i) {
    SplitMix64 rng = sample_stream(seed, i);
    const std::vector<double> ev = sample_matrix(m, rng);
    std::vector<double> out(l + 1, 0.0);
    for (std::size_t k = 0; k < l; ++k) {
      out[k] = g(ev, Complex(x, -eps[k])).imag() / std::numbers::pi;
      out[l] += w[k] * out[k];
    }
    return out;
  });
  ResidueResult r;
  std::vector<double> col(samples);
  for (std::size_t k = 0; k <= l; ++k) {
    for (std::size_t i = 0; i < samples; ++i) col[i] = per[i][k];
    const AvgEstimate<double> est = summarize(col, seed);
    if (k < l) {
      r.raw.push_back(est.value);
    } else {
      r.value = est.value;
      r.std_error = est.std_error;
    }
  }
  r.samples = samples;
  judge_convergence(r);
  return r;
}

}  // namespace detail

/// Ensemble spec matching the model's eigenvalue density.
/// Chiral: Laguerre eta with w_alpha(., a_i) (confluent weights if sources coincide).
/// Hermitian: eta = monomials, xi = x^j e^{-x^2 + b x} for each distinct b of multiplicity m, j < m.
inline EnsembleSpec model_ensemble(const SourceModel& m, std::size_t rule_size = kDefaultRuleSize) {
  m.validate();
  if (m.kind == SourceModel::Kind::Chiral) {
    const ChgueParams p{m.alpha, m.a};
    if (p.distinct()) return chgue_ensemble(p, rule_size);
    return confluent_ensemble(group_sources(m.a), m.alpha, rule_size);
  }
  const ConfluentSpec groups = group_sources(m.a);
  std::vector<RealFn> xi;
  for (std::size_t k = 0; k < groups.b.size(); ++k) {
    const double b = groups.b[k];
    for (int j = 0; j < groups.m.parts[k]; ++j)
      xi.emplace_back([b, j](double x) { return std::pow(x, j) * std::exp(-x * x + b * x); });
  }
  return make_ensemble(Interval::real_line(), monomials(m.n()), std::move(xi), gauss_hermite(rule_size));
}

/// Kernel data for the model, with the closed-form Gram when it applies.
inline KernelData model_kernel(const SourceModel& m) {
  if (m.kind == SourceModel::Kind::Chiral) {
    const ChgueParams p{m.alpha, m.a};
    if (p.distinct()) return chgue_kernel_data(p);
  }
  return build_kernel(model_ensemble(m));
}

/// Stieltjes transform F(z) = int f(t)/(z - t) dt of one of the densities
///   numerator x given:  f(t) = N (x - t) int p(t, s) prod_j (x - s_j)/(t - s_j) ds
///   no numerator:       f(t) = N int p(t, s) prod_j 1/(t - s_j) ds
/// so that F(z) = <det(x - X)/det(z - X)> or <1/det(z - X)>. The inner
/// N-1 integrals use a 32-point rule; the t integral uses Gauss-Legendre
/// panels graded geometrically towards `center` down to eps_min/4, so the
/// transform stays accurate for z = center - i eps with eps >= eps_min.
class StieltjesOracle {
 public:
  StieltjesOracle(const KernelData& kd, std::optional<double> numerator, double center, double eps_min)
      : numerator_(numerator) {
    const EnsembleSpec& s = *kd.spec;
    n_ = s.n;
    if (n_ > 3) throw CapacityError("StieltjesOracle: quadrature oracle supports N <= 3");
    const Interval& iv = s.interval;
    const QuadratureRule inner = iv.kind == Interval::Kind::HalfLine   ? gauss_laguerre(32, s.quad.alpha)
                                 : iv.kind == Interval::Kind::RealLine ? gauss_hermite(32)
                                                                       : gauss_legendre(32, iv.lo, iv.hi);
    inv_z_ = kd.zn_sign * std::exp(-kd.zn_log);
    const std::size_t m = inner.size();
    inner_nodes_ = inner.nodes;
    inner_w_ = inner.plain_weights;
    eta_.assign(static_cast<std::size_t>(n_) * m, 0.0);
    xi_.assign(static_cast<std::size_t>(n_) * m, 0.0);
    for (std::size_t k = 0; k < m; ++k)
      for (int i = 0; i < n_; ++i) {
        eta_[i * m + k] = s.eta[i](inner.nodes[k]);
        xi_[i * m + k] = s.xi[i](inner.nodes[k]);
      }
    build_grid(iv, center, eps_min);
    values_.resize(t_.size());
    for (std::size_t q = 0; q < t_.size(); ++q) values_[q] = density(s, t_[q]);
  }

  Complex operator()(Complex z) const {
    Complex s = 0.0;
    for (std::size_t q = 0; q < t_.size(); ++q) s += w_[q] * values_[q] / (z - t_[q]);
    return s;
  }

  /// f(t) at the grid nodes, for inspection.
  const std::vector<double>& nodes() const { return t_; }
  const std::vector<double>& density_values() const { return values_; }

 private:
  void build_grid(const Interval& iv, double c, double eps_min) {
    const double lo = iv.kind == Interval::Kind::RealLine ? c - 14.0 - std::abs(c) : iv.lo;
    const double hi = iv.kind == Interval::Kind::HalfLine   ? std::max(80.0, 2.0 * c)
                      : iv.kind == Interval::Kind::RealLine ? c + 14.0 + std::abs(c)
                                                            : iv.hi;
    std::vector<double> edges;
    const double d0 = eps_min / 4.0;
    edges.push_back(std::clamp(c, lo, hi));
    for (double d = d0;; d *= 2.0) {
      edges.push_back(std::clamp(c - d, lo, hi));
      edges.push_back(std::clamp(c + d, lo, hi));
      if (d >= 2.0) break;
    }
    for (double e = c + 2.0; e < hi; e += 2.0) edges.push_back(std::min(e + 2.0, hi));
    for (double e = c - 2.0; e > lo; e -= 2.0) edges.push_back(std::max(e - 2.0, lo));
    edges.push_back(lo);
    edges.push_back(hi);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end(), [](double u, double v) { return v - u < 1e-15; }), edges.end());
    static const QuadratureRule gl = gauss_legendre(20);
    for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
      const double a = edges[e], b = edges[e + 1];
      if (!(b > a)) continue;
      const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
      for (std::size_t k = 0; k < gl.size(); ++k) {
        t_.push_back(mid + half * gl.nodes[k]);
        w_.push_back(half * gl.weights[k]);
      }
    }
  }

  double det3(const double* c0, const double* c1, const double* c2) const {
    return c0[0] * (c1[1] * c2[2] - c1[2] * c2[1]) - c1[0] * (c0[1] * c2[2] - c0[2] * c2[1]) +
           c2[0] * (c0[1] * c1[2] - c0[2] * c1[1]);
  }

  double density(const EnsembleSpec& s, double t) const {
    const std::size_t m = inner_nodes_.size();
    double et[3], xt[3];
    for (int i = 0; i < n_; ++i) {
      et[i] = s.eta[i](t);
      xt[i] = s.xi[i](t);
    }
    const double x = numerator_.value_or(0.0);
    const double lead = numerator_ ? (x - t) : 1.0;
    auto factor = [&](double sj) { return numerator_ ? (x - sj) / (t - sj) : 1.0 / (t - sj); };
    double total = 0.0;
    if (n_ == 1) {
      total = et[0] * xt[0] * inv_z_;
    } else if (n_ == 2) {
      for (std::size_t k = 0; k < m; ++k) {
        const double de = et[0] * eta_[m + k] - et[1] * eta_[k];
        const double dx = xt[0] * xi_[m + k] - xt[1] * xi_[k];
        total += inner_w_[k] * de * dx * inv_z_ * factor(inner_nodes_[k]);
      }
    } else {
      for (std::size_t k = 0; k < m; ++k) {
        const double ek[3] = {eta_[k], eta_[m + k], eta_[2 * m + k]};
        const double xk[3] = {xi_[k], xi_[m + k], xi_[2 * m + k]};
        const double fk = factor(inner_nodes_[k]);
        for (std::size_t l = 0; l < m; ++l) {
          const double el[3] = {eta_[l], eta_[m + l], eta_[2 * m + l]};
          const double xl[3] = {xi_[l], xi_[m + l], xi_[2 * m + l]};
          const double de = det3(et, ek, el), dx = det3(xt, xk, xl);
          total += inner_w_[k] * inner_w_[l] * de * dx * inv_z_ * fk * factor(inner_nodes_[l]);
        }
      }
    }
    return n_ * lead * total;
  }

  std::optional<double> numerator_;
  int n_ = 0;
  double inv_z_ = 1.0;
  std::vector<double> inner_nodes_, inner_w_, eta_, xi_;
  std::vector<double> t_, w_, values_;
};

enum class RatioMode { QuadratureOracle, MonteCarlo };

struct AverageOptions {
  ResidueSchedule schedule{};
  std::size_t samples = 1000000;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
};

/// K_N(x, y) = Res_{z=y} <det(x - X)/det(z - X)> / (x - y).
inline ResidueResult kernel_from_ratio(const SourceModel& m, double x, double y, RatioMode mode,
                                       const AverageOptions& opt = {}) {
  m.validate();
  if (std::abs(x - y) < 1e-6) throw DomainError("kernel_from_ratio: need |x - y| >= 1e-6");
  ResidueResult r;
  if (mode == RatioMode::QuadratureOracle) {
    if (m.n() > 3) throw CapacityError("kernel_from_ratio: quadrature oracle supports N <= 3");
    const KernelData kd = model_kernel(m);
    const std::vector<double> eps = opt.schedule.eps();
    const StieltjesOracle f(kd, x, y, eps.back());
    r = residue_extract(std::cref(f), y, opt.schedule);
  } else {
    r = detail::monte_carlo_residue(m, y, opt.schedule, opt.samples, opt.seed, opt.workers,
                                    [x](const std::vector<double>& ev, Complex z) {
                                      Complex p = 1.0;
                                      for (double l : ev) p *= (x - l) / (z - l);
                                      return p;
                                    });
  }
  const double scale = 1.0 / (x - y);
  r.value *= scale;
  r.std_error *= std::abs(scale);
  for (double& v : r.raw) v *= scale;
  return r;
}

/// Q(x) = Res_{z=x} <1/det(z - X)>.
inline ResidueResult type_one_from_average(const SourceModel& m, double x, RatioMode mode,
                                           const AverageOptions& opt = {}) {
  m.validate();
  if (mode == RatioMode::QuadratureOracle) {
    if (m.n() > 3) throw CapacityError("type_one_from_average: quadrature oracle supports N <= 3");
    const KernelData kd = model_kernel(m);
    const StieltjesOracle f(kd, std::nullopt, x, opt.schedule.eps().back());
    return residue_extract(std::cref(f), x, opt.schedule);
  }
  return detail::monte_carlo_residue(m, x, opt.schedule, opt.samples, opt.seed, opt.workers,
                                     [](const std::vector<double>& ev, Complex z) {
                                       Complex p = 1.0;
                                       for (double l : ev) p *= z - l;
                                       return 1.0 / p;
                                     });
}

/// <det(x - X)> from the joint density by tensor quadrature (N <= 4).
inline double charpoly_by_quadrature(const KernelData& kd, double x) {
  const int n = kd.n();
  std::vector<QuadratureRule> rules(static_cast<std::size_t>(n), kd.spec->quad);
  return integrate_nd(
      [&](std::span<const double> pts) {
        double p = 1.0;
        for (double l : pts) p *= x - l;
        return p * pdf_eval(kd, pts);
      },
      rules, Measure::Lebesgue);
}

struct Rho1Report {
  std::vector<double> edges;
  std::vector<double> empirical;  // eigenvalues per unit length per sample
  std::vector<double> reference;  // bin average of rho_1
  std::vector<double> sigma;
  std::vector<double> z;
  double fraction_within_3sigma = 0.0;
};

/// Histogram of all eigenvalues against a reference one-point density.
/// sigma is the standard error of the per-sample bin count, floored at one
/// count so empty bins stay finite.
inline Rho1Report rho1_check(const SourceModel& m, const std::function<double(double)>& rho1, int bins, double lo,
                             double hi, std::size_t samples, std::uint64_t seed, std::size_t workers = 0) {
  m.validate();
  if (bins < 1 || !(hi > lo)) throw DomainError("rho1_check: need bins >= 1 and hi > lo");
  if (samples < 2) throw DomainError("rho1_check: need at least two samples");
  const std::vector<std::vector<double>> spectra = sample_spectra(m, samples, seed, workers);
  const double width = (hi - lo) / bins;
  std::vector<std::uint64_t> sum(static_cast<std::size_t>(bins), 0), sum_sq(static_cast<std::size_t>(bins), 0);
  std::vector<int> local(static_cast<std::size_t>(bins), 0);
  for (const auto& ev : spectra) {
    for (double l : ev) {
      const double pos = (l - lo) / width;
      if (pos < 0.0 || pos >= bins) continue;
      ++local[static_cast<std::size_t>(pos)];
    }
    for (double l : ev) {
      const double pos = (l - lo) / width;
      if (pos < 0.0 || pos >= bins) continue;
      const std::size_t b = static_cast<std::size_t>(pos);
      if (local[b] == 0) continue;
      sum[b] += static_cast<std::uint64_t>(local[b]);
      sum_sq[b] += static_cast<std::uint64_t>(local[b]) * static_cast<std::uint64_t>(local[b]);
      local[b] = 0;
    }
  }
  Rho1Report r;
  const double n = static_cast<double>(samples);
  const QuadratureRule gl = gauss_legendre(8);
  int good = 0;
  for (int b = 0; b < bins; ++b) {
    const double a = lo + b * width;
    r.edges.push_back(a);
    const double mean = static_cast<double>(sum[b]) / n;
    const double var = std::max(0.0, (static_cast<double>(sum_sq[b]) / n - mean * mean) * n / (n - 1.0));
    r.empirical.push_back(mean / width);
    double ref = 0.0;
    for (std::size_t k = 0; k < gl.size(); ++k) ref += 0.5 * gl.weights[k] * rho1(a + 0.5 * width * (gl.nodes[k] + 1.0));
    r.reference.push_back(ref);
    const double sig = std::max(std::sqrt(var / n), 1.0 / n) / width;
    r.sigma.push_back(sig);
    r.z.push_back((r.empirical.back() - ref) / sig);
    if (std::abs(r.z.back()) <= 3.0) ++good;
  }
  r.edges.push_back(hi);
  r.fraction_within_3sigma = static_cast<double>(good) / bins;
  return r;
}

/// rho_1(x) = K_N(x, x) for the model's kernel.
inline std::function<double(double)> model_density(const SourceModel& m) {
  if (m.kind == SourceModel::Kind::Chiral) {
    const ChgueParams p{m.alpha, m.a};
    if (p.distinct()) return [p](double x) { return x < 0.0 ? 0.0 : chgue_kernel(p, x, x); };
  }
  auto kd = std::make_shared<const KernelData>(model_kernel(m));
  const bool half = m.kind == SourceModel::Kind::Chiral;
  return [kd, half](double x) { return half && x < 0.0 ? 0.0 : kernel_eval(*kd, x, x); };
}

}  // namespace biortho
