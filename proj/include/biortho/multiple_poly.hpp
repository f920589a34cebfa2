#pragma once

// Multiple orthogonal polynomials for a system of D weights on a common
// support. Type I functions Q = sum_i w_i A_i (deg A_i = n_i - 1) satisfy
//   int x^j Q = 0 (j <= |n|-2),  int x^{|n|-1} Q = 1;
// type II polynomials P (monic, degree |n|) satisfy
//   int w_i x^j P = 0 (j <= n_i - 1) for every block i.
// Both are obtained from one linear solve on the cached moment table.

#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "biortho/core.hpp"
#include "biortho/error.hpp"
#include "biortho/linalg.hpp"

namespace biortho {

struct Composition {
  std::vector<int> parts;

  Composition() = default;
  explicit Composition(std::vector<int> p) : parts(std::move(p)) {
    if (parts.empty()) throw DomainError("Composition: need at least one part");
    for (int v : parts)
      if (v < 0) throw DomainError("Composition: parts must be non-negative");
  }
  int weight() const { return std::accumulate(parts.begin(), parts.end(), 0); }
  std::size_t size() const { return parts.size(); }
  bool operator==(const Composition&) const = default;
};

struct WeightSystem {
  std::vector<RealFn> weights;
  Interval interval;
  QuadratureRule quad;
};

/// [w_1, x w_1, ..., x^{n_1-1} w_1, w_2, ...] in block order.
inline std::vector<RealFn> xi_family(const WeightSystem& ws, const Composition& comp) {
  if (comp.size() != ws.weights.size()) throw DomainError("xi_family: composition length differs from weight count");
  std::vector<RealFn> out;
  for (std::size_t i = 0; i < comp.size(); ++i) {
    const RealFn w = ws.weights[i];
    for (int j = 0; j < comp.parts[i]; ++j)
      out.emplace_back([w, j](double x) { return std::pow(x, j) * w(x); });
  }
  return out;
}

/// Moments int w_i(x) x^j dx, j = 0..max_power, per weight.
inline std::vector<std::vector<double>> weight_moments(const WeightSystem& ws, int max_power) {
  std::vector<std::vector<double>> mom(ws.weights.size(), std::vector<double>(static_cast<std::size_t>(max_power) + 1, 0.0));
  for (std::size_t k = 0; k < ws.quad.size(); ++k) {
    const double x = ws.quad.nodes[k];
    const double pw = ws.quad.plain_weights[k];
    for (std::size_t i = 0; i < ws.weights.size(); ++i) {
      double v = pw * ws.weights[i](x);
      for (int j = 0; j <= max_power; ++j) {
        mom[i][static_cast<std::size_t>(j)] += v;
        v *= x;
      }
    }
  }
  return mom;
}

inline constexpr double kConditionWarn = 1e10;
inline constexpr double kConditionFail = 1e13;

namespace detail {

inline double guard_condition(const Matrix& m, const char* what, std::string& warning) {
  if (m.rows() == 0) return 1.0;
  const double cond = condition_number(m);
  if (!(cond <= kConditionFail))
    throw NumericError(std::string(what) + ": moment matrix condition " + std::to_string(cond) + " exceeds 1e13");
  if (cond > kConditionWarn) warning = std::string(what) + ": moment matrix condition exceeds 1e10";
  return cond;
}

}  // namespace detail

struct TypeIFunction {
  Composition comp;
  /// blocks[i][k]: coefficient of x^k in A_i.
  std::vector<std::vector<double>> blocks;
  std::shared_ptr<const WeightSystem> ws;
  double condition = 1.0;
  std::string warning;

  double operator()(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (blocks[i].empty()) continue;
      double poly = 0.0;
      for (std::size_t k = blocks[i].size(); k-- > 0;) poly = poly * x + blocks[i][k];
      s += ws->weights[i](x) * poly;
    }
    return s;
  }
};

struct TypeIIPolynomial {
  Composition comp;
  /// Ascending monomial coefficients; the last one is 1.
  std::vector<double> coeffs;
  double condition = 1.0;
  std::string warning;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  double operator()(double x) const {
    double s = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 0;) s = s * x + coeffs[k];
    return s;
  }
};

/// Type I function by solving the moment system int x^j Q = delta_{j,|n|-1}.
inline TypeIFunction type_one(const WeightSystem& ws, const Composition& comp) {
  if (comp.size() != ws.weights.size()) throw DomainError("type_one: composition length differs from weight count");
  const int n = comp.weight();
  if (n < 1) throw DomainError("type_one: composition must have positive weight");
  const auto mom = weight_moments(ws, 2 * n);
  Matrix m(n, n);
  int col = 0;
  for (std::size_t i = 0; i < comp.size(); ++i)
    for (int k = 0; k < comp.parts[i]; ++k, ++col)
      for (int j = 0; j < n; ++j) m(j, col) = mom[i][static_cast<std::size_t>(j + k)];
  Matrix rhs = Matrix::Zero(n, 1);
  rhs(n - 1, 0) = 1.0;
  TypeIFunction q;
  q.condition = detail::guard_condition(m, "type_one", q.warning);
  const Matrix c = solve(m, rhs);
  q.comp = comp;
  q.ws = std::make_shared<const WeightSystem>(ws);
  col = 0;
  for (std::size_t i = 0; i < comp.size(); ++i) {
    std::vector<double> block;
    for (int k = 0; k < comp.parts[i]; ++k, ++col) block.push_back(c(col, 0));
    q.blocks.push_back(std::move(block));
  }
  return q;
}

/// Monic type II polynomial: sum_k p_k int w_i x^{j+k} = -int w_i x^{j+|n|}.
inline TypeIIPolynomial type_two(const WeightSystem& ws, const Composition& comp) {
  if (comp.size() != ws.weights.size()) throw DomainError("type_two: composition length differs from weight count");
  const int n = comp.weight();
  TypeIIPolynomial p;
  p.comp = comp;
  p.coeffs.assign(static_cast<std::size_t>(n) + 1, 0.0);
  p.coeffs.back() = 1.0;
  if (n == 0) return p;
  const auto mom = weight_moments(ws, 2 * n);
  Matrix m(n, n);
  Matrix rhs(n, 1);
  int row = 0;
  for (std::size_t i = 0; i < comp.size(); ++i)
    for (int j = 0; j < comp.parts[i]; ++j, ++row) {
      for (int k = 0; k < n; ++k) m(row, k) = mom[i][static_cast<std::size_t>(j + k)];
      rhs(row, 0) = -mom[i][static_cast<std::size_t>(j + n)];
    }
  p.condition = detail::guard_condition(m, "type_two", p.warning);
  const Matrix c = solve(m, rhs);
  for (int k = 0; k < n; ++k) p.coeffs[static_cast<std::size_t>(k)] = c(k, 0);
  return p;
}

/// int x^j Q dx for j = 0..|n|-1, by quadrature of Q itself. All entries
/// should vanish except the last, which should equal 1.
inline std::vector<double> check_ortho_one(const TypeIFunction& q) {
  const int n = q.comp.weight();
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  const QuadratureRule& r = q.ws->quad;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double x = r.nodes[k];
    double v = r.plain_weights[k] * q(x);
    for (int j = 0; j < n; ++j) {
      out[static_cast<std::size_t>(j)] += v;
      v *= x;
    }
  }
  return out;
}

/// int w_i x^j P dx for each block i and j < n_i, flattened in block order.
inline std::vector<double> check_ortho_two(const TypeIIPolynomial& p, const WeightSystem& ws, const Composition& comp) {
  std::vector<double> out;
  for (std::size_t i = 0; i < comp.size(); ++i)
    for (int j = 0; j < comp.parts[i]; ++j)
      out.push_back(ws.quad.integrate_plain([&](double x) { return ws.weights[i](x) * std::pow(x, j) * p(x); }));
  return out;
}

struct BiorthoSequence {
  std::vector<TypeIIPolynomial> p;  // P_i = P_{n^(i)}
  std::vector<TypeIFunction> q;     // Q_i = Q_{n^(i+1)}
};

/// Nested multi-indices n^(0) = 0, ..., n^(N) = comp. `path` lists which
/// block is incremented at each step; the default fills block 1, then 2, ...
inline BiorthoSequence biortho_sequence(const WeightSystem& ws, const Composition& comp,
                                        std::optional<std::vector<int>> path = std::nullopt) {
  const int n = comp.weight();
  std::vector<int> steps;
  if (path) {
    steps = *path;
  } else {
    for (std::size_t i = 0; i < comp.size(); ++i)
      for (int k = 0; k < comp.parts[i]; ++k) steps.push_back(static_cast<int>(i));
  }
  if (static_cast<int>(steps.size()) != n) throw DomainError("biortho_sequence: path length must equal |n|");
  std::vector<int> count(comp.size(), 0);
  for (int b : steps) {
    if (b < 0 || static_cast<std::size_t>(b) >= comp.size()) throw DomainError("biortho_sequence: bad block index in path");
    if (++count[static_cast<std::size_t>(b)] > comp.parts[static_cast<std::size_t>(b)])
      throw DomainError("biortho_sequence: path overshoots the composition");
  }
  BiorthoSequence seq;
  std::vector<int> cur(comp.size(), 0);
  for (int i = 0; i < n; ++i) {
    try {
      seq.p.push_back(type_two(ws, Composition(cur)));
      cur[static_cast<std::size_t>(steps[static_cast<std::size_t>(i)])] += 1;
      seq.q.push_back(type_one(ws, Composition(cur)));
    } catch (const SingularityError& e) {
      throw SingularityError("biortho_sequence: step " + std::to_string(i) + ": " + e.what(), e.pivot());
    }
  }
  return seq;
}

}  // namespace biortho
