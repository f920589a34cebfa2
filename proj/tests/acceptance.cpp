// Acceptance harness: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "biortho/biortho.hpp"

using namespace biortho;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

RealFn laguerre_weight(double alpha) {
  return [alpha](double x) { return std::pow(x, alpha) * std::exp(-x); };
}

RealFn hermite_weight() {
  return [](double x) { return std::exp(-x * x); };
}

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

Outcome gram_closed_form() {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  double worst = 0.0;
  for (int n = 2; n <= 4; ++n)
    for (double alpha : {0.0, 0.5, 1.0, 2.0}) {
      ChgueParams p{alpha, {}};
      while (static_cast<int>(p.a.size()) < n) {
        const double v = u(gen);
        if (v > 0.0) p.a.push_back(v);
      }
      const Matrix closed = chgue_gram(p), quad = quadrature_gram(chgue_ensemble(p));
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) worst = std::max(worst, rel(quad(i, j), closed(i, j)));
    }
  return {worst <= 1e-8, "max rel " + g(worst)};
}

Outcome ratio_identity() {
  double worst = 0.0;
  auto grid = [&](const SourceModel& m, const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::function<double(double, double)>& k) {
    for (double x : xs)
      for (double y : ys) {
        const ResidueResult r = kernel_from_ratio(m, x, y, RatioMode::QuadratureOracle);
        worst = std::max(worst, std::abs(r.value - k(x, y)));
      }
  };
  const std::vector<double> xs{0.5, 1.5, 3.0}, ys{0.8, 2.0, 3.5};
  for (const std::vector<double>& a : {std::vector<double>{0.3, 1.1}, std::vector<double>{0.2, 0.7, 1.3}}) {
    const ChgueParams p{1.0, a};
    grid(SourceModel::chiral(1.0, a), xs, ys, [p](double x, double y) { return chgue_kernel(p, x, y); });
  }
  const SourceModel h = SourceModel::hermitian({0.0, 0.0});
  const KernelData kd = model_kernel(h);
  grid(h, {-1.0, 0.2, 1.1}, {-0.6, 0.5, 1.4}, [&kd](double x, double y) { return kernel_eval(kd, x, y); });
  return {worst <= 1e-3, "max abs " + g(worst)};
}

Outcome averages() {
  const std::vector<double> a{0.3, 1.1};
  const ChgueParams p{1.0, a};
  const SourceModel m = SourceModel::chiral(1.0, a);
  const ChgueTypeOne q = chgue_type_one(p);
  const LaguerreSeries poly = chgue_type_two(p);
  double worst_q = 0.0, worst_p = 0.0;
  bool ok = true;
  std::uint64_t seed = 100;
  for (double x : {0.5, 1.0, 2.0, 3.5, 5.0}) {
    const ResidueResult rq = type_one_from_average(m, x, RatioMode::QuadratureOracle);
    const double dq = std::abs(rq.value - q(x));
    ok = ok && dq <= std::max(3.0 * rq.std_error, 1e-3);
    worst_q = std::max(worst_q, dq);
    const AvgEstimate<double> ep = avg_charpoly(m, x, 1000000, seed++);
    const double dp = std::abs(ep.value - poly(x));
    ok = ok && dp <= std::max(3.0 * ep.std_error, 1e-3);
    worst_p = std::max(worst_p, dp / std::max(3.0 * ep.std_error, 1e-3));
  }
  return {ok, "Q max abs " + g(worst_q) + ", P worst |dev|/tol " + g(worst_p)};
}

Outcome corollary() {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.05, 6.0);
  double worst = 0.0;
  for (const std::vector<double>& a : {std::vector<double>{1.3, 0.4}, std::vector<double>{1.7, 0.9, 0.25}})
    for (int t = 0; t < 5; ++t) {
      const KernelSum ks = kernel_sum_check(ChgueParams{1.0, a}, u(gen), u(gen));
      worst = std::max(worst, rel(ks.sum, ks.kernel));
    }
  return {worst <= 1e-6, "max rel " + g(worst)};
}

Outcome orthogonality() {
  double one = 0.0, final_dev = 0.0, two = 0.0, bi = 0.0;
  auto staircase = [&](const WeightSystem& ws, const Composition& comp) {
    const BiorthoSequence s = biortho_sequence(ws, comp);
    for (std::size_t i = 0; i < s.p.size(); ++i)
      for (std::size_t j = 0; j < s.q.size(); ++j) {
        const double v = ws.quad.integrate_plain([&](double x) { return s.p[i](x) * s.q[j](x); });
        bi = std::max(bi, std::abs(v - (i == j ? 1.0 : 0.0)));
      }
  };
  auto generic = [&](const WeightSystem& ws, const Composition& comp) {
    const std::vector<double> m = check_ortho_one(type_one(ws, comp));
    for (std::size_t j = 0; j + 1 < m.size(); ++j) one = std::max(one, std::abs(m[j]));
    final_dev = std::max(final_dev, std::abs(m.back() - 1.0));
    for (double r : check_ortho_two(type_two(ws, comp), ws, comp)) two = std::max(two, std::abs(r));
    staircase(ws, comp);
  };
  const double alpha = 1.0;
  const QuadratureRule rule = gauss_laguerre(64, alpha);
  for (const std::vector<double>& a : {std::vector<double>{0.3, 1.1}, std::vector<double>{0.2, 0.7, 1.3},
                                       std::vector<double>{0.15, 0.6, 1.0, 1.6}}) {
    const ChgueParams p{alpha, a};
    const int n = p.n();
    const ChgueTypeOne q = chgue_type_one(p);
    for (int j = 0; j < n; ++j) {
      const double mom = rule.integrate_plain([&](double x) { return std::pow(x, j) * q(x); });
      if (j + 1 < n) one = std::max(one, std::abs(mom));
      else final_dev = std::max(final_dev, std::abs(mom - 1.0));
    }
    const LaguerreSeries poly = chgue_type_two(p);
    for (double ai : a) two = std::max(two, std::abs(rule.integrate_plain([&](double x) { return w_alpha_value(alpha, ai, x) * poly(x); })));
    WeightSystem ws{{}, Interval::half_line(), rule};
    for (double ai : a) ws.weights.push_back(w_alpha(alpha, ai));
    staircase(ws, Composition(std::vector<int>(a.size(), 1)));
  }
  const WeightSystem at{{[](double x) { return std::exp(-x); }, [](double x) { return std::sqrt(x) * std::exp(-x); }},
                        Interval::half_line(), gauss_laguerre(64, 0.0)};
  for (const Composition& c : {Composition({1, 1}), Composition({2, 1}), Composition({2, 2}), Composition({3, 2})})
    generic(at, c);
  const bool ok = one <= 1e-9 && final_dev <= 1e-9 && two <= 1e-9 && bi <= 1e-8;
  return {ok, "typeI " + g(one) + ", final " + g(final_dev) + ", typeII " +
                  g(two) + ", biortho " + g(bi)};
}

Outcome laguerre_limits() {
  const int n = 3;
  // deviation measured against max(1, |limit|): P itself is O(10) at x = 5
  double worst = 0.0, worst_abs = 0.0, ratio_lo = 1e300, ratio_hi = 0.0;
  for (double alpha : {0.0, 1.0})
    for (double x : {0.5, 2.0, 5.0}) {
      const double p_lim = -6.0 * laguerre(n, alpha, x);
      const double q_lim = std::pow(x, alpha) * std::exp(-x) * laguerre(n - 1, alpha, x) / std::tgamma(n + alpha);
      auto dev = [&](double a) {
        const ChgueParams p{alpha, std::vector<double>(n, a)};
        return std::pair{std::abs(chgue_type_two(p)(x) - p_lim), std::abs(chgue_type_one(p)(x) - q_lim)};
      };
      const auto [dp, dq] = dev(1e-5);
      const auto [dp2, dq2] = dev(5e-6);
      worst_abs = std::max({worst_abs, dp, dq});
      worst = std::max({worst, dp / std::max(1.0, std::abs(p_lim)), dq / std::max(1.0, std::abs(q_lim))});
      for (double r : {dp / dp2, dq / dq2}) {
        ratio_lo = std::min(ratio_lo, r);
        ratio_hi = std::max(ratio_hi, r);
      }
    }
  const bool ok = worst <= 1e-4 && ratio_lo >= 1.5 && ratio_hi <= 2.5;
  return {ok, "max scaled dev " + g(worst) + " (abs " + g(worst_abs) + "), halving ratio in [" + g(ratio_lo) + ", " +
                  g(ratio_hi) + "]"};
}

Outcome christoffel_darboux() {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> half(0.05, 10.0), line(-3.0, 3.0);
  double worst = 0.0;
  for (int which = 0; which < 3; ++which) {
    const bool herm = which == 2;
    const double alpha = which;
    const OrthoPolySystem sys =
        herm ? op_from_weight(hermite_weight(), Interval::real_line(), 8)
             : op_from_weight(laguerre_weight(alpha), Interval::half_line(), 8, gauss_laguerre(64, alpha));
    for (int n = 1; n <= 8; ++n)
      for (int t = 0; t < 10; ++t) {
        const double x = herm ? line(gen) : half(gen), y = herm ? line(gen) : half(gen);
        const CdCheck c = cd_check(sys, n, x, y);
        worst = std::max(worst, std::abs(c.lhs - c.rhs) / std::max(1.0, std::abs(c.lhs)));
      }
  }
  return {worst <= 1e-9, "max dev " + g(worst)};
}

Outcome rank_decomp() {
  double worst = 0.0;
  const double alpha = 1.0;
  for (const auto& [a, r] : {std::pair{std::vector<double>{0.9, 0.0, 0.0}, 1},
                             std::pair{std::vector<double>{1.2, 0.5, 0.0, 0.0}, 2}}) {
    const KernelData k = build_kernel(confluent_ensemble(group_sources(a), alpha));
    for (double x : {0.3, 1.4, 4.0})
      for (double y : {0.7, 2.5}) {
        const RankDecomposition d = rank_decomposition(ChgueParams{alpha, a}, r, x, y);
        worst = std::max(worst, rel(d.full, kernel_eval(k, x, y)));
      }
  }
  return {worst <= 1e-6, "max rel " + g(worst)};
}

Outcome correlation_definition() {
  double worst = 0.0;
  auto check = [&](const KernelData& k, const std::vector<std::vector<double>>& pts) {
    for (const auto& p : pts) {
      if (static_cast<int>(p.size()) > k.n()) continue;
      worst = std::max(worst, rel(correlation_by_marginal(k, p), correlation(k, p)));
    }
  };
  const std::vector<std::vector<double>> pts{{0.7}, {2.2}, {0.7, 2.2}, {1.1, 3.4}};
  for (const std::vector<double>& a :
       {std::vector<double>{0.6}, std::vector<double>{0.3, 1.1}, std::vector<double>{0.2, 0.7, 1.3}}) {
    check(chgue_kernel_data(ChgueParams{1.0, a}), pts);
    const int n = static_cast<int>(a.size());
    check(build_kernel(op_ensemble(laguerre_weight(1.0), Interval::half_line(), n, gauss_laguerre(64, 1.0))), pts);
  }
  return {worst <= 1e-6, "max rel " + g(worst)};
}

Outcome mc_density() {
  const SourceModel m = SourceModel::chiral(1.0, {0.3, 1.1});
  const Rho1Report rep = rho1_check(m, model_density(m), 40, 0.0, 12.0, 100000, 2024);
  const auto s1 = avg_charpoly(m, 1.7, 20000, 5, 1);
  bool same = true;
  for (std::size_t w : {2u, 4u}) {
    const auto sw = avg_charpoly(m, 1.7, 20000, 5, w);
    same = same && sw.value == s1.value && sw.std_error == s1.std_error;
  }
  const auto sp1 = sample_spectra(m, 1000, 9, 1), sp4 = sample_spectra(m, 1000, 9, 4);
  same = same && sp1 == sp4;
  return {rep.fraction_within_3sigma >= 0.95 && same,
          "within 3 sigma " + g(rep.fraction_within_3sigma) + ", bitwise " + (same ? "yes" : "no")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {"gram closed form vs quadrature", gram_closed_form},
      {"kernel from characteristic-polynomial ratio", ratio_identity},
      {"type I / type II from averages", averages},
      {"kernel equals sum P_i Q_i", corollary},
      {"orthogonality and staircase biorthogonality", orthogonality},
      {"Laguerre limits", laguerre_limits},
      {"Christoffel-Darboux identity", christoffel_darboux},
      {"finite-rank decomposition", rank_decomp},
      {"correlation determinant vs marginal", correlation_definition},
      {"Monte Carlo density and reproducibility", mc_density},
  };
  int failed = 0;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = all[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s [%zu] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", i + 1, all[i].name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}
