#pragma once

// Command-line front end. run_cli() is the whole program minus process setup,
// so the test suite can drive it with in-memory streams.
//
// Exit codes: 0 ok, 1 verification failure, 2 usage or domain error,
// 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "biortho/charpoly_avg.hpp"
#include "biortho/chgue.hpp"
#include "biortho/core.hpp"
#include "biortho/multiple_poly.hpp"

namespace biortho {

inline constexpr const char* kVersion = "1.0.0";

namespace cli {

using json = nlohmann::ordered_json;

enum Exit { kOk = 0, kVerifyFailed = 1, kUsage = 2, kNumeric = 3 };

struct RunConfig {
  std::string subcommand;
  std::string ensemble = "chgue";
  double alpha = 1.0;
  std::string a = "0.3,1.1";
  std::string b;
  std::string mult;
  int n = 0;
  std::string grid;
  std::string points;
  std::string kind = "II";
  std::size_t samples = 0;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
  std::string format = "csv";
  std::string out;
  std::string suite;
  bool cross_check = false;
  std::vector<std::string> tol_override;
  std::string config;
};

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw DomainError(std::string(what) + ": empty entry in list");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw DomainError(std::string(what) + ": cannot parse '" + item + "'");
    }
    if (used != item.size()) throw DomainError(std::string(what) + ": cannot parse '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw DomainError(std::string(what) + ": list is empty");
  return out;
}

/// Inclusive linear span "min:max:count".
inline std::vector<double> parse_grid(const std::string& s) {
  const auto c1 = s.find(':'), c2 = s.rfind(':');
  if (c1 == std::string::npos || c1 == c2) throw DomainError("--grid: expected min:max:count");
  double lo = 0.0, hi = 0.0;
  long count = 0;
  try {
    lo = std::stod(s.substr(0, c1));
    hi = std::stod(s.substr(c1 + 1, c2 - c1 - 1));
    count = std::stol(s.substr(c2 + 1));
  } catch (const std::exception&) {
    throw DomainError("--grid: expected min:max:count");
  }
  if (count < 1) throw DomainError("--grid: count must be >= 1");
  std::vector<double> g(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) g[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (count - 1);
  return g;
}

/// The ensemble named on the command line, resolved to one of the library paths.
struct Resolved {
  enum class Kind { ChgueDistinct, ChgueConfluent, Laguerre, Hermite, Custom };
  Kind kind = Kind::ChgueDistinct;
  int n = 0;
  double alpha = 0.0;
  ChgueParams chgue;
  ConfluentSpec confluent;
  std::vector<double> source;  // Hermite only
  WeightSystem ws;             // every kind except ChgueDistinct
  Composition comp;
  json params;
};

inline RealFn weight_from_json(const json& w) {
  const double power = w.value("power", 0.0);
  std::vector<double> poly = w.value("poly", std::vector<double>{});
  if (power < 0.0) throw DomainError("custom weight: power must be >= 0");
  return [power, poly](double x) {
    double e = 0.0, xp = 1.0;
    for (double c : poly) {
      e += c * xp;
      xp *= x;
    }
    const double base = power == 0.0 ? 1.0 : std::pow(std::abs(x), power);
    return base * std::exp(-e);
  };
}

inline Resolved resolve(const RunConfig& cfg, bool a_given) {
  Resolved r;
  r.alpha = cfg.alpha;
  r.params["ensemble"] = cfg.ensemble;
  if (cfg.ensemble == "chgue") {
    if (!(cfg.alpha >= 0.0)) throw DomainError("--alpha must be >= 0");
    if (!cfg.b.empty()) {
      const std::vector<double> b = parse_list(cfg.b, "--b");
      const std::vector<double> m = parse_list(cfg.mult.empty() ? std::string("1") : cfg.mult, "--mult");
      if (m.size() != b.size()) throw DomainError("--mult must have one entry per --b value");
      std::vector<int> parts;
      for (double v : m) {
        if (v < 1 || std::floor(v) != v) throw DomainError("--mult entries must be positive integers");
        parts.push_back(static_cast<int>(v));
      }
      r.confluent = ConfluentSpec{b, Composition(parts)};
      r.n = r.confluent.m.weight();
      std::vector<double> a;
      for (std::size_t k = 0; k < b.size(); ++k) a.insert(a.end(), static_cast<std::size_t>(parts[k]), b[k]);
      r.chgue = ChgueParams{cfg.alpha, a};
      r.params["b"] = b;
      r.params["mult"] = parts;
    } else {
      r.chgue = ChgueParams{cfg.alpha, parse_list(cfg.a, "--a")};
      r.n = r.chgue.n();
      r.params["a"] = r.chgue.a;
    }
    r.chgue.validate();
    if (cfg.n != 0 && cfg.n != r.n) throw DomainError("--n does not match the number of source parameters");
    if (r.n > max_ensemble_size())
      throw CapacityError("N = " + std::to_string(r.n) + " exceeds the guard (set BIORTHO_MAX_N)");
    r.params["alpha"] = cfg.alpha;
    r.params["n"] = r.n;
    if (r.chgue.distinct() && cfg.b.empty()) {
      r.kind = Resolved::Kind::ChgueDistinct;
    } else {
      r.kind = Resolved::Kind::ChgueConfluent;
      if (cfg.b.empty()) r.confluent = group_sources(r.chgue.a);
      auto wc = confluent_weights(r.confluent, cfg.alpha);
      r.ws = std::move(wc.first);
      r.comp = std::move(wc.second);
    }
    return r;
  }
  if (cfg.ensemble == "laguerre" || cfg.ensemble == "hermite") {
    const bool lag = cfg.ensemble == "laguerre";
    if (lag && !(cfg.alpha > -1.0)) throw DomainError("--alpha must exceed -1");
    if (!lag && a_given) r.source = parse_list(cfg.a, "--a");
    r.n = cfg.n > 0 ? cfg.n : (r.source.empty() ? 0 : static_cast<int>(r.source.size()));
    if (r.n < 1) throw DomainError("--n is required (N >= 1) for the " + cfg.ensemble + " ensemble");
    if (!r.source.empty() && static_cast<int>(r.source.size()) != r.n)
      throw DomainError("--a length must equal --n");
    if (r.n > max_ensemble_size())
      throw CapacityError("N = " + std::to_string(r.n) + " exceeds the guard (set BIORTHO_MAX_N)");
    r.kind = lag ? Resolved::Kind::Laguerre : Resolved::Kind::Hermite;
    if (lag) {
      r.ws = WeightSystem{{w_alpha(cfg.alpha, 0.0)}, Interval::half_line(), gauss_laguerre(kDefaultRuleSize, cfg.alpha)};
      r.params["alpha"] = cfg.alpha;
    } else {
      r.ws = WeightSystem{{[](double x) { return std::exp(-x * x); }}, Interval::real_line(), gauss_hermite(kDefaultRuleSize)};
      if (!r.source.empty()) r.params["a"] = r.source;
    }
    r.comp = Composition({r.n});
    r.params["n"] = r.n;
    return r;
  }
  const std::string prefix = "custom:";
  if (cfg.ensemble.rfind(prefix, 0) == 0) {
    const std::string path = cfg.ensemble.substr(prefix.size());
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open custom weights file '" + path + "'");
    json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw DomainError(std::string("custom weights file: ") + e.what());
    }
    Interval iv = Interval::half_line();
    const json ivj = j.value("interval", json("half_line"));
    if (ivj.is_string() && ivj == "real_line") iv = Interval::real_line();
    else if (ivj.is_array() && ivj.size() == 2) iv = Interval::segment(ivj[0].get<double>(), ivj[1].get<double>());
    else if (!(ivj.is_string() && ivj == "half_line")) throw DomainError("custom weights file: bad interval");
    if (!j.contains("weights") || !j["weights"].is_array() || j["weights"].empty())
      throw DomainError("custom weights file: 'weights' must be a non-empty array");
    for (const auto& w : j["weights"]) r.ws.weights.push_back(weight_from_json(w));
    r.ws.interval = iv;
    r.ws.quad = default_rule(iv);
    std::vector<int> parts = j.value("n", std::vector<int>(r.ws.weights.size(), 1));
    r.comp = Composition(parts);
    if (r.comp.size() != r.ws.weights.size()) throw DomainError("custom weights file: 'n' must match 'weights'");
    r.n = r.comp.weight();
    if (cfg.n != 0 && cfg.n != r.n) throw DomainError("--n does not match the custom composition");
    if (r.n < 1) throw DomainError("custom weights file: composition must have positive weight");
    if (r.n > max_ensemble_size())
      throw CapacityError("N = " + std::to_string(r.n) + " exceeds the guard (set BIORTHO_MAX_N)");
    r.kind = Resolved::Kind::Custom;
    r.params["file"] = path;
    r.params["n"] = r.n;
    return r;
  }
  throw DomainError("--ensemble must be chgue, laguerre, hermite or custom:FILE");
}

inline EnsembleSpec resolved_spec(const Resolved& r) {
  switch (r.kind) {
    case Resolved::Kind::ChgueDistinct: return chgue_ensemble(r.chgue);
    case Resolved::Kind::ChgueConfluent: return confluent_ensemble(r.confluent, r.alpha);
    case Resolved::Kind::Laguerre:
      return make_ensemble(r.ws.interval, eta_laguerre(r.alpha, r.n), xi_family(r.ws, r.comp), r.ws.quad);
    case Resolved::Kind::Hermite:
      if (!r.source.empty()) return model_ensemble(SourceModel::hermitian(r.source));
      return make_ensemble(r.ws.interval, monomials(r.n), xi_family(r.ws, r.comp), r.ws.quad);
    case Resolved::Kind::Custom:
      return make_ensemble(r.ws.interval, monomials(r.n), xi_family(r.ws, r.comp), r.ws.quad);
  }
  throw DomainError("unknown ensemble");
}

inline KernelData resolved_kernel_data(const Resolved& r) {
  if (r.kind == Resolved::Kind::ChgueDistinct) return chgue_kernel_data(r.chgue);
  return build_kernel(resolved_spec(r));
}

/// Primary kernel evaluator for the ensemble.
inline std::function<double(double, double)> primary_kernel(const Resolved& r) {
  if (r.kind == Resolved::Kind::ChgueDistinct) {
    const ChgueParams p = r.chgue;
    return [p](double x, double y) { return chgue_kernel(p, x, y); };
  }
  if (r.kind == Resolved::Kind::Laguerre) {
    const int n = r.n;
    const double alpha = r.alpha;
    return [n, alpha](double x, double y) { return laguerre_cd_kernel(n, alpha, x, y); };
  }
  auto kd = std::make_shared<const KernelData>(resolved_kernel_data(r));
  return [kd](double x, double y) { return kernel_eval(*kd, x, y); };
}

/// Independent evaluator used by --cross-check: the generic Gram path by
/// quadrature for chGUE and Laguerre, sum_k P_k(x) Q_{k+1}(y) along the
/// default staircase for multi-weight systems, the Christoffel-Darboux sum
/// otherwise.
inline std::function<double(double, double)> reference_kernel(const Resolved& r) {
  if (r.kind == Resolved::Kind::ChgueDistinct || r.kind == Resolved::Kind::Laguerre) {
    auto kd = std::make_shared<const KernelData>(build_kernel(resolved_spec(r)));
    return [kd](double x, double y) { return kernel_eval(*kd, x, y); };
  }
  if (r.kind == Resolved::Kind::ChgueConfluent) {
    // a = (a_1 > ... > a_r > 0, 0, ..., 0) has the finite-rank form
    const std::vector<int>& m = r.confluent.m.parts;
    bool finite_rank = r.confluent.b.back() == 0.0;
    for (std::size_t k = 0; k + 1 < m.size(); ++k) finite_rank = finite_rank && m[k] == 1;
    if (!finite_rank) throw DomainError("--cross-check: no independent path for this confluent configuration");
    ChgueParams p = r.chgue;
    std::sort(p.a.begin(), p.a.end(), std::greater<>());
    const int rank = static_cast<int>(m.size()) - 1;
    return [p, rank](double x, double y) { return rank_decomposition(p, rank, x, y).full; };
  }
  if (r.kind == Resolved::Kind::Hermite && !r.source.empty())
    throw DomainError("--cross-check: no independent path for the Hermite ensemble with a source");
  if (r.ws.weights.size() != 1) {
    auto seq = std::make_shared<const BiorthoSequence>(biortho_sequence(r.ws, r.comp));
    return [seq](double x, double y) {
      double s = 0.0;
      for (std::size_t k = 0; k < seq->p.size(); ++k) s += seq->p[k](x) * seq->q[k](y);
      return s;
    };
  }
  auto sys = std::make_shared<const OrthoPolySystem>(op_from_weight(r.ws.weights[0], r.ws.interval, r.n, r.ws.quad));
  const int n = r.n;
  return [sys, n](double x, double y) { return op_kernel(*sys, n, x, y); };
}

struct Report {
  json params;
  json grid = json::array();
  json values = json::array();
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  json extra = json::object();
};

inline void write_report(const Report& rep, const RunConfig& cfg, std::ostream& os) {
  if (cfg.format == "json") {
    json j;
    j["params"] = rep.params;
    j["grid"] = rep.grid;
    j["values"] = rep.values;
    json meta;
    meta["seed"] = cfg.seed;
    meta["versions"] = {{"biortho", kVersion}, {"nlohmann_json", "3.11"}, {"cli11", CLI11_VERSION}};
    for (auto it = rep.extra.begin(); it != rep.extra.end(); ++it) meta[it.key()] = it.value();
    const std::time_t now = std::time(nullptr);
    char ts[32];
    std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    meta["timestamp"] = ts;
    j["metadata"] = meta;
    os << j.dump(2) << "\n";
    return;
  }
  for (std::size_t i = 0; i < rep.header.size(); ++i) os << (i ? "," : "") << rep.header[i];
  os << "\n";
  for (const auto& row : rep.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
}

inline std::map<std::string, double> parse_tolerances(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const std::string& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw DomainError("--tol-override: expected KEY=VAL, got '" + s + "'");
    try {
      out[s.substr(0, eq)] = std::stod(s.substr(eq + 1));
    } catch (const std::exception&) {
      throw DomainError("--tol-override: bad value in '" + s + "'");
    }
  }
  return out;
}

inline double tol(const std::map<std::string, double>& t, const std::string& key, double def) {
  const auto it = t.find(key);
  return it == t.end() ? def : it->second;
}

inline double rel_dev(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// ---- subcommands -------------------------------------------------------------

inline int cmd_kernel(const RunConfig& cfg, const Resolved& r, Report& rep, std::ostream& err) {
  const std::vector<double> grid = parse_grid(cfg.grid.empty() ? "0.5:4:8" : cfg.grid);
  const auto k = primary_kernel(r);
  rep.header = {"x", "y", "K"};
  std::vector<std::vector<double>> vals(grid.size(), std::vector<double>(grid.size()));
  double scale = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j) {
      vals[i][j] = k(grid[i], grid[j]);
      scale = std::max(scale, std::abs(vals[i][j]));
      rep.rows.push_back({fmt17(grid[i]), fmt17(grid[j]), fmt17(vals[i][j])});
    }
  rep.grid = grid;
  rep.values = vals;
  if (!cfg.cross_check) return kOk;
  const auto ref = reference_kernel(r);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < grid.size(); ++j)
      worst = std::max(worst, rel_dev(vals[i][j], ref(grid[i], grid[j]), 1e-6 * scale));
  const double limit = tol(parse_tolerances(cfg.tol_override), "cross_check", 1e-7);
  rep.extra["cross_check_max_rel_dev"] = worst;
  err << "cross-check: max relative deviation " << fmt17(worst) << " (limit " << fmt17(limit) << ") "
      << (worst <= limit ? "PASS" : "FAIL") << "\n";
  return worst <= limit ? kOk : kVerifyFailed;
}

inline int cmd_poly(const RunConfig& cfg, const Resolved& r, Report& rep, std::ostream& err) {
  const std::vector<double> grid = parse_grid(cfg.grid.empty() ? "0:10:11" : cfg.grid);
  if (cfg.kind != "I" && cfg.kind != "II") throw DomainError("--kind must be I or II");
  const bool chgue = r.kind == Resolved::Kind::ChgueDistinct || r.kind == Resolved::Kind::ChgueConfluent;
  std::function<double(double)> f;
  std::vector<double> moments;
  if (cfg.kind == "II") {
    if (chgue) {
      const LaguerreSeries p = chgue_type_two(r.chgue);
      f = [p](double x) { return p(x); };
    } else {
      const TypeIIPolynomial p = type_two(r.ws, r.comp);
      if (!p.warning.empty()) err << "warning: " << p.warning << "\n";
      f = [p](double x) { return p(x); };
    }
  } else {
    if (chgue) {
      const ChgueTypeOne q = chgue_type_one(r.chgue);
      f = [q](double x) { return q(x); };
      const QuadratureRule rule = gauss_laguerre(kDefaultRuleSize, r.alpha);
      for (int j = 0; j < r.n; ++j)
        moments.push_back(rule.integrate_plain([&](double x) { return std::pow(x, j) * q(x); }));
    } else {
      const TypeIFunction q = type_one(r.ws, r.comp);
      if (!q.warning.empty()) err << "warning: " << q.warning << "\n";
      f = [q](double x) { return q(x); };
      moments = check_ortho_one(q);
    }
    err << "self-test: final moment int x^" << r.n - 1 << " Q dx = " << fmt17(moments.back()) << "\n";
    rep.extra["final_moment"] = moments.back();
  }
  rep.header = {"x", cfg.kind == "I" ? "Q" : "P"};
  for (double x : grid) {
    const double v = f(x);
    rep.values.push_back(v);
    rep.rows.push_back({fmt17(x), fmt17(v)});
  }
  rep.grid = grid;
  return kOk;
}

inline int cmd_corr(const RunConfig& cfg, const Resolved& r, Report& rep, std::ostream&) {
  const KernelData kd = resolved_kernel_data(r);
  if (!cfg.points.empty()) {
    const std::vector<double> pts = parse_list(cfg.points, "--points");
    const double v = correlation(kd, pts);
    rep.header = {"n", "rho_n"};
    rep.rows.push_back({std::to_string(pts.size()), fmt17(v)});
    rep.grid = pts;
    rep.values.push_back(v);
    return kOk;
  }
  const std::vector<double> grid = parse_grid(cfg.grid.empty() ? "0.5:4:8" : cfg.grid);
  rep.header = {"x", "rho_1"};
  for (double x : grid) {
    const double v = correlation(kd, std::vector<double>{x});
    rep.values.push_back(v);
    rep.rows.push_back({fmt17(x), fmt17(v)});
  }
  rep.grid = grid;
  return kOk;
}

inline SourceModel resolved_model(const Resolved& r) {
  switch (r.kind) {
    case Resolved::Kind::ChgueDistinct:
    case Resolved::Kind::ChgueConfluent: return SourceModel::chiral(r.alpha, r.chgue.a);
    case Resolved::Kind::Laguerre: return SourceModel::chiral(r.alpha, std::vector<double>(r.n, 0.0));
    case Resolved::Kind::Hermite:
      return SourceModel::hermitian(r.source.empty() ? std::vector<double>(r.n, 0.0) : r.source);
    case Resolved::Kind::Custom: break;
  }
  SourceModel m = SourceModel::hermitian(std::vector<double>(r.n, 0.0));
  m.potential = SourceModel::Potential::Custom;
  return m;
}

inline int cmd_sample(const RunConfig& cfg, const Resolved& r, Report& rep, std::ostream&) {
  const std::size_t count = cfg.samples == 0 ? 10 : cfg.samples;
  const auto spectra = sample_spectra(resolved_model(r), count, cfg.seed, cfg.workers);
  rep.header = {"sample"};
  for (int i = 0; i < r.n; ++i) rep.header.push_back("lambda" + std::to_string(i + 1));
  for (std::size_t s = 0; s < spectra.size(); ++s) {
    std::vector<std::string> row{std::to_string(s)};
    for (double v : spectra[s]) row.push_back(fmt17(v));
    rep.rows.push_back(std::move(row));
    rep.values.push_back(spectra[s]);
  }
  return kOk;
}

struct Check {
  std::string name;
  double residual;
  double tolerance;
  bool pass() const { return residual <= tolerance; }
};

inline std::vector<Check> suite_gram(const Resolved& r, const std::map<std::string, double>& t) {
  if (r.kind != Resolved::Kind::ChgueDistinct) throw DomainError("verify gram: needs distinct chgue sources");
  const double limit = tol(t, "gram", 1e-8);
  const Matrix closed = chgue_gram(r.chgue);
  const Matrix quad = quadrature_gram(chgue_ensemble(r.chgue));
  std::vector<Check> out;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < closed.rows(); ++i)
    for (Eigen::Index j = 0; j < closed.cols(); ++j)
      worst = std::max(worst, rel_dev(quad(i, j), closed(i, j), 1e-300));
  out.push_back({"gram closed form vs quadrature (max rel)", worst, limit});
  double expect = vandermonde(r.chgue.a);
  for (double v : r.chgue.a) expect *= std::exp(v);
  out.push_back({"det g vs prod e^a * Vandermonde (rel)", rel_dev(det(closed), expect, 1e-300), tol(t, "gram_det", 1e-10)});
  return out;
}

inline std::vector<Check> suite_kernel(const RunConfig& cfg, const Resolved& r, const std::map<std::string, double>& t) {
  const std::vector<double> grid = parse_grid(cfg.grid.empty() ? "0.5:4:4" : cfg.grid);
  const auto k = primary_kernel(r);
  std::vector<Check> out;
  if (r.kind != Resolved::Kind::Custom && r.kind != Resolved::Kind::ChgueConfluent &&
      !(r.kind == Resolved::Kind::Hermite && !r.source.empty())) {
    const auto ref = reference_kernel(r);
    double worst = 0.0;
    for (double x : grid)
      for (double y : grid) worst = std::max(worst, rel_dev(k(x, y), ref(x, y), 1e-12));
    out.push_back({"kernel vs independent path (max rel)", worst, tol(t, "kernel", 1e-7)});
  }
  if (r.kind == Resolved::Kind::ChgueDistinct) {
    double worst = 0.0;
    for (double x : grid)
      for (double y : grid) {
        const double a = chgue_kernel(r.chgue, x, y), b = chgue_kernel_quadrature(r.chgue, x, y);
        worst = std::max(worst, rel_dev(a, b, 1e-12));
      }
    out.push_back({"closed-form u moments vs quadrature (max rel)", worst, tol(t, "kernel_quadrature", 1e-9)});
  }
  const KernelData kd = resolved_kernel_data(r);
  const QuadratureRule& q = kd.spec->quad;
  const double trace = q.integrate_plain([&](double x) { return kernel_eval(kd, x, x); });
  out.push_back({"trace int K(x,x) dx - N", std::abs(trace - r.n), tol(t, "trace", 1e-6)});
  const double x0 = grid.front(), y0 = grid.back();
  const double repro = q.integrate_plain([&](double s) { return kernel_eval(kd, x0, s) * kernel_eval(kd, s, y0); });
  out.push_back({"reproducing int K(x,s)K(s,y) ds - K(x,y)", std::abs(repro - kernel_eval(kd, x0, y0)),
                 tol(t, "reproducing", 1e-6)});
  return out;
}

inline std::vector<Check> suite_ortho(const Resolved& r, const std::map<std::string, double>& t) {
  std::vector<Check> out;
  const double lim = tol(t, "ortho", 1e-9), lim_bi = tol(t, "biortho", 1e-8);
  if (r.kind == Resolved::Kind::ChgueDistinct || r.kind == Resolved::Kind::ChgueConfluent) {
    const QuadratureRule rule = gauss_laguerre(kDefaultRuleSize, r.alpha);
    const ChgueTypeOne q = chgue_type_one(r.chgue);
    double worst = 0.0, last = 0.0;
    for (int j = 0; j < r.n; ++j) {
      const double m = rule.integrate_plain([&](double x) { return std::pow(x, j) * q(x); });
      if (j + 1 < r.n) worst = std::max(worst, std::abs(m));
      else last = m;
    }
    out.push_back({"type I moments j<N-1 (max abs)", worst, lim});
    out.push_back({"type I final moment - 1", std::abs(last - 1.0), lim});
    const LaguerreSeries p = chgue_type_two(r.chgue);
    const ConfluentSpec groups = group_sources(r.chgue.a);
    auto [ws, comp] = confluent_weights(groups, r.alpha);
    TypeIIPolynomial pm;
    pm.comp = comp;
    pm.coeffs = p.monomial_coefficients();
    double worst2 = 0.0;
    for (double v : check_ortho_two(pm, ws, comp)) worst2 = std::max(worst2, std::abs(v));
    out.push_back({"type II orthogonality (max abs)", worst2, lim});
    const bool ordered = std::is_sorted(r.chgue.a.rbegin(), r.chgue.a.rend()) && r.chgue.distinct();
    if (ordered) {
      double worst3 = 0.0;
      std::span<const double> a(r.chgue.a);
      for (int i = 0; i < r.n; ++i) {
        const LaguerreSeries pi = chgue_type_two(r.alpha, a.first(static_cast<std::size_t>(i)));
        for (int j = 0; j < r.n; ++j) {
          const ChgueTypeOne qj(r.alpha, std::vector<double>(a.begin(), a.begin() + j + 1));
          const double v = rule.integrate_plain([&](double x) { return pi(x) * qj(x); });
          worst3 = std::max(worst3, std::abs(v - (i == j ? 1.0 : 0.0)));
        }
      }
      out.push_back({"staircase int P_i Q_j - delta_ij (max abs)", worst3, lim_bi});
    }
    return out;
  }
  const TypeIFunction q = type_one(r.ws, r.comp);
  const std::vector<double> mom = check_ortho_one(q);
  double worst = 0.0;
  for (std::size_t j = 0; j + 1 < mom.size(); ++j) worst = std::max(worst, std::abs(mom[j]));
  out.push_back({"type I moments j<N-1 (max abs)", worst, lim});
  out.push_back({"type I final moment - 1", std::abs(mom.back() - 1.0), lim});
  const TypeIIPolynomial p = type_two(r.ws, r.comp);
  double worst2 = 0.0;
  for (double v : check_ortho_two(p, r.ws, r.comp)) worst2 = std::max(worst2, std::abs(v));
  out.push_back({"type II orthogonality (max abs)", worst2, lim});
  const BiorthoSequence seq = biortho_sequence(r.ws, r.comp);
  double worst3 = 0.0;
  for (int i = 0; i < r.n; ++i)
    for (int j = 0; j < r.n; ++j) {
      const double v = r.ws.quad.integrate_plain([&](double x) { return seq.p[i](x) * seq.q[j](x); });
      worst3 = std::max(worst3, std::abs(v - (i == j ? 1.0 : 0.0)));
    }
  out.push_back({"staircase int P_i Q_j - delta_ij (max abs)", worst3, lim_bi});
  return out;
}

inline std::vector<Check> suite_corollary(const RunConfig& cfg, const Resolved& r, const std::map<std::string, double>& t) {
  if (r.kind != Resolved::Kind::ChgueDistinct) throw DomainError("verify corollary: needs distinct chgue sources");
  const std::vector<double> grid = parse_grid(cfg.grid.empty() ? "0.3:5:4" : cfg.grid);
  double worst = 0.0;
  for (double x : grid)
    for (double y : grid) {
      const KernelSum ks = kernel_sum_check(r.chgue, x, y);
      worst = std::max(worst, rel_dev(ks.kernel, ks.sum, 1e-12));
    }
  return {{"K_N vs sum P_i Q_i (max rel)", worst, tol(t, "corollary", 1e-6)}};
}

inline std::vector<Check> suite_rankdecomp(const RunConfig& cfg, const Resolved& r, const std::map<std::string, double>& t) {
  int rank = 0;
  while (rank < r.n && r.chgue.a[rank] > 0.0) ++rank;
  const std::vector<double> grid = parse_grid(cfg.grid.empty() ? "0.5:4:4" : cfg.grid);
  const KernelData kd = build_kernel(confluent_ensemble(group_sources(r.chgue.a), r.alpha));
  double worst = 0.0, identity = 0.0;
  for (double x : grid)
    for (double y : grid) {
      if (x == y) continue;
      const RankDecomposition d = rank_decomposition(r.chgue, rank, x, y);
      worst = std::max(worst, rel_dev(d.full, kernel_eval(kd, x, y), 1e-12));
      identity = std::max(identity, std::abs(d.full - d.unperturbed - d.correction));
    }
  return {{"Kbar + sum p_k q_k vs confluent kernel (max rel)", worst, tol(t, "rankdecomp", 1e-6)},
          {"full - unperturbed - correction", identity, 1e-14}};
}

inline std::vector<Check> suite_mc(const RunConfig& cfg, const Resolved& r, const std::map<std::string, double>& t) {
  const SourceModel m = resolved_model(r);
  const std::size_t samples = cfg.samples == 0 ? 100000 : cfg.samples;
  const double nsig = tol(t, "mc_sigma", 3.0);
  std::vector<Check> out;
  std::function<double(double)> pref;
  if (r.kind == Resolved::Kind::ChgueDistinct || r.kind == Resolved::Kind::ChgueConfluent) {
    const LaguerreSeries p = chgue_type_two(r.chgue);
    pref = [p](double x) { return p(x); };
  } else {
    const KernelData kd = resolved_kernel_data(r);
    pref = [kd](double x) { return charpoly_by_quadrature(kd, x); };
  }
  const bool half = m.kind == SourceModel::Kind::Chiral;
  const std::vector<double> xs = half ? std::vector<double>{0.5, 1.0, 2.0, 3.5, 5.0}
                                      : std::vector<double>{-1.5, -0.5, 0.0, 0.7, 1.5};
  for (double x : xs) {
    const AvgEstimate<double> e = avg_charpoly(m, x, samples, cfg.seed, cfg.workers);
    const double z = std::abs(e.value - pref(x)) / std::max(e.std_error, 1e-300);
    out.push_back({"<det(x-X)> at x=" + fmt17(x) + " (sigmas)", z, nsig});
  }
  const double lo = half ? 0.0 : -4.0, hi = half ? 12.0 : 4.0;
  const Rho1Report rep = rho1_check(m, model_density(m), 40, lo, hi, samples, cfg.seed + 1, cfg.workers);
  out.push_back({"rho_1 histogram: fraction of bins outside 3 sigma", 1.0 - rep.fraction_within_3sigma,
                 tol(t, "rho1_outside", 0.05)});
  return out;
}

inline int cmd_verify(const RunConfig& cfg, const Resolved& r, Report& rep, std::ostream& err) {
  const auto t = parse_tolerances(cfg.tol_override);
  std::vector<Check> checks;
  if (cfg.suite == "gram") checks = suite_gram(r, t);
  else if (cfg.suite == "kernel") checks = suite_kernel(cfg, r, t);
  else if (cfg.suite == "ortho") checks = suite_ortho(r, t);
  else if (cfg.suite == "corollary") checks = suite_corollary(cfg, r, t);
  else if (cfg.suite == "rankdecomp") checks = suite_rankdecomp(cfg, r, t);
  else if (cfg.suite == "mc") checks = suite_mc(cfg, r, t);
  else throw DomainError("--suite must be gram, kernel, ortho, corollary, rankdecomp or mc");
  rep.header = {"check", "residual", "tolerance", "status"};
  bool ok = true;
  for (const Check& c : checks) {
    ok = ok && c.pass();
    rep.rows.push_back({"\"" + c.name + "\"", fmt17(c.residual), fmt17(c.tolerance), c.pass() ? "PASS" : "FAIL"});
    rep.values.push_back({{"check", c.name}, {"residual", c.residual}, {"tolerance", c.tolerance}, {"pass", c.pass()}});
    if (!c.pass()) err << "FAIL " << c.name << ": residual " << fmt17(c.residual) << " > " << fmt17(c.tolerance) << "\n";
  }
  rep.extra["suite"] = cfg.suite;
  rep.extra["result"] = ok ? "PASS" : "FAIL";
  err << "verify " << cfg.suite << ": " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kOk : kVerifyFailed;
}

// ---- option plumbing -----------------------------------------------------------

inline void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("--ensemble", c.ensemble, "chgue | laguerre | hermite | custom:FILE");
  sub->add_option("--alpha", c.alpha, "alpha = M - N");
  sub->add_option("--a", c.a, "comma-separated source parameters");
  sub->add_option("--b", c.b, "distinct source values (confluent form)");
  sub->add_option("--mult", c.mult, "multiplicities for --b");
  sub->add_option("--n", c.n, "ensemble size N");
  sub->add_option("--grid", c.grid, "min:max:count (inclusive)");
  sub->add_option("--points", c.points, "comma-separated points for corr");
  sub->add_option("--kind", c.kind, "I | II");
  sub->add_option("--samples", c.samples, "Monte Carlo sample count")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "RNG seed");
  sub->add_option("--workers", c.workers, "worker threads (0 = hardware)");
  sub->add_option("--format", c.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("--out", c.out, "output path (default stdout)");
  sub->add_option("--suite", c.suite, "gram | kernel | ortho | corollary | rankdecomp | mc");
  sub->add_flag("--cross-check", c.cross_check, "compare against an independent kernel path");
  sub->add_option("--tol-override", c.tol_override, "KEY=VAL tolerance override")->allow_extra_args(false);
  sub->add_option("--config", c.config, "JSON config file (flags win)");
}

/// Fills options not given on the command line from the JSON config.
inline void apply_config(CLI::App* sub, RunConfig& c) {
  std::ifstream in(c.config);
  if (!in) throw DomainError("cannot open config file '" + c.config + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DomainError(std::string("config file: ") + e.what());
  }
  if (!j.is_object()) throw DomainError("config file: expected a JSON object");
  auto unset = [&](const char* flag) { return sub->get_option(flag)->count() == 0; };
  auto as_list = [](const json& v) {
    if (!v.is_array()) return v.is_string() ? v.get<std::string>() : fmt17(v.get<double>());
    std::string s;
    for (const auto& e : v) s += (s.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : fmt17(e.get<double>()));
    return s;
  };
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      const std::string flag = "--" + (k == "cross_check" ? std::string("cross-check") : k == "tol_override" ? std::string("tol-override") : k);
      if (k == "config") continue;
      if (!sub->get_option_no_throw(flag)) throw DomainError("config file: unknown key '" + k + "'");
      if (!unset(flag.c_str())) continue;
      if (k == "ensemble") c.ensemble = v.get<std::string>();
      else if (k == "alpha") c.alpha = v.get<double>();
      else if (k == "a") c.a = as_list(v);
      else if (k == "b") c.b = as_list(v);
      else if (k == "mult") c.mult = as_list(v);
      else if (k == "n") c.n = v.get<int>();
      else if (k == "grid") c.grid = v.get<std::string>();
      else if (k == "points") c.points = as_list(v);
      else if (k == "kind") c.kind = v.get<std::string>();
      else if (k == "samples") c.samples = v.get<std::size_t>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "workers") c.workers = v.get<std::size_t>();
      else if (k == "format") c.format = v.get<std::string>();
      else if (k == "out") c.out = v.get<std::string>();
      else if (k == "suite") c.suite = v.get<std::string>();
      else if (k == "cross_check") c.cross_check = v.get<bool>();
      else if (k == "tol_override") c.tol_override = v.get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw DomainError(std::string("config file: ") + e.what());
  }
  if (c.format != "csv" && c.format != "json") throw DomainError("config file: format must be csv or json");
}

}  // namespace cli

/// Entry point shared by the executable and the tests.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace cli;
  RunConfig cfg;
  CLI::App app{"Biorthogonal ensembles, chiral GUE with a source, and characteristic-polynomial checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  const char* names[] = {"kernel", "poly", "corr", "sample", "verify"};
  const char* help[] = {"correlation kernel on a grid", "type I / type II functions on a grid",
                        "n-point correlation at --points (or rho_1 on a grid)", "eigenvalue draws",
                        "run an invariant suite"};
  std::vector<CLI::App*> subs;
  for (int i = 0; i < 5; ++i) {
    CLI::App* s = app.add_subcommand(names[i], help[i]);
    add_common(s, cfg);
    subs.push_back(s);
  }
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  CLI::App* sub = nullptr;
  for (CLI::App* s : subs)
    if (s->parsed()) sub = s;
  cfg.subcommand = sub->get_name();

  try {
    if (!cfg.config.empty()) apply_config(sub, cfg);
    const bool a_given = sub->get_option("--a")->count() > 0 ||
                         (!cfg.config.empty() && cfg.a != RunConfig{}.a);
    const Resolved r = resolve(cfg, a_given);
    Report rep;
    rep.params = r.params;
    rep.params["subcommand"] = cfg.subcommand;
    if (cfg.subcommand == "poly") rep.params["kind"] = cfg.kind;
    if (cfg.subcommand == "sample" || cfg.subcommand == "verify") rep.params["samples"] = cfg.samples;
    if (cfg.subcommand == "verify") rep.params["suite"] = cfg.suite;
    int code = kOk;
    if (cfg.subcommand == "kernel") code = cmd_kernel(cfg, r, rep, err);
    else if (cfg.subcommand == "poly") code = cmd_poly(cfg, r, rep, err);
    else if (cfg.subcommand == "corr") code = cmd_corr(cfg, r, rep, err);
    else if (cfg.subcommand == "sample") code = cmd_sample(cfg, r, rep, err);
    else code = cmd_verify(cfg, r, rep, err);
    if (cfg.out.empty()) {
      write_report(rep, cfg, out);
    } else {
      std::ofstream f(cfg.out);
      if (!f) throw DomainError("cannot open output file '" + cfg.out + "'");
      write_report(rep, cfg, f);
    }
    return code;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const SingularityError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace biortho
