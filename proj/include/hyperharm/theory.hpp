#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "errors.hpp"
#include "quadrature.hpp"
#include "specfun.hpp"

namespace hyperharm::theory {

inline constexpr double inf = std::numeric_limits<double>::infinity();

inline void require_epsilon(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("epsilon must lie in (0,1)");
}

/// 2(1+c)/eps^2 (1/n + sigma^2)
inline double thm3_bound(double epsilon, std::int64_t n, double sigma_sq, double c) {
  require_epsilon(epsilon);
  if (n < 1) throw DomainError("thm3_bound: n must be positive");
  if (sigma_sq < 0.0) throw DomainError("thm3_bound: sigma_sq must be nonnegative");
  if (!(c > 0.0)) throw DomainError("thm3_bound: c must be positive");
  return 2.0 * (1.0 + c) / (epsilon * epsilon) * (1.0 / static_cast<double>(n) + sigma_sq);
}

/// Levels u- and u+ = sqrt(1 -/+ eps/(1+c)) u of the local refinement.
inline std::pair<double, double> thm3_local_levels(double epsilon, double c, double u) {
  require_epsilon(epsilon);
  const double r = epsilon / (1.0 + c);
  if (r >= 1.0) throw DomainError("thm3_local_bound: eps/(1+c) must be < 1");
  return {std::sqrt(1.0 - r) * u, std::sqrt(1.0 + r) * u};
}

inline double thm3_local_bound(double epsilon, std::int64_t n, const std::function<double(double)>& sigma_sq_at,
                               double c, double u) {
  const auto [um, up] = thm3_local_levels(epsilon, c, u);
  return thm3_bound(epsilon, n, std::max(sigma_sq_at(um), sigma_sq_at(up)), c);
}

/// Expected Euler characteristic as printed: 2(1-Phi(u)) + sqrt(2/pi) (l(l+1)/2) (u phi(u)/2).
inline double gkf_epc_expectation(int ell, double u) {
  const auto g = gaussian(u);
  const double L = ell;
  return 2.0 * g.tail + std::sqrt(2.0 / std::numbers::pi) * (L * (L + 1.0) / 2.0) * (u * g.pdf / 2.0);
}

/// Leading variance term as printed: ((u^3+2u)^2 phi(u)^2)^2 l^3 / (8 pi).
inline double epc_variance_leading(int ell, double u) {
  const double p = gaussian(u).pdf;
  const double a = (u * u * u + 2.0 * u) * (u * u * u + 2.0 * u) * p * p;
  return a * a * std::pow(static_cast<double>(ell), 3) / (8.0 * std::numbers::pi);
}

/// K / (n eps^3)
inline double kol_measure_bound(std::int64_t n, double epsilon, double K) {
  if (!(epsilon > 0.0)) throw DomainError("kol_measure_bound: epsilon must be positive");
  if (n < 1) throw DomainError("kol_measure_bound: n must be positive");
  return K / (static_cast<double>(n) * epsilon * epsilon * epsilon);
}

/// Decay exponents (d-1)/3 in ell and ell/3 in d.
inline std::pair<double, double> expected_kol_rate(int ell, int dim) {
  return {(dim - 1) / 3.0, ell / 3.0};
}

/// ((M + sqrt(2 beta)) sqrt(log ell), ell^{-beta})
inline std::pair<double, double> linfty_upper_tail(double M, double beta, double ell) {
  if (!(ell >= 2.0)) throw DomainError("linfty_upper_tail: ell must be >= 2");
  return {(M + std::sqrt(2.0 * beta)) * std::sqrt(std::log(ell)), std::pow(ell, -beta)};
}

struct LowerParams {
  double K_max;
  double alpha_lo, alpha_hi;
  bool empty() const { return !(alpha_lo < alpha_hi); }
};

/// K_max = sqrt(d/(12d+2)); admissible alpha in (2K^2/d, 1/(6d+1)).
inline LowerParams linfty_lower_params(double K, int dim) {
  if (dim < 2) throw DomainError("linfty_lower_params: dim must be >= 2");
  const double d = dim;
  return {std::sqrt(d / (12.0 * d + 2.0)), 2.0 * K * K / d, 1.0 / (6.0 * d + 1.0)};
}

/// Rate function of chi-square(1) sample means.
inline double cramer_transform(double x) {
  if (!(x > 0.0)) return inf;
  return 0.5 * (x - 1.0 - std::log(x));
}

struct LdpTail {
  double upper_rate;  // exp(-n Lambda*(a))
  double exact;       // P(chi2_n >= n a)
};

inline LdpTail ldp_tail(double a, std::int64_t n) {
  if (!(a > 1.0)) throw DomainError("ldp_tail: a must be > 1");
  if (n < 1) throw DomainError("ldp_tail: n must be positive");
  const double N = static_cast<double>(n);
  return {std::exp(-N * cramer_transform(a)), boost::math::gamma_q(N / 2.0, N * a / 2.0)};
}

inline double borel_tis_tail(double t, double expected_sup) {
  if (!(t > expected_sup)) throw DomainError("borel_tis_tail: t must exceed the expected supremum");
  const double g = t - expected_sup;
  return std::exp(-g * g / 2.0);
}

/// Two-sided Gaussian tail sandwich: 2z/(1+z^2) phi(z) <= 2(1-Phi(z)) <= 2 phi(z)/z.
inline std::pair<double, double> mills(double z) {
  if (!(z > 0.0)) throw DomainError("mills: z must be positive");
  const double p = gaussian(z).pdf;
  return {2.0 * z / (1.0 + z * z) * p, 2.0 / z * p};
}

/// L^p growth exponent of eigenfunctions on S^2; p = inf accepted.
inline double sogge_exponent(double p) {
  if (!(p > 2.0)) throw DomainError("sogge_exponent: p must be > 2");
  if (std::isinf(p)) return 0.5;
  return p >= 6.0 ? 2.0 * (0.5 - 1.0 / p) - 0.5 : 0.5 * (0.5 - 1.0 / p);
}

/// density_sup (1/(sigma^2 eps^3) + 1/(n eps^2)), as printed.
inline double nongaussian_bound(double epsilon, std::int64_t n, double sigma_sq, double density_sup) {
  if (!(epsilon > 0.0) || n < 1 || !(sigma_sq > 0.0) || !(density_sup > 0.0))
    throw DomainError("nongaussian_bound: all arguments must be positive");
  return density_sup * (1.0 / (sigma_sq * epsilon * epsilon * epsilon) +
                        1.0 / (static_cast<double>(n) * epsilon * epsilon));
}

// ---------------------------------------------------------------------------
// Hermite expansion of the excursion volume variance

/// int G_{ell;d}(<x,y>)^q dmu(x) dmu(y), by Gauss-Legendre in theta with weight sin^{d-1}.
inline double gegenbauer_power_mean(int ell, int dim, int q) {
  const int nodes = std::max(400, 4 * q * std::max(ell, 1) + 64);
  const auto rule = gauss_legendre(nodes);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double th = 0.5 * std::numbers::pi * (rule.nodes[i] + 1.0);
    const double w = rule.weights[i] * std::pow(std::sin(th), dim - 1);
    num += w * std::pow(gegenbauer(ell, dim, std::cos(th)), q);
    den += w;
  }
  return num / den;
}

/// Var of the excursion volume of the unit-variance Gaussian field:
/// sum_{q=2}^{qmax} J_q(u)^2 / q! int G^q, with J_q = He_{q-1}(u) phi(u).
/// One quadrature rule serves every q, so G is evaluated once per node.
inline double excursion_variance_hermite(int ell, int dim, double u, int qmax = 40) {
  if (qmax < 2) throw DomainError("excursion_variance_hermite: qmax must be >= 2");
  const int nodes = std::max(400, 4 * qmax * std::max(ell, 1) + 64);
  const auto rule = gauss_legendre(nodes);
  std::vector<double> g(nodes), w(nodes), pw(nodes);
  double den = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double th = 0.5 * std::numbers::pi * (rule.nodes[i] + 1.0);
    w[i] = rule.weights[i] * std::pow(std::sin(th), dim - 1);
    g[i] = gegenbauer(ell, dim, std::cos(th));
    pw[i] = g[i];
    den += w[i];
  }
  const double p = gaussian(u).pdf;
  double s = 0.0, log_fact = 0.0;
  for (int q = 2; q <= qmax; ++q) {
    log_fact += std::log(static_cast<double>(q));
    double num = 0.0;
    for (int i = 0; i < nodes; ++i) {
      pw[i] *= g[i];
      num += w[i] * pw[i];
    }
    const double J = hermite_he(q - 1, u) * p;
    s += J * J * std::exp(-log_fact) * (num / den);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Reports

struct BoundReport {
  std::string name;
  std::map<std::string, double> inputs;
  double bound_value = 0.0;
  std::map<std::string, double> extra;  // secondary outputs of pair-valued bounds
  std::string anchor;
};

inline nlohmann::json number_json(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

inline nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json in = nlohmann::json::object(), ex = nlohmann::json::object();
  for (const auto& [k, v] : r.inputs) in[k] = number_json(v);
  for (const auto& [k, v] : r.extra) ex[k] = number_json(v);
  return {{"name", r.name}, {"inputs", in}, {"bound_value", number_json(r.bound_value)}, {"extra", ex},
          {"anchor", r.anchor}};
}

/// Evaluates a named bound from k=v arguments; used by the command line.
inline BoundReport evaluate(const std::string& name, const std::map<std::string, double>& args) {
  auto get = [&](const char* k) {
    auto it = args.find(k);
    if (it == args.end()) throw ValidationError("theory " + name + ": missing argument " + k);
    return it->second;
  };
  auto get_int = [&](const char* k) {
    const double v = get(k);
    if (v != std::floor(v)) throw ValidationError(std::string("theory ") + name + ": " + k + " must be an integer");
    return static_cast<std::int64_t>(v);
  };
  auto opt = [&](const char* k, double d) {
    auto it = args.find(k);
    return it == args.end() ? d : it->second;
  };
  BoundReport r;
  r.name = name;
  r.inputs = args;
  if (name == "thm3") {
    r.bound_value = thm3_bound(get("epsilon"), get_int("n"), get("sigma_sq"), get("c"));
    r.anchor = "bad-set measure bound under the regularity condition";
  } else if (name == "thm3_local") {
    // sigma^2 evaluated at u- and u+ supplied directly
    const auto [um, up] = thm3_local_levels(get("epsilon"), get("c"), get("u"));
    const double sm = get("sigma_sq_minus"), sp = get("sigma_sq_plus");
    r.bound_value = thm3_bound(get("epsilon"), get_int("n"), std::max(sm, sp), get("c"));
    r.extra = {{"u_minus", um}, {"u_plus", up}};
    r.anchor = "local refinement of the bad-set bound";
  } else if (name == "gkf_epc") {
    r.bound_value = gkf_epc_expectation(static_cast<int>(get_int("ell")), get("u"));
    r.anchor = "expected Euler characteristic, kinematic formula";
  } else if (name == "epc_variance") {
    r.bound_value = epc_variance_leading(static_cast<int>(get_int("ell")), get("u"));
    r.anchor = "leading Euler characteristic variance";
  } else if (name == "kol_measure") {
    r.bound_value = kol_measure_bound(get_int("n"), get("epsilon"), get("K"));
    r.anchor = "Kolmogorov-distance bad-set bound";
  } else if (name == "kol_rate") {
    const auto [a, b] = expected_kol_rate(static_cast<int>(get_int("ell")), static_cast<int>(get_int("d")));
    r.bound_value = a;
    r.extra = {{"rate_ell", a}, {"rate_dim", b}};
    r.anchor = "Kolmogorov-distance decay exponents";
  } else if (name == "linfty_upper") {
    const auto [t, b] = linfty_upper_tail(get("M"), get("beta"), get("ell"));
    r.bound_value = b;
    r.extra = {{"threshold", t}, {"tail_bound", b}};
    r.anchor = "sup-norm upper tail";
  } else if (name == "linfty_lower") {
    const auto p = linfty_lower_params(opt("K", 0.0), static_cast<int>(get_int("d")));
    r.bound_value = p.K_max;
    r.extra = {{"K_max", p.K_max}, {"alpha_lo", p.alpha_lo}, {"alpha_hi", p.alpha_hi}, {"empty", p.empty() ? 1.0 : 0.0}};
    r.anchor = "sup-norm lower bound parameters";
  } else if (name == "cramer") {
    r.bound_value = cramer_transform(get("x"));
    r.anchor = "chi-square Cramer transform";
  } else if (name == "ldp") {
    const auto t = ldp_tail(get("a"), get_int("n"));
    r.bound_value = t.upper_rate;
    r.extra = {{"upper_rate", t.upper_rate}, {"exact", t.exact}};
    r.anchor = "chi-square large deviation tail";
  } else if (name == "borel_tis") {
    r.bound_value = borel_tis_tail(get("t"), get("expected_sup"));
    r.anchor = "Borel-TIS concentration";
  } else if (name == "mills") {
    const auto [lo, hi] = mills(get("z"));
    r.bound_value = hi;
    r.extra = {{"lower", lo}, {"upper", hi}};
    r.anchor = "Mills ratio sandwich";
  } else if (name == "sogge") {
    r.bound_value = sogge_exponent(get("p"));
    r.anchor = "L^p eigenfunction growth exponent";
  } else if (name == "nongaussian") {
    r.bound_value = nongaussian_bound(get("epsilon"), get_int("n"), get("sigma_sq"), get("density_sup"));
    r.anchor = "non-Gaussian bad-set bound";
  } else {
    throw ValidationError("unknown theory bound: " + name);
  }
  return r;
}

inline const std::vector<std::string>& bound_names() {
  static const std::vector<std::string> names = {"thm3",      "thm3_local", "gkf_epc", "epc_variance", "kol_measure",
                                                 "kol_rate",  "linfty_upper", "linfty_lower", "cramer", "ldp",
                                                 "borel_tis", "mills",      "sogge",   "nongaussian"};
  return names;
}

}  // namespace hyperharm::theory
