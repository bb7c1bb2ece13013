#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "errors.hpp"
#include "excursion.hpp"
#include "harmonics.hpp"
#include "random.hpp"
#include "specfun.hpp"
#include "sphere_geom.hpp"
#include "synthesis.hpp"
#include "theory.hpp"

namespace hyperharm {

inline constexpr const char* library_version = "1.0.0";

// ---------------------------------------------------------------------------
// Configuration

enum class ExperimentKind { variance_scaling, bad_set, kol_decay, supnorm, ldp, nongaussian, epc, critical_density };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::variance_scaling: return "variance_scaling";
    case ExperimentKind::bad_set: return "bad_set";
    case ExperimentKind::kol_decay: return "kol_decay";
    case ExperimentKind::supnorm: return "supnorm";
    case ExperimentKind::ldp: return "ldp";
    case ExperimentKind::nongaussian: return "nongaussian";
    case ExperimentKind::epc: return "epc";
    case ExperimentKind::critical_density: return "critical_density";
  }
  return "?";
}

inline ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::variance_scaling, ExperimentKind::bad_set, ExperimentKind::kol_decay,
                 ExperimentKind::supnorm, ExperimentKind::ldp, ExperimentKind::nongaussian, ExperimentKind::epc,
                 ExperimentKind::critical_density})
    if (to_string(k) == s) return k;
  throw ValidationError("unknown experiment kind: " + s);
}

/// eps_ell = value (constant) or value * n^{-1/3} (power).
struct EpsilonRule {
  enum class Type { constant, power } type = Type::power;
  double value = 3.0;

  double at(std::int64_t n) const {
    return type == Type::constant ? value : value * std::pow(static_cast<double>(n), -1.0 / 3.0);
  }
  std::string str() const;
};

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& raw, const std::string& what) {
  const std::string s = trim(raw);
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || std::isnan(v))
    throw ValidationError(what + ": not a number: '" + s + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& raw, const std::string& what) {
  const std::string s = trim(raw);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError(what + ": not an integer: '" + s + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& raw, const std::string& what) {
  const std::string s = trim(raw);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError(what + ": not an unsigned 64-bit integer: '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(trim(tok));
  return out;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace detail

inline std::string EpsilonRule::str() const {
  return (type == Type::constant ? "constant:" : "power:") + detail::fmt17(value);
}

inline EpsilonRule parse_epsilon_rule(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ValidationError("epsilon_rule must be constant:<x> or power:<s>");
  EpsilonRule r;
  const std::string head = detail::trim(s.substr(0, colon));
  if (head == "constant")
    r.type = EpsilonRule::Type::constant;
  else if (head == "power")
    r.type = EpsilonRule::Type::power;
  else
    throw ValidationError("epsilon_rule must be constant:<x> or power:<s>");
  r.value = detail::parse_double(s.substr(colon + 1), "epsilon_rule");
  if (!(r.value > 0.0) || std::isinf(r.value)) throw ValidationError("epsilon_rule: value must be positive and finite");
  return r;
}

struct ExperimentConfig {
  std::string label;
  ExperimentKind kind = ExperimentKind::variance_scaling;
  int dim = 2;
  std::vector<int> ell_list;  // for ldp: degrees of freedom n
  std::vector<double> u_list; // for ldp: thresholds a
  long replicates = 0;
  int grid_density = 20;      // grid points per ell^d
  std::uint64_t seed = 1;
  std::optional<std::string> model;
  EpsilonRule epsilon_rule;
  std::vector<double> epsilon_sweep{1.0};  // multipliers of eps_ell
  std::string centering = "pilot";         // pilot | analytic
  int mesh_subdivision = 6;
  long mesh_samples = 0;
  double beta = 1.0;
  double lower_k_factor = 0.9;
  DensityConvention density_convention = DensityConvention::kac_rice;

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{"kind",          "dim",           "ell_list",     "u_list",
                                            "replicates",    "grid_density",  "seed",         "model",
                                            "epsilon_rule",  "epsilon_sweep", "centering",    "mesh_subdivision",
                                            "mesh_samples",  "beta",          "lower_k_factor", "density_convention"};
    return k;
  }

  void validate() const {
    auto fail = [&](const std::string& m) { throw ValidationError("[" + label + "] " + m); };
    if (dim < 2) fail("dim must be >= 2");
    if (ell_list.empty()) fail("ell_list is empty");
    for (size_t i = 0; i < ell_list.size(); ++i) {
      if (ell_list[i] < 1) fail("ell_list entries must be positive");
      if (i > 0 && ell_list[i] <= ell_list[i - 1]) fail("ell_list must be strictly increasing");
    }
    if (u_list.empty()) fail("u_list is empty");
    if (replicates < 30) fail("replicates must be >= 30");
    if (grid_density < 1) fail("grid_density must be positive");
    if (epsilon_sweep.empty()) fail("epsilon_sweep is empty");
    for (double m : epsilon_sweep)
      if (!(m > 0.0) || std::isinf(m)) fail("epsilon_sweep multipliers must be positive");
    if (centering != "pilot" && centering != "analytic") fail("centering must be pilot or analytic");
    if (mesh_subdivision < 0 || mesh_subdivision > 8) fail("mesh_subdivision must lie in [0,8]");
    if (mesh_samples < 0) fail("mesh_samples must be nonnegative");
    if (!(beta > 0.0)) fail("beta must be positive");
    if (!(lower_k_factor > 0.0)) fail("lower_k_factor must be positive");
    const bool d2_only = kind == ExperimentKind::supnorm || kind == ExperimentKind::nongaussian ||
                         kind == ExperimentKind::epc || kind == ExperimentKind::critical_density;
    if (d2_only && dim != 2) fail(to_string(kind) + " is implemented for dim = 2 only");
    if (kind == ExperimentKind::nongaussian && !model) fail("nongaussian needs a model");
    if (model) parse_model(*model);
    if (kind == ExperimentKind::ldp)
      for (double a : u_list)
        if (!(a > 1.0) || std::isinf(a)) fail("ldp thresholds (u_list) must exceed 1");
    if (kind == ExperimentKind::supnorm && ell_list.front() < 2) fail("supnorm needs ell >= 2");
  }

  /// Stable key=value serialization; the config hash is taken over it.
  std::string canonical() const {
    std::ostringstream os;
    os << "label=" << label << "\nkind=" << to_string(kind) << "\ndim=" << dim << "\nell_list=";
    for (size_t i = 0; i < ell_list.size(); ++i) os << (i ? "," : "") << ell_list[i];
    os << "\nu_list=";
    for (size_t i = 0; i < u_list.size(); ++i) os << (i ? "," : "") << detail::fmt17(u_list[i]);
    os << "\nreplicates=" << replicates << "\ngrid_density=" << grid_density << "\nseed=" << seed
       << "\nmodel=" << (model ? *model : "") << "\nepsilon_rule=" << epsilon_rule.str() << "\nepsilon_sweep=";
    for (size_t i = 0; i < epsilon_sweep.size(); ++i) os << (i ? "," : "") << detail::fmt17(epsilon_sweep[i]);
    os << "\ncentering=" << centering << "\nmesh_subdivision=" << mesh_subdivision
       << "\nmesh_samples=" << mesh_samples << "\nbeta=" << detail::fmt17(beta)
       << "\nlower_k_factor=" << detail::fmt17(lower_k_factor)
       << "\ndensity_convention=" << to_string(density_convention) << "\n";
    return os.str();
  }

  std::uint64_t hash() const { return detail::fnv1a(canonical()); }
};

inline void set_config_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  const std::string what = "[" + c.label + "] " + key;
  if (key == "kind") {
    c.kind = parse_kind(trim(value));
  } else if (key == "dim") {
    c.dim = static_cast<int>(parse_int(value, what));
  } else if (key == "ell_list") {
    c.ell_list.clear();
    for (auto& t : split(value)) {
      const auto v = parse_int(t, what);
      if (v < 1 || v > 1'000'000) throw ValidationError(what + ": entries must lie in [1, 1e6]");
      c.ell_list.push_back(static_cast<int>(v));
    }
  } else if (key == "u_list") {
    c.u_list.clear();
    for (auto& t : split(value)) c.u_list.push_back(parse_double(t, what));
  } else if (key == "replicates") {
    c.replicates = static_cast<long>(parse_int(value, what));
  } else if (key == "grid_density") {
    c.grid_density = static_cast<int>(parse_int(value, what));
  } else if (key == "seed") {
    c.seed = parse_u64(value, what);
  } else if (key == "model") {
    const std::string m = trim(value);
    if (m.empty())
      c.model.reset();
    else
      c.model = m;
  } else if (key == "epsilon_rule") {
    c.epsilon_rule = parse_epsilon_rule(value);
  } else if (key == "epsilon_sweep") {
    c.epsilon_sweep.clear();
    for (auto& t : split(value)) c.epsilon_sweep.push_back(parse_double(t, what));
  } else if (key == "centering") {
    c.centering = trim(value);
  } else if (key == "mesh_subdivision") {
    c.mesh_subdivision = static_cast<int>(parse_int(value, what));
  } else if (key == "mesh_samples") {
    c.mesh_samples = static_cast<long>(parse_int(value, what));
  } else if (key == "beta") {
    c.beta = parse_double(value, what);
  } else if (key == "lower_k_factor") {
    c.lower_k_factor = parse_double(value, what);
  } else if (key == "density_convention") {
    try {
      c.density_convention = parse_density_convention(trim(value));
    } catch (const DomainError& e) {
      throw ValidationError(what + ": " + e.what());
    }
  } else {
    throw ValidationError("[" + c.label + "] unknown key: " + key);
  }
}

/// INI document, one section per experiment; the section name is the label.
inline std::vector<ExperimentConfig> parse_config(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  std::vector<ExperimentConfig> out;
  for (const auto& [name, section] : tree) {
    if (section.empty()) throw ValidationError("config: key '" + name + "' outside of a section");
    ExperimentConfig c;
    c.label = name;
    bool has_kind = false;
    for (const auto& [key, node] : section) {
      set_config_key(c, key, node.data());
      has_kind = has_kind || key == "kind";
    }
    for (const char* required : {"kind", "ell_list", "u_list", "replicates", "seed"})
      if (!section.count(required)) throw ValidationError("[" + name + "] missing key: " + required);
    (void)has_kind;
    c.validate();
    out.push_back(std::move(c));
  }
  if (out.empty()) throw ValidationError("config: no experiment sections");
  return out;
}

inline std::vector<ExperimentConfig> load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  return parse_config(in);
}

// ---------------------------------------------------------------------------
// Records

struct ResultRow {
  std::string kind;  // "<experiment kind>.<statistic>"
  int d = 2;
  std::int64_t ell = 0;
  double u = 0.0;
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  double estimate = 0.0;
  double stderr_ = std::numeric_limits<double>::quiet_NaN();
  double theory = std::numeric_limits<double>::quiet_NaN();
  long replicates = 0;
  long degenerate = 0;
  double seconds = 0.0;
};

struct ExperimentRecord {
  std::string label;
  ExperimentKind kind = ExperimentKind::variance_scaling;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<ResultRow> rows;
  std::map<std::string, double> constants;

  std::vector<ResultRow> select(const std::string& stat) const {
    std::vector<ResultRow> out;
    for (const auto& r : rows)
      if (r.kind == stat) out.push_back(r);
    return out;
  }
};

struct RunOptions {
  unsigned threads = 0;  // 0: all hardware threads
  bool timing = false;   // fill the seconds column (breaks byte-identity)
  std::optional<std::uint64_t> seed_override;
  std::ostream* log = nullptr;
};

struct RateFit {
  double slope = 0.0, intercept = 0.0, r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (log x, log y)
};

/// OLS of log y on log x.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) throw DomainError("fit_rate: need at least 3 pairs");
  RateFit f;
  double mx = 0.0, my = 0.0;
  for (auto [x, y] : pairs) {
    if (!(x > 0.0) || !(y > 0.0) || std::isinf(x) || std::isinf(y))
      throw DomainError("fit_rate: values must be positive and finite");
    f.points.emplace_back(std::log(x), std::log(y));
    mx += f.points.back().first;
    my += f.points.back().second;
  }
  const double k = static_cast<double>(pairs.size());
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (auto [lx, ly] : f.points) {
    sxx += (lx - mx) * (lx - mx);
    sxy += (lx - mx) * (ly - my);
    syy += (ly - my) * (ly - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_rate: x values must not all coincide");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return f;
}

/// M_hat = max_ell mean(sup)/sqrt(log ell) over supnorm.mean rows and
/// K_hat = max exceedance n eps^3 over kol_decay.exceedance rows, with their arguments.
inline std::map<std::string, double> estimate_constants(const std::vector<ExperimentRecord>& records) {
  if (records.empty()) throw DomainError("estimate_constants: no records");
  std::map<std::string, double> out;
  for (const auto& rec : records) {
    for (const auto& r : rec.rows) {
      if (r.kind == "supnorm.mean" && r.ell >= 2) {
        const double m = r.estimate / std::sqrt(std::log(static_cast<double>(r.ell)));
        if (!out.count("M_hat") || m > out["M_hat"]) {
          out["M_hat"] = m;
          out["M_hat_ell"] = static_cast<double>(r.ell);
        }
      } else if (r.kind == "kol_decay.exceedance") {
        const double n = static_cast<double>(eigenspace_dim(r.ell, r.d));
        const double K = r.estimate * n * r.epsilon * r.epsilon * r.epsilon;
        if (!out.count("K_hat") || K > out["K_hat"]) {
          out["K_hat"] = K;
          out["K_hat_ell"] = static_cast<double>(r.ell);
          out["K_hat_epsilon"] = r.epsilon;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct Summary {
  double mean = 0.0, var = 0.0, se = 0.0, se_var = 0.0;
  long count = 0;
};

/// Unbiased variance, se = sd/sqrt(R), se_var from the fourth central moment.
inline Summary summarize(const std::vector<double>& x) {
  Summary s;
  s.count = static_cast<long>(x.size());
  if (x.empty()) {
    s.mean = s.var = s.se = s.se_var = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  const double R = static_cast<double>(x.size());
  for (double v : x) s.mean += v;
  s.mean /= R;
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double e = (v - s.mean) * (v - s.mean);
    m2 += e;
    m4 += e * e;
  }
  if (x.size() < 2) {
    s.var = s.se = s.se_var = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.var = m2 / (R - 1.0);
  s.se = std::sqrt(s.var / R);
  s.se_var = std::sqrt(std::max(0.0, m4 / R - s.var * s.var) / R);
  return s;
}

/// 95% Wilson score interval for k successes out of R.
inline std::pair<double, double> wilson_interval(long k, long R, double z = 1.959963984540054) {
  if (R <= 0) return {0.0, 1.0};
  const double n = static_cast<double>(R), p = static_cast<double>(k) / n;
  const double den = 1.0 + z * z / n;
  const double mid = (p + z * z / (2.0 * n)) / den;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / den;
  return {k == 0 ? 0.0 : std::max(0.0, mid - half), k == R ? 1.0 : std::min(1.0, mid + half)};
}

/// Linear-interpolation quantile (type 7).
inline double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw DomainError("quantile: empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(x.size() - 1, lo + 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

struct KsTest {
  double statistic = 0.0, p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic distribution and
/// Stephens' small-sample correction of the argument.
inline KsTest ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double D = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    D = std::max(D, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lam = (ne + 0.12 + 0.11 / ne) * D;
  double q = 0.0;
  if (lam < 0.2) {
    q = 1.0;
  } else {
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
      const double t = sign * std::exp(-2.0 * k * k * lam * lam);
      q += t;
      if (std::abs(t) < 1e-16) break;
      sign = -sign;
    }
    q = std::clamp(2.0 * q, 0.0, 1.0);
  }
  return {D, q};
}

// ---------------------------------------------------------------------------
// Deterministic parallel loop

/// Splits [0, count) into contiguous blocks, one per worker. Workers write to
/// disjoint slots; the first exception in block order is rethrown.
inline void parallel_blocks(long count, unsigned threads, const std::function<void(long, long)>& fn) {
  if (count <= 0) return;
  unsigned t = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  t = static_cast<unsigned>(std::min<long>(t, count));
  if (t <= 1) {
    fn(0, count);
    return;
  }
  std::vector<std::exception_ptr> errors(t);
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < t; ++i) {
    const long b = count * i / t, e = count * (i + 1) / t;
    pool.emplace_back([&, i, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Experiment kinds

namespace detail {

inline constexpr double nan = std::numeric_limits<double>::quiet_NaN();

/// Equal-weight grid values of many samples, produced in column batches.
/// dim = 2: explicit fields on a Fibonacci grid; dim >= 3: pointset simulation.
class SampleSource {
 public:
  enum class Law { gaussian, unit_sphere };

  SampleSource(const HarmonicLevel& level, int grid_density, std::uint64_t seed, Purpose purpose, Law law)
      : level_(level), seed_(seed), purpose_(purpose), law_(law) {
    const double N = static_cast<double>(grid_density) * std::pow(static_cast<double>(level.ell), level.dim);
    if (N > 2e6) throw CapacityError("grid of " + std::to_string(static_cast<long long>(N)) + " points is too large");
    grid_ = quasi_uniform_grid(level.dim, std::max<Eigen::Index>(2, static_cast<Eigen::Index>(N)));
    if (level.dim == 2)
      syn_.emplace(level, grid_.points, std::size_t{100'000'000});
    else
      sim_.emplace(level, grid_.points);
  }

  Eigen::Index size() const { return grid_.size(); }
  const SphereGrid& grid() const { return grid_; }

  /// Columns r0..r1-1 of the N x R value matrix.
  Eigen::MatrixXd values(long r0, long r1) const {
    if (syn_) {
      Eigen::MatrixXd U(level_.n, r1 - r0);
      for (long r = r0; r < r1; ++r) U.col(r - r0) = coefficients(r).raw();
      return syn_->synthesize(U);
    }
    Eigen::MatrixXd Z(sim_->rank(), r1 - r0);
    for (long r = r0; r < r1; ++r) {
      RandomStream rng(seed_, static_cast<std::uint32_t>(level_.ell), static_cast<std::uint32_t>(r), purpose_);
      Z.col(r - r0) = sim_->latent(rng, law_ == Law::unit_sphere);
    }
    return sim_->apply(Z);
  }

  CoefficientVector coefficients(long r) const {
    RandomStream rng(seed_, static_cast<std::uint32_t>(level_.ell), static_cast<std::uint32_t>(r), purpose_);
    return law_ == Law::gaussian ? sample_gaussian(level_, rng) : sample_unit_coefficients(level_, rng);
  }

  /// Calls fn(r, column) for every replicate; batches sized to a memory budget.
  void for_each(long R, unsigned threads, const std::function<void(long, const Eigen::VectorXd&)>& fn) const {
    // batch width depends on the grid only, so the output does not depend on threads
    const long per_batch = std::max<long>(1, static_cast<long>(1e7 / static_cast<double>(size())));
    const long batches = (R + per_batch - 1) / per_batch;
    parallel_blocks(batches, threads, [&](long b0, long b1) {
      for (long b = b0; b < b1; ++b) {
        const long r0 = b * per_batch, r1 = std::min(R, r0 + per_batch);
        const Eigen::MatrixXd V = values(r0, r1);
        for (long r = r0; r < r1; ++r) fn(r, V.col(r - r0));
      }
    });
  }

 private:
  HarmonicLevel level_;
  std::uint64_t seed_;
  Purpose purpose_;
  Law law_;
  SphereGrid grid_;
  std::optional<GridSynthesizer> syn_;
  std::optional<GaussianFieldSimulator> sim_;
};

/// Excursion volumes of an equal-weight sample at many levels via one sort.
inline std::vector<double> excursion_profile(const Eigen::VectorXd& v, const std::vector<double>& levels) {
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end());
  const double N = static_cast<double>(s.size());
  std::vector<double> out(levels.size());
  for (size_t i = 0; i < levels.size(); ++i) {
    const auto it = std::lower_bound(s.begin(), s.end(), levels[i]);
    out[i] = static_cast<double>(s.end() - it) / N;
  }
  return out;
}

inline double tail(double u) { return gaussian(u).tail; }

/// sup_u phi(u) (1 + |u|), attained at the golden-ratio conjugate.
inline double excursion_regularity_constant() {
  const double u = (std::sqrt(5.0) - 1.0) / 2.0;
  return gaussian(u).pdf * (1.0 + u);
}

struct Clock {
  bool on;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return on ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() : 0.0;
  }
};

inline ResultRow row(const ExperimentConfig& c, const std::string& stat, std::int64_t ell, double u, double eps,
                     double est, double se, double theory, long reps, long degenerate = 0, double sec = 0.0) {
  ResultRow r;
  r.kind = to_string(c.kind) + "." + stat;
  r.d = c.dim;
  r.ell = ell;
  r.u = u;
  r.epsilon = eps;
  r.estimate = est;
  r.stderr_ = se;
  r.theory = theory;
  r.replicates = reps;
  r.degenerate = degenerate;
  r.seconds = sec;
  return r;
}

inline void log_line(const RunOptions& o, const std::string& s) {
  if (o.log) *o.log << s << "\n" << std::flush;
}

/// Fraction estimate with se = sd/sqrt(R), sd the unbiased Bernoulli sd.
inline Summary fraction(long k, long R) {
  std::vector<double> x(static_cast<size_t>(R), 0.0);
  for (long i = 0; i < k; ++i) x[static_cast<size_t>(i)] = 1.0;
  return summarize(x);
}

// -- variance_scaling ----------------------------------------------------------

inline void run_variance_scaling(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& o,
                                 ExperimentRecord& rec) {
  for (int ell : c.ell_list) {
    Clock clk{o.timing};
    const HarmonicLevel level(ell, c.dim);
    SampleSource src(level, c.grid_density, seed, Purpose::coefficients, SampleSource::Law::gaussian);
    std::vector<std::vector<double>> g(c.u_list.size(), std::vector<double>(static_cast<size_t>(c.replicates)));
    src.for_each(c.replicates, o.threads, [&](long r, const Eigen::VectorXd& v) {
      const auto prof = excursion_profile(v, c.u_list);
      for (size_t i = 0; i < prof.size(); ++i) g[i][static_cast<size_t>(r)] = prof[i];
    });
    const double sec = clk.seconds();
    for (size_t i = 0; i < c.u_list.size(); ++i) {
      const double u = c.u_list[i];
      const auto s = summarize(g[i]);
      rec.rows.push_back(row(c, "mean", ell, u, nan, s.mean, s.se, tail(u), c.replicates, 0, sec));
      rec.rows.push_back(row(c, "var", ell, u, nan, s.var, s.se_var,
                             theory::excursion_variance_hermite(ell, c.dim, u), c.replicates, 0, sec));
    }
    log_line(o, "variance_scaling ell=" + std::to_string(ell) + " done");
  }
}

// -- bad_set -------------------------------------------------------------------

inline void run_bad_set(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& o, ExperimentRecord& rec) {
  // fine lattice for the regularity fit and the local refinement, followed by u_list
  constexpr double lat_lo = -6.0, lat_step = 0.05;
  constexpr int lat_n = 241;
  std::vector<double> levels;
  for (int k = 0; k < lat_n; ++k) levels.push_back(lat_lo + lat_step * k);
  levels.insert(levels.end(), c.u_list.begin(), c.u_list.end());
  const bool analytic = c.centering == "analytic";
  const double c_analytic = excursion_regularity_constant();

  struct Pilot {
    std::vector<double> mean, var;
    double c_fit = 0.0, sigma_sup = 0.0, seconds = 0.0;
  };
  std::vector<Pilot> pilots;
  for (int ell : c.ell_list) {
    Clock clk{o.timing};
    const HarmonicLevel level(ell, c.dim);
    SampleSource src(level, c.grid_density, seed, Purpose::pilot, SampleSource::Law::gaussian);
    std::vector<std::vector<double>> g(levels.size(), std::vector<double>(static_cast<size_t>(c.replicates)));
    src.for_each(c.replicates, o.threads, [&](long r, const Eigen::VectorXd& v) {
      const auto prof = excursion_profile(v, levels);
      for (size_t i = 0; i < prof.size(); ++i) g[i][static_cast<size_t>(r)] = prof[i];
    });
    Pilot p;
    for (auto& col : g) {
      const auto s = summarize(col);
      p.mean.push_back(s.mean);
      p.var.push_back(s.var);
    }
    for (int k = 0; k + 1 < lat_n; ++k) {
      const double mid = lat_lo + lat_step * (k + 0.5);
      const double slope = std::abs(p.mean[k + 1] - p.mean[k]) / lat_step;
      p.c_fit = std::max(p.c_fit, slope * (1.0 + std::abs(mid)));
    }
    for (int k = 0; k < lat_n; ++k) p.sigma_sup = std::max(p.sigma_sup, p.var[k]);
    p.seconds = clk.seconds();
    pilots.push_back(std::move(p));
    log_line(o, "bad_set pilot ell=" + std::to_string(ell) + " done");
  }
  double c_hat = c_analytic;
  if (!analytic) {
    c_hat = 0.0;
    for (const auto& p : pilots) c_hat = std::max(c_hat, p.c_fit);
  }
  rec.constants["c_hat"] = c_hat;
  rec.constants["c_analytic"] = c_analytic;

  for (size_t li = 0; li < c.ell_list.size(); ++li) {
    const int ell = c.ell_list[li];
    const Pilot& p = pilots[li];
    Clock clk{o.timing};
    const HarmonicLevel level(ell, c.dim);
    const double eps0 = c.epsilon_rule.at(level.n);
    std::vector<double> eps;
    for (double m : c.epsilon_sweep) eps.push_back(m * eps0);
    std::vector<double> centre(c.u_list.size());
    for (size_t i = 0; i < c.u_list.size(); ++i)
      centre[i] = analytic ? tail(c.u_list[i]) : p.mean[lat_n + i];

    SampleSource src(level, c.grid_density, seed, Purpose::coefficients, SampleSource::Law::unit_sphere);
    std::vector<std::vector<double>> dev(c.u_list.size(), std::vector<double>(static_cast<size_t>(c.replicates)));
    src.for_each(c.replicates, o.threads, [&](long r, const Eigen::VectorXd& v) {
      const auto prof = excursion_profile(v, c.u_list);
      for (size_t i = 0; i < prof.size(); ++i) dev[i][static_cast<size_t>(r)] = std::abs(prof[i] - centre[i]);
    });
    const double sec = clk.seconds() + p.seconds;

    auto sigma_at = [&](double x) {
      const double t = std::clamp((x - lat_lo) / lat_step, 0.0, static_cast<double>(lat_n - 1));
      const int k = std::min(lat_n - 2, static_cast<int>(std::floor(t)));
      const double f = t - k;
      return (1.0 - f) * p.var[k] + f * p.var[k + 1];
    };
    rec.rows.push_back(row(c, "c_fit", ell, nan, nan, p.c_fit, nan, c_analytic, c.replicates, 0, sec));
    rec.rows.push_back(row(c, "sigma_sq_sup", ell, nan, nan, p.sigma_sup, nan, nan, c.replicates, 0, sec));
    for (size_t i = 0; i < c.u_list.size(); ++i) {
      const double u = c.u_list[i];
      const double mean = p.mean[lat_n + i], var = p.var[lat_n + i];
      const double se = std::sqrt(var / static_cast<double>(c.replicates));
      rec.rows.push_back(row(c, "pilot_mean", ell, u, nan, mean, se, tail(u), c.replicates, 0, sec));
      rec.rows.push_back(row(c, "pilot_var", ell, u, nan, var, nan,
                             theory::excursion_variance_hermite(ell, c.dim, u), c.replicates, 0, sec));
      for (double e : eps) {
        long k = 0;
        for (double x : dev[i]) k += x > e ? 1 : 0;
        const auto s = fraction(k, c.replicates);
        // beyond eps = 1 the event is empty; the bound at 1- still dominates it
        const double eb = std::min(e, 1.0 - 1e-9);
        const auto [wlo, whi] = wilson_interval(k, c.replicates);
        rec.rows.push_back(row(c, "exceedance", ell, u, e, s.mean, s.se,
                               theory::thm3_bound(eb, level.n, var, c_hat), c.replicates, 0, sec));
        rec.rows.push_back(row(c, "exceedance_vs_sup", ell, u, e, s.mean, s.se,
                               theory::thm3_bound(eb, level.n, p.sigma_sup, c_hat), c.replicates, 0, sec));
        double local = nan;
        if (eb / (1.0 + c_hat) < 1.0) local = theory::thm3_local_bound(eb, level.n, sigma_at, c_hat, u);
        rec.rows.push_back(row(c, "exceedance_vs_local", ell, u, e, s.mean, s.se, local, c.replicates, 0, sec));
        rec.rows.push_back(row(c, "wilson_lo", ell, u, e, wlo, nan, nan, c.replicates, 0, sec));
        rec.rows.push_back(row(c, "wilson_hi", ell, u, e, whi, nan, nan, c.replicates, 0, sec));
      }
    }
    log_line(o, "bad_set ell=" + std::to_string(ell) + " done");
  }
}

// -- kol_decay -----------------------------------------------------------------

inline void run_kol_decay(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& o, ExperimentRecord& rec) {
  for (int ell : c.ell_list) {
    Clock clk{o.timing};
    const HarmonicLevel level(ell, c.dim);
    SampleSource src(level, c.grid_density, seed, Purpose::coefficients, SampleSource::Law::gaussian);
    const Eigen::VectorXd w = src.grid().weights;
    std::vector<double> D(static_cast<size_t>(c.replicates));
    src.for_each(c.replicates, o.threads,
                 [&](long r, const Eigen::VectorXd& v) { D[static_cast<size_t>(r)] = kolmogorov_distance(v, w); });
    const double sec = clk.seconds();
    const auto s = summarize(D);
    const double expo = theory::expected_kol_rate(ell, c.dim).first;
    rec.rows.push_back(row(c, "mean", ell, nan, nan, s.mean, s.se, std::pow(static_cast<double>(ell), -expo),
                           c.replicates, 0, sec));
    const double eps0 = c.epsilon_rule.at(level.n);
    for (double m : c.epsilon_sweep) {
      const double e = m * eps0;
      long k = 0;
      for (double x : D) k += x > e ? 1 : 0;
      const auto f = fraction(k, c.replicates);
      rec.rows.push_back(row(c, "exceedance", ell, nan, e, f.mean, f.se, theory::kol_measure_bound(level.n, e, 1.0),
                             c.replicates, 0, sec));
    }
    log_line(o, "kol_decay ell=" + std::to_string(ell) + " done");
  }
}

// -- supnorm -------------------------------------------------------------------

inline void run_supnorm(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& o, ExperimentRecord& rec) {
  std::vector<std::vector<double>> sups, seps;
  std::vector<double> secs;
  const auto lower = theory::linfty_lower_params(0.0, 2);
  const double K = c.lower_k_factor * lower.K_max;
  const auto adm = theory::linfty_lower_params(K, 2);
  const double alpha = adm.empty() ? 0.5 * adm.alpha_hi : 0.5 * (adm.alpha_lo + adm.alpha_hi);
  for (int ell : c.ell_list) {
    Clock clk{o.timing};
    const HarmonicLevel level(ell, 2);
    std::vector<double> sup(static_cast<size_t>(c.replicates)), sep(static_cast<size_t>(c.replicates));
    const SphereGrid xi = separated_grid(ell, alpha, 2);
    const LegendreTable table(ell);
    parallel_blocks(c.replicates, o.threads, [&](long r0, long r1) {
      LatLonSynthesizer syn(ell, LatLonGrid::for_degree(ell));
      std::vector<double> b(static_cast<size_t>(level.n)), scratch;
      for (long r = r0; r < r1; ++r) {
        RandomStream rng(seed, static_cast<std::uint32_t>(ell), static_cast<std::uint32_t>(r), Purpose::coefficients);
        const CoefficientVector cv = sample_gaussian(level, rng);
        sup[static_cast<size_t>(r)] = sup_norm(cv, syn).value;
        const Eigen::VectorXd u = cv.raw();
        double m = 0.0;
        for (Eigen::Index i = 0; i < xi.size(); ++i) {
          basis_values(table, xi.points.row(i).transpose(), b.data(), scratch);
          double f = 0.0;
          for (Eigen::Index k = 0; k < level.n; ++k) f += b[static_cast<size_t>(k)] * u[k];
          m = std::max(m, std::abs(f));
        }
        sep[static_cast<size_t>(r)] = m;
      }
    });
    sups.push_back(std::move(sup));
    seps.push_back(std::move(sep));
    secs.push_back(clk.seconds());
    log_line(o, "supnorm ell=" + std::to_string(ell) + " done");
  }
  double M_hat = 0.0;
  for (size_t li = 0; li < c.ell_list.size(); ++li)
    M_hat = std::max(M_hat, summarize(sups[li]).mean / std::sqrt(std::log(static_cast<double>(c.ell_list[li]))));
  rec.constants["M_hat"] = M_hat;
  rec.constants["K_lower"] = K;
  rec.constants["alpha_separated"] = alpha;
  for (size_t li = 0; li < c.ell_list.size(); ++li) {
    const int ell = c.ell_list[li];
    const double sl = std::sqrt(std::log(static_cast<double>(ell)));
    const auto s = summarize(sups[li]);
    const double sec = secs[li];
    rec.rows.push_back(row(c, "mean", ell, nan, nan, s.mean, s.se, nan, c.replicates, 0, sec));
    rec.rows.push_back(row(c, "ratio", ell, nan, nan, s.mean / sl, s.se / sl, nan, c.replicates, 0, sec));
    const auto [thr, tail_bound] = theory::linfty_upper_tail(M_hat, c.beta, ell);
    long k = 0;
    for (double x : sups[li]) k += x > thr ? 1 : 0;
    auto f = fraction(k, c.replicates);
    rec.rows.push_back(row(c, "upper_exceed", ell, nan, thr, f.mean, f.se, tail_bound, c.replicates, 0, sec));
    const double lthr = K * sl;
    k = 0;
    for (double x : sups[li]) k += x < lthr ? 1 : 0;
    f = fraction(k, c.replicates);
    rec.rows.push_back(row(c, "lower_exceed", ell, nan, lthr, f.mean, f.se, nan, c.replicates, 0, sec));
    const auto ss = summarize(seps[li]);
    rec.rows.push_back(row(c, "separated_max", ell, nan, lthr, ss.mean, ss.se, nan, c.replicates, 0, sec));
  }
}

// -- ldp -----------------------------------------------------------------------

/// P(chi2_n >= n a) by importance sampling from Gamma(n/2, scale 2a), the
/// exponentially tilted law centred on the threshold.
inline void run_ldp(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& o, ExperimentRecord& rec) {
  for (int n : c.ell_list) {
    Clock clk{o.timing};
    for (double a : c.u_list) {
      const double N = n;
      std::vector<double> w(static_cast<size_t>(c.replicates));
      const double logc = 0.5 * N * std::log(a);
      parallel_blocks(c.replicates, o.threads, [&](long r0, long r1) {
        for (long r = r0; r < r1; ++r) {
          RandomStream rng(seed, static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(r), Purpose::radius);
          const double x = rng.gamma(0.5 * N, 2.0 * a);
          w[static_cast<size_t>(r)] = x >= N * a ? std::exp(logc - 0.5 * x * (1.0 - 1.0 / a)) : 0.0;
        }
      });
      const auto s = summarize(w);
      const auto exact = theory::ldp_tail(a, n);
      const double sec = clk.seconds();
      rec.rows.push_back(row(c, "probability", n, a, nan, s.mean, s.se, exact.exact, c.replicates, 0, sec));
      const double rate = s.mean > 0.0 ? -std::log(s.mean) / N : theory::inf;
      const double rse = s.mean > 0.0 ? s.se / (N * s.mean) : nan;
      rec.rows.push_back(row(c, "rate", n, a, nan, rate, rse, theory::cramer_transform(a), c.replicates, 0, sec));
    }
    log_line(o, "ldp n=" + std::to_string(n) + " done");
  }
}

// -- nongaussian ---------------------------------------------------------------

inline void run_nongaussian(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& o,
                            ExperimentRecord& rec) {
  const NonGaussianModel model = parse_model(*c.model);
  for (int ell : c.ell_list) {
    Clock clk{o.timing};
    const HarmonicLevel level(ell, 2);
    const SphereGrid grid = quasi_uniform_grid(2, static_cast<Eigen::Index>(c.grid_density) * ell * ell);
    const GridSynthesizer syn(level, grid.points);
    const long R = c.replicates;
    std::vector<double> ng(static_cast<size_t>(R)), gs(static_cast<size_t>(R));
    auto statistic = [&](const Eigen::VectorXd& v, double power) {
      const auto prof = excursion_profile(v, c.u_list);
      double m = 0.0;
      for (size_t i = 0; i < prof.size(); ++i)
        m = std::max(m, std::abs(prof[i] - tail(c.u_list[i] / std::sqrt(power))));
      return m;
    };
    const long per_batch = std::max<long>(1, static_cast<long>(1.5e7 / static_cast<double>(grid.size())));
    const long batches = (R + per_batch - 1) / per_batch;
    parallel_blocks(batches, o.threads, [&](long b0, long b1) {
      for (long b = b0; b < b1; ++b) {
        const long r0 = b * per_batch, r1 = std::min(R, r0 + per_batch);
        Eigen::MatrixXd U(level.n, r1 - r0), G(level.n, r1 - r0);
        std::vector<double> pu, pg;
        for (long r = r0; r < r1; ++r) {
          RandomStream rm(seed, static_cast<std::uint32_t>(ell), static_cast<std::uint32_t>(r), Purpose::model);
          const auto s = sample_nongaussian(model, level, rm);
          U.col(r - r0) = s.coeffs.raw();
          pu.push_back(s.sample_power);
          RandomStream rg(seed, static_cast<std::uint32_t>(ell), static_cast<std::uint32_t>(r),
                          Purpose::coefficients);
          G.col(r - r0) = sample_gaussian(level, rg).raw();
          pg.push_back(G.col(r - r0).squaredNorm());
        }
        const Eigen::MatrixXd VU = syn.synthesize(U), VG = syn.synthesize(G);
        for (long r = r0; r < r1; ++r) {
          ng[static_cast<size_t>(r)] = statistic(VU.col(r - r0), pu[static_cast<size_t>(r - r0)]);
          gs[static_cast<size_t>(r)] = statistic(VG.col(r - r0), pg[static_cast<size_t>(r - r0)]);
        }
      }
    });
    const double sec = clk.seconds();
    const auto sn = summarize(ng), sg = summarize(gs);
    const double p95 = quantile(gs, 0.95);
    long below = 0;
    for (double x : ng) below += x <= p95 ? 1 : 0;
    const auto fb = fraction(below, R);
    const auto ks = ks_two_sample(ng, gs);
    rec.rows.push_back(row(c, "sup_dev", ell, nan, nan, sn.mean, sn.se, nan, R, 0, sec));
    rec.rows.push_back(row(c, "gaussian_sup_dev", ell, nan, nan, sg.mean, sg.se, nan, R, 0, sec));
    rec.rows.push_back(row(c, "gaussian_p95", ell, nan, nan, p95, nan, nan, R, 0, sec));
    rec.rows.push_back(row(c, "frac_below_p95", ell, nan, nan, fb.mean, fb.se, nan, R, 0, sec));
    rec.rows.push_back(row(c, "ks_statistic", ell, nan, nan, ks.statistic, nan, nan, R, 0, sec));
    rec.rows.push_back(row(c, "ks_pvalue", ell, nan, nan, ks.p_value, nan, nan, R, 0, sec));
    log_line(o, "nongaussian ell=" + std::to_string(ell) + " done");
  }
}

// -- epc and critical_density --------------------------------------------------

inline constexpr double max_degenerate_fraction = 0.2;

inline void run_critical(const ExperimentConfig& c, std::uint64_t seed, const RunOptions& o, ExperimentRecord& rec) {
  const bool epc = c.kind == ExperimentKind::epc;
  const CriticalKind kinds[] = {CriticalKind::critical, CriticalKind::extremum, CriticalKind::saddle};
  for (int ell : c.ell_list) {
    Clock clk{o.timing};
    const HarmonicLevel level(ell, 2);
    const long R = c.replicates;
    const size_t U = c.u_list.size();
    std::vector<char> degenerate(static_cast<size_t>(R), 0), low_ok(static_cast<size_t>(R), 0),
        high_ok(static_cast<size_t>(R), 0), mesh_ok(static_cast<size_t>(R), 0);
    std::vector<std::vector<double>> counts(3 * U, std::vector<double>(static_cast<size_t>(R)));
    std::vector<std::vector<double>> chi(U, std::vector<double>(static_cast<size_t>(R)));
    const long mesh_n = epc ? std::min(c.mesh_samples, R) : 0;
    std::optional<SphereMesh> mesh;
    if (mesh_n > 0) mesh = icosphere(c.mesh_subdivision);
    parallel_blocks(R, o.threads, [&](long r0, long r1) {
      LatLonSynthesizer syn(ell, LatLonGrid::for_degree(ell));
      for (long r = r0; r < r1; ++r) {
        const size_t ri = static_cast<size_t>(r);
        RandomStream rng(seed, static_cast<std::uint32_t>(ell), static_cast<std::uint32_t>(r), Purpose::coefficients);
        const CoefficientVector cv = sample_gaussian(level, rng);
        const CriticalPointSet cps = find_critical_points(cv, syn);
        if (cps.degenerate_flag) {
          degenerate[ri] = 1;
          continue;
        }
        for (size_t i = 0; i < U; ++i) {
          for (int b = 0; b < 3; ++b)
            counts[3 * i + b][ri] = static_cast<double>(count_above(cps, kinds[b], c.u_list[i]));
          chi[i][ri] = static_cast<double>(euler_characteristic_morse(cps, c.u_list[i]));
        }
        if (epc) {
          double top = -theory::inf;
          for (const auto& p : cps.points) top = std::max(top, p.value);
          low_ok[ri] = euler_characteristic_morse(cps, -critical_truncation) == 2;
          high_ok[ri] = euler_characteristic_morse(cps, top + 1e-9 * std::max(1.0, std::abs(top))) == 0;
          if (r < mesh_n) {
            const Eigen::VectorXd mv = mesh_values(cv, *mesh);
            bool ok = true;
            for (size_t i = 0; i < U && ok; ++i)
              ok = euler_characteristic_mesh(mv, c.u_list[i], *mesh) == static_cast<long>(chi[i][ri]);
            mesh_ok[ri] = ok;
          }
        }
      }
    });
    long ndeg = 0;
    for (char d : degenerate) ndeg += d;
    const double frac = static_cast<double>(ndeg) / static_cast<double>(R);
    if (frac > max_degenerate_fraction) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%s ell=%d: %ld of %ld replicates degenerate (%.1f%% > 20%%)",
                    to_string(c.kind).c_str(), ell, ndeg, R, 100.0 * frac);
      throw NumericalError(buf, frac);
    }
    auto keep = [&](const std::vector<double>& x) {
      std::vector<double> out;
      for (size_t r = 0; r < x.size(); ++r)
        if (!degenerate[r]) out.push_back(x[r]);
      return out;
    };
    const long good = R - ndeg;
    const double L2 = static_cast<double>(ell) * ell;
    const double sec = clk.seconds();
    const auto fd = fraction(ndeg, R);
    rec.rows.push_back(row(c, "degenerate_fraction", ell, nan, nan, fd.mean, fd.se, nan, R, ndeg, sec));
    for (size_t i = 0; i < U; ++i) {
      const double u = c.u_list[i];
      if (!epc) {
        for (int b = 0; b < 3; ++b) {
          auto x = keep(counts[3 * i + b]);
          for (double& v : x) v /= L2;
          const auto s = summarize(x);
          rec.rows.push_back(row(c, std::string(to_string(kinds[b])), ell, u, nan, s.mean, s.se,
                                 critical_tail(kinds[b], u, c.density_convention), good, ndeg, sec));
        }
      } else {
        const auto raw = keep(chi[i]);
        auto x = raw;
        for (double& v : x) v /= L2;
        const auto s = summarize(x), sr = summarize(raw);
        const double lim = critical_tail(CriticalKind::extremum, u, c.density_convention) -
                           critical_tail(CriticalKind::saddle, u, c.density_convention);
        rec.rows.push_back(row(c, "chi", ell, u, nan, s.mean, s.se, lim, good, ndeg, sec));
        rec.rows.push_back(row(c, "gkf", ell, u, nan, sr.mean, sr.se, theory::gkf_epc_expectation(ell, u), good,
                               ndeg, sec));
        rec.rows.push_back(row(c, "chi_var", ell, u, nan, sr.var, sr.se_var, theory::epc_variance_leading(ell, u),
                               good, ndeg, sec));
      }
    }
    if (epc) {
      long lo = 0, hi = 0, mk = 0, mn = 0;
      for (long r = 0; r < R; ++r) {
        if (degenerate[static_cast<size_t>(r)]) continue;
        lo += low_ok[static_cast<size_t>(r)];
        hi += high_ok[static_cast<size_t>(r)];
        if (r < mesh_n) {
          ++mn;
          mk += mesh_ok[static_cast<size_t>(r)];
        }
      }
      auto f = fraction(lo, good);
      rec.rows.push_back(row(c, "chi_low_ok", ell, -critical_truncation, nan, f.mean, f.se, 1.0, good, ndeg, sec));
      f = fraction(hi, good);
      rec.rows.push_back(row(c, "chi_high_ok", ell, nan, nan, f.mean, f.se, 1.0, good, ndeg, sec));
      if (mn > 0) {
        f = fraction(mk, mn);
        rec.rows.push_back(row(c, "mesh_agreement", ell, nan, nan, f.mean, f.se, nan, mn, ndeg, sec));
      }
    }
    log_line(o, to_string(c.kind) + " ell=" + std::to_string(ell) + " done");
  }
}

}  // namespace detail

inline ExperimentRecord run_experiment(const ExperimentConfig& config, const RunOptions& opt = {}) {
  config.validate();
  ExperimentRecord rec;
  rec.label = config.label;
  rec.kind = config.kind;
  rec.seed = opt.seed_override.value_or(config.seed);
  ExperimentConfig effective = config;
  effective.seed = rec.seed;
  rec.config_hash = effective.hash();
  switch (config.kind) {
    case ExperimentKind::variance_scaling: detail::run_variance_scaling(config, rec.seed, opt, rec); break;
    case ExperimentKind::bad_set: detail::run_bad_set(config, rec.seed, opt, rec); break;
    case ExperimentKind::kol_decay: detail::run_kol_decay(config, rec.seed, opt, rec); break;
    case ExperimentKind::supnorm: detail::run_supnorm(config, rec.seed, opt, rec); break;
    case ExperimentKind::ldp: detail::run_ldp(config, rec.seed, opt, rec); break;
    case ExperimentKind::nongaussian: detail::run_nongaussian(config, rec.seed, opt, rec); break;
    case ExperimentKind::epc:
    case ExperimentKind::critical_density: detail::run_critical(config, rec.seed, opt, rec); break;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Output

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline constexpr const char* csv_header = "kind,d,ell,u,epsilon,estimate,stderr,theory,replicates,degenerate,seconds";

inline void write_csv(const std::vector<ExperimentRecord>& records, std::ostream& os) {
  os << csv_header << "\n";
  for (const auto& rec : records)
    for (const auto& r : rec.rows)
      os << r.kind << "," << r.d << "," << r.ell << "," << format_number(r.u) << "," << format_number(r.epsilon)
         << "," << format_number(r.estimate) << "," << format_number(r.stderr_) << "," << format_number(r.theory)
         << "," << r.replicates << "," << r.degenerate << "," << format_number(r.seconds) << "\n";
}

/// Series fitted in rates.csv: statistic and the abscissa used against it.
inline std::vector<std::pair<std::string, std::string>> rate_series() {
  return {{"variance_scaling.var", "n"}, {"bad_set.pilot_var", "n"}, {"kol_decay.mean", "ell"},
          {"supnorm.mean", "log_ell"}, {"ldp.rate", "n"}};
}

struct RateSeries {
  std::string name;
  std::vector<std::pair<double, double>> xy;
  std::optional<RateFit> fit;
};

inline std::vector<RateSeries> collect_rates(const std::vector<ExperimentRecord>& records) {
  std::vector<RateSeries> out;
  for (const auto& rec : records) {
    for (const auto& [stat, xkind] : rate_series()) {
      std::map<std::pair<std::string, std::string>, RateSeries> groups;
      std::vector<std::pair<std::string, std::string>> order;
      for (const auto& r : rec.select(stat)) {
        const auto key = std::make_pair(format_number(r.u), format_number(r.epsilon));
        if (!groups.count(key)) {
          order.push_back(key);
          groups[key].name = rec.label + ":" + stat + (std::isnan(r.u) ? "" : "@u=" + key.first);
        }
        double x = static_cast<double>(r.ell);
        if (xkind == "n") x = r.kind == "ldp.rate" ? x : static_cast<double>(eigenspace_dim(r.ell, r.d));
        if (xkind == "log_ell") x = std::log(x);
        groups[key].xy.emplace_back(x, r.estimate);
      }
      for (const auto& key : order) {
        RateSeries s = groups[key];
        bool ok = s.xy.size() >= 3;
        for (auto [x, y] : s.xy) ok = ok && x > 0.0 && y > 0.0 && std::isfinite(y);
        if (ok) s.fit = fit_rate(s.xy);
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

inline void write_rates(const std::vector<ExperimentRecord>& records, std::ostream& os) {
  os << "series,x,y,fit_slope,fit_intercept\n";
  for (const auto& s : collect_rates(records))
    for (auto [x, y] : s.xy)
      os << s.name << "," << format_number(x) << "," << format_number(y) << ","
         << format_number(s.fit ? s.fit->slope : detail::nan) << ","
         << format_number(s.fit ? s.fit->intercept : detail::nan) << "\n";
}

inline nlohmann::json sidecar(const std::vector<ExperimentRecord>& records) {
  nlohmann::json j;
  j["version"] = library_version;
  std::string all;
  for (const auto& r : records) all += detail::hex64(r.config_hash);
  j["config_hash"] = detail::hex64(detail::fnv1a(all));
  j["seed"] = records.empty() ? 0 : records.front().seed;
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json e;
    e["label"] = r.label;
    e["kind"] = to_string(r.kind);
    e["config_hash"] = detail::hex64(r.config_hash);
    e["seed"] = r.seed;
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [k, v] : r.constants) c[k] = theory::number_json(v);
    e["constants"] = c;
    ex.push_back(e);
  }
  j["experiments"] = ex;
  nlohmann::json c = nlohmann::json::object();
  bool relevant = false;
  for (const auto& r : records) relevant = relevant || r.kind == ExperimentKind::supnorm || r.kind == ExperimentKind::kol_decay;
  if (relevant)
    for (const auto& [k, v] : estimate_constants(records)) c[k] = theory::number_json(v);
  j["constants"] = c;
  return j;
}

/// Runs every section of a config file and writes results.csv, results.json
/// and rates.csv into out_dir.
inline std::vector<ExperimentRecord> run_to_directory(const std::filesystem::path& config_path,
                                                      const std::filesystem::path& out_dir,
                                                      const RunOptions& opt = {}) {
  const auto configs = load_config(config_path);
  std::vector<ExperimentRecord> records;
  for (const auto& c : configs) {
    detail::log_line(opt, "running [" + c.label + "] " + to_string(c.kind));
    records.push_back(run_experiment(c, opt));
  }
  std::filesystem::create_directories(out_dir);
  auto open = [&](const char* name) {
    std::ofstream f(out_dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out_dir / name).string());
    return f;
  };
  {
    auto f = open("results.csv");
    write_csv(records, f);
  }
  {
    auto f = open("results.json");
    f << sidecar(records).dump(2) << "\n";
  }
  {
    auto f = open("rates.csv");
    write_rates(records, f);
  }
  return records;
}

}  // namespace hyperharm
