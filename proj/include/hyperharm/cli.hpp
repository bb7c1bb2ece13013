#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "errors.hpp"
#include "excursion.hpp"
#include "harmonics.hpp"
#include "harness.hpp"
#include "specfun.hpp"
#include "sphere_geom.hpp"
#include "theory.hpp"

namespace hyperharm::cli {

/// Integers print as integers, everything else with 12 significant digits.
inline std::string format(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  if (v == std::floor(v) && std::abs(v) < 1e15)
    std::snprintf(buf, sizeof buf, "%.0f", v == 0.0 ? 0.0 : v);
  else
    std::snprintf(buf, sizeof buf, "%#.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Coefficient CSV: ell,dim,m,alpha,radius with one row per basis slot.

inline void write_coefficients_csv(const CoefficientVector& c, std::ostream& os) {
  os << "ell,dim,m,alpha,radius\n";
  char buf[128];
  for (Eigen::Index m = 0; m < c.alpha.size(); ++m) {
    std::snprintf(buf, sizeof buf, "%d,%d,%lld,%.17g,%.17g\n", c.level.ell, c.level.dim, static_cast<long long>(m),
                  c.alpha[m], c.radius);
    os << buf;
  }
}

inline CoefficientVector read_coefficients_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("coefficient CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ell,dim,m,alpha,radius") throw ValidationError("coefficient CSV: unexpected header '" + line + "'");
  int ell = -1, dim = -1;
  double radius = 0.0;
  std::vector<double> alpha;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split(line);
    const std::string where = "coefficient CSV line " + std::to_string(lineno);
    if (f.size() != 5) throw ValidationError(where + ": expected 5 fields");
    const int e = static_cast<int>(detail::parse_int(f[0], where));
    const int d = static_cast<int>(detail::parse_int(f[1], where));
    const auto m = detail::parse_int(f[2], where);
    const double a = detail::parse_double(f[3], where);
    const double r = detail::parse_double(f[4], where);
    if (alpha.empty()) {
      ell = e;
      dim = d;
      radius = r;
    } else if (e != ell || d != dim || r != radius) {
      throw ValidationError(where + ": ell, dim and radius must be constant");
    }
    if (m != static_cast<std::int64_t>(alpha.size())) throw ValidationError(where + ": slots must be 0,1,2,... in order");
    alpha.push_back(a);
  }
  if (ell < 0 || dim < 2) throw ValidationError("coefficient CSV has no rows");
  const HarmonicLevel level(ell, dim);
  if (static_cast<std::int64_t>(alpha.size()) != level.n)
    throw ValidationError("coefficient CSV: expected " + std::to_string(level.n) + " slots");
  return CoefficientVector::make(level, Eigen::Map<const Eigen::VectorXd>(alpha.data(), level.n), radius);
}

inline CoefficientVector read_coefficients_file(const std::string& path) {
  if (path == "-") return read_coefficients_csv(std::cin);
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file: " + path);
  return read_coefficients_csv(in);
}

inline std::map<std::string, double> parse_args(const std::string& s) {
  std::map<std::string, double> out;
  if (detail::trim(s).empty()) return out;
  for (const auto& kv : detail::split(s)) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--args: expected k=v, got '" + kv + "'");
    out[detail::trim(kv.substr(0, eq))] = detail::parse_double(kv.substr(eq + 1), "--args " + kv);
  }
  return out;
}

/// Equal-weight Fibonacci grid of density * ell^2 points carried by an explicit field.
inline ExplicitField explicit_on_grid(const CoefficientVector& c, Eigen::Index points) {
  require_d2(c.level);
  return {c, std::make_shared<const SphereGrid>(quasi_uniform_grid(2, std::max<Eigen::Index>(2, points)))};
}

// ---------------------------------------------------------------------------

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Random hyperspherical harmonics: special functions, functionals, bounds and experiments", "hyperharm"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool verbose = false, timing = false;
  app.add_option("--seed", seed, "RNG seed (overrides config seeds)");
  app.add_option("--threads", threads, "worker threads (0: all available)");
  app.add_flag("--verbose", verbose, "progress on stderr");
  app.add_flag("--timing", timing, "fill the seconds column of experiment output");

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  int ell = 0, dim = 2;
  double t = 0.0;
  std::optional<double> hilb;
  auto* c_dim = sub("dim", "dimension of the degree-ell eigenspace on S^d");
  c_dim->add_option("ell", ell)->required();
  c_dim->add_option("d", dim)->required();

  auto* c_geg = sub("gegenbauer", "normalized Gegenbauer polynomial G_{ell;d}(t)");
  c_geg->add_option("ell", ell)->required();
  c_geg->add_option("d", dim)->required();
  auto* t_opt = c_geg->add_option("t", t);
  c_geg->add_option("--hilb", hilb, "Hilb-type approximation at angle theta instead");

  std::string model;
  long replicate = 0;
  auto* c_sample = sub("sample", "draw Gaussian (or non-Gaussian) coefficients as CSV");
  c_sample->add_option("--ell", ell)->required();
  c_sample->add_option("--d", dim)->required();
  c_sample->add_option("--model", model, "scale_mixture:a,b,... | heavy_tail:nu");
  c_sample->add_option("--replicate", replicate, "replicate index of the stream");

  std::string input;
  std::vector<double> us;
  long density = 20;
  auto add_input = [&](CLI::App* s) { s->add_option("--input", input, "coefficient CSV ('-' for stdin)")->required(); };
  auto* c_exc = sub("excursion", "excursion volumes on a Fibonacci grid");
  add_input(c_exc);
  c_exc->add_option("--u", us)->required()->delimiter(',')->allow_extra_args(false);
  c_exc->add_option("--density", density, "grid points per ell^2");

  auto* c_crit = sub("critical", "critical points as CSV");
  add_input(c_crit);

  std::string oracle = "morse";
  int subdivision = 6;
  auto* c_epc = sub("epc", "Euler characteristic of excursion sets");
  add_input(c_epc);
  c_epc->add_option("--u", us)->required()->delimiter(',')->allow_extra_args(false);
  c_epc->add_option("--oracle", oracle)->check(CLI::IsMember({"morse", "mesh"}));
  c_epc->add_option("--subdivision", subdivision, "icosphere subdivision for the mesh oracle");

  auto* c_sup = sub("supnorm", "sup norm and its location");
  add_input(c_sup);

  long grid_points = 0;
  auto* c_kol = sub("kol", "Kolmogorov distance on an n-point Fibonacci grid");
  add_input(c_kol);
  c_kol->add_option("--grid", grid_points)->required();

  std::string config, out_dir;
  auto* c_exp = sub("experiment", "Monte Carlo experiments");
  c_exp->require_subcommand(1);
  auto* c_run = c_exp->add_subcommand("run", "run every section of a config file");
  c_run->fallthrough();
  c_run->add_option("config", config)->required();
  c_run->add_option("--out", out_dir, "output directory (default: $HYPERHARM_OUT_DIR or ./hyperharm_out)");

  std::string bound, args;
  bool as_json = false;
  auto* c_theory = sub("theory", "evaluate a bound");
  c_theory->add_option("name", bound)->required();
  c_theory->add_option("--args", args, "k=v,...");
  c_theory->add_flag("--json", as_json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  RunOptions ropt;
  ropt.threads = threads;
  ropt.timing = timing;
  ropt.seed_override = seed;
  if (verbose) ropt.log = &err;

  try {
    if (c_dim->parsed()) {
      if (ell < 0 || dim < 2) throw ValidationError("dim: need ell >= 0 and d >= 2");
      out << eigenspace_dim(ell, dim) << "\n";
    } else if (c_geg->parsed()) {
      if (hilb)
        out << format(gegenbauer_hilb(ell, dim, *hilb)) << "\n";
      else if (t_opt->count() == 0)
        throw ValidationError("gegenbauer: missing t (or --hilb theta)");
      else
        out << format(gegenbauer(ell, dim, t)) << "\n";
    } else if (c_sample->parsed()) {
      if (ell < 0 || dim < 2) throw ValidationError("sample: need ell >= 0 and d >= 2");
      if (replicate < 0) throw ValidationError("sample: replicate must be nonnegative");
      const HarmonicLevel level(ell, dim);
      const std::uint64_t s = seed.value_or(1);
      CoefficientVector c;
      if (model.empty()) {
        RandomStream rng(s, static_cast<std::uint32_t>(ell), static_cast<std::uint32_t>(replicate),
                         Purpose::coefficients);
        c = sample_gaussian(level, rng);
      } else {
        const auto m = parse_model(model);
        RandomStream rng(s, static_cast<std::uint32_t>(ell), static_cast<std::uint32_t>(replicate), Purpose::model);
        c = sample_nongaussian(m, level, rng).coeffs;
      }
      write_coefficients_csv(c, out);
    } else if (c_exc->parsed()) {
      if (density < 1) throw ValidationError("--density must be positive");
      const auto c = read_coefficients_file(input);
      const auto f = explicit_on_grid(c, density * c.level.ell * c.level.ell);
      out << "u,volume\n";
      for (double u : us) out << format(u) << "," << format(excursion_volume(FieldSample{f}, u)) << "\n";
    } else if (c_crit->parsed()) {
      const auto c = read_coefficients_file(input);
      write_critical_csv(find_critical_points(c), out);
    } else if (c_epc->parsed()) {
      const auto c = read_coefficients_file(input);
      out << "u,chi\n";
      if (oracle == "mesh") {
        if (subdivision < 0 || subdivision > 8) throw ValidationError("--subdivision must lie in [0,8]");
        const auto mesh = icosphere(subdivision);
        const auto v = mesh_values(c, mesh);
        for (double u : us) out << format(u) << "," << euler_characteristic_mesh(v, u, mesh) << "\n";
      } else {
        const auto cps = find_critical_points(c);
        for (double u : us) out << format(u) << "," << euler_characteristic_morse(cps, u) << "\n";
      }
    } else if (c_sup->parsed()) {
      const auto c = read_coefficients_file(input);
      require_d2(c.level);
      LatLonSynthesizer syn(c.level.ell, LatLonGrid::for_degree(c.level.ell));
      const auto s = sup_norm(c, syn);
      out << "value,x,y,z\n"
          << format(s.value) << "," << format(s.argmax.coordinates[0]) << "," << format(s.argmax.coordinates[1]) << ","
          << format(s.argmax.coordinates[2]) << "\n";
    } else if (c_kol->parsed()) {
      if (grid_points < 2) throw ValidationError("--grid must be at least 2");
      const auto c = read_coefficients_file(input);
      out << format(kolmogorov_distance(FieldSample{explicit_on_grid(c, grid_points)})) << "\n";
    } else if (c_exp->parsed()) {
      std::string dir = out_dir;
      if (dir.empty()) {
        const char* env = std::getenv("HYPERHARM_OUT_DIR");
        dir = env && *env ? env : "hyperharm_out";
      }
      run_to_directory(config, dir, ropt);
      out << (std::filesystem::path(dir) / "results.csv").string() << "\n";
    } else if (c_theory->parsed()) {
      const auto report = theory::evaluate(bound, parse_args(args));
      if (as_json)
        out << theory::to_json(report).dump(2) << "\n";
      else
        out << format(report.bound_value) << "\n";
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace hyperharm::cli
