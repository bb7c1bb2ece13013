#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "harmonics.hpp"
#include "sphere_geom.hpp"
#include "synthesis.hpp"

namespace hyperharm {

// ---------------------------------------------------------------------------
// Grid functionals

/// sum_i w_i 1{v_i >= u}
inline double excursion_volume(const Eigen::VectorXd& values, const Eigen::VectorXd& weights, double u) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (values[i] >= u) s += weights[i];
  return s;
}

/// sup_u |F(u) - Phi(u)| for the weighted empirical CDF, checking both sides of every jump.
inline double kolmogorov_distance(const Eigen::VectorXd& values, const Eigen::VectorXd& weights) {
  const Eigen::Index N = values.size();
  std::vector<Eigen::Index> order(static_cast<size_t>(N));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
  const double total = weights.sum();
  double cum = 0.0, D = 0.0;
  for (size_t i = 0; i < order.size();) {
    const double v = values[order[i]];
    double w = 0.0;
    size_t j = i;
    for (; j < order.size() && values[order[j]] == v; ++j) w += weights[order[j]];
    const double phi = gaussian(v).cdf;
    D = std::max(D, std::abs(cum / total - phi));
    cum += w;
    D = std::max(D, std::abs(cum / total - phi));
    i = j;
  }
  return std::min(1.0, D);
}

/// Values and weights of a field sample on its carrier grid.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> grid_values(const FieldSample& sample) {
  if (auto* p = std::get_if<PointsetField>(&sample)) return {p->values, p->weights};
  const auto& e = std::get<ExplicitField>(sample);
  if (!e.grid) throw DomainError("explicit field sample has no attached grid");
  require_d2(e.coeffs.level);
  GridSynthesizer syn(e.coeffs.level, e.grid->points);
  return {syn.synthesize(e.coeffs.raw()), e.grid->weights};
}

inline double excursion_volume(const FieldSample& sample, double u) {
  auto [v, w] = grid_values(sample);
  return excursion_volume(v, w, u);
}

inline double kolmogorov_distance(const FieldSample& sample) {
  auto [v, w] = grid_values(sample);
  return kolmogorov_distance(v, w);
}

// ---------------------------------------------------------------------------
// Critical points

struct CriticalPoint {
  SpherePoint position;
  double value = 0.0;
  CriticalKind kind = CriticalKind::saddle;
  double gradient_residual = 0.0;
  std::pair<double, double> hessian_eigs{0.0, 0.0};  // ascending
};

struct CriticalPointSet {
  HarmonicLevel level{1, 2};
  std::vector<CriticalPoint> points;
  bool degenerate_flag = false;

  long count(CriticalKind k) const {
    return std::count_if(points.begin(), points.end(), [&](const CriticalPoint& c) { return c.kind == k; });
  }
};

struct CriticalSearchOptions {
  enum class Seeding { sign_change, all_cells };
  Seeding seeding = Seeding::sign_change;
  double grid_refine = 1.0;    // lat-lon grid has >= 40 ell^2 refine^2 cells
  double dedupe_radius = 1e-3;  // in units of 1/ell
  int max_iterations = 60;
  bool retry = true;  // on a Morse failure, reseed from every cell of a grid refined twice
};

namespace detail {

struct NewtonResult {
  bool converged = false;
  Eigen::Vector3d x;
  FieldEvaluator::Local local;
};

/// Newton iteration for grad f = 0 on S^2 via the exponential map. The step
/// uses the pseudo-inverse of the Hessian and is capped at 0.5 / ell.
inline NewtonResult newton_critical(FieldEvaluator& ev, Eigen::Vector3d x, double tol, int max_iter) {
  const int L = ev.coefficients().level.ell;
  const double cap = 0.5 / std::max(L, 1);
  NewtonResult r;
  for (int it = 0; it <= max_iter; ++it) {
    r.local = ev.local(x);
    if (r.local.grad.norm() < tol) {
      r.converged = true;
      r.x = x;
      return r;
    }
    if (it == max_iter) break;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(r.local.hess);
    const Eigen::Vector2d lam = es.eigenvalues();
    const double big = lam.cwiseAbs().maxCoeff();
    Eigen::Vector2d step = Eigen::Vector2d::Zero();
    for (int i = 0; i < 2; ++i) {
      if (std::abs(lam[i]) <= 1e-12 * big) continue;
      const Eigen::Vector2d vi = es.eigenvectors().col(i);
      step -= (vi.dot(r.local.grad) / lam[i]) * vi;
    }
    double len = step.norm();
    if (!(len > 0.0)) break;
    if (len > cap) {
      step *= cap / len;
      len = cap;
    }
    const Eigen::Vector3d dir = (step[0] * r.local.e1 + step[1] * r.local.e2) / len;
    x = (std::cos(len) * x + std::sin(len) * dir).normalized();
  }
  return r;
}

/// Spatial hash of accepted points for first-wins deduplication.
class PointHash {
 public:
  explicit PointHash(double radius) : r_(radius), h_(std::max(radius, 1e-6)) {}

  bool near(const Eigen::Vector3d& x) const {
    const auto c = cell(x);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = map_.find(key(c[0] + dx, c[1] + dy, c[2] + dz));
          if (it == map_.end()) continue;
          for (const auto& y : it->second)
            if (geodesic_distance(x, y) < r_) return true;
        }
    return false;
  }

  void insert(const Eigen::Vector3d& x) {
    const auto c = cell(x);
    map_[key(c[0], c[1], c[2])].push_back(x);
  }

 private:
  std::array<std::int64_t, 3> cell(const Eigen::Vector3d& x) const {
    return {static_cast<std::int64_t>(std::floor(x[0] / h_)), static_cast<std::int64_t>(std::floor(x[1] / h_)),
            static_cast<std::int64_t>(std::floor(x[2] / h_))};
  }
  static std::int64_t key(std::int64_t a, std::int64_t b, std::int64_t c) {
    return ((a + (1 << 20)) << 42) ^ ((b + (1 << 20)) << 21) ^ (c + (1 << 20));
  }
  double r_, h_;
  std::unordered_map<std::int64_t, std::vector<Eigen::Vector3d>> map_;
};

inline Eigen::Vector3d latlon_point(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

}  // namespace detail

/// Newton seeds from a lat-lon grid: centres of cells where both gradient
/// components change sign, grid nodes that are local minima of |grad f|^2, and
/// the two poles. Seeding::all_cells seeds from every cell centre.
inline std::vector<Eigen::Vector3d> critical_seeds(LatLonSynthesizer& syn, const Eigen::VectorXd& u,
                                                   CriticalSearchOptions::Seeding seeding) {
  const auto& g = syn.grid();
  const int nt = g.n_theta, np = g.n_phi;
  std::vector<Eigen::Vector3d> seeds;
  seeds.push_back({0.0, 0.0, 1.0});
  seeds.push_back({0.0, 0.0, -1.0});
  auto centre = [&](int j, int k) {
    return detail::latlon_point(0.5 * (g.theta[j] + g.theta[j + 1]), g.phi(k) + std::numbers::pi / np);
  };
  if (seeding == CriticalSearchOptions::Seeding::all_cells) {
    for (int j = 0; j + 1 < nt; ++j)
      for (int k = 0; k < np; ++k) seeds.push_back(centre(j, k));
    return seeds;
  }
  Eigen::MatrixXd ft, fp;
  syn.gradients(u, ft, fp);
  const Eigen::MatrixXd g2 = ft.cwiseAbs2() + fp.cwiseAbs2();
  for (int j = 0; j + 1 < nt; ++j)
    for (int k = 0; k < np; ++k) {
      const int k1 = (k + 1) % np;
      auto straddles = [&](const Eigen::MatrixXd& F) {
        const double a = F(j, k), b = F(j, k1), c = F(j + 1, k), d = F(j + 1, k1);
        return std::min({a, b, c, d}) <= 0.0 && std::max({a, b, c, d}) >= 0.0;
      };
      if (straddles(ft) && straddles(fp)) seeds.push_back(centre(j, k));
    }
  for (int j = 0; j < nt; ++j)
    for (int k = 0; k < np; ++k) {
      const double v = g2(j, k);
      bool is_min = true;
      for (int dj = -1; dj <= 1 && is_min; ++dj)
        for (int dk = -1; dk <= 1; ++dk) {
          if (dj == 0 && dk == 0) continue;
          int jj = j + dj, kk = (k + dk + np) % np;
          // across a pole the neighbour sits half a turn away
          if (jj < 0 || jj >= nt) {
            jj = jj < 0 ? 0 : nt - 1;
            kk = (kk + np / 2) % np;
          }
          if (g2(jj, kk) < v) {
            is_min = false;
            break;
          }
        }
      if (is_min) seeds.push_back(g.point(j, k));
    }
  return seeds;
}

/// Critical points of a degree-ell field on S^2 with a caller-owned synthesizer
/// (reused across samples of the same degree).
inline CriticalPointSet find_critical_points(const CoefficientVector& coeffs, LatLonSynthesizer& syn,
                                             const CriticalSearchOptions& opt = {}) {
  require_d2(coeffs.level);
  const int L = coeffs.level.ell;
  if (L < 1) throw DomainError("find_critical_points: ell must be >= 1");
  const Eigen::VectorXd u = coeffs.raw();
  const double scale = u.norm();
  CriticalPointSet out;
  out.level = coeffs.level;
  if (!(scale > 0.0)) {
    out.degenerate_flag = true;
    return out;
  }
  const double tol = 1e-10 * L * scale;
  const double floor = 1e-6 * L * L * scale;
  FieldEvaluator ev(coeffs);
  detail::PointHash seen(opt.dedupe_radius / L);
  for (const auto& s : critical_seeds(syn, u, opt.seeding)) {
    auto r = detail::newton_critical(ev, s, tol, opt.max_iterations);
    if (!r.converged || seen.near(r.x)) continue;
    seen.insert(r.x);
    CriticalPoint cp;
    cp.position = SpherePoint::from_cartesian(r.x);
    cp.value = r.local.value;
    cp.gradient_residual = r.local.grad.norm();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(r.local.hess, Eigen::EigenvaluesOnly);
    const double l1 = es.eigenvalues()[0], l2 = es.eigenvalues()[1];
    cp.hessian_eigs = {l1, l2};
    cp.kind = l1 > 0.0 ? CriticalKind::minimum : (l2 < 0.0 ? CriticalKind::maximum : CriticalKind::saddle);
    if (std::min(std::abs(l1), std::abs(l2)) < floor) out.degenerate_flag = true;
    out.points.push_back(std::move(cp));
  }
  const long morse =
      out.count(CriticalKind::minimum) - out.count(CriticalKind::saddle) + out.count(CriticalKind::maximum);
  if (morse != 2) {
    if (opt.retry) {
      CriticalSearchOptions fine = opt;
      fine.retry = false;
      fine.seeding = CriticalSearchOptions::Seeding::all_cells;
      fine.grid_refine = 2.0 * opt.grid_refine;
      LatLonSynthesizer dense(L, LatLonGrid::for_degree(L, fine.grid_refine));
      return find_critical_points(coeffs, dense, fine);
    }
    out.degenerate_flag = true;
  }
  return out;
}

inline CriticalPointSet find_critical_points(const CoefficientVector& coeffs, const CriticalSearchOptions& opt = {}) {
  require_d2(coeffs.level);
  LatLonSynthesizer syn(coeffs.level.ell, LatLonGrid::for_degree(coeffs.level.ell, opt.grid_refine));
  return find_critical_points(coeffs, syn, opt);
}

inline bool kind_matches(CriticalKind query, CriticalKind k) {
  switch (query) {
    case CriticalKind::critical: return true;
    case CriticalKind::extremum: return k == CriticalKind::minimum || k == CriticalKind::maximum;
    default: return k == query;
  }
}

/// Number of critical points of the requested kind with value >= u.
inline long count_above(const CriticalPointSet& cps, CriticalKind kind, double u) {
  return std::count_if(cps.points.begin(), cps.points.end(),
                       [&](const CriticalPoint& c) { return kind_matches(kind, c.kind) && c.value >= u; });
}

/// chi(A_u) = #extrema - #saddles above u (Morse theory for -f).
inline long euler_characteristic_morse(const CriticalPointSet& cps, double u) {
  if (cps.degenerate_flag) throw UnusableSample("euler_characteristic_morse: degenerate critical point set");
  return count_above(cps, CriticalKind::extremum, u) - count_above(cps, CriticalKind::saddle, u);
}

/// V - E + F of the mesh sub-complex spanned by vertices with f >= u.
inline long euler_characteristic_mesh(const Eigen::VectorXd& vertex_values, double u, const SphereMesh& mesh) {
  std::vector<char> in(static_cast<size_t>(vertex_values.size()));
  long V = 0, E = 0, F = 0;
  for (Eigen::Index i = 0; i < vertex_values.size(); ++i) {
    in[i] = vertex_values[i] >= u;
    V += in[i];
  }
  for (const auto& e : mesh.edges) E += in[e[0]] && in[e[1]];
  for (const auto& f : mesh.faces) F += in[f[0]] && in[f[1]] && in[f[2]];
  return V - E + F;
}

inline Eigen::VectorXd mesh_values(const CoefficientVector& coeffs, const SphereMesh& mesh) {
  require_d2(coeffs.level);
  GridSynthesizer syn(coeffs.level, mesh.vertices);
  return syn.synthesize(coeffs.raw());
}

inline long euler_characteristic_mesh(const CoefficientVector& coeffs, double u, const SphereMesh& mesh) {
  return euler_characteristic_mesh(mesh_values(coeffs, mesh), u, mesh);
}

// ---------------------------------------------------------------------------
// Sup norm

struct SupNorm {
  double value = 0.0;
  SpherePoint argmax;
};

/// max |f| on the lat-lon grid, then Newton refinement of the leading local
/// maxima of |f| to critical points of f. Never below the grid maximum.
inline SupNorm sup_norm(const CoefficientVector& coeffs, LatLonSynthesizer& syn, int candidates = 8) {
  require_d2(coeffs.level);
  const Eigen::VectorXd u = coeffs.raw();
  Eigen::MatrixXd v;
  syn.values(u, v);
  const auto& g = syn.grid();
  const int nt = g.n_theta, np = g.n_phi;
  const Eigen::MatrixXd a = v.cwiseAbs();
  std::vector<std::pair<double, std::pair<int, int>>> peaks;
  for (int j = 0; j < nt; ++j)
    for (int k = 0; k < np; ++k) {
      const double x = a(j, k);
      bool peak = true;
      for (int dj = -1; dj <= 1 && peak; ++dj)
        for (int dk = -1; dk <= 1; ++dk) {
          const int jj = j + dj;
          if (jj < 0 || jj >= nt || (dj == 0 && dk == 0)) continue;
          if (a(jj, (k + dk + np) % np) > x) {
            peak = false;
            break;
          }
        }
      if (peak) peaks.push_back({x, {j, k}});
    }
  std::sort(peaks.begin(), peaks.end(), [](const auto& p, const auto& q) {
    return p.first != q.first ? p.first > q.first : p.second < q.second;
  });
  SupNorm best;
  Eigen::Index bj, bk;
  best.value = a.maxCoeff(&bj, &bk);
  best.argmax = SpherePoint::from_cartesian(g.point(static_cast<int>(bj), static_cast<int>(bk)));
  const int L = coeffs.level.ell;
  const double tol = 1e-10 * std::max(L, 1) * u.norm();
  FieldEvaluator ev(coeffs);
  const double reach = 4.0 * std::numbers::pi / nt;
  for (int i = 0; i < std::min<int>(candidates, static_cast<int>(peaks.size())); ++i) {
    const auto [j, k] = peaks[i].second;
    const Eigen::Vector3d x0 = g.point(j, k);
    auto r = detail::newton_critical(ev, x0, tol, 60);
    std::vector<Eigen::Vector3d> tries;
    if (r.converged) tries.push_back(r.x);
    // the poles are never grid nodes
    if (j == 0 || j == nt - 1) tries.push_back(Eigen::Vector3d(0, 0, j == 0 ? 1.0 : -1.0));
    for (const auto& x : tries) {
      if (geodesic_distance(x, x0) > reach) continue;
      const double fx = std::abs(ev.value(x));
      if (fx > best.value) {
        best.value = fx;
        best.argmax = SpherePoint::from_cartesian(x);
      }
    }
  }
  return best;
}

inline SupNorm sup_norm(const FieldSample& sample) {
  if (auto* p = std::get_if<PointsetField>(&sample)) {
    Eigen::Index i;
    SupNorm s;
    s.value = p->values.cwiseAbs().maxCoeff(&i);
    s.argmax.coordinates = p->points.row(i).transpose();
    if (p->points.cols() == 3) s.argmax.cache_angles();
    return s;
  }
  const auto& e = std::get<ExplicitField>(sample);
  require_d2(e.coeffs.level);
  LatLonSynthesizer syn(e.coeffs.level.ell, LatLonGrid::for_degree(e.coeffs.level.ell));
  return sup_norm(e.coeffs, syn);
}

// ---------------------------------------------------------------------------
// Export

/// CSV: x,y,z,theta,phi,value,kind,residual,eig1,eig2 at 17 significant digits.
inline void write_critical_csv(const CriticalPointSet& cps, std::ostream& os) {
  os << "x,y,z,theta,phi,value,kind,residual,eig1,eig2\n";
  char buf[512];
  for (const auto& c : cps.points) {
    const auto& x = c.position.coordinates;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%.17g,%.17g,%.17g\n", x[0], x[1], x[2],
                  c.position.theta, c.position.phi, c.value, std::string(to_string(c.kind)).c_str(),
                  c.gradient_residual, c.hessian_eigs.first, c.hessian_eigs.second);
    os << buf;
  }
}

}  // namespace hyperharm
