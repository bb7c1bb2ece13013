#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "point.hpp"
#include "random.hpp"
#include "specfun.hpp"
#include "sphere_geom.hpp"

namespace hyperharm {

// ---------------------------------------------------------------------------
// Associated Legendre functions p_l^m = sqrt((2l+1)(l-m)!/(l+m)!) P_l^m, no
// Condon-Shortley phase. Real harmonics on S^2 for the normalized measure:
//   slot 0      : p^0
//   slot 2k - 1 : sqrt(2) p^k cos(k phi)
//   slot 2k     : sqrt(2) p^k sin(k phi)

/// Recurrence coefficients for a fixed degree ell.
class LegendreTable {
 public:
  explicit LegendreTable(int ell) : ell_(ell) {
    if (ell < 0) throw DomainError("LegendreTable: ell must be >= 0");
    offset_.assign(ell + 2, 0);
    for (int m = 0; m <= ell; ++m) offset_[m + 1] = offset_[m] + std::max(0, ell - m - 1);
    a_.resize(offset_[ell + 1]);
    b_.resize(offset_[ell + 1]);
    for (int m = 0; m <= ell; ++m) {
      size_t k = offset_[m];
      for (int l = m + 2; l <= ell; ++l, ++k) {
        const double L = l, M = m;
        a_[k] = std::sqrt((4.0 * L * L - 1.0) / (L * L - M * M));
        b_[k] = std::sqrt(((L - 1.0) * (L - 1.0) - M * M) / (4.0 * (L - 1.0) * (L - 1.0) - 1.0));
      }
    }
    seed_.assign(ell + 1, 1.0);
    for (int m = 1; m <= ell; ++m) seed_[m] = seed_[m - 1] * std::sqrt((2.0 * m + 1.0) / (2.0 * m));
    up_.resize(ell + 2);
    for (int m = 0; m <= ell + 1; ++m) up_[m] = std::sqrt(2.0 * m + 3.0);
    dlo_.assign(ell + 2, 0.0);
    dhi_.assign(ell + 2, 0.0);
    for (int m = 0; m <= ell; ++m) {
      dlo_[m] = std::sqrt(static_cast<double>(ell + m) * (ell - m + 1));
      dhi_[m] = std::sqrt(static_cast<double>(ell - m) * (ell + m + 1));
    }
  }

  int ell() const { return ell_; }

  /// For x = cos(theta), s = sin(theta) >= 0 fill, for m = 0..ell,
  ///   p[m]  = p_ell^m(x),
  ///   q[m]  = p_ell^m / s (m >= 1; computed without division, finite at the poles),
  ///   dp[m] = d p_ell^m / d theta.
  void evaluate(double x, double s, double* p, double* q, double* dp) const {
    const int L = ell_;
    // m = 0 column
    {
      double p0 = 1.0;
      if (L >= 1) {
        double p1 = std::sqrt(3.0) * x;
        size_t k = offset_[0];
        for (int l = 2; l <= L; ++l, ++k) {
          double p2 = a_[k] * (x * p1 - b_[k] * p0);
          p0 = p1;
          p1 = p2;
        }
        p0 = p1;
      }
      p[0] = p0;
      q[0] = 0.0;
    }
    double spow = 1.0;  // s^{m-1}
    for (int m = 1; m <= L; ++m) {
      if (m > 1) spow *= s;
      double q0 = seed_[m] * spow;  // q_m^m
      if (m < L) {
        double q1 = up_[m] * x * q0;  // q_{m+1}^m
        size_t k = offset_[m];
        for (int l = m + 2; l <= L; ++l, ++k) {
          double q2 = a_[k] * (x * q1 - b_[k] * q0);
          q0 = q1;
          q1 = q2;
        }
        q0 = q1;
      }
      q[m] = q0;
      p[m] = s * q0;
    }
    if (dp) {
      if (L == 0) {
        dp[0] = 0.0;
        return;
      }
      dp[0] = -std::sqrt(static_cast<double>(L) * (L + 1)) * p[1];
      for (int m = 1; m <= L; ++m) {
        const double hi = (m < L) ? p[m + 1] : 0.0;
        dp[m] = 0.5 * (dlo_[m] * p[m - 1] - dhi_[m] * hi);
      }
    }
  }

 private:
  int ell_;
  std::vector<size_t> offset_;
  std::vector<double> a_, b_, seed_, up_, dlo_, dhi_;
};

/// cos(k phi), sin(k phi) for k = 0..K.
inline void trig_table(double phi, int K, double* c, double* s) {
  c[0] = 1.0;
  s[0] = 0.0;
  if (K == 0) return;
  const double c1 = std::cos(phi), s1 = std::sin(phi);
  c[1] = c1;
  s[1] = s1;
  for (int k = 2; k <= K; ++k) {
    // re-anchor periodically to bound the accumulated rounding error
    if (k % 32 == 0) {
      c[k] = std::cos(k * phi);
      s[k] = std::sin(k * phi);
    } else {
      c[k] = c[k - 1] * c1 - s[k - 1] * s1;
      s[k] = s[k - 1] * c1 + c[k - 1] * s1;
    }
  }
}

inline int slot_order(int slot) { return (slot + 1) / 2; }

// ---------------------------------------------------------------------------

/// alpha on the unit sphere of coefficient space, with a radius.
struct CoefficientVector {
  HarmonicLevel level;
  Eigen::VectorXd alpha;
  double radius = 1.0;

  static CoefficientVector make(const HarmonicLevel& level, Eigen::VectorXd alpha, double radius = 1.0) {
    if (alpha.size() != level.n) throw DomainError("CoefficientVector: alpha length differs from n");
    if (std::abs(alpha.norm() - 1.0) > 1e-12) throw DomainError("CoefficientVector: alpha is not a unit vector");
    if (!(radius > 0.0)) throw DomainError("CoefficientVector: radius must be positive");
    return {level, std::move(alpha), radius};
  }

  /// From raw coefficients u = radius * alpha.
  static CoefficientVector from_raw(const HarmonicLevel& level, const Eigen::VectorXd& u) {
    const double r = u.norm();
    if (!(r > 0.0)) throw DegenerateModel("CoefficientVector: zero coefficient vector");
    return make(level, u / r, r);
  }

  Eigen::VectorXd raw() const { return radius * alpha; }
  CoefficientVector scaled(double c) const {
    if (!(c > 0.0)) throw DomainError("CoefficientVector::scaled: factor must be positive");
    return {level, alpha, radius * c};
  }
};

inline void require_d2(const HarmonicLevel& level) {
  if (level.dim != 2) throw UnsupportedDimension("explicit harmonics are available for d = 2 only");
}

/// Value, analytic tangent gradient and finite-difference covariant Hessian of
/// a fixed degree-ell field on S^2. Not thread-safe (scratch buffers).
class FieldEvaluator {
 public:
  explicit FieldEvaluator(const CoefficientVector& coeffs)
      : coeffs_(coeffs), table_(coeffs.level.ell) {
    require_d2(coeffs.level);
    u_ = coeffs.raw();
    const int L = coeffs.level.ell;
    p_.resize(L + 2);
    q_.resize(L + 2);
    dp_.resize(L + 2);
    c_.resize(L + 1);
    s_.resize(L + 1);
  }

  const CoefficientVector& coefficients() const { return coeffs_; }

  double value(const Eigen::Vector3d& x) {
    angles(x);
    table_.evaluate(ct_, st_, p_.data(), q_.data(), nullptr);
    trig_table(phi_, coeffs_.level.ell, c_.data(), s_.data());
    double f = u_[0] * p_[0];
    for (int k = 1; k <= coeffs_.level.ell; ++k)
      f += std::numbers::sqrt2 * p_[k] * (u_[2 * k - 1] * c_[k] + u_[2 * k] * s_[k]);
    return f;
  }

  /// Returns f(x); grad3 receives the tangent gradient as an ambient vector.
  double value_gradient(const Eigen::Vector3d& x, Eigen::Vector3d& grad3) {
    angles(x);
    const int L = coeffs_.level.ell;
    table_.evaluate(ct_, st_, p_.data(), q_.data(), dp_.data());
    trig_table(phi_, L, c_.data(), s_.data());
    double f = u_[0] * p_[0];
    double ft = u_[0] * dp_[0];
    double fp = 0.0;  // (1/sin) d/dphi
    for (int k = 1; k <= L; ++k) {
      const double a = u_[2 * k - 1], b = u_[2 * k];
      const double cc = a * c_[k] + b * s_[k];
      f += std::numbers::sqrt2 * p_[k] * cc;
      ft += std::numbers::sqrt2 * dp_[k] * cc;
      fp += std::numbers::sqrt2 * k * q_[k] * (b * c_[k] - a * s_[k]);
    }
    grad3 = ft * e_theta_ + fp * e_phi_;
    return f;
  }

  /// Orthonormal tangent frame (e_theta, e_phi) at x; the phi = 0 limit at the poles.
  void frame(const Eigen::Vector3d& x, Eigen::Vector3d& e1, Eigen::Vector3d& e2) {
    angles(x);
    e1 = e_theta_;
    e2 = e_phi_;
  }

  struct Local {
    double value;
    Eigen::Vector2d grad;
    Eigen::Matrix2d hess;
    Eigen::Vector3d e1, e2;
  };

  /// Gradient in the frame, Hessian by 4th-order central differences of the
  /// analytic gradient along geodesics with step 1e-4 pi / ell.
  Local local(const Eigen::Vector3d& x) {
    Local out;
    Eigen::Vector3d g;
    out.value = value_gradient(x, g);
    out.e1 = e_theta_;
    out.e2 = e_phi_;
    out.grad = Eigen::Vector2d(g.dot(out.e1), g.dot(out.e2));
    const int L = coeffs_.level.ell;
    if (L == 0) {
      out.hess.setZero();
      return out;
    }
    const double h = 1e-4 * std::numbers::pi / L;
    const Eigen::Vector3d dirs[2] = {out.e1, out.e2};
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      const double w[4] = {8.0, -8.0, -1.0, 1.0};
      const double t[4] = {h, -h, 2 * h, -2 * h};
      for (int k = 0; k < 4; ++k) {
        Eigen::Vector3d y = std::cos(t[k]) * x + std::sin(t[k]) * dirs[j];
        Eigen::Vector3d gy;
        value_gradient(y.normalized(), gy);
        acc += w[k] * gy;
      }
      acc /= 12.0 * h;
      out.hess(0, j) = acc.dot(out.e1);
      out.hess(1, j) = acc.dot(out.e2);
    }
    out.hess = 0.5 * (out.hess + out.hess.transpose()).eval();
    // restore the frame of x after the probes
    angles(x);
    return out;
  }

 private:
  void angles(const Eigen::Vector3d& x) {
    const double rho = std::hypot(x[0], x[1]);
    theta_ = std::atan2(rho, x[2]);
    phi_ = std::atan2(x[1], x[0]);
    ct_ = std::cos(theta_);
    st_ = std::sin(theta_);
    const double cp = std::cos(phi_), sp = std::sin(phi_);
    e_theta_ = Eigen::Vector3d(ct_ * cp, ct_ * sp, -st_);
    e_phi_ = Eigen::Vector3d(-sp, cp, 0.0);
  }

  CoefficientVector coeffs_;
  LegendreTable table_;
  Eigen::VectorXd u_;
  std::vector<double> p_, q_, dp_, c_, s_;
  double theta_ = 0, phi_ = 0, ct_ = 1, st_ = 0;
  Eigen::Vector3d e_theta_, e_phi_;
};

/// All 2ell+1 real harmonics at one point of S^2 into out[0..n).
inline void basis_values(const LegendreTable& table, const Eigen::Vector3d& x, double* out,
                         std::vector<double>& scratch) {
  const int L = table.ell();
  scratch.resize(4 * (L + 2));
  double* p = scratch.data();
  double* q = p + (L + 2);
  double* c = q + (L + 2);
  double* s = c + (L + 2);
  const double theta = std::atan2(std::hypot(x[0], x[1]), x[2]);
  const double phi = std::atan2(x[1], x[0]);
  table.evaluate(std::cos(theta), std::sin(theta), p, q, nullptr);
  trig_table(phi, L, c, s);
  out[0] = p[0];
  for (int k = 1; k <= L; ++k) {
    out[2 * k - 1] = std::numbers::sqrt2 * p[k] * c[k];
    out[2 * k] = std::numbers::sqrt2 * p[k] * s[k];
  }
}

/// Real spherical harmonic with slot index m in 1..2ell+1, normalized measure.
inline double ylm(const HarmonicLevel& level, int m, const SpherePoint& point) {
  require_d2(level);
  if (m < 1 || m > level.n) throw DomainError("ylm: index outside 1..2ell+1");
  LegendreTable table(level.ell);
  std::vector<double> out(level.n), scratch;
  basis_values(table, point.coordinates.head<3>(), out.data(), scratch);
  return out[m - 1];
}

inline double evaluate(const CoefficientVector& coeffs, const SpherePoint& point) {
  require_d2(coeffs.level);
  FieldEvaluator ev(coeffs);
  return ev.value(point.coordinates.head<3>());
}

struct GradientHessian {
  Eigen::Vector2d grad;
  Eigen::Matrix2d hess;
  Eigen::Vector3d e1, e2;  // tangent frame of the components
};

inline GradientHessian gradient_hessian(const CoefficientVector& coeffs, const SpherePoint& point) {
  require_d2(coeffs.level);
  FieldEvaluator ev(coeffs);
  auto loc = ev.local(point.coordinates.head<3>());
  return {loc.grad, loc.hess, loc.e1, loc.e2};
}

// ---------------------------------------------------------------------------
// Samplers

inline CoefficientVector sample_unit_coefficients(const HarmonicLevel& level, RandomStream& rng) {
  Eigen::VectorXd z = rng.normal_vector(level.n);
  double r = z.norm();
  while (!(r > 0.0)) {
    z = rng.normal_vector(level.n);
    r = z.norm();
  }
  return CoefficientVector{level, z / r, 1.0};
}

/// R = sqrt(X/n), X chi-square with n degrees of freedom, via a gamma draw.
inline double sample_radius(const HarmonicLevel& level, RandomStream& rng) {
  const double n = static_cast<double>(level.n);
  return std::sqrt(rng.gamma(0.5 * n, 2.0) / n);
}

inline CoefficientVector sample_gaussian(const HarmonicLevel& level, RandomStream& rng) {
  CoefficientVector c = sample_unit_coefficients(level, rng);
  c.radius = sample_radius(level, rng);
  return c;
}

inline double covariance(const HarmonicLevel& level, const SpherePoint& x, const SpherePoint& y) {
  const double t = std::clamp(x.coordinates.dot(y.coordinates), -1.0, 1.0);
  return gegenbauer(level.ell, level.dim, t);
}

// ---------------------------------------------------------------------------
// Non-Gaussian coefficient models

/// u = xi * (Gaussian coefficients), xi drawn from a finite support.
struct ScaleMixture {
  std::vector<double> support{1.0};
  std::vector<double> probabilities;  // empty: equiprobable
};

/// i.i.d. Student-t coordinates scaled to unit expected power (dof > 2).
struct HeavyTail {
  double dof = 5.0;
};

struct CustomModel {
  std::string name;
  std::function<Eigen::VectorXd(const HarmonicLevel&, RandomStream&)> sampler;
};

using NonGaussianModel = std::variant<ScaleMixture, HeavyTail, CustomModel>;

inline NonGaussianModel parse_model(const std::string& spec) {
  auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (head == "gaussian" && rest.empty()) return ScaleMixture{};
  if (head == "scale_mixture") {
    ScaleMixture m;
    m.support.clear();
    std::stringstream ss(rest);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      size_t pos = 0;
      double v = std::stod(tok, &pos);
      if (pos != tok.size() || !(v > 0.0)) throw ValidationError("scale_mixture: support values must be positive numbers");
      m.support.push_back(v);
    }
    if (m.support.empty()) throw ValidationError("scale_mixture: empty support");
    return m;
  }
  if (head == "heavy_tail") {
    size_t pos = 0;
    double v = std::stod(rest, &pos);
    if (pos != rest.size() || !(v > 2.0)) throw ValidationError("heavy_tail: degrees of freedom must exceed 2");
    return HeavyTail{v};
  }
  throw ValidationError("unknown model: " + spec);
}

inline std::string model_name(const NonGaussianModel& m) {
  if (auto* s = std::get_if<ScaleMixture>(&m)) {
    std::ostringstream os;
    os.precision(17);
    os << "scale_mixture:";
    for (size_t i = 0; i < s->support.size(); ++i) os << (i ? "," : "") << s->support[i];
    return os.str();
  }
  if (auto* h = std::get_if<HeavyTail>(&m)) {
    std::ostringstream os;
    os.precision(17);
    os << "heavy_tail:" << h->dof;
    return os.str();
  }
  return "custom:" + std::get<CustomModel>(m).name;
}

struct NonGaussianSample {
  CoefficientVector coeffs;  // raw coefficients u~ = radius * alpha
  double sample_power;       // C~ = |u~|^2
  Eigen::VectorXd normalized() const { return coeffs.alpha; }
};

inline NonGaussianSample sample_nongaussian(const NonGaussianModel& model, const HarmonicLevel& level,
                                            RandomStream& rng) {
  Eigen::VectorXd u;
  if (auto* s = std::get_if<ScaleMixture>(&model)) {
    if (s->support.empty()) throw DomainError("scale_mixture: empty support");
    size_t idx = 0;
    const double r = rng.uniform();
    if (s->probabilities.empty()) {
      idx = std::min(s->support.size() - 1, static_cast<size_t>(r * static_cast<double>(s->support.size())));
    } else {
      double acc = 0.0;
      idx = s->support.size() - 1;
      for (size_t i = 0; i < s->probabilities.size(); ++i) {
        acc += s->probabilities[i];
        if (r < acc) {
          idx = i;
          break;
        }
      }
    }
    CoefficientVector g = sample_gaussian(level, rng);
    u = s->support[idx] * g.raw();
  } else if (auto* h = std::get_if<HeavyTail>(&model)) {
    const double nu = h->dof;
    const double scale = std::sqrt((nu - 2.0) / (nu * static_cast<double>(level.n)));
    u.resize(level.n);
    for (Eigen::Index i = 0; i < level.n; ++i) {
      const double z = rng.normal();
      const double chi2 = rng.gamma(0.5 * nu, 2.0);
      u[i] = scale * z / std::sqrt(chi2 / nu);
    }
  } else {
    const auto& c = std::get<CustomModel>(model);
    if (!c.sampler) throw DomainError("custom model without sampler");
    u = c.sampler(level, rng);
    if (u.size() != level.n) throw DomainError("custom model returned a vector of the wrong length");
  }
  const double power = u.squaredNorm();
  if (!(power > 0.0) || !std::isfinite(power)) throw DegenerateModel("non-Gaussian sampler produced a zero vector");
  return {CoefficientVector::from_raw(level, u), power};
}

// ---------------------------------------------------------------------------
// Field samples

/// Gaussian field values on a point set.
struct PointsetField {
  Eigen::MatrixXd points;  // N x (d+1)
  Eigen::VectorXd values;
  Eigen::VectorXd weights;
  double jitter = 0.0;
  Eigen::Index rank = 0;
};

/// Explicit eigenfunction with an optional cubature grid for grid functionals.
struct ExplicitField {
  CoefficientVector coeffs;
  std::shared_ptr<const SphereGrid> grid;
};

using FieldSample = std::variant<ExplicitField, PointsetField>;

/// Low-rank factor L of the Gram matrix [G(<x_i, x_j>)] = L L^T by diagonal-pivoted
/// Cholesky, built column by column so N x N is never formed.
class GaussianFieldSimulator {
 public:
  GaussianFieldSimulator(const HarmonicLevel& level, Eigen::MatrixXd points)
      : level_(level), points_(std::move(points)) {
    const Eigen::Index N = points_.rows();
    if (N < 1) throw DomainError("simulate_field: empty point set");
    if (points_.cols() != level.dim + 1) throw DomainError("simulate_field: point dimension mismatch");
    const double jitters[] = {0.0, 1e-12, 1e-10, 1e-8};
    for (double j : jitters) {
      if (factorize(j)) {
        jitter_ = j;
        return;
      }
    }
    throw GeometryError("simulate_field: Gram matrix indefinite beyond maximal jitter 1e-8 (points too clustered)");
  }

  const HarmonicLevel& level() const { return level_; }
  const Eigen::MatrixXd& points() const { return points_; }
  const Eigen::MatrixXd& factor() const { return L_; }
  double jitter() const { return jitter_; }
  Eigen::Index rank() const { return L_.cols(); }

  /// Standard normal latent vector of length rank(); rescaled to norm sqrt(n)
  /// for the uniform-sphere coefficient law (requires rank == n).
  Eigen::VectorXd latent(RandomStream& rng, bool unit_sphere = false) const {
    Eigen::VectorXd z = rng.normal_vector(rank());
    if (unit_sphere) {
      if (rank() != level_.n)
        throw GeometryError("simulate_field: uniform-sphere law needs full eigenspace rank on the point set");
      z *= std::sqrt(static_cast<double>(level_.n)) / z.norm();
    }
    return z;
  }

  Eigen::VectorXd draw(RandomStream& rng, bool unit_sphere = false) const { return L_ * latent(rng, unit_sphere); }

  /// Values for a batch of latent columns (rank x R).
  Eigen::MatrixXd apply(const Eigen::MatrixXd& Z) const { return L_ * Z; }

 private:
  bool factorize(double jitter) {
    const Eigen::Index N = points_.rows();
    const Eigen::Index max_rank = std::min<Eigen::Index>(N, level_.n);
    const double tol = std::max(1e-10, 100.0 * jitter);
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(N, 1.0 + jitter);
    Eigen::MatrixXd L(N, max_rank);
    std::vector<char> used(N, 0);
    Eigen::Index k = 0;
    for (; k < max_rank; ++k) {
      Eigen::Index piv = -1;
      double best = -1.0;
      for (Eigen::Index i = 0; i < N; ++i)
        if (!used[i] && diag[i] > best) {
          best = diag[i];
          piv = i;
        }
      if (piv < 0 || best <= tol) break;
      used[piv] = 1;
      Eigen::VectorXd col(N);
      const Eigen::VectorXd xp = points_.row(piv).transpose();
      for (Eigen::Index i = 0; i < N; ++i) {
        const double t = std::clamp(points_.row(i).dot(xp), -1.0, 1.0);
        col[i] = gegenbauer(level_.ell, level_.dim, t) + (i == piv ? jitter : 0.0);
      }
      if (k > 0) col.noalias() -= L.leftCols(k) * L.row(piv).head(k).transpose();
      const double pivot = std::sqrt(best);
      L.col(k) = col / pivot;
      for (Eigen::Index i = 0; i < N; ++i) {
        diag[i] -= L(i, k) * L(i, k);
        if (used[i]) diag[i] = 0.0;
      }
    }
    // the residual must be negligible and nonnegative up to round-off
    for (Eigen::Index i = 0; i < N; ++i)
      if (!used[i] && (diag[i] < -tol || diag[i] > tol)) return false;
    L_ = L.leftCols(k);
    return true;
  }

  HarmonicLevel level_;
  Eigen::MatrixXd points_;
  Eigen::MatrixXd L_;
  double jitter_ = 0.0;
};

inline PointsetField simulate_field(const HarmonicLevel& level, const std::vector<SpherePoint>& points,
                                    RandomStream& rng) {
  if (points.empty()) throw DomainError("simulate_field: empty point set");
  Eigen::MatrixXd P(static_cast<Eigen::Index>(points.size()), level.dim + 1);
  for (size_t i = 0; i < points.size(); ++i) {
    if (points[i].coordinates.size() != level.dim + 1) throw DomainError("simulate_field: point dimension mismatch");
    P.row(static_cast<Eigen::Index>(i)) = points[i].coordinates.transpose();
  }
  GaussianFieldSimulator sim(level, P);
  PointsetField out;
  out.values = sim.draw(rng);
  out.points = std::move(P);
  out.weights = Eigen::VectorXd::Constant(out.points.rows(), 1.0 / static_cast<double>(out.points.rows()));
  out.jitter = sim.jitter();
  out.rank = sim.rank();
  return out;
}

inline PointsetField simulate_field(const HarmonicLevel& level, const SphereGrid& grid, RandomStream& rng) {
  GaussianFieldSimulator sim(level, grid.points);
  PointsetField out;
  out.values = sim.draw(rng);
  out.points = grid.points;
  out.weights = grid.weights;
  out.jitter = sim.jitter();
  out.rank = sim.rank();
  return out;
}

}  // namespace hyperharm
