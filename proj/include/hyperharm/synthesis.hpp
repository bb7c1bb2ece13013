#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "harmonics.hpp"
#include "quadrature.hpp"

namespace hyperharm {

/// Latitude-longitude grid with Gauss-Legendre colatitudes (theta increasing)
/// and equispaced longitudes phi_k = 2 pi k / n_phi. Weights are those of the
/// product rule for the normalized measure.
struct LatLonGrid {
  int n_theta = 0, n_phi = 0;
  std::vector<double> theta, cos_theta, sin_theta, row_weight;

  LatLonGrid() = default;
  LatLonGrid(int nt, int np) : n_theta(nt), n_phi(np) {
    if (nt < 2 || np < 4) throw DomainError("LatLonGrid: grid too small");
    auto rule = gauss_legendre(nt);
    theta.resize(nt);
    cos_theta.resize(nt);
    sin_theta.resize(nt);
    row_weight.resize(nt);
    for (int j = 0; j < nt; ++j) {
      // nodes ascend in x = cos(theta); reverse so theta ascends
      const double x = rule.nodes[nt - 1 - j];
      cos_theta[j] = x;
      sin_theta[j] = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
      theta[j] = std::acos(x);
      row_weight[j] = 0.5 * rule.weights[nt - 1 - j] / np;
    }
  }

  /// Smallest grid with at least 40 ell^2 cells (scaled by `refine`). n_phi is
  /// the first 5-smooth multiple of 4 from 2 n_theta on, so the row FFTs stay fast.
  static LatLonGrid for_degree(int ell, double refine = 1.0) {
    const int nt = static_cast<int>(std::ceil(4.5 * refine * std::max(ell, 1))) + 2;
    int np = (2 * nt + 3) / 4 * 4;
    auto smooth = [](int n) {
      for (int p : {2, 3, 5})
        while (n % p == 0) n /= p;
      return n == 1;
    };
    while (!smooth(np)) np += 4;
    return LatLonGrid(nt, np);
  }

  double phi(int k) const { return 2.0 * std::numbers::pi * k / n_phi; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(n_theta) * n_phi; }
  Eigen::Vector3d point(int j, int k) const {
    const double p = phi(k);
    return {sin_theta[j] * std::cos(p), sin_theta[j] * std::sin(p), cos_theta[j]};
  }
};

/// Evaluates degree-ell fields on a LatLonGrid: Legendre tables once, then one
/// inverse real FFT per latitude row. Not thread-safe (FFT plan cache).
class LatLonSynthesizer {
 public:
  LatLonSynthesizer(int ell, LatLonGrid grid) : ell_(ell), grid_(std::move(grid)) {
    if (2 * ell_ >= grid_.n_phi) throw DomainError("LatLonSynthesizer: n_phi must exceed 2 ell");
    const int L = ell_, nt = grid_.n_theta;
    P_.resize(nt, L + 1);
    DP_.resize(nt, L + 1);
    Q_.resize(nt, L + 1);
    LegendreTable table(L);
    std::vector<double> p(L + 2), q(L + 2), dp(L + 2);
    for (int j = 0; j < nt; ++j) {
      table.evaluate(grid_.cos_theta[j], grid_.sin_theta[j], p.data(), q.data(), dp.data());
      for (int m = 0; m <= L; ++m) {
        const double w = m == 0 ? 1.0 : std::numbers::sqrt2;
        P_(j, m) = w * p[m];
        DP_(j, m) = w * dp[m];
        Q_(j, m) = w * m * q[m];
      }
    }
    fft_.SetFlag(Eigen::FFT<double>::Unscaled);
    spec_.resize(grid_.n_phi / 2 + 1);
  }

  int ell() const { return ell_; }
  const LatLonGrid& grid() const { return grid_; }

  /// values(j, k) = f(theta_j, phi_k) for raw coefficients u (slot layout of harmonics).
  void values(const Eigen::VectorXd& u, Eigen::MatrixXd& out) {
    out.resize(grid_.n_theta, grid_.n_phi);
    for (int j = 0; j < grid_.n_theta; ++j) {
      std::fill(spec_.begin(), spec_.end(), std::complex<double>(0.0, 0.0));
      spec_[0] = P_(j, 0) * u[0];
      for (int m = 1; m <= ell_; ++m) spec_[m] = 0.5 * P_(j, m) * std::complex<double>(u[2 * m - 1], -u[2 * m]);
      row(j, out);
    }
  }

  /// Tangent gradient components: ft = df/dtheta, fp = (1/sin theta) df/dphi.
  void gradients(const Eigen::VectorXd& u, Eigen::MatrixXd& ft, Eigen::MatrixXd& fp) {
    ft.resize(grid_.n_theta, grid_.n_phi);
    fp.resize(grid_.n_theta, grid_.n_phi);
    for (int j = 0; j < grid_.n_theta; ++j) {
      std::fill(spec_.begin(), spec_.end(), std::complex<double>(0.0, 0.0));
      spec_[0] = DP_(j, 0) * u[0];
      for (int m = 1; m <= ell_; ++m) spec_[m] = 0.5 * DP_(j, m) * std::complex<double>(u[2 * m - 1], -u[2 * m]);
      row(j, ft);
      // d/dphi of a cos + b sin is m (b cos - a sin)
      std::fill(spec_.begin(), spec_.end(), std::complex<double>(0.0, 0.0));
      for (int m = 1; m <= ell_; ++m) spec_[m] = 0.5 * Q_(j, m) * std::complex<double>(u[2 * m], u[2 * m - 1]);
      row(j, fp);
    }
  }

  /// Weights of the product rule, laid out like values().
  Eigen::MatrixXd weights() const {
    Eigen::MatrixXd w(grid_.n_theta, grid_.n_phi);
    for (int j = 0; j < grid_.n_theta; ++j) w.row(j).setConstant(grid_.row_weight[j]);
    return w;
  }

 private:
  void row(int j, Eigen::MatrixXd& out) {
    buf_.resize(grid_.n_phi);
    fft_.inv(buf_.data(), spec_.data(), grid_.n_phi);
    for (int k = 0; k < grid_.n_phi; ++k) out(j, k) = buf_[k];
  }

  int ell_;
  LatLonGrid grid_;
  Eigen::MatrixXd P_, DP_, Q_;
  Eigen::FFT<double> fft_;
  std::vector<std::complex<double>> spec_;
  std::vector<double> buf_;
};

/// Field values at arbitrary points of S^2 as a GEMM against the basis matrix.
/// The basis is cached when it fits in `cache_limit` doubles, otherwise it is
/// rebuilt in row blocks on every call.
class GridSynthesizer {
 public:
  GridSynthesizer(const HarmonicLevel& level, Eigen::MatrixXd points, std::size_t cache_limit = 40'000'000)
      : level_(level), points_(std::move(points)), table_(level.ell) {
    require_d2(level);
    if (points_.cols() != 3) throw DomainError("GridSynthesizer: points must be N x 3");
    if (static_cast<std::size_t>(points_.rows()) * level.n <= cache_limit) {
      basis_.resize(points_.rows(), level.n);
      fill(0, points_.rows(), basis_);
      cached_ = true;
    }
  }

  Eigen::Index size() const { return points_.rows(); }
  const Eigen::MatrixXd& points() const { return points_; }

  /// Columns of U are raw coefficient vectors; returns N x R values.
  Eigen::MatrixXd synthesize(const Eigen::MatrixXd& U) const {
    if (U.rows() != level_.n) throw DomainError("GridSynthesizer: coefficient length mismatch");
    if (cached_) return basis_ * U;
    Eigen::MatrixXd out(points_.rows(), U.cols());
    Eigen::MatrixXd block;
    constexpr Eigen::Index B = 8192;
    for (Eigen::Index r0 = 0; r0 < points_.rows(); r0 += B) {
      const Eigen::Index r1 = std::min(points_.rows(), r0 + B);
      block.resize(r1 - r0, level_.n);
      fill(r0, r1, block);
      out.middleRows(r0, r1 - r0).noalias() = block * U;
    }
    return out;
  }

  Eigen::VectorXd synthesize(const Eigen::VectorXd& u) const {
    return synthesize(Eigen::MatrixXd(u)).col(0);
  }

 private:
  void fill(Eigen::Index r0, Eigen::Index r1, Eigen::MatrixXd& dst) const {
    std::vector<double> out(level_.n), scratch;
    for (Eigen::Index i = r0; i < r1; ++i) {
      basis_values(table_, points_.row(i).transpose(), out.data(), scratch);
      for (int m = 0; m < level_.n; ++m) dst(i - r0, m) = out[m];
    }
  }

  HarmonicLevel level_;
  Eigen::MatrixXd points_;
  LegendreTable table_;
  Eigen::MatrixXd basis_;
  bool cached_ = false;
};

}  // namespace hyperharm
