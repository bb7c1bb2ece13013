#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "errors.hpp"

namespace hyperharm {

/// Unit vector in R^{d+1}; for d = 2 the spherical angles are cached.
struct SpherePoint {
  Eigen::VectorXd coordinates;
  double theta = std::numeric_limits<double>::quiet_NaN();
  double phi = std::numeric_limits<double>::quiet_NaN();

  int dim() const { return static_cast<int>(coordinates.size()) - 1; }

  static SpherePoint from_angles(double theta, double phi) {
    SpherePoint p;
    const double s = std::sin(theta);
    p.coordinates = Eigen::Vector3d(s * std::cos(phi), s * std::sin(phi), std::cos(theta));
    p.theta = theta;
    p.phi = phi - 2.0 * std::numbers::pi * std::floor(phi / (2.0 * std::numbers::pi));
    return p;
  }

  /// Requires a unit vector (tolerance 1e-12); use normalized() to project.
  static SpherePoint from_cartesian(const Eigen::VectorXd& v) {
    if (v.size() < 3) throw DomainError("SpherePoint: ambient dimension must be >= 3");
    if (std::abs(v.norm() - 1.0) > 1e-12) throw DomainError("SpherePoint: coordinates are not a unit vector");
    SpherePoint p;
    p.coordinates = v;
    if (v.size() == 3) p.cache_angles();
    return p;
  }

  static SpherePoint normalized(const Eigen::VectorXd& v) {
    const double r = v.norm();
    if (!(r > 0.0)) throw DomainError("SpherePoint: zero vector");
    return from_cartesian(v / r);
  }

  void cache_angles() {
    const Eigen::VectorXd& v = coordinates;
    theta = std::atan2(std::hypot(v[0], v[1]), v[2]);
    phi = std::atan2(v[1], v[0]);
    if (phi < 0.0) phi += 2.0 * std::numbers::pi;
  }
};

/// Geodesic distance between unit vectors, accurate for small and large angles.
inline double geodesic_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  const double chord = (a - b).norm();
  const double other = (a + b).norm();
  return 2.0 * std::atan2(chord, other);
}

}  // namespace hyperharm
