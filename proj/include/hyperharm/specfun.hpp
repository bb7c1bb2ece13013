#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>

#include "errors.hpp"
#include "quadrature.hpp"

namespace hyperharm {

/// Exact C(N, k) in 128-bit arithmetic; throws CapacityError on overflow.
inline unsigned __int128 binomial_u128(std::int64_t N, std::int64_t k) {
  if (k < 0 || k > N) return 0;
  k = std::min(k, N - k);
  unsigned __int128 c = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    unsigned __int128 next;
    if (__builtin_mul_overflow(c, static_cast<unsigned __int128>(N - k + i), &next))
      throw CapacityError("binomial overflow");
    c = next / static_cast<unsigned __int128>(i);
  }
  return c;
}

/// Dimension of the degree-ell harmonic eigenspace on S^dim.
inline std::int64_t eigenspace_dim(std::int64_t ell, int dim) {
  if (dim < 2) throw DomainError("eigenspace_dim: dim must be >= 2");
  if (ell < 0) throw DomainError("eigenspace_dim: ell must be >= 0");
  if (ell == 0) return 1;
  const std::string where = " (ell=" + std::to_string(ell) + ", d=" + std::to_string(dim) + ")";
  try {
    unsigned __int128 b = binomial_u128(ell + dim - 2, ell - 1);
    unsigned __int128 prod;
    if (__builtin_mul_overflow(b, static_cast<unsigned __int128>(2 * ell + dim - 1), &prod))
      throw CapacityError("eigenspace_dim overflow" + where);
    unsigned __int128 n = prod / static_cast<unsigned __int128>(ell);
    if (n > static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max()))
      throw CapacityError("eigenspace_dim overflow" + where);
    return static_cast<std::int64_t>(n);
  } catch (const CapacityError&) {
    throw CapacityError("eigenspace_dim overflow" + where);
  }
}

/// Frequency ell on S^dim with its eigenvalue and eigenspace dimension.
struct HarmonicLevel {
  int ell = 0;
  int dim = 2;
  std::int64_t n = 1;
  std::int64_t lambda = 0;

  HarmonicLevel() = default;
  HarmonicLevel(int ell_, int dim_)
      : ell(ell_), dim(dim_), n(eigenspace_dim(ell_, dim_)),
        lambda(static_cast<std::int64_t>(ell_) * (ell_ + dim_ - 1)) {}

  bool operator==(const HarmonicLevel&) const = default;
};

enum class CriticalKind { critical, extremum, saddle, minimum, maximum };

inline std::string_view to_string(CriticalKind k) {
  switch (k) {
    case CriticalKind::critical: return "critical";
    case CriticalKind::extremum: return "extremum";
    case CriticalKind::saddle: return "saddle";
    case CriticalKind::minimum: return "minimum";
    case CriticalKind::maximum: return "maximum";
  }
  return "?";
}

inline CriticalKind parse_critical_kind(std::string_view s) {
  if (s == "critical" || s == "c") return CriticalKind::critical;
  if (s == "extremum" || s == "e") return CriticalKind::extremum;
  if (s == "saddle" || s == "s") return CriticalKind::saddle;
  if (s == "minimum" || s == "min") return CriticalKind::minimum;
  if (s == "maximum" || s == "max") return CriticalKind::maximum;
  throw DomainError("unknown critical kind: " + std::string(s));
}

/// Gegenbauer polynomial of S^dim normalized to G(1) = 1.
inline double gegenbauer(int ell, int dim, double t) {
  if (dim < 2) throw DomainError("gegenbauer: dim must be >= 2");
  if (ell < 0) throw DomainError("gegenbauer: ell must be >= 0");
  if (!(std::abs(t) <= 1.0 + 1e-12)) throw DomainError("gegenbauer: |t| > 1");
  t = std::clamp(t, -1.0, 1.0);
  if (ell == 0) return 1.0;
  double g0 = 1.0, g1 = t;
  for (int l = 2; l <= ell; ++l) {
    double g2 = ((2.0 * l + dim - 3) * t * g1 - (l - 1.0) * g0) / (l + dim - 2.0);
    g0 = g1;
    g1 = g2;
  }
  return g1;
}

/// Bessel function of the first kind J_order(x).
inline double bessel_j(double order, double x);

namespace detail {

inline double bessel_series(double nu, double x) {
  const double h = 0.5 * x;
  double term = (nu == 0.0) ? 1.0 : std::exp(nu * std::log(h) - std::lgamma(nu + 1.0));
  if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  double sum = term;
  const double h2 = h * h;
  for (int m = 1; m < 500; ++m) {
    term *= -h2 / (m * (m + nu));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum) && m > h) break;
  }
  return sum;
}

inline double bessel_hankel(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double p = 1.0, q = 0.0;
  double a = 1.0;  // a_k / x^k
  double last = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 200; ++k) {
    double odd = 2.0 * k - 1.0;
    double next = a * (mu - odd * odd) / (k * 8.0 * x);
    if (std::abs(next) >= last) break;
    last = std::abs(next);
    a = next;
    // a_k enters P (even k) or Q (odd k) with sign (-1)^{floor(k/2)}
    double s = ((k / 2) % 2 == 0) ? 1.0 : -1.0;
    if (k % 2 == 0) p += s * a; else q += s * a;
    if (std::abs(a) < 1e-17) break;
  }
  const double chi = x - (0.5 * nu + 0.25) * std::numbers::pi;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

}  // namespace detail

inline constexpr double bessel_crossover = 12.0;

inline double bessel_j(double order, double x) {
  if (x < 0.0 || std::isnan(x)) throw DomainError("bessel_j: x must be >= 0");
  if (order < 0.0) throw DomainError("bessel_j: order must be >= 0");
  if (x < bessel_crossover) return detail::bessel_series(order, x);
  const double twice = 2.0 * order;
  const bool integer = order == std::floor(order);
  const bool half = !integer && twice == std::floor(twice);
  if (!integer && !half) return detail::bessel_hankel(order, x);
  double j0, j1, nu0;
  if (integer) {
    j0 = detail::bessel_hankel(0.0, x);
    j1 = detail::bessel_hankel(1.0, x);
    nu0 = 0.0;
  } else {
    const double pref = std::sqrt(2.0 / (std::numbers::pi * x));
    j0 = pref * std::sin(x);
    j1 = pref * (std::sin(x) / x - std::cos(x));
    nu0 = 0.5;
  }
  if (order == nu0) return j0;
  // upward recurrence is stable while the order stays below x
  if (order >= x) return detail::bessel_hankel(order, x);
  double nu = nu0 + 1.0;
  while (nu < order - 0.25) {
    double j2 = 2.0 * nu / x * j1 - j0;
    j0 = j1;
    j1 = j2;
    nu += 1.0;
  }
  return j1;
}

/// a_{ell,d} = Gamma(ell + d/2) / (L^{d/2-1} ell!), L = ell + (d-1)/2.
inline double hilb_coefficient(int ell, int dim) {
  const double nu = 0.5 * dim - 1.0;
  const double L = ell + 0.5 * (dim - 1);
  return std::exp(std::lgamma(ell + nu + 1.0) - std::lgamma(ell + 1.0) - nu * std::log(L));
}

inline double hilb_prefactor(int ell, int dim, double theta) {
  const double nu = 0.5 * dim - 1.0;
  // 2^nu / C(ell+nu, ell)
  const double log_binom = std::lgamma(ell + nu + 1.0) - std::lgamma(ell + 1.0) - std::lgamma(nu + 1.0);
  return std::exp(nu * std::log(2.0) - log_binom) * std::pow(std::sin(theta), -nu);
}

/// Main term of the Bessel asymptotic for gegenbauer(ell, dim, cos theta).
inline double gegenbauer_hilb(int ell, int dim, double theta) {
  if (ell < 1) throw DomainError("gegenbauer_hilb: ell must be >= 1");
  if (dim < 2) throw DomainError("gegenbauer_hilb: dim must be >= 2");
  if (!(theta > 0.0 && theta <= std::numbers::pi / 2 + 1e-15))
    throw DomainError("gegenbauer_hilb: theta outside (0, pi/2]");
  const double nu = 0.5 * dim - 1.0;
  const double L = ell + 0.5 * (dim - 1);
  return hilb_prefactor(ell, dim, theta) * hilb_coefficient(ell, dim) *
         std::sqrt(theta / std::sin(theta)) * bessel_j(nu, L * theta);
}

/// Error budget of gegenbauer_hilb with unit constants: remainder times the prefactor,
/// sqrt(theta) ell^{-3/2} above theta = 1/(K ell), theta^{nu+2} ell^nu below.
inline double hilb_remainder_budget(int ell, int dim, double theta, double K = 1.0) {
  if (ell < 1) throw DomainError("hilb_remainder_budget: ell must be >= 1");
  if (!(theta > 0.0 && theta <= std::numbers::pi / 2 + 1e-15))
    throw DomainError("hilb_remainder_budget: theta outside (0, pi/2]");
  const double nu = 0.5 * dim - 1.0;
  double delta = theta > 1.0 / (K * ell) ? std::sqrt(theta) * std::pow(ell, -1.5)
                                         : std::pow(theta, nu + 2.0) * std::pow(ell, nu);
  return hilb_prefactor(ell, dim, theta) * delta;
}

struct GaussianValues {
  double pdf;
  double cdf;
  double tail;
};

inline GaussianValues gaussian(double u) {
  const double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  return {pdf, 0.5 * std::erfc(-u / std::numbers::sqrt2), 0.5 * std::erfc(u / std::numbers::sqrt2)};
}

/// Probabilists' Hermite polynomial He_k(u).
inline double hermite_he(int k, double u) {
  if (k < 0) throw DomainError("hermite_he: negative degree");
  if (k == 0) return 1.0;
  double h0 = 1.0, h1 = u;
  for (int j = 1; j < k; ++j) {
    double h2 = u * h1 - j * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

/// q-th derivative of the standard normal CDF: (-1)^{q-1} He_{q-1}(u) phi(u).
inline double cdf_derivative(int q, double u) {
  if (q < 1) throw DomainError("cdf_derivative: q must be >= 1");
  const double s = (q % 2 == 1) ? 1.0 : -1.0;
  return s * hermite_he(q - 1, u) * gaussian(u).pdf;
}

/// printed: the closed forms as typeset (3/sqrt(2 pi) prefactor, e^{-u^2} envelope).
/// kac_rice: the forms consistent with the expected Euler characteristic identity
/// Psi^e - Psi^s = u phi(u) and the total critical density 2/sqrt(3).
enum class DensityConvention { printed, kac_rice };

inline DensityConvention parse_density_convention(std::string_view s) {
  if (s == "printed") return DensityConvention::printed;
  if (s == "kac_rice") return DensityConvention::kac_rice;
  throw DomainError("unknown density convention: " + std::string(s));
}

inline std::string_view to_string(DensityConvention c) {
  return c == DensityConvention::printed ? "printed" : "kac_rice";
}

inline double critical_density(CriticalKind kind, double u,
                               DensityConvention conv = DensityConvention::printed) {
  const double e2 = std::exp(-u * u);
  if (conv == DensityConvention::printed) {
    const double a = 3.0 / std::sqrt(2.0 * std::numbers::pi);
    switch (kind) {
      case CriticalKind::critical: return a * (2.0 * e2 + u * u - 1.0) * e2;
      case CriticalKind::extremum: return a * (e2 + u * u - 1.0) * e2;
      case CriticalKind::saddle: return a * std::exp(-1.5 * u * u);
      default: break;
    }
  } else {
    const double a = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const double env = std::exp(-0.5 * u * u);
    switch (kind) {
      case CriticalKind::critical: return a * (2.0 * e2 + u * u - 1.0) * env;
      case CriticalKind::extremum: return a * (e2 + u * u - 1.0) * env;
      case CriticalKind::saddle: return a * std::exp(-1.5 * u * u);
      default: break;
    }
  }
  throw DomainError("critical_density: kind must be critical, extremum or saddle");
}

inline constexpr double critical_truncation = 40.0;

/// Psi^kind(u) = integral of psi^kind over [u, infinity), truncated at 40.
inline double critical_tail(CriticalKind kind, double u,
                            DensityConvention conv = DensityConvention::printed) {
  if (kind != CriticalKind::critical && kind != CriticalKind::extremum && kind != CriticalKind::saddle)
    throw DomainError("critical_tail: kind must be critical, extremum or saddle");
  if (u >= critical_truncation) return 0.0;
  const double a = std::max(u, -critical_truncation);
  auto f = [&](double z) { return critical_density(kind, z, conv); };
  // split at the origin so the bulk is resolved on both sides
  if (a < 0.0)
    return integrate_adaptive(f, a, 0.0, 5e-11) + integrate_adaptive(f, 0.0, critical_truncation, 5e-11);
  return integrate_adaptive(f, a, critical_truncation, 1e-10);
}

}  // namespace hyperharm
