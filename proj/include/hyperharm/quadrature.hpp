#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace hyperharm {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw DomainError("gauss_legendre: n must be positive");
  QuadratureRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) p0 = 1.0;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

namespace detail {

inline constexpr std::array<double, 8> kronrod_x = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kronrod_w = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss7_w = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
std::pair<double, double> gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double fc = f(c);
  double k = kronrod_w[7] * fc, g = gauss7_w[3] * fc;
  for (int j = 0; j < 7; ++j) {
    double s = f(c - h * kronrod_x[j]) + f(c + h * kronrod_x[j]);
    k += kronrod_w[j] * s;
    if (j % 2 == 1) g += gauss7_w[j / 2] * s;
  }
  return {k * h, std::abs((k - g) * h)};
}

template <class F>
double adaptive(F& f, double a, double b, double tol, int depth, double& err, bool& ok) {
  auto [val, e] = gk15(f, a, b);
  if (e <= tol) {
    err += e;
    return val;
  }
  if (depth == 0) {
    ok = false;
    err += e;
    return val;
  }
  const double m = 0.5 * (a + b);
  return adaptive(f, a, m, 0.5 * tol, depth - 1, err, ok) +
         adaptive(f, m, b, 0.5 * tol, depth - 1, err, ok);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) with an absolute error target.
/// Throws NumericalError carrying the achieved error estimate on failure.
template <class F>
double integrate_adaptive(F f, double a, double b, double abs_tol = 1e-10, int max_depth = 30) {
  if (a == b) return 0.0;
  double err = 0.0;
  bool ok = true;
  double v = detail::adaptive(f, a, b, abs_tol, max_depth, err, ok);
  if (!ok) throw NumericalError("adaptive quadrature did not converge", err);
  return v;
}

}  // namespace hyperharm
