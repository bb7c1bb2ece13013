#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "hyperharm/harmonics.hpp"
#include "hyperharm/quadrature.hpp"

using namespace hyperharm;

namespace {

constexpr double pi = std::numbers::pi;

SpherePoint random_point(RandomStream& rng) {
  Eigen::VectorXd v = rng.normal_vector(3);
  return SpherePoint::normalized(v);
}

// sqrt(4 pi) (-1)^m sph_legendre is the normalized p_l^m without phase
double p_oracle(int l, int m, double theta) {
  return std::sqrt(4.0 * pi) * ((m % 2) ? -1.0 : 1.0) * std::sph_legendre(l, m, theta);
}

// Product rule: Gauss-Legendre in cos(theta) times trapezoid in phi.
template <class F>
double sphere_mean(F f, int nt, int np) {
  auto gl = gauss_legendre(nt);
  double s = 0.0;
  for (int i = 0; i < nt; ++i) {
    double th = std::acos(gl.nodes[i]);
    for (int k = 0; k < np; ++k) {
      double ph = 2 * pi * k / np;
      s += gl.weights[i] * f(SpherePoint::from_angles(th, ph));
    }
  }
  return s / (2.0 * np);
}

// Kolmogorov statistic of a sample against a CDF.
template <class Cdf>
double ks_stat(std::vector<double> x, Cdf cdf) {
  std::sort(x.begin(), x.end());
  double d = 0.0;
  const double N = static_cast<double>(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    double F = cdf(x[i]);
    d = std::max({d, std::abs((i + 1) / N - F), std::abs(i / N - F)});
  }
  return d;
}

}  // namespace

TEST(Philox, KnownAnswerVectors) {
  auto r = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(r, (Philox4x32::counter_type{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  r = Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(r, (Philox4x32::counter_type{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  r = Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(r, (Philox4x32::counter_type{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RandomStream, IndependentKeysAndReproducible) {
  RandomStream a(7, 16, 3, Purpose::coefficients), b(7, 16, 3, Purpose::coefficients);
  RandomStream c(7, 16, 4, Purpose::coefficients), d(7, 16, 3, Purpose::radius);
  for (int i = 0; i < 100; ++i) {
    double x = a.normal();
    EXPECT_EQ(x, b.normal());
    EXPECT_NE(x, c.normal());
    EXPECT_NE(x, d.normal());
  }
}

TEST(Legendre, MatchesStdOracle) {
  for (int l = 0; l <= 60; ++l) {
    LegendreTable table(l);
    std::vector<double> p(l + 2), q(l + 2), dp(l + 2);
    for (double th : {0.013, 0.4, 1.1, pi / 2, 2.0, 3.0}) {
      table.evaluate(std::cos(th), std::sin(th), p.data(), q.data(), dp.data());
      for (int m = 0; m <= l; ++m) {
        double ref = p_oracle(l, m, th);
        ASSERT_NEAR(p[m], ref, 1e-11 * std::max(1.0, std::abs(ref)) * std::sqrt(2.0 * l + 1)) << l << " " << m << " " << th;
        if (m >= 1) ASSERT_NEAR(q[m] * std::sin(th), p[m], 1e-12 * std::sqrt(2.0 * l + 1));
      }
    }
  }
}

TEST(Legendre, DerivativeMatchesFiniteDifferences) {
  for (int l : {1, 2, 5, 12, 30}) {
    LegendreTable table(l);
    std::vector<double> p(l + 2), q(l + 2), dp(l + 2), pp(l + 2), pm(l + 2), pp2(l + 2), pm2(l + 2);
    const double h = 1e-4;
    for (double th : {0.2, 0.9, 1.7, 2.8}) {
      table.evaluate(std::cos(th), std::sin(th), p.data(), q.data(), dp.data());
      table.evaluate(std::cos(th + h), std::sin(th + h), pp.data(), q.data(), nullptr);
      table.evaluate(std::cos(th - h), std::sin(th - h), pm.data(), q.data(), nullptr);
      table.evaluate(std::cos(th + 2 * h), std::sin(th + 2 * h), pp2.data(), q.data(), nullptr);
      table.evaluate(std::cos(th - 2 * h), std::sin(th - 2 * h), pm2.data(), q.data(), nullptr);
      for (int m = 0; m <= l; ++m) {
        double fd = (8 * (pp[m] - pm[m]) - (pp2[m] - pm2[m])) / (12 * h);
        EXPECT_NEAR(dp[m], fd, 1e-7 * l * l) << l << " " << m << " " << th;
      }
    }
  }
}

TEST(Legendre, QuotientFiniteAtPoles) {
  const int l = 9;
  LegendreTable table(l);
  std::vector<double> p(l + 2), q(l + 2), p2(l + 2), q2(l + 2);
  table.evaluate(1.0, 0.0, p.data(), q.data(), nullptr);
  table.evaluate(std::cos(1e-7), std::sin(1e-7), p2.data(), q2.data(), nullptr);
  for (int m = 1; m <= l; ++m) {
    EXPECT_TRUE(std::isfinite(q[m]));
    EXPECT_EQ(p[m], 0.0);
    EXPECT_NEAR(q[m], q2[m], 1e-5 * std::max(1.0, std::abs(q[m])));
  }
}

TEST(Ylm, AdditionTheorem) {
  RandomStream rng(11);
  for (int l = 0; l <= 32; ++l) {
    LegendreTable table(l);
    std::vector<double> out(2 * l + 1), scratch;
    for (int i = 0; i < 100; ++i) {
      auto x = random_point(rng);
      basis_values(table, x.coordinates.head<3>(), out.data(), scratch);
      double s = 0;
      for (double v : out) s += v * v;
      ASSERT_NEAR(s, 2.0 * l + 1, 1e-10 * (2.0 * l + 1)) << l;
    }
  }
  HarmonicLevel lv0(0, 2);
  EXPECT_DOUBLE_EQ(ylm(lv0, 1, SpherePoint::from_angles(0.3, 1.2)), 1.0);
}

TEST(Ylm, OrthonormalUnderNormalizedMeasure) {
  for (int l = 0; l <= 10; ++l) {
    HarmonicLevel lv(l, 2);
    LegendreTable table(l);
    auto gl = gauss_legendre(2 * l + 4);
    const int np = 2 * l + 4;
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(lv.n, lv.n);
    std::vector<double> out(lv.n), scratch;
    for (size_t i = 0; i < gl.nodes.size(); ++i)
      for (int k = 0; k < np; ++k) {
        auto x = SpherePoint::from_angles(std::acos(gl.nodes[i]), 2 * pi * k / np);
        basis_values(table, x.coordinates.head<3>(), out.data(), scratch);
        Eigen::Map<Eigen::VectorXd> v(out.data(), lv.n);
        gram += gl.weights[i] / (2.0 * np) * v * v.transpose();
      }
    EXPECT_LT((gram - Eigen::MatrixXd::Identity(lv.n, lv.n)).cwiseAbs().maxCoeff(), 1e-8) << l;
  }
}

TEST(Ylm, Errors) {
  EXPECT_THROW(ylm(HarmonicLevel(2, 3), 1, SpherePoint::from_angles(0.1, 0.1)), UnsupportedDimension);
  EXPECT_THROW(ylm(HarmonicLevel(2, 2), 0, SpherePoint::from_angles(0.1, 0.1)), DomainError);
  EXPECT_THROW(ylm(HarmonicLevel(2, 2), 6, SpherePoint::from_angles(0.1, 0.1)), DomainError);
}

TEST(Evaluate, SpecExamples) {
  for (int l : {0, 1, 4, 17}) {
    HarmonicLevel lv(l, 2);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(lv.n);
    a[0] = 1.0;
    auto c = CoefficientVector::make(lv, a, 2.5);
    EXPECT_NEAR(evaluate(c, SpherePoint::from_angles(0.0, 0.0)), 2.5 * std::sqrt(2.0 * l + 1), 1e-12 * (l + 1));
  }
  HarmonicLevel lv0(0, 2);
  auto c0 = CoefficientVector::make(lv0, Eigen::VectorXd::Constant(1, -1.0), 3.0);
  EXPECT_DOUBLE_EQ(evaluate(c0, SpherePoint::from_angles(1.0, 2.0)), -3.0);
}

TEST(Evaluate, Parseval) {
  RandomStream rng(5);
  for (int l : {1, 3, 8, 16, 32}) {
    HarmonicLevel lv(l, 2);
    auto c = sample_unit_coefficients(lv, rng).scaled(1.7);
    FieldEvaluator ev(c);
    double m2 = sphere_mean([&](const SpherePoint& x) { double f = ev.value(x.coordinates.head<3>()); return f * f; },
                            l + 4, 2 * l + 4);
    EXPECT_NEAR(m2, 1.7 * 1.7, 1e-6) << l;
  }
}

TEST(CoefficientVector, Validation) {
  HarmonicLevel lv(2, 2);
  EXPECT_THROW(CoefficientVector::make(lv, Eigen::VectorXd::Ones(5)), DomainError);
  EXPECT_THROW(CoefficientVector::make(lv, Eigen::VectorXd::Ones(4).normalized()), DomainError);
  EXPECT_THROW(CoefficientVector::make(lv, Eigen::VectorXd::Ones(5).normalized(), 0.0), DomainError);
  EXPECT_THROW(CoefficientVector::from_raw(lv, Eigen::VectorXd::Zero(5)), DegenerateModel);
  EXPECT_THROW(SpherePoint::from_cartesian(Eigen::Vector3d(1, 1, 0)), DomainError);
}

TEST(GradientHessian, ConstantField) {
  HarmonicLevel lv(0, 2);
  auto c = CoefficientVector::make(lv, Eigen::VectorXd::Ones(1));
  auto gh = gradient_hessian(c, SpherePoint::from_angles(0.7, 0.2));
  EXPECT_EQ(gh.grad.norm(), 0.0);
  EXPECT_EQ(gh.hess.norm(), 0.0);
}

TEST(GradientHessian, GradientMatchesFiniteDifferences) {
  RandomStream rng(21);
  const int l = 8;
  HarmonicLevel lv(l, 2);
  auto c = sample_gaussian(lv, rng);
  FieldEvaluator ev(c);
  for (int i = 0; i < 100; ++i) {
    Eigen::Vector3d x = random_point(rng).coordinates;
    auto gh = gradient_hessian(c, SpherePoint::from_cartesian(x));
    const double h = 1e-4;
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector3d v = j == 0 ? gh.e1 : gh.e2;
      auto f = [&](double t) { return ev.value((std::cos(t) * x + std::sin(t) * v).normalized()); };
      double fd = (8 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12 * h);
      EXPECT_NEAR(gh.grad[j], fd, 1e-6 * l * c.radius);
    }
  }
}

TEST(GradientHessian, LaplacianTraceIsEigenvalue) {
  RandomStream rng(8);
  for (int l : {1, 4, 16, 40}) {
    HarmonicLevel lv(l, 2);
    auto c = sample_gaussian(lv, rng);
    FieldEvaluator ev(c);
    for (int i = 0; i < 40; ++i) {
      Eigen::Vector3d x = random_point(rng).coordinates;
      if (i == 0) x = Eigen::Vector3d(0, 0, 1);
      if (i == 1) x = Eigen::Vector3d(0, 0, -1);
      auto loc = ev.local(x);
      EXPECT_NEAR(loc.hess.trace(), -static_cast<double>(lv.lambda) * loc.value, 1e-7 * lv.lambda * std::sqrt(lv.n))
          << l << " " << i;
      EXPECT_NEAR(loc.hess(0, 1), loc.hess(1, 0), 0.0);
    }
  }
}

TEST(GradientHessian, PoleIsSmooth) {
  RandomStream rng(3);
  HarmonicLevel lv(6, 2);
  auto c = sample_gaussian(lv, rng);
  FieldEvaluator ev(c);
  Eigen::Vector3d g0, g1;
  ev.value_gradient(Eigen::Vector3d(0, 0, 1), g0);
  ev.value_gradient(Eigen::Vector3d(1e-9, 0, 1).normalized(), g1);
  EXPECT_NEAR((g0 - g1).norm(), 0.0, 1e-6);
}

TEST(Samplers, UnitCoefficientMoments) {
  HarmonicLevel lv(2, 2);
  const int N = 10000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(lv.n), m2 = Eigen::VectorXd::Zero(lv.n);
  double sign_stat = 0;
  for (int r = 0; r < N; ++r) {
    RandomStream rng(99, 2, r, Purpose::coefficients);
    auto c = sample_unit_coefficients(lv, rng);
    ASSERT_NEAR(c.alpha.norm(), 1.0, 1e-14);
    mean += c.alpha;
    m2 += c.alpha.cwiseAbs2();
    sign_stat += c.alpha[0] > 0 ? 1 : -1;
  }
  mean /= N;
  m2 /= N;
  const double n = static_cast<double>(lv.n);
  // Var(alpha_i) = 1/n, Var(alpha_i^2) = 2(n-1)/(n^2 (n+2))
  for (int i = 0; i < lv.n; ++i) {
    EXPECT_LT(std::abs(mean[i]), 4 * std::sqrt(1.0 / n / N));
    EXPECT_LT(std::abs(m2[i] - 1.0 / n), 4 * std::sqrt(2 * (n - 1) / (n * n * (n + 2)) / N));
  }
  EXPECT_LT(std::abs(sign_stat) / std::sqrt(N), 3.0);
}

TEST(Samplers, RadiusMomentsAndLaw) {
  HarmonicLevel lv(10, 2);
  const double n = static_cast<double>(lv.n);
  const int N = 100000;
  double s = 0;
  for (int r = 0; r < N; ++r) {
    RandomStream rng(1, 10, r, Purpose::radius);
    double R = sample_radius(lv, rng);
    s += R * R;
  }
  EXPECT_LT(std::abs(s / N - 1.0), 4 * std::sqrt(2.0 / n) / std::sqrt(N));
  // concentration for huge n: choose a level with n close to 1e6
  HarmonicLevel big(499999, 2);
  RandomStream rb(2);
  EXPECT_NEAR(sample_radius(big, rb), 1.0, 0.01);
  // exact chi-square CDF oracle at the stated sample size
  std::vector<double> x;
  for (int r = 0; r < 10000; ++r) {
    RandomStream rng(4, 10, r, Purpose::radius);
    double R = sample_radius(lv, rng);
    x.push_back(n * R * R);
  }
  auto chi2 = [&](double v) { return boost::math::gamma_p(n / 2, v / 2); };
  EXPECT_LT(ks_stat(x, chi2), 0.01);
  // large-sample check: sqrt(N) D stays below the 0.1% Kolmogorov quantile
  x.clear();
  for (int r = 0; r < 1000000; ++r) {
    RandomStream rng(5, 10, r, Purpose::radius);
    double R = sample_radius(lv, rng);
    x.push_back(n * R * R);
  }
  EXPECT_LT(ks_stat(x, chi2) * 1000.0, 1.95);
}

TEST(Samplers, GaussianCovariance) {
  HarmonicLevel lv(2, 2);  // n = 5
  const int N = 10000;
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(5, 5);
  std::vector<double> fx;
  const auto x0 = SpherePoint::from_angles(0.8, 2.1);
  HarmonicLevel lv4(4, 2);
  for (int r = 0; r < N; ++r) {
    RandomStream rng(4, 2, r, Purpose::coefficients);
    Eigen::VectorXd u = sample_gaussian(lv, rng).raw();
    S += u * u.transpose();
    RandomStream rng4(4, 4, r, Purpose::coefficients);
    fx.push_back(evaluate(sample_gaussian(lv4, rng4), x0));
  }
  S /= N;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const double target = i == j ? 0.2 : 0.0;
      const double se = (i == j ? std::sqrt(2.0) : 1.0) * 0.2 / std::sqrt(N);
      EXPECT_LT(std::abs(S(i, j) - target), 4 * se) << i << " " << j;
    }
  double m = 0, v = 0;
  for (double f : fx) m += f;
  m /= N;
  for (double f : fx) v += (f - m) * (f - m);
  v /= N - 1;
  EXPECT_LT(std::abs(v - 1.0), 4 * std::sqrt(2.0 / N));
}

TEST(Samplers, RotationInvariantLaw) {
  HarmonicLevel lv(5, 2);
  const int N = 10000;
  std::vector<SpherePoint> pts = {SpherePoint::from_angles(0, 0), SpherePoint::from_angles(0.5, 1),
                                  SpherePoint::from_angles(1.5, 3), SpherePoint::from_angles(2.5, 5),
                                  SpherePoint::from_angles(pi, 0)};
  for (const auto& x : pts) {
    double m = 0, v = 0;
    std::vector<double> f(N);
    for (int r = 0; r < N; ++r) {
      RandomStream rng(12, 5, r, Purpose::coefficients);
      f[r] = evaluate(sample_gaussian(lv, rng), x);
      m += f[r];
    }
    m /= N;
    for (double y : f) v += (y - m) * (y - m);
    v /= N - 1;
    EXPECT_LT(std::abs(m), 3.0 / std::sqrt(N));
    EXPECT_LT(std::abs(v - 1.0), 3.0 * std::sqrt(2.0 / N));
  }
}

TEST(Covariance, Values) {
  HarmonicLevel lv(7, 2);
  auto x = SpherePoint::from_angles(0.4, 0.3), y = SpherePoint::from_angles(1.9, 2.2);
  EXPECT_NEAR(covariance(lv, x, x), 1.0, 1e-14);
  EXPECT_NEAR(covariance(lv, x, y), std::legendre(7, x.coordinates.dot(y.coordinates)), 1e-13);
}

TEST(Covariance, MonteCarloAgreement) {
  HarmonicLevel lv(3, 2);
  auto x = SpherePoint::from_angles(0.4, 0.3), y = SpherePoint::from_angles(0.9, 0.8);
  const int N = 10000;
  double sxy = 0;
  std::vector<double> prod(N);
  for (int r = 0; r < N; ++r) {
    RandomStream rng(31, 3, r, Purpose::field);
    auto f = simulate_field(lv, std::vector<SpherePoint>{x, y}, rng);
    prod[r] = f.values[0] * f.values[1];
    sxy += prod[r];
  }
  sxy /= N;
  double var = 0;
  for (double p : prod) var += (p - sxy) * (p - sxy);
  var /= N - 1;
  EXPECT_LT(std::abs(sxy - covariance(lv, x, y)), 4 * std::sqrt(var / N));
}

TEST(SimulateField, SinglePointAndAntipodes) {
  HarmonicLevel lv(5, 2);
  std::vector<double> v;
  for (int r = 0; r < 10000; ++r) {
    RandomStream rng(1, 5, r, Purpose::field);
    auto f = simulate_field(lv, std::vector<SpherePoint>{SpherePoint::from_angles(1.0, 1.0)}, rng);
    v.push_back(f.values[0]);
  }
  EXPECT_LT(ks_stat(v, [](double t) { return gaussian(t).cdf; }), 0.02);
  RandomStream rng(2);
  auto x = SpherePoint::from_angles(0.7, 0.1);
  SpherePoint y = SpherePoint::from_cartesian(-x.coordinates);
  auto f = simulate_field(lv, std::vector<SpherePoint>{x, y}, rng);
  EXPECT_EQ(f.values[0], -f.values[1]);
  EXPECT_EQ(f.rank, 1);
}

TEST(SimulateField, MarginalOnGridAndReproducible) {
  HarmonicLevel lv(4, 3);
  auto grid = quasi_uniform_grid(3, 400);
  GaussianFieldSimulator sim(lv, grid.points);
  EXPECT_EQ(sim.rank(), lv.n);
  EXPECT_EQ(sim.jitter(), 0.0);
  std::vector<double> v;
  for (int r = 0; r < 10000; ++r) {
    RandomStream rng(5, 4, r, Purpose::field);
    v.push_back(sim.draw(rng)[17]);
  }
  EXPECT_LT(ks_stat(v, [](double t) { return gaussian(t).cdf; }), 0.02);
  RandomStream a(9, 4, 0, Purpose::field), b(9, 4, 0, Purpose::field);
  auto fa = simulate_field(lv, grid, a), fb = simulate_field(lv, grid, b);
  EXPECT_TRUE((fa.values.array() == fb.values.array()).all());
  // factor reproduces the Gram matrix
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) {
      double g = gegenbauer(4, 3, std::clamp(grid.points.row(i).dot(grid.points.row(j)), -1.0, 1.0));
      EXPECT_NEAR(sim.factor().row(i).dot(sim.factor().row(j)), g, 1e-9);
    }
}

TEST(SimulateField, UnitSphereLawHasExactPower) {
  // with the uniform law, the sum over an exact cubature of T^2 equals 1
  HarmonicLevel lv(3, 2);
  auto gl = gauss_legendre(6);
  std::vector<SpherePoint> pts;
  std::vector<double> w;
  for (int i = 0; i < 6; ++i)
    for (int k = 0; k < 8; ++k) {
      pts.push_back(SpherePoint::from_angles(std::acos(gl.nodes[i]), 2 * pi * k / 8));
      w.push_back(gl.weights[i] / 16.0);
    }
  Eigen::MatrixXd P(pts.size(), 3);
  for (size_t i = 0; i < pts.size(); ++i) P.row(i) = pts[i].coordinates.transpose();
  GaussianFieldSimulator sim(lv, P);
  ASSERT_EQ(sim.rank(), lv.n);
  for (int r = 0; r < 5; ++r) {
    RandomStream rng(6, 3, r, Purpose::field);
    Eigen::VectorXd v = sim.draw(rng, true);
    double s = 0;
    for (size_t i = 0; i < w.size(); ++i) s += w[i] * v[i] * v[i];
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(NonGaussian, IdentityMixtureIsGaussian) {
  HarmonicLevel lv(6, 2);
  const double n = static_cast<double>(lv.n);
  std::vector<double> x;
  for (int r = 0; r < 10000; ++r) {
    RandomStream rng(8, 6, r, Purpose::model);
    auto s = sample_nongaussian(ScaleMixture{}, lv, rng);
    EXPECT_NEAR(s.normalized().norm(), 1.0, 1e-14);
    EXPECT_NEAR(s.sample_power, s.coeffs.radius * s.coeffs.radius, 1e-12);
    x.push_back(n * s.sample_power);
  }
  EXPECT_LT(ks_stat(x, [&](double v) { return boost::math::gamma_p(n / 2, v / 2); }), 1.63 / 100.0);
}

TEST(NonGaussian, TwoPointMixtureMoment) {
  HarmonicLevel lv(6, 2);
  ScaleMixture m{{0.5, 1.5}, {}};
  const int N = 10000;
  std::vector<double> c(N);
  double mean = 0;
  for (int r = 0; r < N; ++r) {
    RandomStream rng(9, 6, r, Purpose::model);
    c[r] = sample_nongaussian(m, lv, rng).sample_power;
    mean += c[r];
  }
  mean /= N;
  double var = 0;
  for (double v : c) var += (v - mean) * (v - mean);
  var /= N - 1;
  EXPECT_LT(std::abs(mean - 1.25), 4 * std::sqrt(var / N));
}

TEST(NonGaussian, HeavyTailAndCustom) {
  HarmonicLevel lv(6, 2);
  double mean = 0;
  const int N = 20000;
  for (int r = 0; r < N; ++r) {
    RandomStream rng(10, 6, r, Purpose::model);
    mean += sample_nongaussian(HeavyTail{8.0}, lv, rng).sample_power;
  }
  EXPECT_NEAR(mean / N, 1.0, 0.03);
  CustomModel zero{"zero", [](const HarmonicLevel& l, RandomStream&) { return Eigen::VectorXd::Zero(l.n).eval(); }};
  RandomStream rng(1);
  EXPECT_THROW(sample_nongaussian(zero, lv, rng), DegenerateModel);
  EXPECT_EQ(model_name(parse_model("scale_mixture:0.5,1.5")), "scale_mixture:0.5,1.5");
  EXPECT_THROW(parse_model("heavy_tail:1"), ValidationError);
  EXPECT_THROW(parse_model("cauchy"), ValidationError);
}
