#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "hyperharm/excursion.hpp"
#include "hyperharm/theory.hpp"

using namespace hyperharm;
using namespace hyperharm::theory;

TEST(Thm3, Examples) {
  EXPECT_NEAR(thm3_bound(0.1, 100, 0.01, 1.0), 8.0, 1e-12);
  EXPECT_NEAR(thm3_bound(0.1, 100, 0.01, 2.0), 12.0, 1e-12);
  EXPECT_NEAR(thm3_bound(0.5, 1'000'000'000'000, 0.0, 1.0), 0.0, 1e-10);
  EXPECT_THROW(thm3_bound(1.0, 10, 0.1, 1.0), DomainError);
  EXPECT_THROW(thm3_bound(0.0, 10, 0.1, 1.0), DomainError);
  EXPECT_GT(thm3_bound(0.1, 100, 0.01, 1.0), thm3_bound(0.1, 200, 0.01, 1.0));
  EXPECT_LT(thm3_bound(0.1, 100, 0.01, 1.0), thm3_bound(0.1, 100, 0.02, 1.0));
  EXPECT_LT(thm3_bound(0.1, 100, 0.01, 1.0), thm3_bound(0.1, 100, 0.01, 1.5));
}

TEST(Thm3, LocalBound) {
  auto sig = [](double u) { return 0.01 * std::exp(-u * u / 2); };
  EXPECT_DOUBLE_EQ(thm3_local_bound(0.2, 50, sig, 1.0, 0.0), thm3_bound(0.2, 50, sig(0.0), 1.0));
  auto flat = [](double) { return 0.03; };
  EXPECT_DOUBLE_EQ(thm3_local_bound(0.2, 50, flat, 1.0, 1.3), thm3_bound(0.2, 50, 0.03, 1.0));
  auto [um, up] = thm3_local_levels(0.5, 1.0, 2.0);
  EXPECT_NEAR(um, std::sqrt(0.75) * 2, 1e-15);
  EXPECT_NEAR(up, std::sqrt(1.25) * 2, 1e-15);
  EXPECT_NEAR(um, 1.732, 1e-3);
  EXPECT_NEAR(up, 2.236, 1e-3);
}

TEST(Gkf, Examples) {
  EXPECT_NEAR(gkf_epc_expectation(16, -40), 2.0, 1e-15);
  EXPECT_NEAR(gkf_epc_expectation(16, 40), 0.0, 1e-15);
  const double expect = 2 * 0.158655253931457 + std::sqrt(2 / std::numbers::pi) * 136 * 0.241970724519143 / 2;
  EXPECT_NEAR(gkf_epc_expectation(16, 1.0), expect, 1e-12);
  EXPECT_NEAR(gkf_epc_expectation(16, 1.0), 13.44, 0.01);
  // both terms are positive above 0; below 0 the curvature term is negative and
  // dominates for moderate |u| once ell is large
  for (double u = 0.05; u < 6; u += 0.05) EXPECT_GT(gkf_epc_expectation(16, u), 0.0);
  EXPECT_LT(gkf_epc_expectation(16, -1.0), 0.0);
  EXPECT_GT(gkf_epc_expectation(16, -8.0), 0.0);
  EXPECT_GT(gkf_epc_expectation(1, -1.0), 0.0);
}

TEST(EpcVariance, Examples) {
  EXPECT_EQ(epc_variance_leading(16, 0.0), 0.0);
  for (double u : {-2.0, -0.5, 0.3, 1.0, 3.0}) EXPECT_GT(epc_variance_leading(16, u), 0.0);
  EXPECT_NEAR(epc_variance_leading(32, 1.0) / epc_variance_leading(16, 1.0), 8.0, 1e-12);
}

TEST(KolMeasure, Examples) {
  EXPECT_NEAR(kol_measure_bound(100, 0.5, 1.0), 0.08, 1e-15);
  EXPECT_NEAR(kol_measure_bound(200, 0.5, 1.0), 0.04, 1e-15);
  EXPECT_LT(kol_measure_bound(100, 1e6, 1.0), 1e-19);
  EXPECT_THROW(kol_measure_bound(100, 0.0, 1.0), DomainError);
}

TEST(KolRate, Examples) {
  EXPECT_NEAR(expected_kol_rate(10, 2).first, 1.0 / 3, 1e-15);
  EXPECT_NEAR(expected_kol_rate(10, 4).first, 1.0, 1e-15);
  EXPECT_NEAR(expected_kol_rate(3, 5).second, 1.0, 1e-15);
}

TEST(LinftyUpper, Examples) {
  EXPECT_NEAR(linfty_upper_tail(1.0, 1.0, 100).second, 0.01, 1e-15);
  EXPECT_LT(linfty_upper_tail(1.0, 1.0, 100).first, linfty_upper_tail(1.0, 2.0, 100).first);
  EXPECT_NEAR(linfty_upper_tail(1.5, 2.0, std::numbers::e).first, 1.5 + 2.0, 1e-14);
  EXPECT_THROW(linfty_upper_tail(1.0, 1.0, 1.0), DomainError);
}

TEST(LinftyLower, Examples) {
  EXPECT_NEAR(linfty_lower_params(0.1, 2).K_max, std::sqrt(2.0 / 26.0), 1e-15);
  EXPECT_NEAR(linfty_lower_params(0.1, 2).K_max, 0.27735, 1e-5);
  auto p = linfty_lower_params(0.0, 2);
  EXPECT_EQ(p.alpha_lo, 0.0);
  EXPECT_NEAR(p.alpha_hi, 1.0 / 13, 1e-15);
  EXPECT_FALSE(p.empty());
  EXPECT_NEAR(linfty_lower_params(0.0, 1'000'000).K_max, std::sqrt(1.0 / 12), 1e-7);
  EXPECT_NEAR(std::sqrt(1.0 / 12), 0.28868, 1e-5);
  EXPECT_TRUE(linfty_lower_params(0.5, 2).empty());
}

TEST(Cramer, Examples) {
  EXPECT_EQ(cramer_transform(1.0), 0.0);
  EXPECT_NEAR(cramer_transform(2.0), 0.5 * (1 - std::log(2.0)), 1e-15);
  EXPECT_NEAR(cramer_transform(2.0), 0.153426, 1e-6);
  EXPECT_EQ(cramer_transform(-1.0), std::numeric_limits<double>::infinity());
  EXPECT_EQ(cramer_transform(0.0), std::numeric_limits<double>::infinity());
}

TEST(Cramer, ConvexOnLattice) {
  const int N = 1000;
  for (int i = 1; i + 2 <= N; ++i) {
    const double a = 5.0 * i / N, b = 5.0 * (i + 2) / N, m = 0.5 * (a + b);
    EXPECT_LE(cramer_transform(m), 0.5 * (cramer_transform(a) + cramer_transform(b)) + 1e-15);
  }
}

TEST(Ldp, Examples) {
  // even n: P(chi2_n >= x) = e^{-x/2} sum_{k < n/2} (x/2)^k / k!, summed in logs
  auto poisson_tail = [](int n, double x) {
    double term = -x / 2, acc = std::exp(term);
    for (int k = 1; k < n / 2; ++k) {
      term += std::log(x / 2) - std::log(static_cast<double>(k));
      acc += std::exp(term);
    }
    return acc;
  };
  double prev_gap = 1e9;
  for (int n : {50, 100, 200, 400}) {
    const auto t = ldp_tail(1.5, n);
    EXPECT_NEAR(t.exact / poisson_tail(n, 1.5 * n), 1.0, 1e-10) << n;
    const double gap = -std::log(t.exact) / n / cramer_transform(1.5) - 1.0;
    EXPECT_GT(gap, 0.0);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
  // at n = 400 the exact rate sits 15.4% above the limit
  EXPECT_NEAR(prev_gap, 0.1536, 1e-3);
  EXPECT_NEAR(ldp_tail(1.0 + 1e-9, 100).upper_rate, 1.0, 1e-9);
  double prev = 1.0;
  for (double a = 1.1; a < 4; a += 0.1) {
    EXPECT_LT(ldp_tail(a, 50).upper_rate, prev);
    prev = ldp_tail(a, 50).upper_rate;
  }
  EXPECT_GT(ldp_tail(1.5, 50).upper_rate, ldp_tail(1.5, 100).upper_rate);
  EXPECT_THROW(ldp_tail(1.0, 10), DomainError);
  // chi-square(2) tail is exp(-x/2)
  EXPECT_NEAR(ldp_tail(1.7, 2).exact, std::exp(-1.7), 1e-15);
  // Chernoff: the exact tail never exceeds the rate bound
  for (int n : {10, 50, 100, 400}) EXPECT_LE(ldp_tail(1.5, n).exact, ldp_tail(1.5, n).upper_rate);
}

TEST(BorelTis, Examples) {
  EXPECT_NEAR(borel_tis_tail(2.0 + std::sqrt(2 * std::log(100.0)), 2.0), 0.01, 1e-14);
  EXPECT_NEAR(borel_tis_tail(2.0 + 1e-9, 2.0), 1.0, 1e-15);
  const double g = 0.7;
  EXPECT_NEAR(borel_tis_tail(2 * g, 0.0), std::pow(borel_tis_tail(g, 0.0), 4), 1e-15);
  EXPECT_THROW(borel_tis_tail(1.0, 1.0), DomainError);
}

TEST(Mills, Examples) {
  EXPECT_NEAR(mills(1.0).second, 2 * 0.241970724519143, 1e-14);
  EXPECT_NEAR(mills(1.0).second, 0.48394, 1e-5);
  EXPECT_GT(mills(20.0).first / mills(20.0).second, 0.99);
  for (double z = 0.1; z <= 10.0; z += 0.01) {
    auto [lo, hi] = mills(z);
    const double t = 2 * gaussian(z).tail;
    EXPECT_LE(lo, t);
    EXPECT_LE(t, hi);
  }
  EXPECT_THROW(mills(0.0), DomainError);
}

TEST(Sogge, Examples) {
  EXPECT_NEAR(sogge_exponent(4.0), 0.125, 1e-15);
  EXPECT_EQ(sogge_exponent(std::numeric_limits<double>::infinity()), 0.5);
  EXPECT_NEAR(2 * (0.5 - 1.0 / 6) - 0.5, 1.0 / 6, 1e-15);
  EXPECT_NEAR(0.5 * (0.5 - 1.0 / 6), 1.0 / 6, 1e-15);
  EXPECT_NEAR(sogge_exponent(6.0), 1.0 / 6, 1e-15);
  double prev = 0;
  for (double p = 2.01; p < 100; p += 0.01) {
    EXPECT_GE(sogge_exponent(p), prev - 1e-15);
    prev = sogge_exponent(p);
  }
  EXPECT_NEAR(sogge_exponent(6.0 - 1e-9), sogge_exponent(6.0), 1e-9);
  EXPECT_THROW(sogge_exponent(2.0), DomainError);
}

TEST(NonGaussian, Examples) {
  EXPECT_NEAR(nongaussian_bound(0.5, 100, 0.1, 2.0), 160.08, 1e-10);
  const double unit = nongaussian_bound(0.5, 100, 0.1, 1.0);
  EXPECT_NEAR(unit, 1 / (0.1 * 0.125) + 1 / 25.0, 1e-12);
  EXPECT_NEAR(nongaussian_bound(0.5, 100, 0.1, 3.0), 3 * unit, 1e-12);
}

TEST(Reports, EvaluateAndJson) {
  auto r = evaluate("cramer", {{"x", 1.0}});
  EXPECT_EQ(r.bound_value, 0.0);
  EXPECT_FALSE(r.anchor.empty());
  auto j = to_json(r);
  EXPECT_EQ(j["name"], "cramer");
  EXPECT_EQ(j["inputs"]["x"], 1.0);
  EXPECT_EQ(to_json(evaluate("cramer", {{"x", -1.0}}))["bound_value"], "inf");
  for (const auto& name : bound_names()) EXPECT_THROW(evaluate(name, {}), ValidationError) << name;
  EXPECT_THROW(evaluate("nope", {}), ValidationError);
  EXPECT_EQ(evaluate("thm3", {{"epsilon", 0.1}, {"n", 100}, {"sigma_sq", 0.01}, {"c", 1}}).bound_value,
            thm3_bound(0.1, 100, 0.01, 1));
  EXPECT_THROW(evaluate("thm3", {{"epsilon", 0.1}, {"n", 100.5}, {"sigma_sq", 0.01}, {"c", 1}}), ValidationError);
}

TEST(Hermite, SecondChaosIsInverseDimension) {
  // int G^2 = 1/n by orthogonality
  for (int L : {1, 4, 8, 16})
    for (int d : {2, 3, 4}) EXPECT_NEAR(gegenbauer_power_mean(L, d, 2), 1.0 / eigenspace_dim(L, d), 1e-12);
  EXPECT_NEAR(gegenbauer_power_mean(5, 2, 1), 0.0, 1e-14);
}

TEST(Hermite, VarianceAtOriginHasNoSecondChaos) {
  // J_2(0) = He_1(0) phi(0) = 0, so the q = 2 term vanishes at u = 0
  EXPECT_NEAR(excursion_variance_hermite(8, 2, 0.0, 2), 0.0, 1e-18);
  EXPECT_GT(excursion_variance_hermite(8, 2, 1.0, 2), 0.0);
  // partial sums increase and converge
  double prev = 0;
  for (int q = 4; q <= 40; q += 4) {
    const double v = excursion_variance_hermite(8, 2, 1.0, q);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Hermite, MatchesMonteCarloAtDegree4) {
  const int L = 4, R = 3000;
  HarmonicLevel lv(L, 2);
  auto grid = quasi_uniform_grid(2, 40 * L * L * 4);
  GridSynthesizer syn(lv, grid.points);
  Eigen::MatrixXd U(lv.n, R);
  for (int r = 0; r < R; ++r) {
    RandomStream rng(5, L, r, Purpose::coefficients);
    U.col(r) = sample_gaussian(lv, rng).raw();
  }
  const Eigen::MatrixXd V = syn.synthesize(U);
  for (double u : {0.0, 1.0}) {
    Eigen::VectorXd e(R);
    for (int r = 0; r < R; ++r) e[r] = excursion_volume(V.col(r), grid.weights, u);
    const double m = e.mean();
    const double var = (e.array() - m).square().sum() / (R - 1);
    const double m4 = (e.array() - m).pow(4).mean();
    const double se = std::sqrt(std::max(0.0, (m4 - var * var) / R));
    const double oracle = excursion_variance_hermite(L, 2, u);
    EXPECT_NEAR(var, oracle, 0.1 * oracle + 3 * se) << u;
  }
}
