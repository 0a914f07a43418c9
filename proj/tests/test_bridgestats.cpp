#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "bridgestats.hpp"
#include "ensembles.hpp"
#include "spectral.hpp"

using namespace wigner;

namespace {

// Gaussian baseline: y uniformly distributed on the sphere, so X_n is the exact finite-n law
// for GOE eigenvectors.
PathEnsemble haar_ensemble(std::int64_t n, int replicas, std::uint64_t seed, std::vector<double> grid = default_grid()) {
  std::vector<ProcessPath> paths;
  for (int r = 0; r < replicas; ++r)
    paths.push_back(process_path(haar_overlap<double>(n, derive_key(seed, {static_cast<std::uint64_t>(r)})), Beta::real, "uniform"));
  return make_path_ensemble(std::move(paths), std::move(grid));
}

std::vector<double> column(const PathEnsemble& e, double t) {
  std::vector<double> v;
  for (const auto& p : e.paths) v.push_back(p.at(t));
  return v;
}

}  // namespace

TEST(BridgeCovariance, Values) {
  EXPECT_EQ(bridge_covariance(0.5, 0.5), 0.25);
  EXPECT_EQ(bridge_covariance(0.0, 0.3), 0.0);
  EXPECT_EQ(bridge_covariance(1.0, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(bridge_covariance(0.25, 0.75), 0.0625);
  EXPECT_EQ(bridge_covariance(0.2, 0.7), bridge_covariance(0.7, 0.2));
  EXPECT_THROW(bridge_covariance(-0.1, 0.5), std::domain_error);
  EXPECT_THROW(bridge_covariance(0.5, 1.5), std::domain_error);
}

TEST(PathEnsemble, Validation) {
  const auto p = process_path(haar_overlap<double>(10, 1), Beta::real, "uniform");
  EXPECT_THROW(make_path_ensemble({p}, {0.5, 0.4}), std::invalid_argument);
  EXPECT_THROW(make_path_ensemble({p}, {0.5, 1.2}), std::invalid_argument);
  const auto q = process_path(haar_overlap<double>(11, 1), Beta::real, "uniform");
  EXPECT_THROW(make_path_ensemble({p, q}, {0.5}), std::invalid_argument);
  const auto e = make_path_ensemble({p, p}, {0.3, 0.5});
  EXPECT_EQ(e.values(1, 1), p.at(0.5));
}

TEST(EmpiricalCovariance, IdenticalPathsGiveZero) {
  const auto p = process_path(haar_overlap<double>(50, 3), Beta::real, "uniform");
  const auto e = make_path_ensemble({p, p, p}, default_grid());
  EXPECT_LE(empirical_covariance(e).cwiseAbs().maxCoeff(), 1e-30);  // rounding in the mean only
  EXPECT_THROW(empirical_covariance(make_path_ensemble({p}, default_grid())), std::invalid_argument);
}

TEST(EmpiricalCovariance, DiagonalNonnegativeUnderSignFlips) {
  auto e = haar_ensemble(40, 60, 11);
  for (Eigen::Index r = 0; r < e.values.rows(); r += 2) e.values.row(r) *= -1.0;
  const auto c = empirical_covariance(e);
  for (Eigen::Index j = 0; j < c.rows(); ++j) EXPECT_GE(c(j, j), 0.0);
}

TEST(HaarBaseline, CovarianceGridAndPinning) {
  const auto e = haar_ensemble(400, 2000, 21);
  EXPECT_LE(max_covariance_error(empirical_covariance(e), e.grid), 0.05);
  EXPECT_LE(summarize(column(e, 0.0)).variance, 1e-16);
  EXPECT_LE(summarize(column(e, 1.0)).variance, 1e-16);
  EXPECT_NEAR(summarize(column(e, 0.5)).variance, 0.25, 0.03);
}

TEST(HaarBaseline, IncrementFourthMomentAtQuarterWindow) {
  const auto e = haar_ensemble(400, 2000, 22);
  const auto m = increment_fourth_moment(e, 0.375, 0.625);
  EXPECT_TRUE(m.in_regime);
  EXPECT_NEAR(m.value / bridge_increment_fourth_moment(0.25), 1.0, 0.15);
  EXPECT_NEAR(bridge_increment_fourth_moment(0.25), 0.10546875, 1e-15);
  EXPECT_EQ(increment_fourth_moment(e, 0.3, 0.3).value, 0.0);
  EXPECT_LE(increment_fourth_moment(e, 0.0, 1.0).value, 1e-40);
  EXPECT_FALSE(increment_fourth_moment(e, 0.5, 0.5 + 1e-3).in_regime);
  EXPECT_THROW(increment_fourth_moment(e, 0.6, 0.5), std::invalid_argument);
}

TEST(KsStatistic, NormalSamplesAndEdgeCases) {
  std::mt19937_64 g(5);
  std::normal_distribution<double> z;
  std::vector<double> s(10000);
  for (auto& v : s) v = z(g);
  const double d = ks_statistic(s, normal_cdf);
  EXPECT_LE(d, 1.63 / std::sqrt(10000.0));
  EXPECT_NEAR(kolmogorov_critical(0.01), 1.6276, 1e-4);
  EXPECT_EQ(two_sample_ks(s, s), 0.0);
  std::vector<double> lo(30), hi(40);
  std::iota(lo.begin(), lo.end(), 0.0);
  std::iota(hi.begin(), hi.end(), 100.0);
  EXPECT_EQ(two_sample_ks(lo, hi), 1.0);
  EXPECT_THROW(ks_statistic(std::vector<double>(19, 0.0), normal_cdf), std::invalid_argument);
  EXPECT_THROW(two_sample_ks(lo, std::vector<double>(5, 0.0)), std::invalid_argument);
}

TEST(KsStatistic, MatchesBruteForceSupremum) {
  std::mt19937_64 g(6);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> a(50), b(70);
  for (auto& v : a) v = std::round(u(g) * 4.0) / 4.0;  // ties on purpose
  for (auto& v : b) v = std::round(u(g) * 4.0) / 4.0;
  double brute = 0.0;
  std::vector<double> pts(a);
  pts.insert(pts.end(), b.begin(), b.end());
  for (double x : pts) {
    const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [x](double v) { return v <= x; })) / 50.0;
    const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [x](double v) { return v <= x; })) / 70.0;
    brute = std::max(brute, std::abs(fa - fb));
  }
  EXPECT_DOUBLE_EQ(two_sample_ks(a, b), brute);
}

TEST(MomentFunctional, ZeroOrderAndDirectMatrixRoute) {
  const auto m = sample_wigner<double>(goe_spec(60, 8));
  const auto d = decompose(m);
  const auto x = make_test_vector<double>(TestVector::decay, 60);
  EXPECT_NEAR(moment_functional(d, x, 0), 0.0, 1e-13);
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(60, 60);
  for (int r = 1; r <= 4; ++r) {
    p = p * m.entries;
    const double direct = std::sqrt(60.0) * (x.dot(p * x) - p.trace() / 60.0);
    EXPECT_NEAR(moment_functional(d, x, r), direct, 1e-10) << r;
  }
  EXPECT_THROW(moment_functional(d, x, 9), std::invalid_argument);
}

TEST(CltTarget, CatalanValues) {
  EXPECT_EQ(clt_covariance_target(1, 1), 2.0);
  EXPECT_EQ(clt_covariance_target(1, 2), 0.0);
  EXPECT_EQ(clt_covariance_target(2, 2), 2.0);
  EXPECT_EQ(clt_covariance_target(1, 3), 4.0);
  EXPECT_EQ(clt_covariance_target(0, 5), 0.0);
  EXPECT_THROW(clt_covariance_target(9, 8), std::invalid_argument);
}

// Reduced scale; the n = 400, 2000-replica version runs in the acceptance suite.
TEST(MomentFunctional, GoeVarianceNearTargetReduced) {
  const std::int64_t n = 200;
  const auto x = make_test_vector<double>(TestVector::uniform, n);
  std::vector<double> w1, w2;
  for (int r = 0; r < 600; ++r) {
    const auto d = decompose(sample_wigner<double>(goe_spec(n, 30000 + r)));
    w1.push_back(moment_functional(d, x, 1));
    w2.push_back(moment_functional(d, x, 2));
  }
  const auto s1 = summarize(w1), s2 = summarize(w2);
  EXPECT_LE(std::abs(s1.variance - clt_covariance_target(1, 1)), 4.0 * s1.variance_se);
  EXPECT_LE(std::abs(s2.variance - clt_covariance_target(2, 2)), 4.0 * s2.variance_se);
  const auto c = sample_covariance(w1, w2);
  EXPECT_LE(std::abs(c.value - clt_covariance_target(1, 2)), 4.0 * c.std_error);
}

TEST(SampleStatistics, SummaryAndCovariance) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto s = summarize(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.variance, 5.0 / 3.0);
  const auto c = sample_covariance(v, v);
  EXPECT_DOUBLE_EQ(c.value, 5.0 / 3.0);
  const std::vector<double> neg{-1.0, -2.0, -3.0, -4.0};
  EXPECT_DOUBLE_EQ(sample_covariance(v, neg).value, -5.0 / 3.0);
}

TEST(ScalingExponent, AnalyticBridgeMoments) {
  const std::vector<double> ds{0.05, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> ms;
  for (double d : ds) ms.push_back(bridge_increment_fourth_moment(d));
  // Closed-form regression value, frozen from an independent least-squares fit.
  const double slope = fit_log_slope(ds, ms);
  EXPECT_NEAR(slope, 1.5801781048117314, 1e-12);
  EXPECT_GE(slope, 4.0 / 3.0);
  // On short windows the (1 - dt) factor fades and the slope approaches 2.
  const std::vector<double> small{0.01, 0.02, 0.03, 0.04, 0.05};
  std::vector<double> sm;
  for (double d : small) sm.push_back(bridge_increment_fourth_moment(d));
  EXPECT_NEAR(fit_log_slope(small, sm), 1.9501341497265439, 1e-12);
  EXPECT_GE(fit_log_slope(small, sm), 1.8);
  EXPECT_NEAR(fit_log_slope(ds, std::vector<double>(5, 0.7)), 0.0, 1e-15);
  std::vector<double> pw;
  for (double d : ds) pw.push_back(2.5 * std::pow(d, 4.0 / 3.0));
  EXPECT_NEAR(fit_log_slope(ds, pw), 4.0 / 3.0, 1e-12);
  EXPECT_THROW(fit_log_slope({0.1, 0.2, 0.3}, {1.0, 2.0, 3.0}), std::invalid_argument);
  EXPECT_THROW(fit_log_slope({0.1, 0.1, 0.2, 0.2}, {1.0, 2.0, 3.0, 4.0}), std::invalid_argument);
}

TEST(ScalingExponent, HaarEnsembleAboveFourThirds) {
  const auto e = haar_ensemble(400, 2000, 23);
  EXPECT_GE(scaling_exponent_fit(e, {0.05, 0.1, 0.2, 0.3, 0.4}), 4.0 / 3.0 - 0.15);
  EXPECT_THROW(scaling_exponent_fit(e, {1e-4, 2e-4, 3e-4, 0.1, 0.2}), std::invalid_argument);
}

TEST(ModulusOfContinuity, ExactCases) {
  ProcessPath p{4, Beta::real, {0.0, 1.0, -2.0, 0.5, 0.0}, ""};
  EXPECT_DOUBLE_EQ(modulus_of_continuity(p, 1.0), 3.0);
  EXPECT_DOUBLE_EQ(modulus_of_continuity(p, 0.25), 3.0);  // adjacent breakpoints 1 -> -2
  EXPECT_DOUBLE_EQ(modulus_of_continuity(p, 0.1), 3.0);
  ProcessPath mono{5, Beta::real, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0}, ""};
  EXPECT_DOUBLE_EQ(modulus_of_continuity(mono, 0.4), 2.0);
  EXPECT_DOUBLE_EQ(modulus_of_continuity(mono, 0.41), 3.0);
  EXPECT_THROW(modulus_of_continuity(mono, 0.0), std::invalid_argument);
  EXPECT_THROW(modulus_of_continuity(mono, 1.5), std::invalid_argument);
}

TEST(ModulusOfContinuity, BruteForceOracle) {
  const auto p = process_path(haar_overlap<double>(97, 4), Beta::real);
  for (double delta : {0.01, 0.05, 0.13, 0.5}) {
    double brute = 0.0;
    for (int a = 0; a <= 97; ++a)
      for (int b = a; b <= 97; ++b)
        if (static_cast<double>(b - a) <= std::ceil(97.0 * delta - 1e-12))
          brute = std::max(brute, std::abs(p.partial_sums[a] - p.partial_sums[b]));
    EXPECT_DOUBLE_EQ(modulus_of_continuity(p, delta), brute) << delta;
  }
}

TEST(ModulusOfContinuity, ShrinksWithNAtFixedStepCount) {
  auto median_w = [](std::int64_t n) {
    std::vector<double> w;
    for (int r = 0; r < 201; ++r)
      w.push_back(modulus_of_continuity(process_path(haar_overlap<double>(n, 7000 + r), Beta::real), 10.0 / n));
    std::nth_element(w.begin(), w.begin() + 100, w.end());
    return w[100];
  };
  EXPECT_GT(median_w(250), median_w(1000));
}

TEST(Symmetry, GoeVarianceReflection) {
  std::vector<ProcessPath> paths;
  const auto x = make_test_vector<double>(TestVector::uniform, 100);
  for (int r = 0; r < 1000; ++r) {
    const auto d = decompose(sample_wigner<double>(goe_spec(100, 40000 + r)));
    paths.push_back(process_path(overlaps(d, x), Beta::real, "uniform"));
  }
  const auto e = make_path_ensemble(std::move(paths), default_grid());
  for (double t : {0.1, 0.2, 0.3, 0.4}) {
    const auto a = summarize(column(e, t)), b = summarize(column(e, 1.0 - t));
    EXPECT_LE(std::abs(a.variance - b.variance), 3.0 * std::hypot(a.variance_se, b.variance_se)) << t;
  }
}

TEST(TestVectors, NormsAndSupNorms) {
  for (auto t : {TestVector::uniform, TestVector::uniform_signs, TestVector::slab, TestVector::decay, TestVector::e1}) {
    const auto x = make_test_vector<double>(t, 101, 3);
    EXPECT_NEAR(x.norm(), 1.0, 1e-14) << to_string(t);
    EXPECT_EQ(test_vector_from_string(to_string(t)), t);
  }
  EXPECT_NEAR(make_test_vector<double>(TestVector::decay, 256).cwiseAbs().maxCoeff(), 0.25, 1e-15);
  EXPECT_EQ(make_test_vector<double>(TestVector::slab, 10).tail(5).norm(), 0.0);
  EXPECT_THROW(make_test_vector<double>(TestVector::uniform, 1), std::invalid_argument);
}
