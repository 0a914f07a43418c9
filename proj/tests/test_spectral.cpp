#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bridgestats.hpp"
#include "ensembles.hpp"
#include "semicircle.hpp"
#include "spectral.hpp"

using namespace wigner;

namespace {

double chi2_1_cdf(double x) { return x <= 0.0 ? 0.0 : std::erf(std::sqrt(x / 2.0)); }

template <class Scalar>
void expect_decomposition_invariants(const MatrixT<Scalar>& m, const SpectralDecomposition<Scalar>& d) {
  const auto n = d.n();
  for (std::int64_t i = 1; i < n; ++i) EXPECT_LE(d.eigenvalues(i - 1), d.eigenvalues(i));
  const MatrixT<Scalar> gram = d.eigenvectors.adjoint() * d.eigenvectors;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      if (i == j) EXPECT_NEAR(std::abs(gram(i, j)), 1.0, 1e-12);
      else EXPECT_LE(std::abs(gram(i, j)), 1e-10);
    }
  const MatrixT<Scalar> rec = d.eigenvectors * d.eigenvalues.asDiagonal() * d.eigenvectors.adjoint();
  const double op = std::max(1.0, d.eigenvalues.cwiseAbs().maxCoeff());
  Eigen::JacobiSVD<MatrixT<Scalar>> svd(m - rec);
  EXPECT_LE(svd.singularValues()(0), 1e-9 * op);
}

}  // namespace

TEST(Decompose, InvariantsGoeGue) {
  const auto a = sample_wigner<double>(goe_spec(60, 1));
  expect_decomposition_invariants<double>(a.entries, decompose(a));
  const auto b = sample_wigner<cplx>(gue_spec(60, 1));
  expect_decomposition_invariants<cplx>(b.entries, decompose(b));
  EXPECT_EQ(decompose(a).seed, 1u);
}

TEST(Decompose, ZeroAndDiagonalMatrices) {
  const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(5, 5);
  const auto dz = decompose<double>(z);
  EXPECT_TRUE((dz.eigenvalues.array() == 0.0).all());
  expect_decomposition_invariants<double>(z, dz);
  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(3, 3);
  diag.diagonal() << 3.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0), 2.0 / std::sqrt(3.0);
  const auto dd = decompose<double>(diag);
  EXPECT_NEAR(dd.eigenvalues(0), 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(dd.eigenvalues(1), 2.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(dd.eigenvalues(2), 3.0 / std::sqrt(3.0), 1e-15);
  EXPECT_THROW(decompose<double>(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST(Decompose, EigenvaluesOnlyRouteAgrees) {
  const auto a = sample_wigner<double>(goe_spec(80, 5));
  EXPECT_LE((decompose(a).eigenvalues - eigenvalues(a)).cwiseAbs().maxCoeff(), 1e-12);
  const auto b = sample_wigner<cplx>(gue_spec(80, 5));
  EXPECT_LE((decompose(b).eigenvalues - eigenvalues(b)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Decompose, SecondMomentOfSpectrum) {
  const auto e = eigenvalues(sample_wigner<double>(goe_spec(50, 9)));
  EXPECT_NEAR(e.squaredNorm() / 50.0, 1.0, 0.2);
}

TEST(RandomizePhases, ProjectionsUnchangedAndDeterministic) {
  const auto d = decompose(sample_wigner<cplx>(gue_spec(40, 2)));
  const auto r = randomize_phases(d, 77);
  EXPECT_TRUE(r.randomized);
  for (std::int64_t i = 0; i < 40; ++i) {
    const Eigen::MatrixXcd p0 = d.eigenvectors.col(i) * d.eigenvectors.col(i).adjoint();
    const Eigen::MatrixXcd p1 = r.eigenvectors.col(i) * r.eigenvectors.col(i).adjoint();
    EXPECT_LE((p0 - p1).cwiseAbs().maxCoeff(), 1e-14);
  }
  const auto again = randomize_phases(d, 77);
  EXPECT_TRUE((again.eigenvectors.array() == r.eigenvectors.array()).all());
  EXPECT_THROW(randomize_phases(r, 1), std::logic_error);
}

TEST(RandomizePhases, RealSignsAreSymmetric) {
  const auto d = decompose(sample_wigner<double>(goe_spec(20, 3)));
  const int N = 1000;
  double s = 0.0, s2 = 0.0;
  for (int k = 0; k < N; ++k) {
    const double v = randomize_phases(d, static_cast<std::uint64_t>(k)).eigenvectors(0, 0);
    s += v;
    s2 += v * v;
  }
  const double mean = s / N, se = std::sqrt((s2 / N - mean * mean) / N);
  EXPECT_LE(std::abs(mean), 3.0 * se);
}

TEST(Overlaps, BasicProperties) {
  const auto d = decompose(sample_wigner<double>(goe_spec(30, 4)));
  const Eigen::VectorXd u1 = d.eigenvectors.col(0);
  const auto y = overlaps(d, u1);
  EXPECT_NEAR(std::abs(y(0)), 1.0, 1e-12);
  EXPECT_LE(y.tail(29).cwiseAbs().maxCoeff(), 1e-12);
  const auto x = make_test_vector<double>(TestVector::uniform, 30);
  EXPECT_NEAR(overlaps(d, x).squaredNorm(), 1.0, 1e-10);
  EXPECT_THROW(overlaps(d, Eigen::VectorXd(Eigen::VectorXd::Ones(30))), std::invalid_argument);
  EXPECT_THROW(overlaps(d, make_test_vector<double>(TestVector::uniform, 31)), std::invalid_argument);
}

TEST(Overlaps, GoeOverlapsMatchHaarLaw) {
  const std::int64_t n = 200;
  const int N = 2000;
  const auto x = make_test_vector<double>(TestVector::uniform, n);
  std::vector<double> from_goe, from_haar;
  for (int r = 0; r < N; ++r) {
    const auto y = overlaps(decompose(sample_wigner<double>(goe_spec(n, 5000 + r))), x);
    from_goe.push_back(static_cast<double>(n) * y(0) * y(0));
    const auto h = haar_overlap<double>(n, 9000 + static_cast<std::uint64_t>(r));
    from_haar.push_back(static_cast<double>(n) * h(0) * h(0));
  }
  EXPECT_LE(ks_statistic(from_goe, chi2_1_cdf), 0.05);
  EXPECT_LE(two_sample_ks(from_goe, from_haar), 0.04);
}

TEST(ProcessPath, HandComputedExample) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
  y(0) = 1.0;
  const auto p = process_path<double>(y, Beta::real, "e1");
  EXPECT_NEAR(p.at(0.5), std::sqrt(2.0) * 0.5, 1e-15);
  EXPECT_EQ(p.at(0.0), 0.0);
  EXPECT_NEAR(p.at(1.0), 0.0, 1e-10);
  EXPECT_EQ(p.partial_sums.size(), 5u);
  EXPECT_THROW(p.at(1.5), std::domain_error);
  EXPECT_THROW(process_path<double>(Eigen::VectorXd::Ones(4), Beta::real), std::invalid_argument);
}

TEST(ProcessPath, FloorIndexGuardsDecimalGrid) {
  EXPECT_EQ(floor_index(100, 0.29), 29);
  EXPECT_EQ(floor_index(400, 0.5), 200);
  EXPECT_EQ(floor_index(7, 1.0), 7);
  EXPECT_EQ(floor_index(7, 0.0), 0);
}

TEST(ProcessPath, EndpointsPinnedOnEveryReplica) {
  for (int r = 0; r < 50; ++r) {
    const auto d = decompose(sample_wigner<cplx>(gue_spec(64, 300 + r)));
    const auto p = process_path(overlaps(d, make_test_vector<cplx>(TestVector::slab, 64)), Beta::complex);
    EXPECT_EQ(p.partial_sums.front(), 0.0);
    EXPECT_NEAR(p.partial_sums.back(), 0.0, 1e-10);
  }
}

TEST(ProcessPath, PhaseInvariance) {
  const auto dr = decompose(sample_wigner<double>(goe_spec(50, 6)));
  const auto xr = make_test_vector<double>(TestVector::decay, 50);
  const auto a = process_path(overlaps(randomize_phases(dr, 1), xr), Beta::real);
  const auto b = process_path(overlaps(randomize_phases(dr, 2), xr), Beta::real);
  EXPECT_EQ(a.partial_sums, b.partial_sums);  // sign flips are exact

  const auto dc = decompose(sample_wigner<cplx>(gue_spec(50, 6)));
  const auto xc = make_test_vector<cplx>(TestVector::decay, 50);
  const auto c = process_path(overlaps(randomize_phases(dc, 1), xc), Beta::complex);
  const auto e = process_path(overlaps(randomize_phases(dc, 2), xc), Beta::complex);
  for (std::size_t k = 0; k < c.partial_sums.size(); ++k) EXPECT_NEAR(c.partial_sums[k], e.partial_sums[k], 1e-14);
}

TEST(ProcessPath, JumpsAreDelocalized) {
  const std::int64_t n = 1000;
  int small_jump = 0, deloc = 0;
  const int N = 200;
  const double bound = std::pow(std::log(static_cast<double>(n)), 3.0);
  for (int r = 0; r < N; ++r) {
    const auto y = haar_overlap<double>(n, 40000 + static_cast<std::uint64_t>(r));
    const auto p = process_path<double>(y, Beta::real);
    double jump = 0.0;
    for (std::int64_t k = 1; k <= n; ++k) jump = std::max(jump, std::abs(p.partial_sums[k] - p.partial_sums[k - 1]));
    const double maxw = y.cwiseAbs2().maxCoeff();
    EXPECT_LE(jump, p.scale() * (maxw + 1.0 / static_cast<double>(n)) + 1e-15);
    small_jump += jump <= 0.5;
    deloc += static_cast<double>(n) * maxw <= bound;
  }
  EXPECT_GE(small_jump, 0.99 * N);
  EXPECT_GE(deloc, 0.99 * N);
}

TEST(EnergyWindowSum, Examples) {
  const auto d = decompose(sample_wigner<double>(goe_spec(100, 8)));
  const auto y = overlaps(d, make_test_vector<double>(TestVector::uniform, 100));
  EXPECT_NEAR(energy_window_sum(d, y, -3.0, 3.0, Beta::real), 0.0, 1e-10);
  EXPECT_EQ(energy_window_sum(d, y, 10.0, 11.0, Beta::real), 0.0);
  EXPECT_THROW(energy_window_sum(d, y, 1.0, 1.0, Beta::real), std::invalid_argument);
  // Half-open window: an eigenvalue sitting on s2 is counted, one on s1 is not.
  const double l = d.eigenvalues(50);
  const double w = std::abs(y(50)) * std::abs(y(50)) - 0.01;
  const double scale = std::sqrt(50.0);
  EXPECT_NEAR(energy_window_sum(d, y, d.eigenvalues(49), l, Beta::real), scale * w, 1e-14);
  EXPECT_NEAR(energy_window_sum(d, y, l, d.eigenvalues(51), Beta::real),
              scale * (std::abs(y(51)) * std::abs(y(51)) - 0.01), 1e-14);
}

TEST(EnergyWindowSum, HalfSpectrumVarianceIsQuarter) {
  const std::int64_t n = 400;
  const int N = 2000;
  const auto x = make_test_vector<double>(TestVector::uniform, n);
  std::vector<double> v;
  for (int r = 0; r < N; ++r) {
    const auto d = decompose(sample_wigner<double>(goe_spec(n, 70000 + r)));
    v.push_back(energy_window_sum(d, overlaps(d, x), -2.0, 0.0, Beta::real));
  }
  const double target = semicircle::cdf(0.0) * (1.0 - semicircle::cdf(0.0));
  EXPECT_NEAR(summarize(v).variance, target, 0.03);
}

TEST(Multiplicity, Audit) {
  EXPECT_EQ(multiplicity_audit(Eigen::VectorXd(Eigen::VectorXd::Constant(9, 0.5))).max_multiplicity, 9);
  EXPECT_EQ(multiplicity_audit(Eigen::VectorXd(Eigen::VectorXd::Constant(9, 0.5))).cluster_sizes.size(), 1u);
  for (int r = 0; r < 20; ++r)
    EXPECT_EQ(multiplicity_audit(eigenvalues(sample_wigner<double>(goe_spec(100, 500 + r)))).max_multiplicity, 1);
  const auto rep = multiplicity_audit(decompose(sample_wigner<double>(matched_real_spec(200, 1))));
  RecordProperty("three_point_n200_max_multiplicity", static_cast<int>(rep.max_multiplicity));
  EXPECT_GE(rep.max_multiplicity, 1);
  std::int64_t total = 0;
  for (auto c : rep.cluster_sizes) total += c;
  EXPECT_EQ(total, 200);
}
