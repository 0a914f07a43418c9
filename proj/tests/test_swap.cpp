#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "bridgestats.hpp"
#include "ensembles.hpp"
#include "resolvent.hpp"
#include "swap.hpp"

using namespace wigner;

namespace {

template <class Scalar>
int differing_entries(const MatrixT<Scalar>& a, const MatrixT<Scalar>& b) {
  int c = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) c += a(i, j) != b(i, j);
  return c;
}

Eigen::MatrixXcd direct_inverse(Eigen::MatrixXcd m, const SpectralPoint& p) {
  m.diagonal().array() -= p.z();
  return m.partialPivLu().inverse();
}

std::shared_ptr<const SiteOrdering> row_major(std::int64_t n) { return std::make_shared<const SiteOrdering>(make_ordering(n)); }

}  // namespace

TEST(SiteOrdering, SmallEnumeration) {
  const auto o = make_ordering(2);
  EXPECT_EQ(o.size(), 3);
  EXPECT_EQ(o.rank(0, 0), 1);
  EXPECT_EQ(o.rank(0, 1), 2);
  EXPECT_EQ(o.rank(1, 0), 2);
  EXPECT_EQ(o.rank(1, 1), 3);
  EXPECT_THROW(o.site(0), std::out_of_range);
  EXPECT_THROW(o.site(4), std::out_of_range);
  EXPECT_THROW(make_ordering(0), std::invalid_argument);
}

TEST(SiteOrdering, Bijective) {
  for (std::int64_t n : {1, 5, 17}) {
    const auto o = make_ordering(n);
    EXPECT_EQ(o.size(), n * (n + 1) / 2);
    std::set<Site> seen;
    for (std::int64_t r = 1; r <= o.size(); ++r) {
      const auto& s = o.site(r);
      EXPECT_LE(s.first, s.second);
      EXPECT_EQ(o.rank(s.first, s.second), r);
      seen.insert(s);
    }
    EXPECT_EQ(static_cast<std::int64_t>(seen.size()), o.size());
  }
}

TEST(SiteOrdering, CustomSequenceValidation) {
  std::vector<Site> s{{1, 1}, {1, 0}, {0, 0}};
  const auto o = SiteOrdering::from_sequence(2, s);
  EXPECT_EQ(o.rank(0, 1), 2);
  EXPECT_EQ(o.site(3), Site(0, 0));
  EXPECT_THROW(SiteOrdering::from_sequence(2, {{0, 0}, {0, 0}, {1, 1}}), std::invalid_argument);
  EXPECT_THROW(SiteOrdering::from_sequence(2, {{0, 0}, {1, 1}}), std::invalid_argument);
  EXPECT_THROW(SiteOrdering::from_sequence(2, {{0, 0}, {0, 2}, {1, 1}}), std::invalid_argument);
}

TEST(SwapState, EndpointsAreDirectSamples) {
  const auto a = goe_spec(12, 41), b = matched_real_spec(12, 42);
  SwapState<double> st(a, b, row_major(12));
  EXPECT_EQ(differing_entries<double>(st.matrix().entries, sample_wigner<double>(b).entries), 0);
  while (st.gamma() < st.steps()) st.advance();
  EXPECT_EQ(differing_entries<double>(st.matrix().entries, sample_wigner<double>(a).entries), 0);
  EXPECT_THROW(st.advance(), std::logic_error);

  const auto ac = gue_spec(9, 1), bc = matched_complex_spec(9, 2);
  const SwapState<cplx> full(ac, bc, row_major(9), 45);
  EXPECT_EQ(differing_entries<cplx>(full.matrix().entries, sample_wigner<cplx>(ac).entries), 0);
}

TEST(SwapState, ConsecutiveStatesDifferAtOneSite) {
  const auto a = gue_spec(10, 5), b = rademacher_complex_spec(10, 6);
  SwapState<cplx> st(a, b, row_major(10));
  for (std::int64_t g = 1; g <= st.steps(); ++g) {
    const auto next = swap_site(st);
    const int d = differing_entries<cplx>(st.matrix().entries, next.matrix().entries);
    const Site s = next.last_site();
    EXPECT_LE(d, s.first == s.second ? 1 : 2);
    EXPECT_EQ(next.matrix().entries, next.matrix().entries.adjoint());
    st = next;
  }
  EXPECT_THROW(SwapState<cplx>(a, gue_spec(11, 1), row_major(10)), std::invalid_argument);
  EXPECT_THROW(SwapState<cplx>(a, b, row_major(10), 56), std::out_of_range);
}

TEST(ResolventUpdate, ZeroPerturbationIsIdentity) {
  const auto m = sample_wigner<double>(goe_spec(20, 3));
  const auto r = green(m, SpectralPoint(0.1, 0.2));
  for (const auto& [a, b] : {std::pair{2, 2}, std::pair{3, 7}}) {
    const auto u = resolvent_update<double>(m.entries, r, Rank2Perturbation{a, b, 0.0, 1.0});
    EXPECT_FALSE(u.fallback);
    EXPECT_EQ(*u.resolvent.G, *r.G);
    EXPECT_EQ(u.truncated, *r.G);
  }
}

TEST(ResolventUpdate, MatchesReinversion) {
  std::mt19937_64 g(7);
  std::uniform_int_distribution<int> idx(0, 49);
  std::uniform_real_distribution<double> E(-2.5, 2.5), L(-2.0, 0.0), V(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const bool complex_case = k % 2;
    const SpectralPoint p(E(g), std::pow(10.0, L(g)));
    int a = idx(g), b = idx(g);
    if (a > b) std::swap(a, b);
    const double sc = 1.0 / std::sqrt(50.0);
    if (complex_case) {
      const auto q = sample_wigner<cplx>(gue_spec(50, 100 + k)).entries;
      const cplx v = a == b ? cplx(V(g), 0.0) : cplx(V(g), V(g));
      const auto u = resolvent_update<cplx>(q, green<cplx>(q, p), Rank2Perturbation{a, b, v, sc});
      Eigen::MatrixXcd m = q;
      m(a, b) += sc * v;
      if (a != b) m(b, a) += sc * std::conj(v);
      EXPECT_LE((*u.resolvent.G - direct_inverse(m, p)).cwiseAbs().maxCoeff(), 1e-8);
    } else {
      const auto q = sample_wigner<double>(goe_spec(50, 100 + k)).entries;
      const double v = V(g);
      const auto u = resolvent_update<double>(q, green<double>(q, p), Rank2Perturbation{a, b, v, sc});
      Eigen::MatrixXd m = q;
      m(a, b) += sc * v;
      if (a != b) m(b, a) += sc * v;
      EXPECT_LE((*u.resolvent.G - direct_inverse(m.cast<cplx>(), p)).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(ResolventUpdate, DiagonalMustBeReal) {
  const auto q = sample_wigner<cplx>(gue_spec(8, 1)).entries;
  const auto r = green<cplx>(q, SpectralPoint(0.0, 1.0));
  EXPECT_THROW(resolvent_update<cplx>(q, r, Rank2Perturbation{1, 1, cplx(0.1, 0.2), 1.0}), std::invalid_argument);
  EXPECT_THROW(resolvent_update<cplx>(q, r, Rank2Perturbation{1, 9, cplx(0.1, 0.0), 1.0}), std::out_of_range);
}

TEST(ResolventUpdate, TruncatedErrorDecreasesInN) {
  const SpectralPoint p(0.3, 0.5);
  std::vector<double> err;
  for (std::int64_t n : {50, 100, 200}) {
    double acc = 0.0;
    for (int r = 0; r < 5; ++r) {
      const auto q = sample_wigner<double>(goe_spec(n, 500 + r)).entries;
      const auto u = resolvent_update<double>(q, green<double>(q, p), Rank2Perturbation{1, 4, 1.0, 1.0 / std::sqrt(n)});
      acc += (u.truncated - *u.resolvent.G).cwiseAbs().maxCoeff();
    }
    err.push_back(acc / 5.0);
  }
  EXPECT_GT(err[0], err[1]);
  EXPECT_GT(err[1], err[2]);
}

TEST(OneStepDifference, IdenticalStreamsGiveZero) {
  const auto a = goe_spec(15, 9);
  SwapState<double> st(a, a, row_major(15));
  const auto x = make_test_vector<double>(TestVector::uniform, 15).cast<cplx>().eval();
  for (int k = 0; k < 20; ++k) {
    st.advance();
    EXPECT_EQ(one_step_difference(st, ObservableSpec::stieltjes_at(SpectralPoint(0.0, 1.0))), cplx(0.0));
    EXPECT_EQ(one_step_difference(st, ObservableSpec::green_xx_at(x, SpectralPoint(0.2, 0.1))), cplx(0.0));
  }
}

TEST(OneStepDifference, ResolventRouteMatchesDirectEvaluation) {
  const auto a = goe_spec(30, 1), b = rademacher_real_spec(30, 2);
  SwapState<double> st(a, b, row_major(30));
  const SpectralPoint p(-0.4, 0.05);
  const auto o = ObservableSpec::stieltjes_at(p);
  for (int k = 0; k < 40; ++k) {
    const auto before = st.matrix().entries;
    st.advance();
    const cplx direct = evaluate_observable<double>(st.matrix().entries, o) - evaluate_observable<double>(before, o);
    EXPECT_LE(std::abs(one_step_difference(st, o) - direct), 1e-10);
  }
}

TEST(OneStepDifference, DiagonalSwapIsRankOne) {
  const auto a = goe_spec(20, 3), b = matched_real_spec(20, 4);
  const SwapState<double> st(a, b, row_major(20), 1);  // rank 1 is the (0, 0) site
  ASSERT_EQ(st.last_site(), Site(0, 0));
  const auto [va, vb] = st.entries_at(st.last_site());
  Eigen::MatrixXd prev = st.matrix().entries;
  prev(0, 0) = vb;
  const Eigen::MatrixXd diff = st.matrix().entries - prev;
  EXPECT_EQ(Eigen::FullPivLU<Eigen::MatrixXd>(diff).rank(), va == vb ? 0 : 1);
}

TEST(OneStepDifference, OffDiagonalContourMagnitude) {
  const std::int64_t n = 200;
  const double eta = contour_eta(n, -0.5, 0.5);
  const auto x = make_test_vector<double>(TestVector::uniform, n).cast<cplx>().eval();
  const auto o = ObservableSpec::contour(x, -0.5, 0.5, eta, eta / 10.0);
  const auto ordering = row_major(n);
  int ok = 0;
  const int N = 200;
  for (int r = 0; r < N; ++r) {
    const auto a = goe_spec(n, 9000 + r), b = matched_real_spec(n, 19000 + r);
    const std::int64_t gamma = 2 + (37 * r) % (n - 1);  // off-diagonal sites in row 0
    const SwapState<double> st(a, b, ordering, gamma);
    ASSERT_NE(st.last_site().first, st.last_site().second);
    ok += std::abs(one_step_difference(st, o)) <= 1e-2;
  }
  EXPECT_GE(ok, 0.99 * N);
}

TEST(Telescoping, ExactWithEverySite) {
  const SpectralPoint p(0.2, 0.1);
  const auto xr = make_test_vector<double>(TestVector::decay, 16).cast<cplx>().eval();
  for (const auto& o : {ObservableSpec::stieltjes_at(p), ObservableSpec::green_xx_at(xr, p)}) {
    const auto rep = telescoping_experiment<double>(goe_spec(16, 0), rademacher_real_spec(16, 0), o,
                                                    SiteSelection::every_site(), 77);
    EXPECT_EQ(rep.per_step.size(), 136u);
    EXPECT_LE(rep.telescoping_error, 1e-8);
    cplx s{};
    for (const auto& st : rep.per_step) s += st.delta;
    EXPECT_EQ(s, rep.total);
  }
  const auto xc = make_test_vector<cplx>(TestVector::uniform, 12);
  const auto rc = telescoping_experiment<cplx>(gue_spec(12, 0), matched_complex_spec(12, 0),
                                               ObservableSpec::contour(xc, -0.5, 0.5, 0.2, 0.02),
                                               SiteSelection::every_site(), 5);
  EXPECT_LE(rc.telescoping_error, 1e-8);
}

TEST(Telescoping, IdenticalSpecsGiveZeroSteps) {
  const auto rep = telescoping_experiment<double>(goe_spec(10, 0), goe_spec(10, 0),
                                                  ObservableSpec::stieltjes_at(SpectralPoint(0.0, 1.0)),
                                                  SiteSelection::every_site(), 3);
  for (const auto& s : rep.per_step) EXPECT_EQ(s.delta, cplx(0.0));
  EXPECT_EQ(rep.endpoint_difference, cplx(0.0));
}

TEST(Telescoping, OrderingIndependentTotal) {
  const std::int64_t n = 14;
  std::vector<Site> rev;
  const auto rm = make_ordering(n);
  for (std::int64_t r = rm.size(); r >= 1; --r) rev.push_back(rm.site(r));
  TelescopeOptions opts;
  opts.ordering = std::make_shared<const SiteOrdering>(SiteOrdering::from_sequence(n, rev));
  const auto o = ObservableSpec::stieltjes_at(SpectralPoint(0.5, 0.05));
  const auto a = telescoping_experiment<double>(goe_spec(n, 0), matched_real_spec(n, 0), o, SiteSelection::every_site(), 8);
  const auto b = telescoping_experiment<double>(goe_spec(n, 0), matched_real_spec(n, 0), o, SiteSelection::every_site(), 8, opts);
  EXPECT_LE(std::abs(a.total - b.total), 1e-8);
  EXPECT_NE(a.per_step.front().a * n + a.per_step.front().b, b.per_step.front().a * n + b.per_step.front().b);
}

TEST(Telescoping, DeterministicTraces) {
  const auto o = ObservableSpec::stieltjes_at(SpectralPoint(0.0, 0.3));
  for (const auto sel : {SiteSelection::every_site(), SiteSelection::sampled(10)}) {
    const auto a = telescoping_experiment<double>(goe_spec(12, 0), rademacher_real_spec(12, 0), o, sel, 99);
    const auto b = telescoping_experiment<double>(goe_spec(12, 0), rademacher_real_spec(12, 0), o, sel, 99);
    ASSERT_EQ(a.per_step.size(), b.per_step.size());
    for (std::size_t k = 0; k < a.per_step.size(); ++k) {
      EXPECT_EQ(a.per_step[k].gamma, b.per_step[k].gamma);
      EXPECT_EQ(a.per_step[k].delta, b.per_step[k].delta);
    }
    EXPECT_EQ(a.total, b.total);
  }
}

TEST(Telescoping, SampledSitesAndMismatch) {
  const auto o = ObservableSpec::stieltjes_at(SpectralPoint(0.0, 0.3));
  const auto rep = telescoping_experiment<double>(goe_spec(12, 0), rademacher_real_spec(12, 0), o, SiteSelection::sampled(10), 4);
  EXPECT_EQ(rep.per_step.size(), 10u);
  EXPECT_TRUE(std::is_sorted(rep.per_step.begin(), rep.per_step.end(),
                             [](const StepRecord& x, const StepRecord& y) { return x.gamma < y.gamma; }));
  EXPECT_EQ(rep.total, rep.endpoint_difference);
  EXPECT_THROW(telescoping_experiment<double>(goe_spec(12, 0), goe_spec(13, 0), o, SiteSelection::every_site(), 1),
               std::invalid_argument);
}
