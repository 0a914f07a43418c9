#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ensembles.hpp"
#include "rng.hpp"
#include "semicircle.hpp"
#include "spectral.hpp"

namespace wigner {

// ---------------------------------------------------------------------------
// Test vectors

enum class TestVector { uniform, uniform_signs, slab, decay, e1 };

inline std::string to_string(TestVector t) {
  switch (t) {
    case TestVector::uniform: return "uniform";
    case TestVector::uniform_signs: return "uniform_signs";
    case TestVector::slab: return "slab";
    case TestVector::decay: return "decay";
    case TestVector::e1: return "e1";
  }
  return "?";
}

inline TestVector test_vector_from_string(const std::string& s) {
  for (auto t : {TestVector::uniform, TestVector::uniform_signs, TestVector::slab, TestVector::decay, TestVector::e1})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown test vector preset '" + s + "'");
}

/// Unit test vectors x. uniform: all 1/sqrt n. uniform_signs: same with keyed random signs.
/// slab: first n/2 coordinates equal, rest 0. decay: x_1 = n^{-1/4}, x_i ~ i^{-1/4} after,
/// so ||x||_inf = n^{-1/4}. e1: first basis vector (||x||_inf = 1, not delocalized).
template <class Scalar>
VectorT<Scalar> make_test_vector(TestVector t, std::int64_t n, std::uint64_t seed = 0) {
  if (n < 2) throw std::invalid_argument("make_test_vector: n must be >= 2");
  VectorT<Scalar> x = VectorT<Scalar>::Zero(n);
  const double dn = static_cast<double>(n);
  switch (t) {
    case TestVector::uniform:
      x.setConstant(Scalar(1.0 / std::sqrt(dn)));
      break;
    case TestVector::uniform_signs: {
      KeyedStream g(seed, {stream_tag::haar, 0x7369676e});
      for (std::int64_t i = 0; i < n; ++i) x(i) = Scalar((g() >> 63) ? -1.0 : 1.0) / std::sqrt(dn);
      break;
    }
    case TestVector::slab: {
      const auto h = n / 2;
      x.head(h).setConstant(Scalar(1.0 / std::sqrt(static_cast<double>(h))));
      break;
    }
    case TestVector::decay: {
      const double head = std::pow(dn, -0.25);
      double tail = 0.0;
      for (std::int64_t i = 2; i <= n; ++i) tail += std::pow(static_cast<double>(i), -0.5);
      const double c = std::sqrt((1.0 - head * head) / tail);
      x(0) = Scalar(head);
      for (std::int64_t i = 2; i <= n; ++i) x(i - 1) = Scalar(c * std::pow(static_cast<double>(i), -0.25));
      break;
    }
    case TestVector::e1:
      x(0) = Scalar(1.0);
      break;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Brownian bridge reference

inline double bridge_covariance(double s, double t) {
  if (!(s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0)) throw std::domain_error("bridge_covariance: s, t must lie in [0,1]");
  return std::min(s, t) - s * t;
}

/// Replicas x grid evaluation of i.i.d. paths.
struct PathEnsemble {
  std::vector<ProcessPath> paths;
  std::vector<double> grid;
  Eigen::MatrixXd values;  // values(r, j) = X_n^{(r)}(grid[j])

  std::int64_t replicas() const noexcept { return static_cast<std::int64_t>(paths.size()); }
  std::int64_t n() const noexcept { return paths.empty() ? 0 : paths.front().n; }
};

inline std::vector<double> default_grid() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}; }

inline PathEnsemble make_path_ensemble(std::vector<ProcessPath> paths, std::vector<double> grid) {
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!(grid[j] >= 0.0 && grid[j] <= 1.0)) throw std::invalid_argument("PathEnsemble: grid must lie in [0,1]");
    if (j > 0 && !(grid[j] > grid[j - 1])) throw std::invalid_argument("PathEnsemble: grid must be strictly increasing");
  }
  for (const auto& p : paths)
    if (p.n != paths.front().n || p.beta != paths.front().beta || p.test_vector_id != paths.front().test_vector_id)
      throw std::invalid_argument("PathEnsemble: paths must share n, beta and test vector");
  PathEnsemble e{std::move(paths), std::move(grid), {}};
  e.values.resize(e.replicas(), static_cast<Eigen::Index>(e.grid.size()));
  for (std::int64_t r = 0; r < e.replicas(); ++r)
    for (std::size_t j = 0; j < e.grid.size(); ++j) e.values(r, static_cast<Eigen::Index>(j)) = e.paths[r].at(e.grid[j]);
  return e;
}

/// Unbiased sample covariance of the grid values across replicas.
inline Eigen::MatrixXd empirical_covariance(const PathEnsemble& e) {
  if (e.replicas() < 2) throw std::invalid_argument("empirical_covariance: need at least 2 replicas");
  const Eigen::RowVectorXd mean = e.values.colwise().mean();
  const Eigen::MatrixXd c = e.values.rowwise() - mean;
  return (c.transpose() * c) / static_cast<double>(e.replicas() - 1);
}

/// max_{j,k} |cov(j,k) - (min(t_j,t_k) - t_j t_k)|.
inline double max_covariance_error(const Eigen::MatrixXd& cov, const std::vector<double>& grid) {
  double worst = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j)
    for (std::size_t k = 0; k < grid.size(); ++k)
      worst = std::max(worst, std::abs(cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) -
                                       bridge_covariance(grid[j], grid[k])));
  return worst;
}

// ---------------------------------------------------------------------------
// Sample summaries

struct SampleSummary {
  double mean = 0.0;
  double variance = 0.0;       // unbiased
  double variance_se = 0.0;    // standard error of the variance estimate
  std::int64_t count = 0;
};

inline SampleSummary summarize(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("summarize: need at least 2 samples");
  SampleSummary s;
  s.count = static_cast<std::int64_t>(v.size());
  const double n = static_cast<double>(v.size());
  for (double x : v) s.mean += x;
  s.mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = (x - s.mean) * (x - s.mean);
    m2 += d;
    m4 += d * d;
  }
  s.variance = m2 / (n - 1.0);
  const double mu2 = m2 / n, mu4 = m4 / n;
  s.variance_se = std::sqrt(std::max(mu4 - mu2 * mu2, 0.0) / n);
  return s;
}

struct CovarianceEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Sample covariance with the standard error of the mean of centred products.
inline CovarianceEstimate sample_covariance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("sample_covariance: need equal sizes >= 2");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  std::vector<double> prod(a.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += prod[i] = (a[i] - ma) * (b[i] - mb);
  CovarianceEstimate c;
  c.value = s / (n - 1.0);
  const double mp = s / n;
  double v = 0.0;
  for (double p : prod) v += (p - mp) * (p - mp);
  c.std_error = std::sqrt(v / (n - 1.0) / n);
  return c;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// sup_x |F_N(x) - F(x)| for the empirical CDF of `samples`.
inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& reference_cdf) {
  if (samples.size() < 20) throw std::invalid_argument("ks_statistic: need at least 20 samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = reference_cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// sup_x |F_a(x) - F_b(x)|, sorted-merge; ties are advanced together.
inline double two_sample_ks(std::vector<double> a, std::vector<double> b) {
  if (a.size() < 20 || b.size() < 20) throw std::invalid_argument("two_sample_ks: need at least 20 samples in each set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic Kolmogorov critical value c(alpha), P(sqrt(N) D > c) ~ alpha.
inline double kolmogorov_critical(double alpha) { return std::sqrt(-0.5 * std::log(alpha / 2.0)); }

inline double ks_threshold(double alpha, std::int64_t n) { return kolmogorov_critical(alpha) / std::sqrt(static_cast<double>(n)); }

inline double two_sample_ks_threshold(double alpha, std::int64_t n, std::int64_t m) {
  return kolmogorov_critical(alpha) * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

// ---------------------------------------------------------------------------
// Linear eigenvector statistics

/// W_n(u^r) = sqrt(beta n) (sum_i lambda_i^r |y_i|^2 - (1/n) sum_i lambda_i^r).
template <class Scalar>
double moment_functional(const SpectralDecomposition<Scalar>& d, const VectorT<Scalar>& x, int r) {
  if (r < 0 || r > 8) throw std::invalid_argument("moment_functional: r must be in [0,8]");
  const VectorT<Scalar> y = overlaps(d, x);
  const double inv_n = 1.0 / static_cast<double>(d.n());
  double acc = 0.0;
  for (std::int64_t i = 0; i < d.n(); ++i) acc += std::pow(d.eigenvalues(i), r) * (abs2(y(i)) - inv_n);
  return std::sqrt(beta_value(d.beta()) * static_cast<double>(d.n())) * acc;
}

/// 2 (int u^{r1+r2} dF_sc - int u^{r1} dF_sc int u^{r2} dF_sc).
inline double clt_covariance_target(int r1, int r2) {
  if (r1 < 0 || r2 < 0 || r1 + r2 > 16) throw std::invalid_argument("clt_covariance_target: need r1, r2 >= 0 and r1 + r2 <= 16");
  return 2.0 * (semicircle::moment(static_cast<unsigned>(r1 + r2)) -
                semicircle::moment(static_cast<unsigned>(r1)) * semicircle::moment(static_cast<unsigned>(r2)));
}

// ---------------------------------------------------------------------------
// Increments and tightness diagnostics

struct IncrementMoment {
  double value = 0.0;
  double std_error = 0.0;
  bool in_regime = true;  // t2 - t1 >= n^{-1/2 - eps}
};

/// Monte Carlo E (X_n(t2) - X_n(t1))^4.
inline IncrementMoment increment_fourth_moment(const PathEnsemble& e, double t1, double t2, double eps = 0.05) {
  if (!(t1 <= t2)) throw std::invalid_argument("increment_fourth_moment: need t1 <= t2");
  if (e.replicas() < 1) throw std::invalid_argument("increment_fourth_moment: empty ensemble");
  IncrementMoment m;
  m.in_regime = (t2 - t1) >= std::pow(static_cast<double>(e.n()), -0.5 - eps);
  const double r = static_cast<double>(e.replicas());
  double s = 0.0, s2 = 0.0;
  for (const auto& p : e.paths) {
    const double d = p.at(t2) - p.at(t1);
    const double q = d * d * d * d;
    s += q;
    s2 += q * q;
  }
  m.value = s / r;
  m.std_error = e.replicas() > 1 ? std::sqrt(std::max(s2 / r - m.value * m.value, 0.0) / (r - 1.0)) : 0.0;
  return m;
}

/// Least-squares slope of log(moment) against log(delta).
inline double fit_log_slope(const std::vector<double>& deltas, const std::vector<double>& moments) {
  if (deltas.size() != moments.size()) throw std::invalid_argument("fit_log_slope: size mismatch");
  std::vector<double> xs;
  for (double d : deltas)
    if (std::find(xs.begin(), xs.end(), d) == xs.end()) xs.push_back(d);
  if (xs.size() < 4) throw std::invalid_argument("fit_log_slope: need at least 4 distinct deltas");
  const double k = static_cast<double>(deltas.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0 && moments[i] > 0.0)) throw std::invalid_argument("fit_log_slope: values must be positive");
    mx += std::log(deltas[i]);
    my += std::log(moments[i]);
  }
  mx /= k;
  my /= k;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const double dx = std::log(deltas[i]) - mx;
    sxy += dx * (std::log(moments[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

/// Analytic fourth moment of a Brownian-bridge increment over a window of length dt.
inline double bridge_increment_fourth_moment(double dt) { return 3.0 * std::pow(dt * (1.0 - dt), 2); }

/// Scaling exponent of E(dX)^4 over windows centred at t = 1/2.
inline double scaling_exponent_fit(const PathEnsemble& e, const std::vector<double>& deltas, double eps = 0.05) {
  std::vector<double> ds, ms;
  for (double d : deltas) {
    if (!(d > 0.0 && d <= 1.0)) throw std::invalid_argument("scaling_exponent_fit: deltas must lie in (0,1]");
    const auto m = increment_fourth_moment(e, 0.5 - d / 2.0, 0.5 + d / 2.0, eps);
    if (!m.in_regime) continue;
    ds.push_back(d);
    ms.push_back(m.value);
  }
  if (ds.size() < 4) throw std::invalid_argument("scaling_exponent_fit: need at least 4 in-regime deltas");
  return fit_log_slope(ds, ms);
}

/// w(delta) = sup_{|t1 - t2| < delta} |X(t1) - X(t2)|, exact for the step path: indices
/// k1 < k2 are reachable iff k2 - k1 <= ceil(n delta).
inline double modulus_of_continuity(const ProcessPath& p, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("modulus_of_continuity: delta must lie in (0,1]");
  const auto n = p.n;
  const auto span = std::min<std::int64_t>(n, static_cast<std::int64_t>(std::ceil(static_cast<double>(n) * delta - 1e-12)));
  const auto& v = p.partial_sums;
  std::deque<std::size_t> mx, mn;
  double best = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    while (!mx.empty() && v[mx.back()] <= v[k]) mx.pop_back();
    while (!mn.empty() && v[mn.back()] >= v[k]) mn.pop_back();
    mx.push_back(k);
    mn.push_back(k);
    while (static_cast<std::int64_t>(k - mx.front()) > span) mx.pop_front();
    while (static_cast<std::int64_t>(k - mn.front()) > span) mn.pop_front();
    best = std::max(best, v[mx.front()] - v[mn.front()]);
  }
  return best;
}

}  // namespace wigner
