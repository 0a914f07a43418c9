#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "detail/eigensolver.hpp"
#include "ensembles.hpp"
#include "rng.hpp"

namespace wigner {

/// Ascending eigenvalues and orthonormal eigenvectors (columns), M = U diag(lambda) U*.
template <class Scalar>
struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;
  MatrixT<Scalar> eigenvectors;
  bool randomized = false;
  std::uint64_t seed = 0;  // seed of the decomposed matrix, for diagnostics

  std::int64_t n() const noexcept { return eigenvalues.size(); }
  static constexpr Beta beta() noexcept { return beta_of<Scalar>; }
};

template <class Scalar>
SpectralDecomposition<Scalar> decompose(const MatrixT<Scalar>& m, std::uint64_t seed = 0) {
  if (m.rows() != m.cols()) throw std::invalid_argument("decompose: matrix must be square");
  SpectralDecomposition<Scalar> d;
  d.seed = seed;
  detail::eigh(m, d.eigenvalues, d.eigenvectors, seed);
  return d;
}

template <class Scalar>
SpectralDecomposition<Scalar> decompose(const WignerMatrix<Scalar>& m) {
  return decompose<Scalar>(m.entries, m.seed);
}

/// Eigenvalues only (ascending); several times cheaper than a full decomposition.
template <class Scalar>
Eigen::VectorXd eigenvalues(const MatrixT<Scalar>& m, std::uint64_t seed = 0) {
  return detail::eigvalsh(m, seed);
}

template <class Scalar>
Eigen::VectorXd eigenvalues(const WignerMatrix<Scalar>& m) {
  return detail::eigvalsh(m.entries, m.seed);
}

/// Multiplies each eigenvector by an independent uniform phase (complex) or sign (real).
/// Projections u_i u_i* are unchanged.
template <class Scalar>
SpectralDecomposition<Scalar> randomize_phases(SpectralDecomposition<Scalar> d, std::uint64_t seed) {
  if (d.randomized) throw std::logic_error("randomize_phases: decomposition already randomized");
  for (std::int64_t j = 0; j < d.n(); ++j) {
    KeyedStream g(seed, {stream_tag::phase, static_cast<std::uint64_t>(j)});
    if constexpr (is_complex_v<Scalar>) {
      d.eigenvectors.col(j) *= std::polar(1.0, 2.0 * std::numbers::pi * g.uniform());
    } else {
      if (g() >> 63) d.eigenvectors.col(j) *= -1.0;
    }
  }
  d.randomized = true;
  return d;
}

/// y = U* x.
template <class Scalar>
VectorT<Scalar> overlaps(const SpectralDecomposition<Scalar>& d, const VectorT<Scalar>& x) {
  if (x.size() != d.n()) throw std::invalid_argument("overlaps: dimension mismatch");
  if (std::abs(x.norm() - 1.0) > 1e-12) throw std::invalid_argument("overlaps: x must be a unit vector");
  return d.eigenvectors.adjoint() * x;
}

/// floor(n t), with a 1e-9 guard so decimal grid points such as 0.29 * 100 land on the
/// intended index despite binary rounding.
inline std::int64_t floor_index(std::int64_t n, double t) {
  const auto k = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * t + 1e-9));
  return std::clamp<std::int64_t>(k, 0, n);
}

/// Partial sums P_k = sqrt(beta n / 2) * sum_{i<=k} (|y_i|^2 - 1/n), k = 0..n.
/// X_n(t) = P_{floor(n t)}.
struct ProcessPath {
  std::int64_t n = 0;
  Beta beta = Beta::real;
  std::vector<double> partial_sums;
  std::string test_vector_id;

  double at(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("ProcessPath::at: t must lie in [0,1]");
    return partial_sums[static_cast<std::size_t>(floor_index(n, t))];
  }
  double scale() const noexcept { return std::sqrt(beta_value(beta) * static_cast<double>(n) / 2.0); }
};

/// Path from the squared moduli |y_i|^2 directly; every statistic here depends on y only
/// through them.
inline ProcessPath process_path_from_weights(const Eigen::VectorXd& w, Beta beta, std::string test_vector_id = {}) {
  const auto n = w.size();
  if (n < 1) throw std::invalid_argument("process_path: empty vector");
  if (std::abs(w.sum() - 1.0) > 1e-10) throw std::invalid_argument("process_path: y must be a unit vector");
  ProcessPath p{n, beta, std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0), std::move(test_vector_id)};
  const double inv_n = 1.0 / static_cast<double>(n);
  const double s = p.scale();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    acc += w(i) - inv_n;
    p.partial_sums[static_cast<std::size_t>(i) + 1] = s * acc;
  }
  return p;
}

template <class Scalar>
Eigen::VectorXd squared_moduli(const VectorT<Scalar>& y) {
  return y.cwiseAbs2();
}

template <class Scalar>
ProcessPath process_path(const VectorT<Scalar>& y, Beta beta, std::string test_vector_id = {}) {
  return process_path_from_weights(squared_moduli(y), beta, std::move(test_vector_id));
}

/// sqrt(beta n / 2) * sum_i (|y_i|^2 - 1/n) 1{s1 < lambda_i <= s2}.
template <class Scalar>
double energy_window_sum(const SpectralDecomposition<Scalar>& d, const VectorT<Scalar>& y, double s1, double s2,
                         Beta beta) {
  if (!(s1 < s2)) throw std::invalid_argument("energy_window_sum: need s1 < s2");
  if (y.size() != d.n()) throw std::invalid_argument("energy_window_sum: dimension mismatch");
  const double inv_n = 1.0 / static_cast<double>(d.n());
  double acc = 0.0;
  for (std::int64_t i = 0; i < d.n(); ++i) {
    const double l = d.eigenvalues(i);
    if (s1 < l && l <= s2) acc += abs2(y(i)) - inv_n;
  }
  return std::sqrt(beta_value(beta) * static_cast<double>(d.n()) / 2.0) * acc;
}

struct MultiplicityReport {
  std::int64_t max_multiplicity = 0;
  std::vector<std::int64_t> cluster_sizes;
};

/// Groups consecutive eigenvalues whose gap is below 1e-10 relative to the spectral scale.
inline MultiplicityReport multiplicity_audit(const Eigen::VectorXd& ascending) {
  MultiplicityReport r;
  if (ascending.size() == 0) return r;
  const double tol = 1e-10 * std::max(1.0, ascending.cwiseAbs().maxCoeff());
  std::int64_t run = 1;
  for (std::int64_t i = 1; i <= ascending.size(); ++i) {
    if (i < ascending.size() && ascending(i) - ascending(i - 1) <= tol) {
      ++run;
      continue;
    }
    r.cluster_sizes.push_back(run);
    r.max_multiplicity = std::max(r.max_multiplicity, run);
    run = 1;
  }
  return r;
}

template <class Scalar>
MultiplicityReport multiplicity_audit(const SpectralDecomposition<Scalar>& d) {
  return multiplicity_audit(d.eigenvalues);
}

}  // namespace wigner
