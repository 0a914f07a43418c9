#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ensembles.hpp"
#include "semicircle.hpp"
#include "spectral.hpp"

namespace wigner {

enum class ResolventMode { full_matrix, bilinear_only };

struct BilinearForm {
  Eigen::VectorXcd v;
  Eigen::VectorXcd w;
  cplx value{};  // v* G w
};

/// Green function G(z) = (M - z)^{-1} at one spectral point: the full matrix and/or
/// selected bilinear forms, plus m_n(z) = tr G / n.
struct ResolventEval {
  SpectralPoint z;
  ResolventMode mode = ResolventMode::full_matrix;
  std::optional<Eigen::MatrixXcd> G;
  cplx m_n{};
  std::vector<BilinearForm> forms;
};

/// m_n(z) = (1/n) sum_i 1/(lambda_i - z).
inline cplx stieltjes_mn(const Eigen::VectorXd& eigenvalues, const SpectralPoint& p) {
  const cplx z = p.z();
  cplx acc{};
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) acc += 1.0 / (eigenvalues(i) - z);
  return acc / static_cast<double>(eigenvalues.size());
}

/// Full G by LU solve of (M - z) G = I.
template <class Scalar>
ResolventEval green(const MatrixT<Scalar>& m, const SpectralPoint& p) {
  const auto n = m.rows();
  Eigen::MatrixXcd a = m.template cast<cplx>();
  a.diagonal().array() -= p.z();
  ResolventEval r;
  r.z = p;
  r.mode = ResolventMode::full_matrix;
  r.G = a.partialPivLu().inverse();
  r.m_n = r.G->trace() / static_cast<double>(n);
  return r;
}

template <class Scalar>
ResolventEval green(const WignerMatrix<Scalar>& m, const SpectralPoint& p) {
  return green<Scalar>(m.entries, p);
}

/// Spectral weights a_i = <v,u_i><u_i,w>, so that v* G(z) w = sum_i a_i / (lambda_i - z).
template <class Scalar>
Eigen::VectorXcd spectral_weights(const SpectralDecomposition<Scalar>& d, const Eigen::VectorXcd& v,
                                  const Eigen::VectorXcd& w) {
  const Eigen::MatrixXcd u = d.eigenvectors.template cast<cplx>();
  const Eigen::VectorXcd uv = u.adjoint() * v;  // <u_i, v>
  const Eigen::VectorXcd uw = u.adjoint() * w;  // <u_i, w>
  return uv.conjugate().cwiseProduct(uw);
}

inline cplx expand_weights(const Eigen::VectorXd& eigenvalues, const Eigen::VectorXcd& weights, const SpectralPoint& p) {
  const cplx z = p.z();
  cplx acc{};
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) acc += weights(i) / (eigenvalues(i) - z);
  return acc;
}

/// Green function through the eigen-expansion. In full_matrix mode G = U diag(1/(lambda - z)) U*;
/// in bilinear_only mode only the requested (v, w) forms are produced, O(n) each once the
/// overlaps are known.
template <class Scalar>
ResolventEval green(const SpectralDecomposition<Scalar>& d, const SpectralPoint& p, ResolventMode mode,
                    const std::vector<std::pair<Eigen::VectorXcd, Eigen::VectorXcd>>& requested = {}) {
  ResolventEval r;
  r.z = p;
  r.mode = mode;
  r.m_n = stieltjes_mn(d.eigenvalues, p);
  if (mode == ResolventMode::full_matrix) {
    const Eigen::MatrixXcd u = d.eigenvectors.template cast<cplx>();
    Eigen::VectorXcd inv(d.n());
    for (std::int64_t i = 0; i < d.n(); ++i) inv(i) = 1.0 / (d.eigenvalues(i) - p.z());
    r.G = u * inv.asDiagonal() * u.adjoint();
  }
  for (const auto& [v, w] : requested) {
    if (v.size() != d.n() || w.size() != d.n()) throw std::invalid_argument("green: bilinear form dimension mismatch");
    r.forms.push_back({v, w, expand_weights(d.eigenvalues, spectral_weights(d, v, w), p)});
  }
  return r;
}

struct LocalLawResidual {
  double residual = 0.0;  // |G_vw - m_sc <v,w>|
  double psi = 0.0;
  double ratio = 0.0;
};

namespace detail {
inline void require_unit(const Eigen::VectorXcd& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > 1e-10) throw std::invalid_argument(std::string(what) + " must be a unit vector");
}
inline LocalLawResidual residual_from(cplx gvw, const Eigen::VectorXcd& v, const Eigen::VectorXcd& w,
                                      const SpectralPoint& p, std::int64_t n) {
  LocalLawResidual r;
  r.residual = std::abs(gvw - semicircle::stieltjes(p) * v.dot(w));
  r.psi = semicircle::psi(p, n);
  r.ratio = r.residual / r.psi;
  return r;
}
}  // namespace detail

/// Isotropic local-law residual via the eigen-expansion. Diagnostic only: no threshold.
template <class Scalar>
LocalLawResidual local_law_residual(const SpectralDecomposition<Scalar>& d, const SpectralPoint& p,
                                    const Eigen::VectorXcd& v, const Eigen::VectorXcd& w,
                                    const SpectralDomain& domain = {}) {
  domain.validate();
  if (!domain.contains(p)) throw std::domain_error("local_law_residual: z outside the spectral domain");
  detail::require_unit(v, "v");
  detail::require_unit(w, "w");
  const cplx gvw = expand_weights(d.eigenvalues, spectral_weights(d, v, w), p);
  return detail::residual_from(gvw, v, w, p, d.n());
}

/// Same quantity from a direct solve on the matrix.
template <class Scalar>
LocalLawResidual local_law_residual(const WignerMatrix<Scalar>& m, const SpectralPoint& p, const Eigen::VectorXcd& v,
                                    const Eigen::VectorXcd& w, const SpectralDomain& domain = {}) {
  domain.validate();
  if (!domain.contains(p)) throw std::domain_error("local_law_residual: z outside the spectral domain");
  detail::require_unit(v, "v");
  detail::require_unit(w, "w");
  Eigen::MatrixXcd a = m.entries.template cast<cplx>();
  a.diagonal().array() -= p.z();
  const cplx gvw = v.dot(a.partialPivLu().solve(w));
  return detail::residual_from(gvw, v, w, p, m.n());
}

/// sup over an energy grid of |m_n - m_sc| / Psi at fixed eta.
inline double averaged_law_sup_ratio(const Eigen::VectorXd& eigenvalues, const std::vector<double>& energies, double eta) {
  double worst = 0.0;
  for (double e : energies) {
    const SpectralPoint p(e, eta);
    const double dev = std::abs(stieltjes_mn(eigenvalues, p) - semicircle::stieltjes(p));
    worst = std::max(worst, dev / semicircle::psi(p, eigenvalues.size()));
  }
  return worst;
}

struct RigidityRow {
  std::int64_t index = 0;  // 1-based
  double lambda = 0.0;
  double gamma = 0.0;
  double deviation = 0.0;  // lambda - gamma
  double scaled = 0.0;     // |lambda - gamma| / (min(i, n-i+1)^{-1/3} n^{-2/3})
};

struct RigidityReport {
  double max_scaled_deviation = 0.0;
  std::vector<RigidityRow> per_index;
};

inline RigidityReport rigidity_report(const Eigen::VectorXd& eigenvalues) {
  const auto n = eigenvalues.size();
  RigidityReport r;
  r.per_index.reserve(static_cast<std::size_t>(n));
  const double n23 = std::pow(static_cast<double>(n), -2.0 / 3.0);
  for (std::int64_t i = 1; i <= n; ++i) {
    RigidityRow row;
    row.index = i;
    row.lambda = eigenvalues(i - 1);
    row.gamma = semicircle::classical_location(i, n);
    row.deviation = row.lambda - row.gamma;
    const double scale = std::pow(static_cast<double>(std::min(i, n - i + 1)), -1.0 / 3.0) * n23;
    row.scaled = std::abs(row.deviation) / scale;
    r.max_scaled_deviation = std::max(r.max_scaled_deviation, row.scaled);
    r.per_index.push_back(row);
  }
  return r;
}

template <class Scalar>
RigidityReport rigidity_report(const SpectralDecomposition<Scalar>& d) {
  return rigidity_report(d.eigenvalues);
}

/// #{i : lo <= lambda_i <= hi}.
inline std::int64_t count_in_interval(const Eigen::VectorXd& eigenvalues, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("count_in_interval: need lo <= hi");
  const auto* b = eigenvalues.data();
  const auto* e = b + eigenvalues.size();
  return std::upper_bound(b, e, hi) - std::lower_bound(b, e, lo);
}

template <class Scalar>
std::int64_t count_in_interval(const SpectralDecomposition<Scalar>& d, double lo, double hi) {
  return count_in_interval(d.eigenvalues, lo, hi);
}

/// (1/pi)(atan((s2 - lambda)/eta) - atan((s1 - lambda)/eta)): the Poisson-kernel smoothing of
/// 1{s1 < lambda <= s2} at scale eta.
inline double smoothed_indicator(double lambda, double s1, double s2, double eta) {
  if (!(s1 <= s2)) throw std::invalid_argument("smoothed_indicator: need s1 <= s2");
  if (!(eta > 0.0)) throw std::invalid_argument("smoothed_indicator: eta must be > 0");
  return (std::atan((s2 - lambda) / eta) - std::atan((s1 - lambda) / eta)) / std::numbers::pi;
}

/// eta = n^{-1/2 - eps} (s2 - s1)^{1/2}.
inline double contour_eta(std::int64_t n, double s1, double s2, double eps = 0.05) {
  return std::pow(static_cast<double>(n), -0.5 - eps) * std::sqrt(s2 - s1);
}

/// Default Simpson step for the contour observable. The step may be as coarse as eta/10, but
/// the endpoint error then reaches ~1e-8 at n = 400 when an eigenvalue sits near s1 or s2.
inline double contour_quad_step(double eta) { return eta / 40.0; }

/// (1/pi) * integral over E in [s1, s2] of Im(G_xx(E + i eta) - m_n(E + i eta)), by composite
/// Simpson with step <= quad_step. G is evaluated through the eigen-expansion. Raw integral;
/// multiplying by sqrt(beta n / 2) is left to the caller.
template <class Scalar>
double contour_observable(const SpectralDecomposition<Scalar>& d, const VectorT<Scalar>& x, double s1, double s2,
                          double eta, double quad_step) {
  if (!(s1 <= s2)) throw std::invalid_argument("contour_observable: need s1 <= s2");
  if (!(eta > 0.0)) throw std::invalid_argument("contour_observable: eta must be > 0");
  if (!(quad_step > 0.0) || quad_step > eta / 10.0 * (1.0 + 1e-12))
    throw std::invalid_argument("contour_observable: quad_step must be in (0, eta/10]");
  if (s1 == s2) return 0.0;
  const VectorT<Scalar> y = overlaps(d, x);
  const auto n = d.n();
  const Eigen::VectorXd gx = y.cwiseAbs2();
  const double inv_n = 1.0 / static_cast<double>(n);

  auto integrand = [&](double e) {
    const SpectralPoint p(e, eta);
    const cplx z = p.z();
    cplx gxx{}, tr{};
    for (std::int64_t i = 0; i < n; ++i) {
      const cplx r = 1.0 / (d.eigenvalues(i) - z);
      gxx += gx(i) * r;
      tr += r;
    }
    return (gxx - tr * inv_n).imag();
  };

  auto intervals = static_cast<std::int64_t>(std::ceil((s2 - s1) / quad_step));
  if (intervals % 2) ++intervals;
  const double h = (s2 - s1) / static_cast<double>(intervals);
  double acc = integrand(s1) + integrand(s2);
  for (std::int64_t k = 1; k < intervals; ++k) acc += (k % 2 ? 4.0 : 2.0) * integrand(s1 + h * static_cast<double>(k));
  return acc * h / 3.0 / std::numbers::pi;
}

/// Exact value of the contour integral: sum_i (|y_i|^2 - 1/n) * smoothed_indicator(lambda_i).
template <class Scalar>
double contour_observable_exact(const SpectralDecomposition<Scalar>& d, const VectorT<Scalar>& x, double s1, double s2,
                                double eta) {
  if (s1 == s2) return 0.0;
  const VectorT<Scalar> y = overlaps(d, x);
  const double inv_n = 1.0 / static_cast<double>(d.n());
  double acc = 0.0;
  for (std::int64_t i = 0; i < d.n(); ++i)
    acc += (abs2(y(i)) - inv_n) * smoothed_indicator(d.eigenvalues(i), s1, s2, eta);
  return acc;
}

/// n * max_i |<u_i, v>|^2.
template <class Scalar>
double delocalization_stat(const SpectralDecomposition<Scalar>& d, const VectorT<Scalar>& v) {
  if (v.size() != d.n()) throw std::invalid_argument("delocalization_stat: dimension mismatch");
  if (std::abs(v.norm() - 1.0) > 1e-10) throw std::invalid_argument("delocalization_stat: v must be a unit vector");
  const VectorT<Scalar> y = d.eigenvectors.adjoint() * v;
  return static_cast<double>(d.n()) * y.cwiseAbs2().maxCoeff();
}

}  // namespace wigner
