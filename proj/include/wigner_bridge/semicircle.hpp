#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace wigner {

using cplx = std::complex<double>;

/// A point z = E + i*eta of the upper half plane.
struct SpectralPoint {
  double E = 0.0;
  double eta = 1.0;

  SpectralPoint() = default;
  SpectralPoint(double energy, double imag) : E(energy), eta(imag) {
    if (!(imag > 0.0)) throw std::domain_error("SpectralPoint: eta must be > 0, got " + std::to_string(imag));
  }
  cplx z() const noexcept { return {E, eta}; }
};

/// Rectangle |E| <= e_max, eta_min < eta <= eta_max used by the local-law diagnostics.
/// The lower edge eta_min has no canonical value; callers pick it per experiment.
struct SpectralDomain {
  double e_max = 5.0;
  double eta_min = 1e-3;
  double eta_max = 10.0;

  void validate() const {
    if (!(eta_min > 0.0 && eta_min < eta_max)) throw std::invalid_argument("SpectralDomain: need 0 < eta_min < eta_max");
    if (!(e_max >= 2.0)) throw std::invalid_argument("SpectralDomain: need e_max >= 2");
  }
  bool contains(const SpectralPoint& p) const noexcept {
    return std::abs(p.E) <= e_max && p.eta > eta_min && p.eta <= eta_max;
  }
};

namespace semicircle {

/// rho_sc(x) = sqrt(4 - x^2) / (2 pi) on [-2, 2].
inline double density(double x) noexcept {
  if (!(std::abs(x) < 2.0)) return 0.0;
  return std::sqrt(4.0 - x * x) / (2.0 * std::numbers::pi);
}

inline double cdf(double x) noexcept {
  if (x <= -2.0) return 0.0;
  if (x >= 2.0) return 1.0;
  const double v = 0.5 + x * std::sqrt(4.0 - x * x) / (4.0 * std::numbers::pi) + std::asin(x / 2.0) / std::numbers::pi;
  return std::clamp(v, 0.0, 1.0);
}

/// Inverse of cdf on [0, 1], by bisection. quantile(0) = -2 and quantile(1) = 2 exactly.
inline double quantile(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("semicircle::quantile: t must lie in [0,1], got " + std::to_string(t));
  if (t == 0.0) return -2.0;
  if (t == 1.0) return 2.0;
  double lo = -2.0, hi = 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (cdf(mid) < t) lo = mid; else hi = mid;
  }
  return std::abs(cdf(lo) - t) <= std::abs(cdf(hi) - t) ? lo : hi;
}

/// gamma_i = quantile(i / n), 1-based i.
inline double classical_location(std::int64_t i, std::int64_t n) {
  if (n < 1 || i < 1 || i > n) throw std::out_of_range("classical_location: need 1 <= i <= n");
  if (i == n) return 2.0;
  if (2 * i == n) return 0.0;
  return quantile(static_cast<double>(i) / static_cast<double>(n));
}

/// Stieltjes transform of the semicircle law: the root of m^2 + z m + 1 = 0 with Im m > 0.
/// Both roots are formed and the upper-half-plane one is kept, so no branch cut needs care.
inline cplx stieltjes(const SpectralPoint& p) {
  if (!(p.eta > 0.0)) throw std::domain_error("semicircle::stieltjes: eta must be > 0");
  const cplx z = p.z();
  const cplx s = std::sqrt(z * z - 4.0);
  const cplx r1 = 0.5 * (-z + s);
  const cplx r2 = 0.5 * (-z - s);
  // The roots multiply to 1, so the upper one also has |m| <= 1. Use it to
  // recompute the other one when cancellation makes the direct formula inaccurate.
  cplx m = r1.imag() > r2.imag() ? r1 : r2;
  if (std::abs(m) < 0.5) m = 1.0 / (r1.imag() > r2.imag() ? r2 : r1);
  return m;
}

/// Psi(z) = sqrt(Im m_sc / (n eta)) + 1 / (n eta).
inline double psi(const SpectralPoint& p, std::int64_t n) {
  if (n < 1) throw std::invalid_argument("semicircle::psi: n must be positive");
  const double neta = static_cast<double>(n) * p.eta;
  return std::sqrt(stieltjes(p).imag() / neta) + 1.0 / neta;
}

/// k-th moment: 0 for odd k, Catalan(k/2) for even k.
inline double moment(unsigned k) noexcept {
  if (k % 2 != 0) return 0.0;
  const unsigned m = k / 2;
  double c = 1.0;
  for (unsigned j = 0; j < m; ++j) c = c * 2.0 * (2.0 * j + 1.0) / (j + 2.0);
  return c;
}

}  // namespace semicircle
}  // namespace wigner
