#pragma once

#include <algorithm>
#include <atomic>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef lapack_complex_float
#define lapack_complex_float std::complex<float>
#endif
#ifndef lapack_complex_double
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include <Eigen/Dense>

extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace wigner {

class DecompositionError : public std::runtime_error {
 public:
  DecompositionError(const std::string& routine, long info, std::uint64_t seed)
      : std::runtime_error(routine + " failed (info=" + std::to_string(info) + ") on matrix with seed " +
                           std::to_string(seed)),
        info_(info),
        seed_(seed) {}
  long info() const noexcept { return info_; }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  long info_;
  std::uint64_t seed_;
};

/// Threads the BLAS backend may use inside one decomposition. Replicas are the unit of
/// parallelism, so the default is 1; values never depend on it, only timing does.
inline std::atomic<int>& blas_threads() {
  static std::atomic<int> n{1};
  return n;
}

inline void apply_blas_threads() {
  if (openblas_set_num_threads) openblas_set_num_threads(std::max(1, blas_threads().load()));
}

namespace detail {

// Full decomposition through the MRRR drivers (?syevr / ?heevr). Eigenvalues come back
// ascending; eigenvector columns are orthonormal.
inline void eigh(const Eigen::MatrixXd& a, Eigen::VectorXd& w, Eigen::MatrixXd& z, std::uint64_t seed) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Eigen::MatrixXd work = a;
  w.resize(n);
  z.resize(n, n);
  if (n == 0) return;
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(n));
  lapack_int m = 0;
  const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'A', 'U', n, work.data(), n, 0.0, 0.0, 0, 0, 0.0, &m,
                                         w.data(), z.data(), n, isuppz.data());
  if (info != 0 || m != n) throw DecompositionError("dsyevr", info != 0 ? info : -1000 - m, seed);
}

inline void eigh(const Eigen::MatrixXcd& a, Eigen::VectorXd& w, Eigen::MatrixXcd& z, std::uint64_t seed) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Eigen::MatrixXcd work = a;
  w.resize(n);
  z.resize(n, n);
  if (n == 0) return;
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(n));
  lapack_int m = 0;
  const lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', 'A', 'U', n, work.data(), n, 0.0, 0.0, 0, 0, 0.0, &m,
                                         w.data(), z.data(), n, isuppz.data());
  if (info != 0 || m != n) throw DecompositionError("zheevr", info != 0 ? info : -1000 - m, seed);
}

inline Eigen::VectorXd eigvalsh(const Eigen::MatrixXd& a, std::uint64_t seed) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Eigen::MatrixXd work = a;
  Eigen::VectorXd w(n);
  if (n == 0) return w;
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'U', n, work.data(), n, w.data());
  if (info != 0) throw DecompositionError("dsyevd", info, seed);
  return w;
}

inline Eigen::VectorXd eigvalsh(const Eigen::MatrixXcd& a, std::uint64_t seed) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Eigen::MatrixXcd work = a;
  Eigen::VectorXd w(n);
  if (n == 0) return w;
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'U', n, work.data(), n, w.data());
  if (info != 0) throw DecompositionError("zheevd", info, seed);
  return w;
}

}  // namespace detail
}  // namespace wigner
