#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <sstream>
#include <string>
#include <system_error>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "rng.hpp"

namespace wigner {

enum class Beta : int { real = 1, complex = 2 };

inline int beta_value(Beta b) noexcept { return static_cast<int>(b); }

inline Beta beta_from_int(int b) {
  if (b == 1) return Beta::real;
  if (b == 2) return Beta::complex;
  throw std::invalid_argument("beta must be 1 or 2, got " + std::to_string(b));
}

template <class Scalar>
inline constexpr bool is_complex_v = !std::is_same_v<Scalar, double>;

template <class Scalar>
inline constexpr Beta beta_of = is_complex_v<Scalar> ? Beta::complex : Beta::real;

template <class Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline double abs2(double v) noexcept { return v * v; }
inline double abs2(const std::complex<double>& v) noexcept { return std::norm(v); }
inline double conj_of(double v) noexcept { return v; }
inline std::complex<double> conj_of(const std::complex<double>& v) noexcept { return std::conj(v); }

/// Law of one matrix entry. A complex entry is X + iY with X, Y i.i.d. copies of the
/// component law, so every mixed moment E[Re^l Im^m] factorizes and is known exactly.
class EntryDistribution {
 public:
  enum class Kind { gaussian, three_point_scaled, custom_discrete };
  static constexpr int kMaxDeclared = 4;

  /// Component law N(0, scale^2).
  static EntryDistribution gaussian(double scale, bool is_complex) {
    EntryDistribution d(Kind::gaussian, scale, is_complex);
    d.declare(kMaxDeclared);
    return d;
  }

  /// Component law scale * {-sqrt3 w.p. 1/6, 0 w.p. 2/3, +sqrt3 w.p. 1/6}; variance scale^2,
  /// fourth moment 3 scale^4, i.e. Gaussian up to order 4.
  static EntryDistribution three_point(double scale, bool is_complex) {
    EntryDistribution d(Kind::three_point_scaled, scale, is_complex);
    d.support_ = {-std::numbers::sqrt3, 0.0, std::numbers::sqrt3};
    d.weights_ = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
    d.check_weights();
    d.declare(kMaxDeclared);
    return d;
  }

  /// Component law scale * support[k] with probability weights[k].
  static EntryDistribution discrete(std::vector<double> support, std::vector<double> weights, double scale,
                                    bool is_complex, int declared_order = kMaxDeclared) {
    if (support.size() != weights.size() || support.empty())
      throw std::invalid_argument("EntryDistribution::discrete: support and weights must be non-empty and equal length");
    EntryDistribution d(Kind::custom_discrete, scale, is_complex);
    d.support_ = std::move(support);
    d.weights_ = std::move(weights);
    d.check_weights();
    d.declare(declared_order);
    return d;
  }

  static EntryDistribution rademacher(double scale, bool is_complex) {
    return discrete({-1.0, 1.0}, {0.5, 0.5}, scale, is_complex);
  }

  Kind kind() const noexcept { return kind_; }
  double scale() const noexcept { return scale_; }
  bool is_complex() const noexcept { return is_complex_; }
  const std::vector<double>& support() const noexcept { return support_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  int declared_order() const noexcept { return declared_order_; }

  /// Exact E[X^k] of the component law, any order.
  double component_moment(int k) const {
    if (k < 0) throw std::invalid_argument("component_moment: negative order");
    if (kind_ == Kind::gaussian) {
      if (k % 2) return 0.0;
      double df = 1.0;
      for (int j = k - 1; j > 1; j -= 2) df *= j;
      return df * std::pow(scale_, k);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) s += weights_[i] * std::pow(scale_ * support_[i], k);
    return s;
  }

  /// Exact E[Re^l Im^m], any order.
  double mixed_moment(int l, int m) const {
    if (!is_complex_) return m == 0 ? component_moment(l) : 0.0;
    return component_moment(l) * component_moment(m);
  }

  /// Declared E[Re^l Im^m] for l + m <= declared_order(); throws beyond that.
  double declared_moment(int l, int m) const {
    if (l < 0 || m < 0 || l + m > declared_order_)
      throw std::out_of_range("declared_moment: (" + std::to_string(l) + "," + std::to_string(m) +
                              ") not declared (order " + std::to_string(declared_order_) + ")");
    return declared_[l][m];
  }

  double variance() const { return mixed_moment(2, 0) + mixed_moment(0, 2); }

  template <class URBG>
  double sample_component(URBG& g) const {
    if (kind_ == Kind::gaussian) return std::normal_distribution<double>(0.0, scale_)(g);
    const double u = std::generate_canonical<double, 53>(g);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights_.size(); ++i) {
      acc += weights_[i];
      if (u < acc) return scale_ * support_[i];
    }
    return scale_ * support_.back();
  }

  template <class Scalar, class URBG>
  Scalar sample(URBG& g) const {
    if constexpr (is_complex_v<Scalar>) {
      const double re = sample_component(g);
      const double im = is_complex_ ? sample_component(g) : 0.0;
      return {re, im};
    } else {
      if (is_complex_) throw std::logic_error("EntryDistribution: complex law sampled into a real matrix");
      return sample_component(g);
    }
  }

  std::string describe() const {
    std::string k = kind_ == Kind::gaussian ? "gaussian" : kind_ == Kind::three_point_scaled ? "three_point_scaled" : "custom_discrete";
    return k + (is_complex_ ? "/complex" : "/real");
  }

 private:
  EntryDistribution(Kind k, double scale, bool is_complex) : kind_(k), scale_(scale), is_complex_(is_complex) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("EntryDistribution: scale must be positive");
  }

  void check_weights() const {
    double s = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0)) throw std::invalid_argument("EntryDistribution: negative weight");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-15) throw std::invalid_argument("EntryDistribution: weights must sum to 1");
  }

  void declare(int order) {
    if (order < 0 || order > kMaxDeclared) throw std::invalid_argument("EntryDistribution: declared order must be in [0,4]");
    declared_order_ = order;
    for (auto& row : declared_) row.fill(std::numeric_limits<double>::quiet_NaN());
    for (int l = 0; l <= order; ++l)
      for (int m = 0; l + m <= order; ++m) declared_[l][m] = mixed_moment(l, m);
    if (order >= 1 && (std::abs(declared_[1][0]) > 1e-12 || std::abs(declared_[0][1]) > 1e-12))
      throw std::invalid_argument("EntryDistribution: law must be centred");
  }

  Kind kind_;
  double scale_;
  bool is_complex_;
  std::vector<double> support_;
  std::vector<double> weights_;
  int declared_order_ = 0;
  std::array<std::array<double, kMaxDeclared + 1>, kMaxDeclared + 1> declared_{};
};

struct MomentDeviation {
  int l = 0;
  int m = 0;
  double a = 0.0;
  double b = 0.0;
  double deviation = 0.0;
};

struct MomentMatchReport {
  double max_abs_deviation = 0.0;
  std::vector<MomentDeviation> per_moment;
};

/// Compares declared mixed moments E[Re^l Im^m] for all l + m <= k. Exact, no sampling.
inline MomentMatchReport validate_moment_match(const EntryDistribution& a, const EntryDistribution& b, int k) {
  if (k < 0 || k > EntryDistribution::kMaxDeclared) throw std::invalid_argument("validate_moment_match: k must be in [0,4]");
  if (a.declared_order() < k || b.declared_order() < k)
    throw std::invalid_argument("validate_moment_match: a distribution does not declare moments through order " + std::to_string(k));
  MomentMatchReport r;
  for (int l = 0; l <= k; ++l)
    for (int m = 0; l + m <= k; ++m) {
      MomentDeviation d{l, m, a.declared_moment(l, m), b.declared_moment(l, m), 0.0};
      d.deviation = std::abs(d.a - d.b);
      r.max_abs_deviation = std::max(r.max_abs_deviation, d.deviation);
      r.per_moment.push_back(d);
    }
  return r;
}

/// Side conditions of the Bai-Pan CLT: E v^3 = 0 (real); E v^2 = 0 and E v^2 conj(v) = 0 (complex).
struct CltConditions {
  std::complex<double> second{};   // E v^2
  std::complex<double> third{};    // E v^3 (real laws) or E v |v|^2 (complex laws)
  bool satisfied = false;
};

inline CltConditions clt_conditions(const EntryDistribution& d) {
  CltConditions c;
  auto mm = [&](int l, int m) { return d.mixed_moment(l, m); };
  if (!d.is_complex()) {
    c.second = mm(2, 0);
    c.third = mm(3, 0);
    c.satisfied = std::abs(c.third) < 1e-12;
  } else {
    c.second = {mm(2, 0) - mm(0, 2), 2.0 * mm(1, 1)};
    c.third = {mm(3, 0) + mm(1, 2), mm(2, 1) + mm(0, 3)};
    c.satisfied = std::abs(c.second) < 1e-12 && std::abs(c.third) < 1e-12;
  }
  return c;
}

struct WignerSpec {
  std::string ensemble;  // registry id, for reports
  std::int64_t n = 0;
  Beta beta = Beta::real;
  EntryDistribution offdiag = EntryDistribution::gaussian(1.0, false);
  EntryDistribution diag = EntryDistribution::gaussian(std::numbers::sqrt2, false);
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1) throw std::invalid_argument("WignerSpec: n must be positive");
    if (diag.is_complex()) throw std::invalid_argument("WignerSpec: diagonal law must be real");
    if (beta == Beta::real && offdiag.is_complex()) throw std::invalid_argument("WignerSpec: beta=1 needs a real off-diagonal law");
  }
};

namespace detail {
inline void require_n(std::int64_t n) {
  if (n < 2) throw std::invalid_argument("ensemble spec: n must be >= 2, got " + std::to_string(n));
}
}  // namespace detail

/// N(0,1) off the diagonal, N(0,2) on it.
inline WignerSpec goe_spec(std::int64_t n, std::uint64_t seed) {
  detail::require_n(n);
  return {"goe", n, Beta::real, EntryDistribution::gaussian(1.0, false),
          EntryDistribution::gaussian(std::numbers::sqrt2, false), seed};
}

/// N(0,1/2) + i N(0,1/2) above the diagonal, N(0,1) on it.
inline WignerSpec gue_spec(std::int64_t n, std::uint64_t seed) {
  detail::require_n(n);
  return {"gue", n, Beta::complex, EntryDistribution::gaussian(std::sqrt(0.5), true),
          EntryDistribution::gaussian(1.0, false), seed};
}

/// Three-point law matching GOE through order 4, diagonal included (scaled by sqrt 2).
inline WignerSpec matched_real_spec(std::int64_t n, std::uint64_t seed) {
  detail::require_n(n);
  return {"matched_real", n, Beta::real, EntryDistribution::three_point(1.0, false),
          EntryDistribution::three_point(std::numbers::sqrt2, false), seed};
}

/// (X + iY)/sqrt2 with X, Y three-point above the diagonal; real three-point on it.
inline WignerSpec matched_complex_spec(std::int64_t n, std::uint64_t seed) {
  detail::require_n(n);
  return {"matched_complex", n, Beta::complex, EntryDistribution::three_point(std::sqrt(0.5), true),
          EntryDistribution::three_point(1.0, false), seed};
}

/// Symmetric +-1 entries: matches GOE through order 2 only.
inline WignerSpec rademacher_real_spec(std::int64_t n, std::uint64_t seed) {
  detail::require_n(n);
  return {"rademacher_real", n, Beta::real, EntryDistribution::rademacher(1.0, false),
          EntryDistribution::rademacher(std::numbers::sqrt2, false), seed};
}

inline WignerSpec rademacher_complex_spec(std::int64_t n, std::uint64_t seed) {
  detail::require_n(n);
  return {"rademacher_complex", n, Beta::complex, EntryDistribution::rademacher(std::sqrt(0.5), true),
          EntryDistribution::rademacher(1.0, false), seed};
}

inline const std::vector<std::string>& ensemble_ids() {
  static const std::vector<std::string> ids{"goe", "gue", "matched_real", "matched_complex", "rademacher_real",
                                            "rademacher_complex"};
  return ids;
}

inline WignerSpec make_spec(const std::string& id, std::int64_t n, std::uint64_t seed) {
  if (id == "goe") return goe_spec(n, seed);
  if (id == "gue") return gue_spec(n, seed);
  if (id == "matched_real") return matched_real_spec(n, seed);
  if (id == "matched_complex") return matched_complex_spec(n, seed);
  if (id == "rademacher_real") return rademacher_real_spec(n, seed);
  if (id == "rademacher_complex") return rademacher_complex_spec(n, seed);
  throw std::invalid_argument("unknown ensemble '" + id + "'");
}

namespace detail {
inline std::string spec_number(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("spec_number: formatting failed");
  return {buf, p};
}

inline double spec_parse(const std::string& s, const std::string& key) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw std::invalid_argument("spec " + key + ": bad number '" + s + "'");
  return v;
}

inline std::vector<double> spec_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(spec_parse(item, key));
  return out;
}

inline void law_to_kv(std::map<std::string, std::string>& kv, const std::string& pre, const EntryDistribution& d) {
  using K = EntryDistribution::Kind;
  kv[pre + ".kind"] = d.kind() == K::gaussian ? "gaussian" : d.kind() == K::three_point_scaled ? "three_point" : "discrete";
  kv[pre + ".scale"] = spec_number(d.scale());
  kv[pre + ".complex"] = d.is_complex() ? "1" : "0";
  if (d.kind() == K::custom_discrete) {
    std::string sup, w;
    for (std::size_t i = 0; i < d.support().size(); ++i) {
      sup += (i ? "," : "") + spec_number(d.support()[i]);
      w += (i ? "," : "") + spec_number(d.weights()[i]);
    }
    kv[pre + ".support"] = sup;
    kv[pre + ".weights"] = w;
    kv[pre + ".declared_order"] = std::to_string(d.declared_order());
  }
}

inline EntryDistribution law_from_kv(const std::map<std::string, std::string>& kv, const std::string& pre) {
  auto get = [&](const std::string& k) {
    auto it = kv.find(pre + "." + k);
    if (it == kv.end()) throw std::invalid_argument("spec: missing key " + pre + "." + k);
    return it->second;
  };
  const std::string kind = get("kind");
  const double scale = spec_parse(get("scale"), pre + ".scale");
  const bool cplx_law = kv.count(pre + ".complex") && get("complex") == "1";
  if (kind == "gaussian") return EntryDistribution::gaussian(scale, cplx_law);
  if (kind == "three_point") return EntryDistribution::three_point(scale, cplx_law);
  if (kind == "discrete")
    return EntryDistribution::discrete(spec_list(get("support"), pre + ".support"), spec_list(get("weights"), pre + ".weights"),
                                       scale, cplx_law, static_cast<int>(spec_parse(get("declared_order"), pre)));
  throw std::invalid_argument("spec: unknown " + pre + ".kind '" + kind + "'");
}
}  // namespace detail

/// Flat key-value block: ensemble, n, beta, offdiag.*, diag.*, seed.
inline std::map<std::string, std::string> spec_to_kv(const WignerSpec& s) {
  std::map<std::string, std::string> kv{{"ensemble", s.ensemble},
                                        {"n", std::to_string(s.n)},
                                        {"beta", std::to_string(static_cast<int>(s.beta))},
                                        {"seed", std::to_string(s.seed)}};
  detail::law_to_kv(kv, "offdiag", s.offdiag);
  detail::law_to_kv(kv, "diag", s.diag);
  return kv;
}

inline WignerSpec spec_from_kv(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw std::invalid_argument("spec: missing key " + k);
    return it->second;
  };
  WignerSpec s;
  s.ensemble = kv.count("ensemble") ? get("ensemble") : "custom";
  s.n = static_cast<std::int64_t>(detail::spec_parse(get("n"), "n"));
  const int beta = static_cast<int>(detail::spec_parse(get("beta"), "beta"));
  if (beta != 1 && beta != 2) throw std::invalid_argument("spec: beta must be 1 or 2");
  s.beta = static_cast<Beta>(beta);
  s.offdiag = detail::law_from_kv(kv, "offdiag");
  s.diag = detail::law_from_kv(kv, "diag");
  s.seed = std::stoull(get("seed"));
  s.validate();
  return s;
}

/// n x n matrix with entries v_ij / sqrt(n), exactly symmetric (Hermitian).
template <class Scalar>
struct WignerMatrix {
  MatrixT<Scalar> entries;
  std::uint64_t seed = 0;

  std::int64_t n() const noexcept { return entries.rows(); }
  static constexpr Beta beta() noexcept { return beta_of<Scalar>; }
};

/// Unscaled entry v_ij (i <= j, 0-based) of a spec. Each site owns its own keyed stream,
/// so any subset of sites can be regenerated without touching the rest.
template <class Scalar>
Scalar sample_site(const WignerSpec& spec, std::int64_t i, std::int64_t j) {
  if (i > j) return conj_of(sample_site<Scalar>(spec, j, i));
  if (i == j) {
    KeyedStream g(spec.seed, {stream_tag::diag, static_cast<std::uint64_t>(i)});
    return spec.diag.template sample<Scalar>(g);
  }
  KeyedStream g(spec.seed, {stream_tag::offdiag, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
  return spec.offdiag.template sample<Scalar>(g);
}

template <class Scalar>
WignerMatrix<Scalar> sample_wigner(const WignerSpec& spec) {
  spec.validate();
  if (spec.beta != beta_of<Scalar>) throw std::invalid_argument("sample_wigner: scalar type does not match spec beta");
  const auto n = spec.n;
  const double s = 1.0 / std::sqrt(static_cast<double>(n));
  WignerMatrix<Scalar> m{MatrixT<Scalar>(n, n), spec.seed};
  for (std::int64_t j = 0; j < n; ++j)
    for (std::int64_t i = 0; i <= j; ++i) {
      const Scalar v = sample_site<Scalar>(spec, i, j) * s;
      m.entries(i, j) = v;
      m.entries(j, i) = conj_of(v);
    }
  return m;
}

/// Uniform point on the unit sphere of R^n (real) or C^n (complex): a normalized Gaussian vector.
template <class Scalar>
VectorT<Scalar> haar_overlap(std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("haar_overlap: n must be positive");
  KeyedStream g(seed, {stream_tag::haar});
  std::normal_distribution<double> normal;
  VectorT<Scalar> y(n);
  for (std::int64_t i = 0; i < n; ++i) {
    if constexpr (is_complex_v<Scalar>) {
      const double re = normal(g);
      y(i) = Scalar(re, normal(g));
    } else {
      y(i) = normal(g);
    }
  }
  y /= y.norm();
  return y;
}

struct MomentAuditRow {
  int l = 0;
  int m = 0;
  double declared = 0.0;
  double empirical = 0.0;
  double std_error = 0.0;
  double z_score = 0.0;
};

/// Empirical mixed moments from `samples` draws against the declared ones. Standard
/// errors come from the exact higher moments of the law.
inline std::vector<MomentAuditRow> moment_audit(const EntryDistribution& d, std::int64_t samples, std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("moment_audit: need at least 2 samples");
  const int K = d.declared_order();
  std::array<std::array<double, 5>, 5> acc{};
  KeyedStream g(seed, {stream_tag::matrix});
  for (std::int64_t s = 0; s < samples; ++s) {
    const auto v = d.template sample<std::complex<double>>(g);
    std::array<double, 5> pr{1, 0, 0, 0, 0}, pi{1, 0, 0, 0, 0};
    for (int k = 1; k <= K; ++k) {
      pr[k] = pr[k - 1] * v.real();
      pi[k] = pi[k - 1] * v.imag();
    }
    for (int l = 0; l <= K; ++l)
      for (int m = 0; l + m <= K; ++m) acc[l][m] += pr[l] * pi[m];
  }
  std::vector<MomentAuditRow> rows;
  for (int l = 0; l <= K; ++l)
    for (int m = 0; l + m <= K; ++m) {
      MomentAuditRow r{l, m, d.declared_moment(l, m), acc[l][m] / static_cast<double>(samples), 0.0, 0.0};
      const double var = d.mixed_moment(2 * l, 2 * m) - r.declared * r.declared;
      r.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(samples));
      // Degenerate moments (e.g. E X^2 of a +-1 law) are matched up to rounding only.
      const bool degenerate = r.std_error <= 1e-12 * std::max(1.0, std::abs(r.declared));
      const bool equal = std::abs(r.empirical - r.declared) <= 1e-12 * std::max(1.0, std::abs(r.declared));
      r.z_score = !degenerate ? (r.empirical - r.declared) / r.std_error
                              : (equal ? 0.0 : std::numeric_limits<double>::infinity());
      rows.push_back(r);
    }
  return rows;
}

}  // namespace wigner
