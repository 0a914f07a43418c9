#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ensembles.hpp"
#include "resolvent.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace wigner {

using Site = std::pair<std::int64_t, std::int64_t>;  // (i, j), 0-based, i <= j

/// Bijection phi between upper-triangle sites {(i, j) : i <= j} and ranks 1..n(n+1)/2.
class SiteOrdering {
 public:
  /// Row-major over the upper triangle: (0,0), (0,1), ..., (0,n-1), (1,1), ...
  static SiteOrdering row_major(std::int64_t n) {
    if (n < 1) throw std::invalid_argument("SiteOrdering: n must be positive");
    std::vector<Site> sites;
    sites.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = i; j < n; ++j) sites.emplace_back(i, j);
    return SiteOrdering(n, std::move(sites));
  }

  /// Any bijection, given as the site sequence of ranks 1, 2, ...
  static SiteOrdering from_sequence(std::int64_t n, std::vector<Site> sites) { return SiteOrdering(n, std::move(sites)); }

  std::int64_t n() const noexcept { return n_; }
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(sites_.size()); }

  /// phi(i, j), 1-based rank. Accepts either orientation of an off-diagonal site.
  std::int64_t rank(std::int64_t i, std::int64_t j) const {
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= n_) throw std::out_of_range("SiteOrdering::rank: site out of range");
    return rank_of_[static_cast<std::size_t>(tri_index(i, j))];
  }

  /// phi^{-1}(rank).
  const Site& site(std::int64_t rank) const {
    if (rank < 1 || rank > size()) throw std::out_of_range("SiteOrdering::site: rank out of range");
    return sites_[static_cast<std::size_t>(rank - 1)];
  }

 private:
  SiteOrdering(std::int64_t n, std::vector<Site> sites) : n_(n), sites_(std::move(sites)) {
    const auto total = n * (n + 1) / 2;
    if (static_cast<std::int64_t>(sites_.size()) != total) throw std::invalid_argument("SiteOrdering: wrong number of sites");
    rank_of_.assign(static_cast<std::size_t>(total), 0);
    for (std::size_t k = 0; k < sites_.size(); ++k) {
      auto [i, j] = sites_[k];
      if (i > j) std::swap(i, j);
      sites_[k] = {i, j};
      if (i < 0 || j >= n) throw std::invalid_argument("SiteOrdering: site out of range");
      auto& slot = rank_of_[static_cast<std::size_t>(tri_index(i, j))];
      if (slot != 0) throw std::invalid_argument("SiteOrdering: duplicate site");
      slot = static_cast<std::int64_t>(k) + 1;
    }
  }

  std::int64_t tri_index(std::int64_t i, std::int64_t j) const noexcept { return i * n_ - i * (i - 1) / 2 + (j - i); }

  std::int64_t n_;
  std::vector<Site> sites_;
  std::vector<std::int64_t> rank_of_;
};

inline SiteOrdering make_ordering(std::int64_t n) { return SiteOrdering::row_major(n); }

/// M^gamma: sites with phi <= gamma carry ensemble A's entry, the rest ensemble B's.
/// Entries come from each spec's keyed per-site streams, so M^0 is exactly sample_wigner(B)
/// and M^N exactly sample_wigner(A).
template <class Scalar>
class SwapState {
 public:
  SwapState(WignerSpec a, WignerSpec b, std::shared_ptr<const SiteOrdering> ordering, std::int64_t gamma = 0)
      : a_(std::move(a)), b_(std::move(b)), ordering_(std::move(ordering)) {
    a_.validate();
    b_.validate();
    if (a_.n != b_.n || a_.beta != b_.beta) throw std::invalid_argument("SwapState: specs must share n and beta");
    if (!ordering_ || ordering_->n() != a_.n) throw std::invalid_argument("SwapState: ordering does not match n");
    if (gamma < 0 || gamma > ordering_->size()) throw std::out_of_range("SwapState: gamma out of range");
    matrix_ = sample_wigner<Scalar>(b_);
    matrix_.seed = b_.seed;
    for (std::int64_t g = 1; g <= gamma; ++g) write_site(ordering_->site(g), a_);
    gamma_ = gamma;
  }

  std::int64_t gamma() const noexcept { return gamma_; }
  std::int64_t steps() const noexcept { return ordering_->size(); }
  const WignerMatrix<Scalar>& matrix() const noexcept { return matrix_; }
  const WignerSpec& spec_a() const noexcept { return a_; }
  const WignerSpec& spec_b() const noexcept { return b_; }
  const SiteOrdering& ordering() const noexcept { return *ordering_; }

  /// The site that the step into the current gamma replaced.
  const Site& last_site() const {
    if (gamma_ == 0) throw std::logic_error("SwapState: no step taken yet");
    return ordering_->site(gamma_);
  }

  /// Scaled entries (v_ab / sqrt n) of both ensembles at a site.
  std::pair<Scalar, Scalar> entries_at(const Site& s) const {
    const double sc = 1.0 / std::sqrt(static_cast<double>(a_.n));
    return {sample_site<Scalar>(a_, s.first, s.second) * sc, sample_site<Scalar>(b_, s.first, s.second) * sc};
  }

  /// In-place step gamma -> gamma + 1.
  void advance() {
    if (gamma_ >= steps()) throw std::logic_error("SwapState: already at the final step");
    ++gamma_;
    write_site(ordering_->site(gamma_), a_);
  }

 private:
  void write_site(const Site& s, const WignerSpec& spec) {
    const double sc = 1.0 / std::sqrt(static_cast<double>(spec.n));
    const Scalar v = sample_site<Scalar>(spec, s.first, s.second) * sc;
    matrix_.entries(s.first, s.second) = v;
    matrix_.entries(s.second, s.first) = conj_of(v);
  }

  WignerSpec a_;
  WignerSpec b_;
  std::shared_ptr<const SiteOrdering> ordering_;
  WignerMatrix<Scalar> matrix_;
  std::int64_t gamma_ = 0;
};

/// Value-semantics step: returns the successor state.
template <class Scalar>
SwapState<Scalar> swap_site(SwapState<Scalar> state) {
  state.advance();
  return state;
}

/// scale * (1 - delta_ab/2) (v E^{ab} + conj(v) E^{ba}): a Hermitian perturbation of rank <= 2.
struct Rank2Perturbation {
  std::int64_t a = 0;
  std::int64_t b = 0;
  cplx value{};
  double scale = 1.0;

  /// Entry added at (a, b); (b, a) receives its conjugate. For a == b this is the single
  /// diagonal increment, which must be real.
  cplx entry() const noexcept { return scale * value; }
};

struct Rank2Update {
  ResolventEval resolvent;     // exact resolvent of Q + perturbation
  Eigen::MatrixXcd truncated;  // R + sum_{k=1..4} (-R V)^k R
  double capacitance_det = 0.0;
  bool fallback = false;       // capacitance ill-conditioned: re-inverted directly
};

namespace detail {
// (-R D) T for the perturbation D, using that R D has at most two nonzero columns.
inline Eigen::MatrixXcd minus_r_delta_times(const Eigen::MatrixXcd& r, const Rank2Perturbation& p, const Eigen::MatrixXcd& t) {
  const cplx e = p.entry();
  if (p.a == p.b) return -(r.col(p.a) * (e.real() * t.row(p.a)));
  // D = e E^{ab} + conj(e) E^{ba}; (R D)_{:,b} = R_{:,a} e, (R D)_{:,a} = R_{:,b} conj(e).
  return -(r.col(p.a) * (e * t.row(p.b)) + r.col(p.b) * (std::conj(e) * t.row(p.a)));
}
}  // namespace detail

/// Resolvent of Q + D from the resolvent R of Q, by the Woodbury identity on span{e_a, e_b}:
///   S = R - (R U) C (I + U^T R U C)^{-1} (U^T R).
/// Also returns the order-4 truncated Neumann expansion for comparison.
template <class Scalar>
Rank2Update resolvent_update(const MatrixT<Scalar>& q, const ResolventEval& r, const Rank2Perturbation& p) {
  if (!r.G) throw std::invalid_argument("resolvent_update: needs a full-matrix resolvent");
  const Eigen::MatrixXcd& R = *r.G;
  const auto n = R.rows();
  if (p.a < 0 || p.b < 0 || p.a >= n || p.b >= n) throw std::out_of_range("resolvent_update: site out of range");
  const cplx e = p.entry();
  if (p.a == p.b && std::abs(e.imag()) > 0.0) throw std::invalid_argument("resolvent_update: diagonal perturbation must be real");

  Rank2Update out;
  out.resolvent.z = r.z;
  out.resolvent.mode = ResolventMode::full_matrix;

  if (p.a == p.b) {
    const cplx k = 1.0 + R(p.a, p.a) * e.real();
    out.capacitance_det = std::abs(k);
    if (std::abs(k) >= 1e-12) {
      out.resolvent.G = R - (R.col(p.a) * (e.real() / k)) * R.row(p.a);
    }
  } else {
    const std::array<std::int64_t, 2> idx{p.a, p.b};
    Eigen::Matrix2cd c;
    c << 0.0, e, std::conj(e), 0.0;
    Eigen::Matrix2cd rsub;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) rsub(i, j) = R(idx[i], idx[j]);
    const Eigen::Matrix2cd k = Eigen::Matrix2cd::Identity() + rsub * c;
    out.capacitance_det = std::abs(k.determinant());
    if (out.capacitance_det >= 1e-12) {
      Eigen::MatrixXcd ru(n, 2), ur(2, n);
      ru << R.col(p.a), R.col(p.b);
      ur << R.row(p.a), R.row(p.b);
      out.resolvent.G = R - ru * (c * k.inverse()) * ur;
    }
  }
  if (!out.resolvent.G) {
    out.fallback = true;
    MatrixT<Scalar> m = q;
    if constexpr (is_complex_v<Scalar>) {
      m(p.a, p.b) += e;
      if (p.a != p.b) m(p.b, p.a) += std::conj(e);
    } else {
      m(p.a, p.b) += e.real();
      if (p.a != p.b) m(p.b, p.a) += e.real();
    }
    out.resolvent.G = green<Scalar>(m, r.z).G;
  }
  out.resolvent.m_n = out.resolvent.G->trace() / static_cast<double>(n);

  out.truncated = R;
  Eigen::MatrixXcd term = R;
  for (int k = 1; k <= 4; ++k) {
    term = detail::minus_r_delta_times(R, p, term);
    out.truncated += term;
  }
  return out;
}

/// Observables compared along a swap chain.
struct ObservableSpec {
  enum class Kind { contour, stieltjes, green_xx };
  Kind kind = Kind::stieltjes;
  Eigen::VectorXcd x;        // contour, green_xx
  SpectralPoint z{0.0, 1.0};  // stieltjes, green_xx
  double s1 = -0.5, s2 = 0.5, eta = 0.05, quad_step = 0.005;  // contour

  static ObservableSpec stieltjes_at(SpectralPoint p) {
    ObservableSpec o;
    o.kind = Kind::stieltjes;
    o.z = p;
    return o;
  }
  static ObservableSpec green_xx_at(Eigen::VectorXcd x, SpectralPoint p) {
    ObservableSpec o;
    o.kind = Kind::green_xx;
    o.x = std::move(x);
    o.z = p;
    return o;
  }
  static ObservableSpec contour(Eigen::VectorXcd x, double s1, double s2, double eta, double quad_step) {
    ObservableSpec o;
    o.kind = Kind::contour;
    o.x = std::move(x);
    o.s1 = s1;
    o.s2 = s2;
    o.eta = eta;
    o.quad_step = quad_step;
    return o;
  }
  bool resolvent_based() const noexcept { return kind != Kind::contour; }
};

/// Observable from a full resolvent (stieltjes / green_xx kinds).
inline cplx observable_from_resolvent(const ObservableSpec& o, const Eigen::MatrixXcd& g) {
  if (o.kind == ObservableSpec::Kind::stieltjes) return g.trace() / static_cast<double>(g.rows());
  if (o.kind == ObservableSpec::Kind::green_xx) return o.x.dot(g * o.x);
  throw std::logic_error("observable_from_resolvent: contour observable needs a decomposition");
}

template <class Scalar>
cplx evaluate_observable(const MatrixT<Scalar>& m, const ObservableSpec& o) {
  switch (o.kind) {
    case ObservableSpec::Kind::stieltjes:
      return stieltjes_mn(eigenvalues<Scalar>(m), o.z);
    case ObservableSpec::Kind::green_xx:
      return observable_from_resolvent(o, *green<Scalar>(m, o.z).G);
    case ObservableSpec::Kind::contour: {
      VectorT<Scalar> x;
      if constexpr (is_complex_v<Scalar>) x = o.x;
      else x = o.x.real();
      return contour_observable(decompose<Scalar>(m), x, o.s1, o.s2, o.eta, o.quad_step);
    }
  }
  return {};
}

/// observable(M^gamma) - observable(M^{gamma-1}) for the state's current gamma >= 1. Both
/// matrices share every entry except the swapped site: resolvent observables are obtained
/// from the common R = (Q - z)^{-1}, Q being M^gamma with the site zeroed.
template <class Scalar>
cplx one_step_difference(const SwapState<Scalar>& state, const ObservableSpec& o) {
  const Site s = state.last_site();
  const auto [va, vb] = state.entries_at(s);
  MatrixT<Scalar> q = state.matrix().entries;
  q(s.first, s.second) = Scalar{};
  q(s.second, s.first) = Scalar{};
  if (o.resolvent_based()) {
    const ResolventEval r = green<Scalar>(q, o.z);
    const Rank2Perturbation pa{s.first, s.second, cplx(va), 1.0};
    const Rank2Perturbation pb{s.first, s.second, cplx(vb), 1.0};
    const auto t = resolvent_update<Scalar>(q, r, pa);
    const auto u = resolvent_update<Scalar>(q, r, pb);
    return observable_from_resolvent(o, *t.resolvent.G) - observable_from_resolvent(o, *u.resolvent.G);
  }
  MatrixT<Scalar> prev = state.matrix().entries;
  prev(s.first, s.second) = vb;
  prev(s.second, s.first) = conj_of(vb);
  return evaluate_observable<Scalar>(state.matrix().entries, o) - evaluate_observable<Scalar>(prev, o);
}

struct StepRecord {
  std::int64_t gamma = 0;
  std::int64_t a = 0;  // 0-based
  std::int64_t b = 0;
  cplx delta{};
};

struct SiteSelection {
  bool all = true;
  std::int64_t sample = 0;  // number of sampled steps when !all

  static SiteSelection every_site() { return {true, 0}; }
  static SiteSelection sampled(std::int64_t k) { return {false, k}; }
};

struct TelescopeReport {
  std::vector<StepRecord> per_step;
  cplx total{};                // sum of per-step differences (all) or endpoint difference (sampled)
  cplx endpoint_difference{};  // observable(pure A) - observable(pure B), independently evaluated
  double telescoping_error = 0.0;
};

/// Stream seed of an ensemble inside a swap experiment: the shared seed folded with the
/// ensemble id. Distinct ensembles get independent streams; identical ones coincide.
inline std::uint64_t swap_stream_seed(std::uint64_t seed, const std::string& ensemble) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : ensemble) h = (h ^ c) * 1099511628211ULL;
  return derive_key(seed, {stream_tag::swap_b, h});
}

struct TelescopeOptions {
  std::int64_t refresh_every = 0;  // re-invert every k steps along the chain; 0 means every n steps
  std::shared_ptr<const SiteOrdering> ordering;  // row-major when null
};

/// Replaces B entries by A entries site by site and records one-step differences.
/// With every_site() the recorded differences telescope to observable(A) - observable(B);
/// with sampled(k) only k steps (without replacement, keyed by seed) are evaluated and the
/// total is the directly evaluated endpoint difference.
template <class Scalar>
TelescopeReport telescoping_experiment(WignerSpec spec_a, WignerSpec spec_b, const ObservableSpec& o,
                                       const SiteSelection& sites, std::uint64_t seed, TelescopeOptions opts = {}) {
  if (spec_a.n != spec_b.n || spec_a.beta != spec_b.beta)
    throw std::invalid_argument("telescoping_experiment: specs must share n and beta");
  spec_a.seed = swap_stream_seed(seed, spec_a.ensemble);
  spec_b.seed = swap_stream_seed(seed, spec_b.ensemble);
  const auto n = spec_a.n;
  auto ordering = opts.ordering ? opts.ordering : std::make_shared<const SiteOrdering>(make_ordering(n));
  const std::int64_t refresh = opts.refresh_every > 0 ? opts.refresh_every : n;

  TelescopeReport rep;
  const cplx obs_a = evaluate_observable<Scalar>(sample_wigner<Scalar>(spec_a).entries, o);
  const cplx obs_b = evaluate_observable<Scalar>(sample_wigner<Scalar>(spec_b).entries, o);
  rep.endpoint_difference = obs_a - obs_b;

  if (!sites.all) {
    const auto steps = ordering->size();
    const auto k = std::clamp<std::int64_t>(sites.sample, 0, steps);
    std::vector<std::int64_t> ranks(static_cast<std::size_t>(steps));
    std::iota(ranks.begin(), ranks.end(), 1);
    KeyedStream g(seed, {stream_tag::swap_b, 0x73616d70});
    for (std::int64_t i = 0; i < k; ++i) {  // partial Fisher-Yates
      const auto j = i + static_cast<std::int64_t>(g() % static_cast<std::uint64_t>(steps - i));
      std::swap(ranks[static_cast<std::size_t>(i)], ranks[static_cast<std::size_t>(j)]);
    }
    ranks.resize(static_cast<std::size_t>(k));
    std::sort(ranks.begin(), ranks.end());
    for (auto gamma : ranks) {
      const SwapState<Scalar> st(spec_a, spec_b, ordering, gamma);
      const Site s = st.last_site();
      rep.per_step.push_back({gamma, s.first, s.second, one_step_difference(st, o)});
    }
    rep.total = rep.endpoint_difference;
    return rep;
  }

  SwapState<Scalar> st(spec_a, spec_b, ordering, 0);
  if (o.resolvent_based()) {
    Eigen::MatrixXcd g = *green<Scalar>(st.matrix().entries, o.z).G;
    cplx prev = observable_from_resolvent(o, g);
    for (std::int64_t gamma = 1; gamma <= st.steps(); ++gamma) {
      const Site s = ordering->site(gamma);
      const auto [va, vb] = st.entries_at(s);
      const MatrixT<Scalar> before = st.matrix().entries;
      st.advance();
      if (gamma % refresh == 0 || gamma == st.steps()) {
        g = *green<Scalar>(st.matrix().entries, o.z).G;
      } else {
        ResolventEval r;
        r.z = o.z;
        r.G = std::move(g);
        const Rank2Perturbation p{s.first, s.second, cplx(va) - cplx(vb), 1.0};
        g = *resolvent_update<Scalar>(before, r, p).resolvent.G;
      }
      const cplx cur = observable_from_resolvent(o, g);
      rep.per_step.push_back({gamma, s.first, s.second, cur - prev});
      rep.total += cur - prev;
      prev = cur;
    }
  } else {
    cplx prev = evaluate_observable<Scalar>(st.matrix().entries, o);
    for (std::int64_t gamma = 1; gamma <= st.steps(); ++gamma) {
      st.advance();
      const Site s = st.last_site();
      const cplx cur = evaluate_observable<Scalar>(st.matrix().entries, o);
      rep.per_step.push_back({gamma, s.first, s.second, cur - prev});
      rep.total += cur - prev;
      prev = cur;
    }
  }
  rep.telescoping_error = std::abs(rep.total - rep.endpoint_difference);
  return rep;
}

}  // namespace wigner
