#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "../bridgestats.hpp"
#include "../ensembles.hpp"
#include "../resolvent.hpp"
#include "../rng.hpp"
#include "../semicircle.hpp"
#include "../spectral.hpp"
#include "../swap.hpp"
#include "config.hpp"
#include "parallel.hpp"
#include "persist.hpp"

namespace wigner::harness {

enum class Status { pass, fail, skipped };

inline std::string to_string(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    case Status::skipped: return "skipped";
  }
  return "?";
}

/// One thresholded statistic. `threshold_key` names the entry of the config's threshold table.
struct Statistic {
  std::string name;
  double value = 0.0;
  std::string threshold_key;
  double threshold = 0.0;
  std::string comparison;  // "<=" or ">="
  Status status = Status::skipped;
  std::string note;
};

/// CSV table with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const {
    std::string s;
    auto line = [&s](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
      s += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return s;
  }
};

struct RunReport {
  ExperimentConfig config;
  std::vector<Statistic> statistics;
  std::map<std::string, double> diagnostics;
  std::vector<std::uint64_t> seeds;
  std::vector<std::int64_t> flagged;
  std::map<std::string, Table> tables;
  std::optional<PathEnsemble> paths_a, paths_b;
  std::vector<std::uint64_t> seeds_b;
  std::vector<std::uint64_t> path_seeds_a, path_seeds_b;  // seeds of the persisted (unflagged) paths
  double wall_clock_seconds = 0.0;  // kept out of the report JSON

  bool passed() const {
    for (const auto& s : statistics)
      if (s.status == Status::fail) return false;
    return true;
  }

  /// Deterministic given (config, master seed): no timing, no thread count.
  nlohmann::json to_json() const {
    nlohmann::json j;
    j["config"] = identity_of(config).to_json();
    j["config_hash"] = config_hash(config);
    j["experiment"] = to_string(config.experiment);
    j["replicas"] = {{"requested", config.replicas},
                     {"flagged", static_cast<std::int64_t>(flagged.size())},
                     {"used", config.replicas - static_cast<std::int64_t>(flagged.size())},
                     {"flagged_ids", flagged}};
    j["seeds"] = seeds;
    if (!seeds_b.empty()) j["seeds_b"] = seeds_b;
    j["statistics"] = nlohmann::json::array();
    for (const auto& s : statistics) {
      nlohmann::json e{{"name", s.name},     {"value", s.value},           {"threshold_key", s.threshold_key},
                       {"threshold", s.threshold}, {"comparison", s.comparison}, {"status", to_string(s.status)}};
      if (!s.note.empty()) e["note"] = s.note;
      j["statistics"].push_back(e);
    }
    j["diagnostics"] = diagnostics;
    j["pass"] = passed();
    return j;
  }
};

/// Replica r of stream `stream` (0 for ensemble A, 1 for ensemble B).
inline std::uint64_t replica_seed(std::uint64_t master_seed, std::int64_t r, std::uint64_t stream = 0) {
  return derive_key(master_seed, {stream_tag::replica, stream, static_cast<std::uint64_t>(r)});
}

inline std::uint64_t test_vector_seed(std::uint64_t master_seed) { return derive_key(master_seed, {stream_tag::haar}); }

/// Everything the bridge, clt and increments statistics need from one replica.
struct ReplicaSample {
  std::uint64_t seed = 0;
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd weights;  // |y_i|^2, y = U* x
  bool flagged = false;
  std::string error;
};

template <class Scalar>
ReplicaSample sample_replica(const std::string& ensemble, std::int64_t n, std::uint64_t seed, const VectorT<Scalar>& x) {
  ReplicaSample s;
  s.seed = seed;
  try {
    const auto d = decompose(sample_wigner<Scalar>(make_spec(ensemble, n, seed)));
    s.eigenvalues = d.eigenvalues;
    s.weights = squared_moduli(overlaps(d, x));
  } catch (const DecompositionError& e) {
    s.flagged = true;
    s.error = e.what();
  }
  return s;
}

template <class Scalar>
std::vector<ReplicaSample> sample_replicas(const std::string& ensemble, std::int64_t n, const VectorT<Scalar>& x,
                                           std::uint64_t master_seed, std::int64_t count, int threads,
                                           std::uint64_t stream = 0) {
  std::vector<ReplicaSample> out(static_cast<std::size_t>(count));
  parallel_for(count, threads, [&](std::int64_t r) {
    out[static_cast<std::size_t>(r)] = sample_replica<Scalar>(ensemble, n, replica_seed(master_seed, r, stream), x);
  });
  return out;
}

namespace detail {

inline Statistic check(std::string name, double value, const ExperimentConfig& c, const std::string& key, bool upper,
                       double threshold_override = std::numeric_limits<double>::quiet_NaN()) {
  Statistic s;
  s.name = std::move(name);
  s.value = value;
  s.threshold_key = key;
  const auto it = c.thresholds.find(key);
  if (std::isnan(threshold_override) && it == c.thresholds.end()) throw ConfigError("missing threshold '" + key + "'");
  s.threshold = std::isnan(threshold_override) ? it->second : threshold_override;
  s.comparison = upper ? "<=" : ">=";
  const bool ok = upper ? value <= s.threshold : value >= s.threshold;
  s.status = std::isfinite(value) && ok ? Status::pass : Status::fail;
  return s;
}

inline Statistic skipped(std::string name, const ExperimentConfig& c, const std::string& key, bool upper,
                         std::string note) {
  Statistic s;
  s.name = std::move(name);
  s.value = std::numeric_limits<double>::quiet_NaN();
  s.threshold_key = key;
  if (auto it = c.thresholds.find(key); it != c.thresholds.end()) s.threshold = it->second;
  s.comparison = upper ? "<=" : ">=";
  s.status = Status::skipped;
  s.note = std::move(note);
  return s;
}

inline constexpr std::int64_t min_distributional_replicas = 20;
inline const char* insufficient = "insufficient replicas";

inline void flag_budget(RunReport& rep, std::int64_t attempted = 0) {
  if (attempted <= 0) attempted = rep.config.replicas;
  const double frac = static_cast<double>(rep.flagged.size()) / static_cast<double>(attempted);
  rep.statistics.push_back(check("flagged_fraction", frac, rep.config, "flagged_fraction_max", true));
}

/// Collects usable replicas in index order and logs seeds and flags.
inline std::vector<const ReplicaSample*> collect(const std::vector<ReplicaSample>& reps, RunReport& rep,
                                                 std::vector<std::uint64_t>& seed_log) {
  std::vector<const ReplicaSample*> ok;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    seed_log.push_back(reps[r].seed);
    if (reps[r].flagged) rep.flagged.push_back(static_cast<std::int64_t>(r));
    else ok.push_back(&reps[r]);
  }
  return ok;
}

inline PathEnsemble paths_of(const std::vector<const ReplicaSample*>& reps, Beta beta, const std::string& tv,
                             const std::vector<double>& grid, std::vector<std::uint64_t>& seeds) {
  std::vector<ProcessPath> paths;
  paths.reserve(reps.size());
  for (const auto* s : reps) {
    paths.push_back(process_path_from_weights(s->weights, beta, tv));
    seeds.push_back(s->seed);
  }
  return make_path_ensemble(std::move(paths), grid);
}

inline std::vector<double> column_at(const PathEnsemble& e, double t) {
  std::vector<double> v;
  v.reserve(e.paths.size());
  for (const auto& p : e.paths) v.push_back(p.at(t));
  return v;
}

inline std::vector<double> energy_grid(const ExperimentConfig& c) {
  std::vector<double> es;
  const auto k = c.energy_points;
  for (std::int64_t i = 0; i < k; ++i)
    es.push_back(k == 1 ? 0.0 : -c.energy_range + 2.0 * c.energy_range * static_cast<double>(i) / static_cast<double>(k - 1));
  return es;
}

template <class Scalar>
VectorT<Scalar> config_vector(const ExperimentConfig& c) {
  return make_test_vector<Scalar>(c.test_vector, c.n, test_vector_seed(c.master_seed));
}

// ---------------------------------------------------------------------------

template <class Scalar>
void run_bridge(RunReport& rep, int threads) {
  const auto& c = rep.config;
  const Beta beta = beta_of<Scalar>;
  const auto x = config_vector<Scalar>(c);
  const auto tv = to_string(c.test_vector);
  const auto a = sample_replicas<Scalar>(c.ensemble_a, c.n, x, c.master_seed, c.replicas, threads, 0);
  const auto ok_a = collect(a, rep, rep.seeds);
  rep.paths_a = paths_of(ok_a, beta, tv, c.grid, rep.path_seeds_a);
  const auto& e = *rep.paths_a;

  const bool enough = e.replicas() >= min_distributional_replicas;
  const bool probe = c.test_vector == TestVector::e1;
  const std::string probe_note = "e1 lies outside the delocalized-vector hypothesis; see necessity probe";

  if (enough) {
    const auto half = summarize(column_at(e, 0.5));
    const auto cov = empirical_covariance(e);
    const double ks = ks_statistic(column_at(e, 0.5), [](double v) { return normal_cdf(v / 0.5); });
    rep.diagnostics["var_half"] = half.variance;
    rep.diagnostics["var_half_se"] = half.variance_se;
    rep.diagnostics["mean_half"] = half.mean;
    auto var_stat = check("var_half_abs_error", std::abs(half.variance - 0.25), c, "var_half_tol", true);
    auto cov_stat = check("covariance_grid_max_error", max_covariance_error(cov, c.grid), c, "cov_max_tol", true);
    auto ks_stat = check("ks_normal_half", ks, c, "ks_normal_max", true);
    for (auto* s : {&var_stat, &cov_stat, &ks_stat}) {
      if (probe) {
        s->status = Status::skipped;
        s->note = probe_note;
      }
      rep.statistics.push_back(*s);
    }
    Table t{{"s", "t", "empirical", "target", "abs_error"}, {}};
    for (std::size_t j = 0; j < c.grid.size(); ++j)
      for (std::size_t k = 0; k < c.grid.size(); ++k) {
        const double emp = cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        const double tgt = bridge_covariance(c.grid[j], c.grid[k]);
        t.rows.push_back({format_double(c.grid[j]), format_double(c.grid[k]), format_double(emp), format_double(tgt),
                          format_double(std::abs(emp - tgt))});
      }
    rep.tables["covariance_grid"] = std::move(t);
    // Distributional symmetry t <-> 1 - t, diagnostic only.
    double worst = 0.0;
    for (double t : c.grid) {
      const auto s1 = summarize(column_at(e, t)), s2 = summarize(column_at(e, 1.0 - t));
      const double se = std::hypot(s1.variance_se, s2.variance_se);
      if (se > 0.0) worst = std::max(worst, std::abs(s1.variance - s2.variance) / se);
    }
    rep.diagnostics["symmetry_max_z"] = worst;
    if (probe) {
      const double z = half.variance_se > 0.0 ? std::abs(half.variance - 0.25) / half.variance_se : 0.0;
      rep.statistics.push_back(check("e1_var_half_departure_z", z, c, "necessity_z_min", false));
    }
  } else {
    for (auto [name, key] : {std::pair{"var_half_abs_error", "var_half_tol"}, {"covariance_grid_max_error", "cov_max_tol"},
                             {"ks_normal_half", "ks_normal_max"}})
      rep.statistics.push_back(skipped(name, c, key, true, insufficient));
  }

  if (c.ensemble_b) {
    const auto b = sample_replicas<Scalar>(*c.ensemble_b, c.n, x, c.master_seed, c.replicas, threads, 1);
    RunReport tmp;
    tmp.config = c;
    const auto ok_b = collect(b, tmp, rep.seeds_b);
    for (auto f : tmp.flagged) rep.flagged.push_back(f + c.replicas);
    rep.paths_b = paths_of(ok_b, beta, tv, c.grid, rep.path_seeds_b);
    if (enough && rep.paths_b->replicas() >= min_distributional_replicas) {
      const double d = two_sample_ks(column_at(e, 0.5), column_at(*rep.paths_b, 0.5));
      rep.statistics.push_back(check("ks_two_sample_half", d, c, "ks_two_sample_max", true));
      rep.diagnostics["var_half_b"] = summarize(column_at(*rep.paths_b, 0.5)).variance;
    } else {
      rep.statistics.push_back(skipped("ks_two_sample_half", c, "ks_two_sample_max", true, insufficient));
    }
  }
  flag_budget(rep, c.ensemble_b ? 2 * c.replicas : c.replicas);
}

template <class Scalar>
void run_clt(RunReport& rep, int threads) {
  const auto& c = rep.config;
  const auto x = config_vector<Scalar>(c);
  const auto reps = sample_replicas<Scalar>(c.ensemble_a, c.n, x, c.master_seed, c.replicas, threads, 0);
  const auto ok = collect(reps, rep, rep.seeds);
  flag_budget(rep);
  std::vector<int> powers;
  for (double p : c.powers) powers.push_back(static_cast<int>(p));
  if (static_cast<std::int64_t>(ok.size()) < min_distributional_replicas) {
    for (int r : powers)
      if (r == 1 || r == 2) rep.statistics.push_back(skipped("var_W_u" + std::to_string(r), c, "var_tol", true, insufficient));
    return;
  }
  const double scale = std::sqrt(beta_value(beta_of<Scalar>) * static_cast<double>(c.n));
  const double inv_n = 1.0 / static_cast<double>(c.n);
  std::vector<std::vector<double>> w(powers.size());
  for (const auto* s : ok)
    for (std::size_t k = 0; k < powers.size(); ++k) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < s->eigenvalues.size(); ++i)
        acc += std::pow(s->eigenvalues(i), powers[k]) * (s->weights(i) - inv_n);
      w[k].push_back(scale * acc);
    }
  Table t{{"r1", "r2", "empirical", "target", "std_error", "z"}, {}};
  for (std::size_t a = 0; a < powers.size(); ++a)
    for (std::size_t b = a; b < powers.size(); ++b) {
      const auto est = sample_covariance(w[a], w[b]);
      const double target = clt_covariance_target(powers[a], powers[b]);
      const double z = est.std_error > 0.0 ? std::abs(est.value - target) / est.std_error : 0.0;
      t.rows.push_back({std::to_string(powers[a]), std::to_string(powers[b]), format_double(est.value),
                        format_double(target), format_double(est.std_error), format_double(z)});
      const std::string tag = "W_u" + std::to_string(powers[a]) + "_W_u" + std::to_string(powers[b]);
      if (a == b && (powers[a] == 1 || powers[a] == 2))
        rep.statistics.push_back(check("var_W_u" + std::to_string(powers[a]) + "_abs_error", std::abs(est.value - target), c,
                                       "var_tol", true));
      else if (powers[a] != 0 && powers[b] != 0)
        rep.statistics.push_back(check("cov_" + tag + "_z", z, c, "cov_z_max", true));
    }
  rep.tables["clt"] = std::move(t);
}

template <class Scalar>
void run_increments(RunReport& rep, int threads) {
  const auto& c = rep.config;
  const auto x = config_vector<Scalar>(c);
  const auto reps = sample_replicas<Scalar>(c.ensemble_a, c.n, x, c.master_seed, c.replicas, threads, 0);
  const auto ok = collect(reps, rep, rep.seeds);
  flag_budget(rep);
  rep.paths_a = paths_of(ok, beta_of<Scalar>, to_string(c.test_vector), c.grid, rep.path_seeds_a);
  const auto& e = *rep.paths_a;
  if (e.replicas() < min_distributional_replicas) {
    rep.statistics.push_back(skipped("scaling_exponent", c, "slope_min", false, insufficient));
    rep.statistics.push_back(skipped("quarter_rel_error", c, "rel_tol_at_quarter", true, insufficient));
    return;
  }
  // Energy parametrization s = quantile(t) is measured alongside; thresholds apply in t only.
  Table t{{"delta", "t1", "t2", "fourth_moment", "std_error", "bridge_target", "in_regime", "s1", "s2", "energy_ratio"}, {}};
  double worst_energy_ratio = 0.0;
  for (double d : c.deltas) {
    const double t1 = 0.5 - d / 2.0, t2 = 0.5 + d / 2.0;
    const auto m = increment_fourth_moment(e, t1, t2, c.epsilon);
    const double s1 = semicircle::quantile(t1), s2 = semicircle::quantile(t2);
    const double ratio = m.value / ((s2 - s1) * (s2 - s1));
    worst_energy_ratio = std::max(worst_energy_ratio, ratio);
    t.rows.push_back({format_double(d), format_double(t1), format_double(t2), format_double(m.value),
                      format_double(m.std_error), format_double(bridge_increment_fourth_moment(d)),
                      m.in_regime ? "1" : "0", format_double(s1), format_double(s2), format_double(ratio)});
  }
  rep.tables["increments"] = std::move(t);
  rep.diagnostics["max_energy_ratio"] = worst_energy_ratio;
  double w_mean = 0.0;
  for (const auto& p : e.paths) w_mean += modulus_of_continuity(p, 0.1);
  rep.diagnostics["mean_modulus_of_continuity_0.1"] = w_mean / static_cast<double>(e.paths.size());
  try {
    rep.statistics.push_back(check("scaling_exponent", scaling_exponent_fit(e, c.deltas, c.epsilon), c, "slope_min", false));
  } catch (const std::invalid_argument& ex) {
    rep.statistics.push_back(skipped("scaling_exponent", c, "slope_min", false, ex.what()));
  }
  const auto q = increment_fourth_moment(e, 0.375, 0.625, c.epsilon);
  const double target = bridge_increment_fourth_moment(0.25);
  rep.diagnostics["quarter_fourth_moment"] = q.value;
  rep.diagnostics["quarter_fourth_moment_se"] = q.std_error;
  rep.statistics.push_back(check("quarter_rel_error", std::abs(q.value - target) / target, c, "rel_tol_at_quarter", true));
}

struct LocalLawRow {
  bool flagged = false;
  std::uint64_t seed = 0;
  double averaged = 0.0, iso_uniform = 0.0, iso_e1 = 0.0, deloc = 0.0, rigidity = 0.0;
  double iso_grid_uniform = 0.0, iso_grid_e1 = 0.0;  // sup over the energy grid, diagnostic
  std::vector<double> residual_by_energy;             // |m_n - m_sc| at each grid energy
  std::vector<RigidityRow> per_index;                 // kept for replica 0 only
};

template <class Scalar>
void run_locallaw(RunReport& rep, int threads, bool rigidity_only) {
  const auto& c = rep.config;
  const auto n = c.n;
  const double eta = std::pow(static_cast<double>(n), -c.eta_exponent);
  const auto energies = energy_grid(c);
  const VectorT<Scalar> xu = make_test_vector<Scalar>(TestVector::uniform, n);
  const VectorT<Scalar> xe = make_test_vector<Scalar>(TestVector::e1, n);
  const Eigen::VectorXcd vu = xu.template cast<cplx>(), ve = xe.template cast<cplx>();
  std::vector<LocalLawRow> rows(static_cast<std::size_t>(c.replicas));

  parallel_for(c.replicas, threads, [&](std::int64_t r) {
    auto& row = rows[static_cast<std::size_t>(r)];
    row.seed = replica_seed(c.master_seed, r);
    try {
      const auto m = sample_wigner<Scalar>(make_spec(c.ensemble_a, n, row.seed));
      if (rigidity_only) {
        auto rr = rigidity_report(eigenvalues(m));
        row.rigidity = rr.max_scaled_deviation;
        if (r == 0) row.per_index = std::move(rr.per_index);
        return;
      }
      const auto d = decompose(m);
      row.averaged = averaged_law_sup_ratio(d.eigenvalues, energies, eta);
      for (double en : energies) {
        const SpectralPoint p(en, eta);
        row.residual_by_energy.push_back(std::abs(stieltjes_mn(d.eigenvalues, p) - semicircle::stieltjes(p)));
      }
      const Eigen::VectorXcd wu = spectral_weights(d, vu, vu), we = spectral_weights(d, ve, ve);
      auto iso = [&](const Eigen::VectorXcd& w, const Eigen::VectorXcd& v, const SpectralPoint& p) {
        return wigner::detail::residual_from(expand_weights(d.eigenvalues, w, p), v, v, p, n).ratio;
      };
      const SpectralPoint probe(c.energy, eta);
      row.iso_uniform = iso(wu, vu, probe);
      row.iso_e1 = iso(we, ve, probe);
      for (double en : energies) {
        const SpectralPoint p(en, eta);
        row.iso_grid_uniform = std::max(row.iso_grid_uniform, iso(wu, vu, p));
        row.iso_grid_e1 = std::max(row.iso_grid_e1, iso(we, ve, p));
      }
      row.deloc = std::max(delocalization_stat(d, xu), delocalization_stat(d, xe));
      auto rr = rigidity_report(d);
      row.rigidity = rr.max_scaled_deviation;
      if (r == 0) row.per_index = std::move(rr.per_index);
    } catch (const DecompositionError&) {
      row.flagged = true;
    }
  });

  std::vector<const LocalLawRow*> ok;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    rep.seeds.push_back(rows[r].seed);
    if (rows[r].flagged) rep.flagged.push_back(static_cast<std::int64_t>(r));
    else ok.push_back(&rows[r]);
  }
  flag_budget(rep);
  const double logn = std::log(static_cast<double>(n));
  const double rig_bound = std::pow(logn, c.thresholds.at("rigidity_log_power"));
  auto frequency = [&](auto field, double bound) {
    if (ok.empty()) return 0.0;
    std::int64_t hits = 0;
    for (const auto* row : ok) hits += (row->*field) <= bound;
    return static_cast<double>(hits) / static_cast<double>(ok.size());
  };
  auto worst = [&](auto field) {
    double w = 0.0;
    for (const auto* row : ok) w = std::max(w, row->*field);
    return w;
  };

  Table t{{"replica_id", "seed", "averaged_ratio", "isotropic_ratio_uniform", "isotropic_ratio_e1", "delocalization",
           "rigidity_scaled"},
          {}};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    t.rows.push_back({std::to_string(r), std::to_string(row.seed), format_double(row.averaged), format_double(row.iso_uniform),
                      format_double(row.iso_e1), format_double(row.deloc), format_double(row.rigidity)});
  }
  rep.tables["locallaw"] = std::move(t);
  if (!ok.empty() && !ok.front()->per_index.empty()) {
    Table ri{{"index", "lambda", "gamma", "deviation", "scaled"}, {}};
    for (const auto& x : ok.front()->per_index)
      ri.rows.push_back({std::to_string(x.index), format_double(x.lambda), format_double(x.gamma), format_double(x.deviation),
                         format_double(x.scaled)});
    rep.tables["rigidity_index"] = std::move(ri);
  }
  if (!rigidity_only && !ok.empty()) {
    // Per energy: residual averaged over replicas, Psi, and the worst replica's ratio.
    Table al{{"E", "eta", "residual", "psi", "ratio"}, {}};
    for (std::size_t k = 0; k < energies.size(); ++k) {
      const SpectralPoint p(energies[k], eta);
      const double psi = semicircle::psi(p, n);
      double mean = 0.0, worst_k = 0.0;
      for (const auto* row : ok) {
        mean += row->residual_by_energy[k];
        worst_k = std::max(worst_k, row->residual_by_energy[k]);
      }
      mean /= static_cast<double>(ok.size());
      al.rows.push_back({format_double(energies[k]), format_double(eta), format_double(mean), format_double(psi),
                         format_double(worst_k / psi)});
    }
    rep.tables["averaged_law"] = std::move(al);
  }
  rep.diagnostics["eta"] = eta;
  rep.diagnostics["rigidity_bound"] = rig_bound;
  rep.diagnostics["max_rigidity_scaled"] = worst(&LocalLawRow::rigidity);

  if (!rigidity_only) {
    const double avg_bound = c.thresholds.at("averaged_ratio_max");
    const double iso_bound = c.thresholds.at("isotropic_ratio_max");
    const double deloc_bound = std::pow(logn, c.thresholds.at("delocalization_log_power"));
    rep.diagnostics["delocalization_bound"] = deloc_bound;
    rep.diagnostics["max_averaged_ratio"] = worst(&LocalLawRow::averaged);
    rep.diagnostics["max_isotropic_ratio_uniform"] = worst(&LocalLawRow::iso_uniform);
    rep.diagnostics["max_isotropic_ratio_e1"] = worst(&LocalLawRow::iso_e1);
    rep.diagnostics["isotropic_probe_energy"] = c.energy;
    rep.diagnostics["max_isotropic_grid_ratio_uniform"] = worst(&LocalLawRow::iso_grid_uniform);
    rep.diagnostics["max_isotropic_grid_ratio_e1"] = worst(&LocalLawRow::iso_grid_e1);
    rep.diagnostics["max_delocalization"] = worst(&LocalLawRow::deloc);
    rep.statistics.push_back(check("averaged_law_frequency", frequency(&LocalLawRow::averaged, avg_bound), c, "min_frequency", false));
    rep.statistics.push_back(
        check("isotropic_uniform_frequency", frequency(&LocalLawRow::iso_uniform, iso_bound), c, "min_frequency", false));
    rep.statistics.push_back(check("isotropic_e1_frequency", frequency(&LocalLawRow::iso_e1, iso_bound), c, "min_frequency", false));
    rep.statistics.push_back(check("delocalization_frequency", frequency(&LocalLawRow::deloc, deloc_bound), c, "min_frequency", false));
  }
  rep.statistics.push_back(check("rigidity_frequency", frequency(&LocalLawRow::rigidity, rig_bound), c, "min_frequency", false));
}

template <class Scalar>
ObservableSpec observable_of(const ExperimentConfig& c) {
  const Eigen::VectorXcd x = config_vector<Scalar>(c).template cast<cplx>();
  if (c.observable == "stieltjes") return ObservableSpec::stieltjes_at(SpectralPoint(c.z_re, c.z_im));
  if (c.observable == "green_xx") return ObservableSpec::green_xx_at(x, SpectralPoint(c.z_re, c.z_im));
  const double eta = contour_eta(c.n, c.window_lo, c.window_hi, c.epsilon);
  return ObservableSpec::contour(x, c.window_lo, c.window_hi, eta, contour_quad_step(eta));
}

template <class Scalar>
void run_swap(RunReport& rep, int threads) {
  const auto& c = rep.config;
  const auto o = observable_of<Scalar>(c);
  const SiteSelection sel = c.swap_sites < 0 ? SiteSelection::every_site() : SiteSelection::sampled(c.swap_sites);
  struct Row {
    std::uint64_t seed = 0;
    bool flagged = false;
    cplx total{}, endpoint{};
    double error = 0.0;
  };
  std::vector<Row> rows(static_cast<std::size_t>(c.replicas));
  parallel_for(c.replicas, threads, [&](std::int64_t r) {
    auto& row = rows[static_cast<std::size_t>(r)];
    row.seed = replica_seed(c.master_seed, r);
    try {
      const auto t = telescoping_experiment<Scalar>(make_spec(c.ensemble_a, c.n, 0), make_spec(*c.ensemble_b, c.n, 0), o,
                                                    sel, row.seed);
      row.total = t.total;
      row.endpoint = t.endpoint_difference;
      row.error = t.telescoping_error;
    } catch (const DecompositionError&) {
      row.flagged = true;
    }
  });
  Table t{{"replica_id", "seed", "total_re", "total_im", "endpoint_re", "endpoint_im", "telescoping_error"}, {}};
  double worst = 0.0;
  cplx mean{};
  double mean_abs = 0.0;
  std::vector<double> re, im;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    rep.seeds.push_back(row.seed);
    if (row.flagged) {
      rep.flagged.push_back(static_cast<std::int64_t>(r));
      continue;
    }
    worst = std::max(worst, row.error);
    mean += row.total;
    mean_abs += std::abs(row.total);
    re.push_back(row.total.real());
    im.push_back(row.total.imag());
    t.rows.push_back({std::to_string(r), std::to_string(row.seed), format_double(row.total.real()),
                      format_double(row.total.imag()), format_double(row.endpoint.real()),
                      format_double(row.endpoint.imag()), format_double(row.error)});
  }
  rep.tables["swap"] = std::move(t);
  flag_budget(rep);
  const double used = static_cast<double>(re.size());
  if (used > 0) {
    mean /= used;
    rep.diagnostics["mean_total_re"] = mean.real();
    rep.diagnostics["mean_total_im"] = mean.imag();
    rep.diagnostics["abs_mean_total"] = std::abs(mean);
    rep.diagnostics["mean_abs_total"] = mean_abs / used;
    if (re.size() >= 2) {
      const auto sr = summarize(re), si = summarize(im);
      rep.diagnostics["abs_mean_total_se"] = std::sqrt((sr.variance + si.variance) / used);
    }
  }
  if (sel.all) rep.statistics.push_back(check("telescoping_max_error", worst, c, "telescoping_tol", true));
  else
    rep.statistics.push_back(skipped("telescoping_max_error", c, "telescoping_tol", true,
                                     "sampled steps: total is the endpoint difference by construction"));
}

template <class F>
void with_scalar(Beta b, F&& f) {
  if (b == Beta::real) f(double{});
  else f(cplx{});
}

}  // namespace detail

/// Runs one experiment end to end. Replicas execute on `threads` workers; all aggregation
/// happens afterwards in replica order, so the report does not depend on `threads`.
inline RunReport run(const ExperimentConfig& config, int threads = 1) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.config = config;
  const Beta beta = make_spec(config.ensemble_a, config.n, 0).beta;
  detail::with_scalar(beta, [&](auto tag) {
    using Scalar = decltype(tag);
    switch (config.experiment) {
      case Experiment::bridge: detail::run_bridge<Scalar>(rep, threads); break;
      case Experiment::clt: detail::run_clt<Scalar>(rep, threads); break;
      case Experiment::increments: detail::run_increments<Scalar>(rep, threads); break;
      case Experiment::locallaw: detail::run_locallaw<Scalar>(rep, threads, false); break;
      case Experiment::rigidity: detail::run_locallaw<Scalar>(rep, threads, true); break;
      case Experiment::swap: detail::run_swap<Scalar>(rep, threads); break;
    }
  });
  rep.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

/// Writes report.json, timing.json, every table as <name>.csv and persisted paths.
inline void write_artifacts(const RunReport& rep, const std::filesystem::path& dir, int threads) {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.json", rep.to_json().dump(2) + "\n");
  write_file(dir / "config.txt", identity_of(rep.config).to_text());
  nlohmann::json timing{{"wall_clock_seconds", rep.wall_clock_seconds}, {"threads", threads}};
  write_file(dir / "timing.json", timing.dump(2) + "\n");
  for (const auto& [name, t] : rep.tables) write_file(dir / (name + ".csv"), t.to_csv());
  const auto hash = config_hash(rep.config);
  if (rep.paths_a) persist(dir / "paths_a", *rep.paths_a, rep.path_seeds_a, hash);
  if (rep.paths_b) persist(dir / "paths_b", *rep.paths_b, rep.path_seeds_b, hash);
}

}  // namespace wigner::harness
