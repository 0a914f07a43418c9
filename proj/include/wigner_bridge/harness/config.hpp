#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "../bridgestats.hpp"
#include "../ensembles.hpp"

namespace wigner::harness {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Experiment { bridge, locallaw, rigidity, swap, clt, increments };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::bridge: return "bridge";
    case Experiment::locallaw: return "locallaw";
    case Experiment::rigidity: return "rigidity";
    case Experiment::swap: return "swap";
    case Experiment::clt: return "clt";
    case Experiment::increments: return "increments";
  }
  return "?";
}

inline Experiment experiment_from_string(const std::string& s) {
  for (auto e : {Experiment::bridge, Experiment::locallaw, Experiment::rigidity, Experiment::swap, Experiment::clt,
                 Experiment::increments})
    if (to_string(e) == s) return e;
  throw ConfigError("unknown experiment '" + s + "'");
}

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return {buf, p};
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto* b = s.data();
  const auto* e = b + s.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e) throw ConfigError(what + ": expected a number, got '" + s + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& s, const std::string& what) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError(what + ": expected an integer, got '" + s + "'");
  return v;
}

inline std::uint64_t parse_uint(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ConfigError(what + ": expected an unsigned integer, got '" + s + "'");
  return v;
}

inline std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError(what + ": empty list element");
    out.push_back(parse_double(item.substr(b, e - b + 1), what));
  }
  return out;
}

inline std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

/// Thresholds every experiment starts from; a config may override any of them.
inline std::map<std::string, double> default_thresholds(Experiment e) {
  switch (e) {
    case Experiment::bridge:
      return {{"var_half_tol", 0.03}, {"cov_max_tol", 0.05}, {"ks_normal_max", 0.05}, {"ks_two_sample_max", 0.06},
              {"necessity_z_min", 5.0},    {"flagged_fraction_max", 0.001}};
    case Experiment::locallaw:
      return {{"averaged_ratio_max", 10.0},   {"isotropic_ratio_max", 10.0}, {"delocalization_log_power", 3.0},
              {"rigidity_log_power", 2.0},    {"min_frequency", 0.99},       {"flagged_fraction_max", 0.001}};
    case Experiment::rigidity:
      return {{"rigidity_log_power", 2.0}, {"min_frequency", 0.99}, {"flagged_fraction_max", 0.001}};
    case Experiment::swap:
      return {{"telescoping_tol", 1e-8}, {"flagged_fraction_max", 0.001}};
    case Experiment::clt:
      return {{"var_tol", 0.2}, {"cov_z_max", 3.0}, {"flagged_fraction_max", 0.001}};
    case Experiment::increments:
      return {{"slope_min", 4.0 / 3.0 - 0.15}, {"rel_tol_at_quarter", 0.25}, {"flagged_fraction_max", 0.001}};
  }
  return {};
}

/// Parses `key = value` lines; '#' starts a comment; later keys win.
inline std::map<std::string, std::string> read_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto l = s.find_first_not_of(" \t\r");
      const auto r = s.find_last_not_of(" \t\r");
      return l == std::string::npos ? std::string{} : s.substr(l, r - l + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

/// One reproducible experiment. Serializes to flat `key = value` text (dotted keys) or JSON.
struct ExperimentConfig {
  Experiment experiment = Experiment::bridge;
  std::string ensemble_a = "goe";
  std::optional<std::string> ensemble_b;
  std::int64_t n = 400;
  std::int64_t replicas = 2000;
  TestVector test_vector = TestVector::uniform;
  std::vector<double> grid = default_grid();
  double epsilon = 0.05;
  std::map<std::string, double> thresholds = default_thresholds(Experiment::bridge);
  std::uint64_t master_seed = 20261014;
  std::string output_dir;

  // Experiment-specific knobs.
  double window_lo = -0.5;                     // energy window for contour observables
  double window_hi = 0.5;
  double eta_exponent = 0.6;                   // locallaw: eta = n^{-eta_exponent}
  double energy = 0.3;                         // locallaw: E of the isotropic probe
  double energy_range = 3.0;                   // locallaw: E grid spans [-range, range]
  std::int64_t energy_points = 100;
  double eta_min = 1e-3;                       // locallaw: lower edge of the spectral domain
  std::vector<double> deltas = {0.05, 0.1, 0.2, 0.3, 0.4};
  std::string observable = "stieltjes";        // swap: stieltjes | green_xx | contour
  double z_re = 0.0;                           // swap: spectral point of resolvent observables
  double z_im = 1.0;
  std::int64_t swap_sites = 0;                 // swap: -1 = every site, k >= 0 = k sampled steps
  std::vector<double> powers = {1, 2, 3};      // clt: W_n(u^r)

  void validate() const {
    if (n < 2) throw ConfigError("n must be >= 2");
    if (replicas < 1) throw ConfigError("replicas must be >= 1");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    for (const auto& [k, v] : thresholds)
      if (!(v > 0.0)) throw ConfigError("threshold '" + k + "' must be positive");
    auto check_ens = [](const std::string& id) {
      bool ok = false;
      for (const auto& e : ensemble_ids()) ok = ok || e == id;
      if (!ok) throw ConfigError("unknown ensemble '" + id + "'");
    };
    check_ens(ensemble_a);
    if (ensemble_b) {
      check_ens(*ensemble_b);
      if (make_spec(ensemble_a, n, 0).beta != make_spec(*ensemble_b, n, 0).beta)
        throw ConfigError("ensemble.a and ensemble.b must share beta");
    }
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (!(grid[j] >= 0.0 && grid[j] <= 1.0) || (j && !(grid[j] > grid[j - 1])))
        throw ConfigError("grid must be strictly increasing within [0,1]");
    if (!(window_lo < window_hi)) throw ConfigError("window.lo must be < window.hi");
    if (experiment == Experiment::swap) {
      if (!ensemble_b) throw ConfigError("swap experiment needs ensemble.b");
      if (observable != "stieltjes" && observable != "green_xx" && observable != "contour")
        throw ConfigError("swap.observable must be stieltjes, green_xx or contour");
      if (!(z_im > 0.0)) throw ConfigError("swap.z_im must be positive");
      if (swap_sites < -1) throw ConfigError("swap.sites must be -1 (all) or a sample size");
    }
    if (energy_points < 1) throw ConfigError("locallaw.energy_points must be positive");
    if (!(std::abs(energy) <= 5.0)) throw ConfigError("locallaw.energy must lie in [-5, 5]");
    if (!(energy_range > 0.0 && energy_range <= 5.0)) throw ConfigError("locallaw.energy_range must lie in (0, 5]");
    if (!(eta_min > 0.0)) throw ConfigError("locallaw.eta_min must be positive");
    if (experiment == Experiment::locallaw && !(std::pow(static_cast<double>(n), -eta_exponent) > eta_min))
      throw ConfigError("locallaw: eta = n^-eta_exponent must exceed locallaw.eta_min");
    if (deltas.size() < 4 && experiment == Experiment::increments) throw ConfigError("increments need >= 4 deltas");
    for (double p : powers)
      if (p < 0 || p > 8 || p != static_cast<int>(p)) throw ConfigError("clt.powers must be integers in [0,8]");
  }

  /// Canonical flat representation, keys sorted.
  std::map<std::string, std::string> to_kv() const {
    std::map<std::string, std::string> kv{
        {"experiment", to_string(experiment)},
        {"ensemble.a", ensemble_a},
        {"n", std::to_string(n)},
        {"replicas", std::to_string(replicas)},
        {"test_vector", to_string(test_vector)},
        {"grid", format_list(grid)},
        {"epsilon", format_double(epsilon)},
        {"master_seed", std::to_string(master_seed)},
        {"output", output_dir},
        {"window.lo", format_double(window_lo)},
        {"window.hi", format_double(window_hi)},
        {"locallaw.eta_exponent", format_double(eta_exponent)},
        {"locallaw.energy", format_double(energy)},
        {"locallaw.energy_range", format_double(energy_range)},
        {"locallaw.energy_points", std::to_string(energy_points)},
        {"locallaw.eta_min", format_double(eta_min)},
        {"increments.deltas", format_list(deltas)},
        {"swap.observable", observable},
        {"swap.z_re", format_double(z_re)},
        {"swap.z_im", format_double(z_im)},
        {"swap.sites", std::to_string(swap_sites)},
        {"clt.powers", format_list(powers)},
    };
    if (ensemble_b) kv["ensemble.b"] = *ensemble_b;
    for (const auto& [k, v] : thresholds) kv["threshold." + k] = format_double(v);
    return kv;
  }

  std::string to_text() const {
    std::string s;
    for (const auto& [k, v] : to_kv()) s += k + " = " + v + "\n";
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (const auto& [k, v] : to_kv()) j[k] = v;
    return j;
  }

  /// Applies one `key = value` setting. The experiment key resets thresholds to its defaults,
  /// so it should come first; from_kv takes care of that.
  void set(const std::string& key, const std::string& value) {
    if (key == "experiment") {
      experiment = experiment_from_string(value);
      thresholds = default_thresholds(experiment);
    } else if (key == "ensemble.a") ensemble_a = value;
    else if (key == "ensemble.b") ensemble_b = value.empty() ? std::nullopt : std::optional<std::string>(value);
    else if (key == "n") n = parse_int(value, key);
    else if (key == "replicas") replicas = parse_int(value, key);
    else if (key == "test_vector") test_vector = test_vector_from_string(value);
    else if (key == "grid") grid = parse_list(value, key);
    else if (key == "epsilon") epsilon = parse_double(value, key);
    else if (key == "master_seed" || key == "seed") master_seed = parse_uint(value, key);
    else if (key == "output") output_dir = value;
    else if (key == "window.lo") window_lo = parse_double(value, key);
    else if (key == "window.hi") window_hi = parse_double(value, key);
    else if (key == "locallaw.eta_exponent") eta_exponent = parse_double(value, key);
    else if (key == "locallaw.energy") energy = parse_double(value, key);
    else if (key == "locallaw.energy_range") energy_range = parse_double(value, key);
    else if (key == "locallaw.energy_points") energy_points = parse_int(value, key);
    else if (key == "locallaw.eta_min") eta_min = parse_double(value, key);
    else if (key == "increments.deltas") deltas = parse_list(value, key);
    else if (key == "swap.observable") observable = value;
    else if (key == "swap.z_re") z_re = parse_double(value, key);
    else if (key == "swap.z_im") z_im = parse_double(value, key);
    else if (key == "swap.sites") swap_sites = value == "all" ? -1 : parse_int(value, key);
    else if (key == "clt.powers") powers = parse_list(value, key);
    else if (key.rfind("threshold.", 0) == 0) thresholds[key.substr(10)] = parse_double(value, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }

  static ExperimentConfig from_kv(const std::map<std::string, std::string>& kv) {
    ExperimentConfig c;
    if (auto it = kv.find("experiment"); it != kv.end()) c.set(it->first, it->second);
    for (const auto& [k, v] : kv)
      if (k != "experiment") c.set(k, v);
    c.validate();
    return c;
  }

  /// Parses `key = value` lines; '#' starts a comment. Text starting with '{' is read as JSON.
  static ExperimentConfig parse(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    std::map<std::string, std::string> kv;
    if (first != std::string::npos && text[first] == '{') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config JSON: ") + e.what());
      }
      for (auto& [k, v] : j.items()) {
        if (v.is_string()) kv[k] = v.get<std::string>();
        else if (v.is_number_unsigned()) kv[k] = std::to_string(v.get<std::uint64_t>());
        else if (v.is_number_integer()) kv[k] = std::to_string(v.get<std::int64_t>());
        else if (v.is_number()) kv[k] = format_double(v.get<double>());
        else if (v.is_array()) {
          std::vector<double> xs;
          for (auto& e : v) xs.push_back(e.get<double>());
          kv[k] = format_list(xs);
        } else if (v.is_null()) kv[k] = "";
        else throw ConfigError("config JSON: unsupported value for '" + k + "'");
      }
      return from_kv(kv);
    }
    return from_kv(read_kv_text(text));
  }

  bool operator==(const ExperimentConfig& o) const { return to_kv() == o.to_kv(); }
};

/// FNV-1a 64-bit.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// The config minus where it writes: what a report echoes and what its hash identifies.
inline ExperimentConfig identity_of(ExperimentConfig c) {
  c.output_dir.clear();
  return c;
}

inline std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a(identity_of(c).to_text())); }

}  // namespace wigner::harness
