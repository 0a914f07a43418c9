// wigner-bridge: command-line front end.
//   wigner-bridge <subcommand> --config FILE [--seed N] [--out DIR] [--set key=value ...] [--threads N]
// Tables go to stdout as CSV with a header row, reports as JSON. With --out every artifact is
// also written to DIR. Exit status: 0 all thresholds pass, 1 statistical failure, 2 error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wigner_bridge.hpp"

namespace {

using namespace wigner;
using namespace wigner::harness;

constexpr int kPass = 0;
constexpr int kStatFail = 1;
constexpr int kError = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
  int threads = default_threads();
  int blas_threads = 1;
  std::int64_t replica = 0;
  std::string stream = "a";
};

std::map<std::string, std::string> config_kv(const Options& o) {
  const std::string text = read_file(o.config);
  const auto first = text.find_first_not_of(" \t\r\n");
  auto kv = first != std::string::npos && text[first] == '{' ? ExperimentConfig::parse(text).to_kv() : read_kv_text(text);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

ExperimentConfig load_config(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config FILE is required");
  auto kv = config_kv(o);
  if (o.seed) kv["master_seed"] = std::to_string(*o.seed);
  if (!o.out.empty()) kv["output"] = o.out;
  return ExperimentConfig::from_kv(kv);
}

std::filesystem::path out_dir(const Options& o, const ExperimentConfig* c = nullptr) {
  if (!o.out.empty()) return o.out;
  return c ? c->output_dir : std::string{};
}

// Primary output: always to stdout, and to DIR/name when an output directory is set.
void emit(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
  std::cout << content;
  if (!dir.empty()) write_file(dir / name, content);
}

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  return Table{header, rows}.to_csv();
}

std::string num(double v) { return format_double(v); }

void summarize_report(const RunReport& rep) {
  for (const auto& s : rep.statistics)
    std::cerr << to_string(rep.config.experiment) << ": " << s.name << " = " << num(s.value) << " (" << s.comparison << " "
              << num(s.threshold) << ") " << to_string(s.status) << (s.note.empty() ? "" : " [" + s.note + "]") << "\n";
  std::cerr << to_string(rep.config.experiment) << ": " << (rep.passed() ? "PASS" : "FAIL") << ", "
            << rep.flagged.size() << " flagged replica(s), " << num(rep.wall_clock_seconds) << " s\n";
}

// ---------------------------------------------------------------------------

int cmd_semicircle(const Options& o, int points, std::int64_t n_locations) {
  std::optional<ExperimentConfig> c;
  if (!o.config.empty()) c = load_config(o);
  if (points < 2) throw ConfigError("--points must be >= 2");
  const std::int64_t n = n_locations > 0 ? n_locations : c ? c->n : 10;
  std::vector<std::vector<std::string>> dens, locs;
  for (int k = 0; k < points; ++k) {
    const double x = -2.0 + 4.0 * k / (points - 1);
    dens.push_back({num(x), num(semicircle::density(x)), num(semicircle::cdf(x))});
  }
  for (std::int64_t i = 1; i <= n; ++i) locs.push_back({std::to_string(i), num(semicircle::classical_location(i, n))});
  const auto dir = out_dir(o, c ? &*c : nullptr);
  emit(dir, "semicircle.csv", csv({"x", "density", "cdf"}, dens));
  std::cout << "\n";
  emit(dir, "classical_locations.csv", csv({"i", "gamma"}, locs));
  return kPass;
}

WignerSpec replica_spec(const Options& o, const ExperimentConfig& c) {
  if (o.stream != "a" && o.stream != "b") throw ConfigError("--stream must be a or b");
  if (o.stream == "b" && !c.ensemble_b) throw ConfigError("--stream b needs ensemble.b");
  if (o.replica < 0) throw ConfigError("--replica must be non-negative");
  const bool b = o.stream == "b";
  return make_spec(b ? *c.ensemble_b : c.ensemble_a, c.n, replica_seed(c.master_seed, o.replica, b ? 1 : 0));
}

int cmd_sample(const Options& o, std::int64_t audit, bool spec_only) {
  if (o.config.empty()) throw ConfigError("--config FILE is required");
  WignerSpec spec;
  std::filesystem::path dir = o.out;
  auto kv = config_kv(o);
  if (kv.count("offdiag.kind")) {
    if (o.seed) kv["seed"] = std::to_string(*o.seed);
    spec = spec_from_kv(kv);
  } else {
    const auto c = load_config(o);
    spec = replica_spec(o, c);
    dir = out_dir(o, &c);
  }
  std::string block;
  for (const auto& [k, v] : spec_to_kv(spec)) block += k + " = " + v + "\n";
  if (spec_only) {
    emit(dir, "spec.txt", block);
    return kPass;
  }
  if (!dir.empty()) write_file(dir / "spec.txt", block);
  if (audit > 0) {
    std::vector<std::vector<std::string>> rows;
    bool ok = true;
    for (const auto& [name, law] : {std::pair{"offdiag", spec.offdiag}, {"diag", spec.diag}})
      for (const auto& r : moment_audit(law, audit, derive_key(spec.seed, {name[0] == 'o' ? 1u : 2u}))) {
        ok = ok && std::abs(r.z_score) <= 5.0;
        rows.push_back({name, std::to_string(r.l), std::to_string(r.m), num(r.declared), num(r.empirical), num(r.std_error),
                        num(r.z_score)});
      }
    emit(dir, "moment_audit.csv", csv({"law", "l", "m", "declared", "empirical", "std_error", "z_score"}, rows));
    return ok ? kPass : kStatFail;
  }
  std::vector<std::vector<std::string>> rows;
  auto dump = [&](const auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const cplx v(m(i, j));
        rows.push_back({std::to_string(i), std::to_string(j), num(v.real()), num(v.imag())});
      }
  };
  if (spec.beta == Beta::real) dump(sample_wigner<double>(spec).entries);
  else dump(sample_wigner<cplx>(spec).entries);
  emit(dir, "matrix.csv", csv({"i", "j", "re", "im"}, rows));
  return kPass;
}

int cmd_spectrum(const Options& o) {
  const auto c = load_config(o);
  const auto spec = replica_spec(o, c);
  const Eigen::VectorXd eigs = spec.beta == Beta::real ? eigenvalues(sample_wigner<double>(spec)) : eigenvalues(sample_wigner<cplx>(spec));
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : rigidity_report(eigs).per_index)
    rows.push_back({std::to_string(r.index), num(r.lambda), num(r.gamma), num(r.deviation)});
  emit(out_dir(o, &c), "spectrum.csv", csv({"i", "lambda", "gamma", "deviation"}, rows));
  return kPass;
}

int cmd_path(const Options& o) {
  const auto c = load_config(o);
  const auto spec = replica_spec(o, c);
  ProcessPath p;
  if (spec.beta == Beta::real) {
    const auto d = decompose(sample_wigner<double>(spec));
    p = process_path(overlaps(d, harness::detail::config_vector<double>(c)), Beta::real, to_string(c.test_vector));
  } else {
    const auto d = decompose(sample_wigner<cplx>(spec));
    p = process_path(overlaps(d, harness::detail::config_vector<cplx>(c)), Beta::complex, to_string(c.test_vector));
  }
  std::vector<std::vector<std::string>> rows;
  const auto n = static_cast<double>(c.n);
  for (std::size_t k = 0; k < p.partial_sums.size(); ++k)
    rows.push_back({num(static_cast<double>(k) / n), num(p.partial_sums[k])});
  emit(out_dir(o, &c), "path.csv", csv({"t", "P_k"}, rows));
  return kPass;
}

// Runs the experiment a subcommand stands for. `table` names the primary CSV; empty means the
// report JSON is the primary output.
int run_experiment(const Options& o, const ExperimentConfig& c, Experiment expected, const std::string& table) {
  if (c.experiment != expected)
    throw ConfigError("config declares experiment = " + to_string(c.experiment) + ", this subcommand runs " +
                      to_string(expected));
  const auto rep = run(c, o.threads);
  const auto dir = out_dir(o, &c);
  if (!dir.empty()) write_artifacts(rep, dir, o.threads);
  if (table.empty()) std::cout << rep.to_json().dump(2) << "\n";
  else std::cout << rep.tables.at(table).to_csv();
  summarize_report(rep);
  return rep.passed() ? kPass : kStatFail;
}

int cmd_swap(const Options& o) {
  const auto c = load_config(o);
  if (c.experiment != Experiment::swap) throw ConfigError("config declares experiment = " + to_string(c.experiment) + ", this subcommand runs swap");
  std::vector<std::vector<std::string>> rows;
  auto steps = [&](auto tag) {
    using Scalar = decltype(tag);
    const SiteSelection sel = c.swap_sites < 0 ? SiteSelection::every_site() : SiteSelection::sampled(c.swap_sites);
    const auto t = telescoping_experiment<Scalar>(make_spec(c.ensemble_a, c.n, 0), make_spec(*c.ensemble_b, c.n, 0),
                                                  harness::detail::observable_of<Scalar>(c), sel, replica_seed(c.master_seed, o.replica));
    for (const auto& s : t.per_step)
      rows.push_back({std::to_string(s.gamma), std::to_string(s.a), std::to_string(s.b), num(s.delta.real()), num(s.delta.imag())});
  };
  if (make_spec(c.ensemble_a, c.n, 0).beta == Beta::real) steps(double{});
  else steps(cplx{});
  const auto rep = run(c, o.threads);
  const auto dir = out_dir(o, &c);
  if (!dir.empty()) write_artifacts(rep, dir, o.threads);
  emit(dir, "steps.csv", csv({"gamma", "a", "b", "delta_re", "delta_im"}, rows));
  summarize_report(rep);
  return rep.passed() ? kPass : kStatFail;
}

// Re-reads a finished run: checks its persisted paths against the config hash and reprints
// the stored report.
int cmd_report_from(const std::filesystem::path& dir) {
  const auto c = ExperimentConfig::parse(read_file(dir / "config.txt"));
  const auto report = nlohmann::json::parse(read_file(dir / "report.json"));
  if (report.at("config_hash").get<std::string>() != config_hash(c))
    throw PersistError("report.json does not belong to config.txt in " + dir.string());
  for (const auto* base : {"paths_a", "paths_b"})
    if (std::filesystem::exists(dir / (std::string(base) + ".csv"))) load(dir / base, config_hash(c));
  std::cout << report.dump(2) << "\n";
  return report.at("pass").get<bool>() ? kPass : kStatFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eigenvector process of Wigner matrices: sampling, local laws, swapping and bridge statistics"};
  app.require_subcommand(1);
  Options o;
  int points = 81;
  std::int64_t n_locations = 0, audit = 0;
  bool spec_only = false;
  std::string from;
  std::string swap_a, swap_b, swap_obs, swap_sites;
  std::int64_t swap_n = 0, swap_replicas = 0;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "experiment config (key = value text or JSON)");
    s->add_option("--seed", o.seed, "master seed override");
    s->add_option("--out", o.out, "output directory for every artifact");
    s->add_option("--set", o.sets, "config override key=value (repeatable)");
    s->add_option("--threads", o.threads, "replica worker threads")->check(CLI::PositiveNumber);
    s->add_option("--blas-threads", o.blas_threads, "BLAS threads inside one decomposition")->check(CLI::PositiveNumber);
    return s;
  };
  auto single = [&](CLI::App* s) {
    s->add_option("--replica", o.replica, "replica index");
    s->add_option("--stream", o.stream, "a (ensemble.a) or b (ensemble.b)");
    return s;
  };

  auto* semicircle_cmd = common(app.add_subcommand("semicircle", "density/cdf table and classical locations"));
  semicircle_cmd->add_option("--points", points, "density grid points on [-2, 2]");
  semicircle_cmd->add_option("--n", n_locations, "matrix size for classical locations");
  auto* sample_cmd = single(common(app.add_subcommand("sample", "one matrix as CSV (i, j, re, im) or its entry-moment audit")));
  sample_cmd->add_option("--audit", audit, "audit entry moments with this many draws per law");
  sample_cmd->add_flag("--spec", spec_only, "print the flat spec block only");
  auto* spectrum_cmd = single(common(app.add_subcommand("spectrum", "eigenvalues vs classical locations")));
  auto* path_cmd = single(common(app.add_subcommand("path", "partial sums (k/n, P_k) of one replica")));
  auto* locallaw_cmd = common(app.add_subcommand("locallaw", "averaged, isotropic and delocalization checks"));
  auto* rigidity_cmd = common(app.add_subcommand("rigidity", "per-index rigidity report"));
  auto* swap_cmd = single(common(app.add_subcommand("swap", "site-by-site swap with per-step differences")));
  swap_cmd->add_option("--a", swap_a, "ensemble A");
  swap_cmd->add_option("--b", swap_b, "ensemble B");
  swap_cmd->add_option("--n", swap_n, "matrix size");
  swap_cmd->add_option("--replicas", swap_replicas, "replicas of the full run");
  swap_cmd->add_option("--observable", swap_obs, "stieltjes, green_xx or contour");
  swap_cmd->add_option("--sites", swap_sites, "all, or the number of sampled steps");
  auto* bridge_cmd = common(app.add_subcommand("bridge-test", "bridge covariance, KS and universality tests"));
  auto* clt_cmd = common(app.add_subcommand("clt-test", "moment functionals W_n(u^r)"));
  auto* inc_cmd = common(app.add_subcommand("increments", "fourth moments of increments"));
  auto* report_cmd = common(app.add_subcommand("report", "run the configured experiment, or re-read a finished run"));
  report_cmd->add_option("--from", from, "directory of a finished run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kPass : kError;
  }

  try {
    blas_threads() = o.blas_threads;
    if (*swap_cmd) {
      if (!swap_a.empty()) o.sets.push_back("ensemble.a=" + swap_a);
      if (!swap_b.empty()) o.sets.push_back("ensemble.b=" + swap_b);
      if (swap_n > 0) o.sets.push_back("n=" + std::to_string(swap_n));
      if (swap_replicas > 0) o.sets.push_back("replicas=" + std::to_string(swap_replicas));
      if (!swap_obs.empty()) o.sets.push_back("swap.observable=" + swap_obs);
      if (!swap_sites.empty()) o.sets.push_back("swap.sites=" + swap_sites);
      return cmd_swap(o);
    }
    if (*semicircle_cmd) return cmd_semicircle(o, points, n_locations);
    if (*sample_cmd) return cmd_sample(o, audit, spec_only);
    if (*spectrum_cmd) return cmd_spectrum(o);
    if (*path_cmd) return cmd_path(o);
    if (*locallaw_cmd) return run_experiment(o, load_config(o), Experiment::locallaw, "averaged_law");
    if (*rigidity_cmd) return run_experiment(o, load_config(o), Experiment::rigidity, "rigidity_index");
    if (*bridge_cmd) return run_experiment(o, load_config(o), Experiment::bridge, "");
    if (*clt_cmd) return run_experiment(o, load_config(o), Experiment::clt, "clt");
    if (*inc_cmd) return run_experiment(o, load_config(o), Experiment::increments, "increments");
    if (*report_cmd) {
      if (!from.empty()) return cmd_report_from(from);
      const auto c = load_config(o);
      return run_experiment(o, c, c.experiment, "");
    }
  } catch (const std::exception& e) {
    std::cerr << "wigner-bridge: error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
