#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "../bridgestats.hpp"
#include "../spectral.hpp"
#include "config.hpp"

namespace wigner::harness {

class PersistError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StoredEnsemble {
  PathEnsemble ensemble;
  std::vector<std::uint64_t> seeds;  // per-replica seed log
  std::string config_hash;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw PersistError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw PersistError("cannot write " + p.string());
  out << content;
  if (!out) throw PersistError("write failed for " + p.string());
}

/// CSV text `replica_id,k,P_k`, one row per partial sum. Values are shortest round-trip decimals.
inline std::string paths_csv(const std::vector<ProcessPath>& paths) {
  std::string s = "replica_id,k,P_k\n";
  for (std::size_t r = 0; r < paths.size(); ++r)
    for (std::size_t k = 0; k < paths[r].partial_sums.size(); ++k)
      s += std::to_string(r) + "," + std::to_string(k) + "," + format_double(paths[r].partial_sums[k]) + "\n";
  return s;
}

/// Writes `<base>.csv` and the JSON sidecar `<base>.json` (n, beta, seeds, hashes).
inline void persist(const std::filesystem::path& base, const PathEnsemble& e, const std::vector<std::uint64_t>& seeds,
                    const std::string& cfg_hash) {
  const std::string csv = paths_csv(e.paths);
  nlohmann::json side;
  side["n"] = e.n();
  side["beta"] = e.paths.empty() ? 1 : beta_value(e.paths.front().beta);
  side["test_vector"] = e.paths.empty() ? "" : e.paths.front().test_vector_id;
  side["replicas"] = e.replicas();
  side["grid"] = e.grid;
  side["seeds"] = seeds;
  side["config_hash"] = cfg_hash;
  side["data_hash"] = hex64(fnv1a(csv));
  write_file(base.string() + ".csv", csv);
  write_file(base.string() + ".json", side.dump(2) + "\n");
}

/// Reads back what persist wrote. Malformed or missing rows raise errors naming the row; a
/// well-formed file is then refused on data-hash mismatch (and on config-hash mismatch
/// when `expected_config_hash` is given).
inline StoredEnsemble load(const std::filesystem::path& base, const std::string& expected_config_hash = {}) {
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_file(base.string() + ".json"));
  } catch (const nlohmann::json::exception& ex) {
    throw PersistError(base.string() + ".json: " + ex.what());
  }
  const std::string csv = read_file(base.string() + ".csv");

  const auto n = side.at("n").get<std::int64_t>();
  const auto replicas = side.at("replicas").get<std::int64_t>();
  const Beta beta = beta_from_int(side.at("beta").get<int>());
  const auto tv = side.at("test_vector").get<std::string>();

  std::vector<ProcessPath> paths(static_cast<std::size_t>(replicas));
  for (auto& p : paths) p = ProcessPath{n, beta, std::vector<double>(static_cast<std::size_t>(n) + 1, 0.0), tv};
  std::vector<std::vector<bool>> seen(static_cast<std::size_t>(replicas), std::vector<bool>(static_cast<std::size_t>(n) + 1));

  std::stringstream ss(csv);
  std::string line;
  std::int64_t row = 0;
  std::int64_t filled = 0;
  while (std::getline(ss, line)) {
    ++row;
    if (row == 1) {
      if (line != "replica_id,k,P_k") throw PersistError("paths CSV row 1: bad header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      throw PersistError("paths CSV row " + std::to_string(row) + ": expected 3 fields");
    try {
      const auto r = parse_int(line.substr(0, c1), "replica_id");
      const auto k = parse_int(line.substr(c1 + 1, c2 - c1 - 1), "k");
      const double v = parse_double(line.substr(c2 + 1), "P_k");
      if (r < 0 || r >= replicas || k < 0 || k > n) throw ConfigError("index out of range");
      paths[static_cast<std::size_t>(r)].partial_sums[static_cast<std::size_t>(k)] = v;
      if (!seen[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)]) ++filled;
      seen[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] = true;
    } catch (const ConfigError& ex) {
      throw PersistError("paths CSV row " + std::to_string(row) + ": " + ex.what());
    }
  }
  if (filled != replicas * (n + 1))
    throw PersistError("paths CSV: incomplete, " + std::to_string(filled) + " of " + std::to_string(replicas * (n + 1)) +
                       " values after row " + std::to_string(row));
  if (hex64(fnv1a(csv)) != side.at("data_hash").get<std::string>())
    throw PersistError(base.string() + ".csv: data hash mismatch with sidecar");
  if (!expected_config_hash.empty() && side.at("config_hash").get<std::string>() != expected_config_hash)
    throw PersistError(base.string() + ".json: config hash mismatch");
  StoredEnsemble out;
  out.ensemble = make_path_ensemble(std::move(paths), side.at("grid").get<std::vector<double>>());
  out.seeds = side.at("seeds").get<std::vector<std::uint64_t>>();
  out.config_hash = side.at("config_hash").get<std::string>();
  return out;
}

}  // namespace wigner::harness
