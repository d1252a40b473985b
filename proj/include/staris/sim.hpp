#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "staris/ao.hpp"

namespace staris {

/// One curve of a sweep: operating mode plus how many of the chained RISs
/// are deployed (the first n_ris of the full chain; the rest are removed).
struct SchemeSpec {
  RisMode mode{RisMode::passive};
  int n_ris{3};
  std::string name;  // e.g. "active_L3"
};

SchemeSpec parse_scheme(const std::string& name);

struct SweepSpec {
  std::string param;  // gamma_s | gamma_e | elements | interval | power
  std::vector<double> values;  // dB for gamma_s/gamma_e/power; linear else
  int trials{20};
  std::vector<SchemeSpec> schemes;
};

struct SimConfig {
  ScenarioConfig scenario;   // full-chain scenario, Table-style defaults
  double p_total{1000.0};    // shared transmit budget across BS and RISs
  double bs_power_fraction{0.4};  // active split; passive BS takes it all
  double ris_interval{10.0};      // x-spacing of the RIS chain, meters
  AoConfig ao;  // mode and seed are overridden per run
  std::map<std::string, SweepSpec> sweeps;
};

/// Built-in configuration: "paper" is the full-scale parameter table,
/// "desk" shrinks the array sizes for fast Monte-Carlo runs.
SimConfig default_config(const std::string& preset = "paper");

/// Strict-keyed structured-text config; every field optional, unknown keys
/// and malformed values raise ConfigError naming the key path.
SimConfig load_config(std::istream& in, const std::string& preset = "paper");
SimConfig load_config_file(const std::string& path,
                           const std::string& preset = "paper");

/// Scenario for one sweep cell: RIS chain truncated to the scheme, swept
/// parameter applied, power split applied. User drop fields are left empty.
ScenarioConfig instantiate(const SimConfig& cfg, const SweepSpec& sweep,
                           const SchemeSpec& scheme, double value);

struct ResultRow {
  std::string scheme;
  std::string param;
  double value{0};
  std::uint64_t seed{0};
  double sum_rate_nats{0};
  double sum_rate_bits{0};
  double gamma_s_db{0};
  double max_gamma_e_db{0};
  int iters{0};
  std::string status;
  double runtime_s{0};
};

struct ResultTable {
  std::vector<ResultRow> rows;
};

/// Deterministic per-run seed stream under one master seed.
std::uint64_t run_seed(std::uint64_t master, std::uint64_t scheme_idx,
                       std::uint64_t value_idx, std::uint64_t trial);

/// Runs trials x values x schemes sequentially; per-run failures become rows
/// with a non-converged status and never abort the sweep.
ResultTable run_sweep(const SimConfig& cfg, const SweepSpec& sweep,
                      std::uint64_t master_seed, int trials_override = 0);

std::string results_csv(const ResultTable& table);
std::string summary_csv(const ResultTable& table);

/// Writes results.csv, summary.csv, and one plot-command file per swept
/// parameter into outdir (created if missing).
void emit_results(const ResultTable& table, const std::string& outdir);

}  // namespace staris
