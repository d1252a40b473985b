#include "staris/sim.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace staris {

namespace {

using nlohmann::json;

constexpr const char* kParams[] = {"gamma_s", "gamma_e", "elements",
                                   "interval", "power"};

bool known_param(const std::string& p) {
  for (const char* q : kParams)
    if (p == q) return true;
  return false;
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (item.key() == a) ok = true;
    if (!ok) throw ConfigError("unknown key: " + path + "." + item.key());
  }
}

double get_num(const json& j, const std::string& path, const char* key,
               double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number())
    throw ConfigError(path + "." + key + ": expected a number");
  return j[key].get<double>();
}

int get_pos_int(const json& j, const std::string& path, const char* key,
                int fallback) {
  const double v = get_num(j, path, key, fallback);
  if (v < 1 || v != std::floor(v))
    throw ConfigError(path + "." + key + ": expected a positive integer");
  return static_cast<int>(v);
}

/// Near-square grid for a per-RIS element count.
std::pair<int, int> factor_elements(int m) {
  int y = static_cast<int>(std::round(std::sqrt(double(m))));
  while (y > 1 && m % y != 0) --y;
  return {m / y, y};
}

std::vector<SchemeSpec> default_schemes(const std::string& param, int l) {
  std::vector<SchemeSpec> s;
  s.push_back(parse_scheme("passive_L" + std::to_string(l)));
  s.push_back(parse_scheme("active_L" + std::to_string(l)));
  if (param == "gamma_s" && l > 1) s.push_back(parse_scheme("active_L1"));
  return s;
}

std::map<std::string, SweepSpec> default_sweeps(int l, int trials) {
  std::map<std::string, SweepSpec> out;
  const auto add = [&](const char* param, std::vector<double> values) {
    out[param] = {param, std::move(values), trials, default_schemes(param, l)};
  };
  add("gamma_s", {-40, -30, -20, -10});
  add("gamma_e", {0, 5, 10, 15});
  add("elements", {8, 16, 32});
  add("interval", {6, 8, 10, 12});
  add("power", {20, 25, 30, 35});
  return out;
}

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

SchemeSpec parse_scheme(const std::string& name) {
  SchemeSpec s;
  s.name = name;
  std::string rest;
  if (name.rfind("passive_L", 0) == 0) {
    s.mode = RisMode::passive;
    rest = name.substr(9);
  } else if (name.rfind("active_L", 0) == 0) {
    s.mode = RisMode::active;
    rest = name.substr(8);
  } else {
    throw ConfigError("unknown scheme: " + name);
  }
  try {
    s.n_ris = std::stoi(rest);
  } catch (const std::exception&) {
    throw ConfigError("unknown scheme: " + name);
  }
  if (s.n_ris < 1) throw ConfigError("unknown scheme: " + name);
  return s;
}

SimConfig default_config(const std::string& preset) {
  SimConfig cfg;
  if (preset == "desk") {
    cfg.scenario.n_antennas = 8;
    cfg.scenario.n_users = 4;
    cfg.scenario.elements_x = 4;
    cfg.scenario.elements_y = 4;
  } else if (preset != "paper") {
    throw ConfigError("unknown preset: " + preset);
  }
  apply_defaults(cfg.scenario);
  cfg.sweeps = default_sweeps(cfg.scenario.n_ris, 20);
  return cfg;
}

SimConfig load_config(std::istream& in, const std::string& preset) {
  SimConfig cfg = default_config(preset);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return cfg;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: expected an object");
  check_keys(j, "config",
             {"scenario", "power_split", "ris_interval", "ao", "sweeps"});

  double noise_sq = cfg.scenario.sigma_radar_sq;
  double gamma_e = db_to_linear(5.0);
  int trials = 20;
  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    const std::string p = "scenario";
    check_keys(s, p,
               {"n_antennas", "n_users", "n_ris", "elements", "p_total_db",
                "noise_db", "gamma_s_req_db", "gamma_e_req_db", "rician_db",
                "rcs_db", "carrier_ghz", "user_drop_radius", "trials"});
    auto& sc = cfg.scenario;
    sc.n_antennas = get_pos_int(s, p, "n_antennas", sc.n_antennas);
    sc.n_users = get_pos_int(s, p, "n_users", sc.n_users);
    sc.n_ris = get_pos_int(s, p, "n_ris", sc.n_ris);
    const int m = get_pos_int(s, p, "elements", sc.elements());
    std::tie(sc.elements_x, sc.elements_y) = factor_elements(m);
    cfg.p_total = db_to_linear(
        get_num(s, p, "p_total_db", linear_to_db(cfg.p_total)));
    noise_sq = db_to_linear(
        get_num(s, p, "noise_db", linear_to_db(noise_sq)));
    sc.gamma_sense_req = db_to_linear(get_num(
        s, p, "gamma_s_req_db", linear_to_db(sc.gamma_sense_req)));
    gamma_e = db_to_linear(
        get_num(s, p, "gamma_e_req_db", linear_to_db(gamma_e)));
    const double f = db_to_linear(
        get_num(s, p, "rician_db", linear_to_db(sc.rician_bs_ris)));
    sc.rician_bs_ris = sc.rician_ris_ris = sc.rician_ris_user = f;
    sc.rcs_sq =
        db_to_linear(get_num(s, p, "rcs_db", linear_to_db(sc.rcs_sq)));
    sc.carrier_freq_hz =
        1e9 * get_num(s, p, "carrier_ghz", sc.carrier_freq_hz / 1e9);
    sc.user_drop_radius =
        get_num(s, p, "user_drop_radius", sc.user_drop_radius);
    if (sc.carrier_freq_hz <= 0 || sc.user_drop_radius <= 0)
      throw ConfigError(p + ": expected positive values");
    trials = get_pos_int(s, p, "trials", trials);
  }
  if (j.contains("power_split")) {
    check_keys(j["power_split"], "power_split", {"bs_fraction"});
    cfg.bs_power_fraction = get_num(j["power_split"], "power_split",
                                    "bs_fraction", cfg.bs_power_fraction);
    if (cfg.bs_power_fraction <= 0 || cfg.bs_power_fraction >= 1)
      throw ConfigError("power_split.bs_fraction: expected a value in (0,1)");
  }
  cfg.ris_interval = get_num(j, "config", "ris_interval", cfg.ris_interval);
  if (cfg.ris_interval <= 0)
    throw ConfigError("config.ris_interval: expected a positive number");
  if (j.contains("ao")) {
    check_keys(j["ao"], "ao", {"max_outer", "tol"});
    cfg.ao.max_outer = get_pos_int(j["ao"], "ao", "max_outer",
                                   cfg.ao.max_outer);
    cfg.ao.tol = get_num(j["ao"], "ao", "tol", cfg.ao.tol);
    if (cfg.ao.tol <= 0) throw ConfigError("ao.tol: expected positive");
  }

  // Rebuild per-user/per-RIS vectors and default sweeps for the (possibly
  // resized) scenario before overlaying explicit sweep definitions.
  auto& sc = cfg.scenario;
  sc.ris_pos.clear();
  sc.user_pos.clear();
  sc.user_side.clear();
  sc.p_a_max.clear();
  sc.sigma_ris_sq.clear();
  sc.sigma_user_sq.clear();
  sc.rate_weight.clear();
  sc.gamma_leak_req.clear();
  apply_defaults(sc);
  sc.sigma_radar_sq = sc.sigma_eve_sq = noise_sq;
  sc.sigma_ris_sq.assign(sc.n_ris, noise_sq);
  sc.sigma_user_sq.assign(sc.n_users, noise_sq);
  sc.gamma_leak_req.assign(sc.n_users, gamma_e);
  cfg.sweeps = default_sweeps(sc.n_ris, trials);

  if (j.contains("sweeps")) {
    if (!j["sweeps"].is_object())
      throw ConfigError("sweeps: expected an object");
    for (const auto& item : j["sweeps"].items()) {
      const std::string path = "sweeps." + item.key();
      const json& s = item.value();
      check_keys(s, path, {"param", "values", "trials", "schemes"});
      SweepSpec spec;
      spec.param = s.contains("param")
                       ? s["param"].get<std::string>()
                       : item.key();
      if (!known_param(spec.param))
        throw ConfigError(path + ".param: unknown parameter " + spec.param);
      if (s.contains("values")) {
        if (!s["values"].is_array() || s["values"].empty())
          throw ConfigError(path + ".values: expected a non-empty array");
        for (const auto& v : s["values"]) {
          if (!v.is_number())
            throw ConfigError(path + ".values: expected numbers");
          spec.values.push_back(v.get<double>());
        }
      } else if (cfg.sweeps.count(spec.param)) {
        spec.values = cfg.sweeps[spec.param].values;
      } else {
        throw ConfigError(path + ".values: required");
      }
      spec.trials = get_pos_int(s, path, "trials", trials);
      if (s.contains("schemes")) {
        if (!s["schemes"].is_array() || s["schemes"].empty())
          throw ConfigError(path + ".schemes: expected a non-empty array");
        for (const auto& v : s["schemes"]) {
          if (!v.is_string())
            throw ConfigError(path + ".schemes: expected strings");
          spec.schemes.push_back(parse_scheme(v.get<std::string>()));
        }
      } else {
        spec.schemes = default_schemes(spec.param, sc.n_ris);
      }
      cfg.sweeps[item.key()] = std::move(spec);
    }
  }
  return cfg;
}

SimConfig load_config_file(const std::string& path,
                           const std::string& preset) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return load_config(in, preset);
}

ScenarioConfig instantiate(const SimConfig& cfg, const SweepSpec& sweep,
                           const SchemeSpec& scheme, double value) {
  ScenarioConfig c = cfg.scenario;
  const int full_l = cfg.scenario.n_ris;
  if (scheme.n_ris > full_l)
    throw ConfigError("scheme " + scheme.name +
                      " exceeds the configured RIS chain");
  double interval = cfg.ris_interval;
  double p_total = cfg.p_total;

  if (sweep.param == "gamma_s") {
    c.gamma_sense_req = db_to_linear(value);
  } else if (sweep.param == "gamma_e") {
    c.gamma_leak_req.assign(c.n_users, db_to_linear(value));
  } else if (sweep.param == "elements") {
    const int m = static_cast<int>(value);
    if (m < 1 || m != value)
      throw ConfigError("elements sweep: expected positive integers");
    std::tie(c.elements_x, c.elements_y) = factor_elements(m);
  } else if (sweep.param == "interval") {
    if (value <= 0) throw ConfigError("interval sweep: expected positive");
    interval = value;
  } else if (sweep.param == "power") {
    p_total = db_to_linear(value);
  } else {
    throw ConfigError("unknown sweep parameter: " + sweep.param);
  }

  c.n_ris = scheme.n_ris;
  c.ris_pos.clear();
  for (int l = 0; l < c.n_ris; ++l)
    c.ris_pos.push_back({interval * (l + 1), 0.0, 0.0});
  // Target sits just past the end of the full chain; removing downstream
  // RISs does not move it.
  c.target_pos = {interval * full_l + 2.0, 0.0, 0.0};
  c.sigma_ris_sq.assign(c.n_ris, cfg.scenario.sigma_ris_sq.front());
  if (scheme.mode == RisMode::passive) {
    c.p_bs_max = p_total;
    c.p_a_max.assign(c.n_ris, p_total);  // unused in passive mode
  } else {
    // Fixed total budget: the RIS share is split equally over the scheme's
    // own surfaces.
    c.p_bs_max = cfg.bs_power_fraction * p_total;
    c.p_a_max.assign(c.n_ris, (1.0 - cfg.bs_power_fraction) * p_total /
                                  c.n_ris);
  }
  // Users are associated with the sites of the full deployment; removing
  // downstream surfaces strands those users past the remaining chain.
  c.user_pos.clear();
  c.user_side.clear();
  for (int k = 0; k < c.n_users; ++k)
    c.user_side.push_back(std::min(k % full_l + 1, c.n_ris + 1));
  return c;
}

std::uint64_t run_seed(std::uint64_t master, std::uint64_t scheme_idx,
                       std::uint64_t value_idx, std::uint64_t trial) {
  return splitmix(splitmix(splitmix(splitmix(master) ^ scheme_idx) ^
                           value_idx) ^
                  trial);
}

ResultTable run_sweep(const SimConfig& cfg, const SweepSpec& sweep,
                      std::uint64_t master_seed, int trials_override) {
  const int trials = trials_override > 0 ? trials_override : sweep.trials;
  ResultTable table;
  for (std::size_t si = 0; si < sweep.schemes.size(); ++si) {
    const SchemeSpec& scheme = sweep.schemes[si];
    for (std::size_t vi = 0; vi < sweep.values.size(); ++vi) {
      const double value = sweep.values[vi];
      for (int t = 0; t < trials; ++t) {
        ResultRow row;
        row.scheme = scheme.name;
        row.param = sweep.param;
        row.value = value;
        row.seed = run_seed(master_seed, si, vi,
                            static_cast<std::uint64_t>(t));
        try {
          ScenarioConfig c = instantiate(cfg, sweep, scheme, value);
          c.rng_seed = row.seed;
          // Drop users on the full deployment so truncated schemes face the
          // same user field instead of a re-clustered one.
          SchemeSpec full = scheme;
          full.n_ris = cfg.scenario.n_ris;
          ScenarioConfig fc = instantiate(cfg, sweep, full, value);
          std::mt19937_64 drop(run_seed(row.seed, 1, 0, 0));
          drop_users(fc, drop);
          c.user_pos = fc.user_pos;
          c.validate();
          const ChannelSet ch = sample_channels(c);
          AoConfig ao = cfg.ao;
          ao.mode = scheme.mode;
          ao.seed = row.seed;
          const AoResult res = run_ao(c, ch, ao);
          row.sum_rate_nats = res.report.weighted_sum_rate;
          row.sum_rate_bits = row.sum_rate_nats / std::log(2.0);
          row.gamma_s_db = linear_to_db(res.report.gamma_sense);
          double leak = 0.0;
          for (int k = 0; k < c.n_users; ++k)
            leak = std::max(leak, res.report.gamma_leak[k]);
          row.max_gamma_e_db = linear_to_db(leak);
          row.iters = res.iterations;
          row.status = to_string(res.status);
          row.runtime_s = res.runtime_s;
        } catch (const std::exception&) {
          row.status = "error";
        }
        table.rows.push_back(std::move(row));
      }
    }
  }
  return table;
}

std::string results_csv(const ResultTable& table) {
  std::string out =
      "scheme,param,value,seed,sum_rate_nats,sum_rate_bits,gamma_S_dB,"
      "max_gamma_e_dB,iters,status,runtime_s\n";
  for (const auto& r : table.rows) {
    out += r.scheme + ',' + r.param + ',' + fmt(r.value) + ',' +
           std::to_string(r.seed) + ',' + fmt(r.sum_rate_nats) + ',' +
           fmt(r.sum_rate_bits) + ',' + fmt(r.gamma_s_db) + ',' +
           fmt(r.max_gamma_e_db) + ',' + std::to_string(r.iters) + ',' +
           r.status + ',' + fmt(r.runtime_s) + '\n';
  }
  return out;
}

std::string summary_csv(const ResultTable& table) {
  std::string out =
      "scheme,param,value,rows,converged,mean_sum_rate_nats,"
      "ci95_sum_rate_nats\n";
  std::vector<std::tuple<std::string, std::string, double>> order;
  for (const auto& r : table.rows) {
    const auto key = std::make_tuple(r.scheme, r.param, r.value);
    bool seen = false;
    for (const auto& o : order) seen = seen || o == key;
    if (!seen) order.push_back(key);
  }
  for (const auto& [scheme, param, value] : order) {
    int total = 0, conv = 0;
    double sum = 0, sq = 0;
    for (const auto& r : table.rows) {
      if (r.scheme != scheme || r.param != param || r.value != value)
        continue;
      ++total;
      if (r.status != "converged") continue;
      ++conv;
      sum += r.sum_rate_nats;
      sq += r.sum_rate_nats * r.sum_rate_nats;
    }
    const double mean = conv > 0 ? sum / conv : 0.0;
    double ci = 0.0;
    if (conv > 1) {
      const double var =
          std::max(0.0, (sq - conv * mean * mean) / (conv - 1));
      ci = 1.96 * std::sqrt(var / conv);
    }
    out += scheme + ',' + param + ',' + fmt(value) + ',' +
           std::to_string(total) + ',' + std::to_string(conv) + ',' +
           fmt(mean) + ',' + fmt(ci) + '\n';
  }
  return out;
}

void emit_results(const ResultTable& table, const std::string& outdir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(outdir, ec);
  const auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(fs::path(outdir) / name);
    if (!out) throw ConfigError("cannot write to " + outdir + "/" + name);
    out << text;
  };
  write("results.csv", results_csv(table));
  write("summary.csv", summary_csv(table));

  std::set<std::string> params;
  std::set<std::string> schemes;
  for (const auto& r : table.rows) {
    params.insert(r.param);
    schemes.insert(r.scheme);
  }
  for (const auto& param : params) {
    std::string gp;
    gp += "set datafile separator ','\n";
    gp += "set key outside\n";
    gp += "set xlabel '" + param + "'\n";
    gp += "set ylabel 'mean sum rate (nats)'\n";
    std::string list;
    for (const auto& s : schemes) list += (list.empty() ? "" : " ") + s;
    gp += "plot for [s in \"" + list +
          "\"] 'summary.csv' using (strcol(1) eq s && strcol(2) eq '" +
          param +
          "' ? column(3) : NaN):6 with linespoints title s\n";
    write("plot_" + param + ".gp", gp);
  }
}

}  // namespace staris
