#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "staris/ao.hpp"

using namespace staris;

namespace {

ScenarioConfig desk_cfg(std::uint64_t seed, int users = 2, int n_ris = 2) {
  ScenarioConfig cfg;
  cfg.n_antennas = 8;
  cfg.n_users = users;
  cfg.n_ris = n_ris;
  cfg.elements_x = 4;
  cfg.elements_y = 2;
  cfg.rng_seed = seed;
  apply_defaults(cfg);
  std::mt19937_64 rng(seed + 1000);
  drop_users(cfg, rng);
  cfg.validate();
  return cfg;
}

/// Pins the echo/leakage requirements to fractions of what the driver's own
/// starting point achieves, so the feasible set is non-empty but not trivial.
void derive_requirements(ScenarioConfig& cfg, const ChannelSet& ch,
                         RisMode mode, std::uint64_t seed,
                         double sense_frac = 0.25,
                         double leak_factor = 1.5) {
  std::mt19937_64 rng(seed);
  auto [ris, bf] = initialize(cfg, ch, mode, rng);
  const CascadedChannels casc = cascade_channels(cfg, ch, ris);
  const MetricsReport rep = evaluate(cfg, casc, ris, bf, mode);
  cfg.gamma_sense_req = sense_frac * rep.gamma_sense;
  for (int k = 0; k < cfg.n_users; ++k)
    cfg.gamma_leak_req[k] =
        leak_factor * std::max(rep.gamma_leak[k], 1e-12);
}

/// Plain weighted-MMSE ascent with only the BS power budget: equalizers,
/// power-multiplier search, closed-form beams, unconstrained RIS sweeps. The
/// vestigial sensing beam keeps the (slack) echo requirement satisfied
/// without an MVDR stage.
double wmmse_oracle(const ScenarioConfig& cfg, const ChannelSet& ch,
                    std::uint64_t seed, int iters) {
  std::mt19937_64 rng(seed);
  auto [ris, bf] = initialize(cfg, ch, RisMode::passive, rng);
  CascadedChannels casc = cascade_channels(cfg, ch, ris);
  const Mat zero = Mat::Zero(cfg.n_antennas, cfg.n_antennas);
  for (int it = 0; it < iters; ++it) {
    const Vec& hs = casc.eff_target;
    const double c_s =
        2.0 * required_beam_power(casc, bf, cfg, RisMode::passive);
    bf.w_s = std::sqrt(c_s) / hs.squaredNorm() * hs;

    double prev = -1.0;
    for (int round = 0; round < 50; ++round) {
      EqualizerState eq = update_equalizers(casc, bf, cfg, RisMode::passive);
      DualState d;
      d.mu = RealVec::Zero(cfg.n_users);
      d.nu = RealVec::Zero(cfg.n_ris);
      d.lambda = solve_lambda(d, eq, casc, cfg, zero,
                              cfg.p_bs_max - bf.w_s.squaredNorm());
      bf.w = w_closed_form(d, eq, casc, cfg, zero);
      const double rate =
          evaluate(cfg, casc, ris, bf, RisMode::passive).weighted_sum_rate;
      if (std::abs(rate - prev) <= 1e-8 * std::max(1.0, std::abs(rate)))
        break;
      prev = rate;
    }
    for (int q = 1; q <= cfg.n_ris; ++q) {
      EqualizerState eq = update_equalizers(casc, bf, cfg, RisMode::passive);
      solve_theta_q(cfg, ch, ris, casc, eq, bf, q, RisMode::passive, rng);
    }
  }
  return evaluate(cfg, casc, ris, bf, RisMode::passive).weighted_sum_rate;
}

}  // namespace

TEST_CASE("initialization: exact passive split, active budgets, "
          "determinism") {
  const ScenarioConfig cfg = desk_cfg(11);
  const ChannelSet ch = sample_channels(cfg);

  std::mt19937_64 rng(5);
  auto [ris, bf] = initialize(cfg, ch, RisMode::passive, rng);
  const double split = 1.0 / std::sqrt(2.0);
  for (int l = 0; l < cfg.n_ris; ++l)
    for (int i = 0; i < cfg.elements(); ++i) {
      CHECK(ris.beta_t[l][i] == split);
      CHECK(ris.beta_r[l][i] == split);
    }
  double comm = 0.0;
  for (const auto& w : bf.w) comm += w.squaredNorm();
  CHECK(comm == doctest::Approx(0.5 * cfg.p_bs_max).epsilon(1e-12));
  CHECK(bf.total_power() <= cfg.p_bs_max * (1 + 1e-12));

  std::mt19937_64 rng2(5);
  auto [ris2, bf2] = initialize(cfg, ch, RisMode::passive, rng2);
  for (int l = 0; l < cfg.n_ris; ++l)
    CHECK((ris.theta_bar(l) - ris2.theta_bar(l)).norm() == 0.0);
  CHECK((bf.w_s - bf2.w_s).norm() == 0.0);

  std::mt19937_64 rng3(7);
  auto [risa, bfa] = initialize(cfg, ch, RisMode::active, rng3);
  const CascadedChannels casc = cascade_channels(cfg, ch, risa);
  for (int l = 0; l < cfg.n_ris; ++l) {
    const double p = active_power(l, casc, risa, bfa, cfg);
    CHECK(p == doctest::Approx(0.9 * cfg.p_a_max[l]).epsilon(1e-9));
    CHECK(p <= cfg.p_a_max[l]);
  }
  CHECK(bfa.total_power() <= cfg.p_bs_max * (1 + 1e-12));
}

TEST_CASE("convergence check: constant, improving, oscillating-then-stalled "
          "histories") {
  CHECK(check_convergence({1.0, 1.0, 1.0}, 1e-4));
  CHECK_FALSE(check_convergence({1.0, 1.0}, 1e-4));
  std::vector<double> up{1.0};
  for (int i = 0; i < 4; ++i) up.push_back(up.back() + 10 * 1e-4);
  CHECK_FALSE(check_convergence(up, 1e-4));
  CHECK(check_convergence({1.0, 2.0, 2.0, 2.0}, 1e-4));
  CHECK_FALSE(check_convergence({1.0, 2.0, 2.0, 3.0}, 1e-4));
}

TEST_CASE("keep-best trace is non-decreasing and the result passes the "
          "audit") {
  for (RisMode mode : {RisMode::passive, RisMode::active}) {
    ScenarioConfig cfg = desk_cfg(21);
    const ChannelSet ch = sample_channels(cfg);
    AoConfig ao;
    ao.mode = mode;
    ao.seed = 21;
    ao.max_outer = 8;
    derive_requirements(cfg, ch, mode, ao.seed);

    const AoResult res = run_ao(cfg, ch, ao);
    REQUIRE(res.status != AoStatus::infeasible);
    REQUIRE(!res.trace.empty());
    for (std::size_t i = 1; i < res.trace.size(); ++i)
      CHECK(res.trace[i].best_sum_rate >= res.trace[i - 1].best_sum_rate);
    CHECK(audit_constraints(cfg, res.casc, res.ris, res.bf, mode, 1e-5));

    // Snapshot consistency: the report matches a fresh evaluation.
    const MetricsReport rep = evaluate(cfg, res.casc, res.ris, res.bf, mode);
    CHECK(rep.weighted_sum_rate ==
          doctest::Approx(res.report.weighted_sum_rate).epsilon(1e-12));
    // And beats the starting point.
    CHECK(res.report.weighted_sum_rate >=
          res.trace.front().sum_rate - 1e-12);
  }
}

TEST_CASE("identical configuration gives an identical run") {
  ScenarioConfig cfg = desk_cfg(31);
  const ChannelSet ch = sample_channels(cfg);
  AoConfig ao;
  ao.seed = 31;
  ao.max_outer = 3;
  derive_requirements(cfg, ch, ao.mode, ao.seed);
  const AoResult a = run_ao(cfg, ch, ao);
  const AoResult b = run_ao(cfg, ch, ao);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i)
    CHECK(a.trace[i].sum_rate == b.trace[i].sum_rate);
  CHECK(a.report.weighted_sum_rate == b.report.weighted_sum_rate);
}

TEST_CASE("slack requirements reduce the driver to plain weighted MMSE") {
  ScenarioConfig cfg = desk_cfg(41);
  const ChannelSet ch = sample_channels(cfg);
  cfg.gamma_sense_req = 1e-30;
  cfg.gamma_leak_req.assign(cfg.n_users, 1e12);
  AoConfig ao;
  ao.seed = 41;
  ao.max_outer = 12;
  const AoResult res = run_ao(cfg, ch, ao);
  REQUIRE(res.status != AoStatus::infeasible);
  const double oracle = wmmse_oracle(cfg, ch, ao.seed, ao.max_outer);
  CHECK(res.report.weighted_sum_rate >= 0.99 * oracle);
  CHECK(res.report.weighted_sum_rate <= 1.01 * oracle);
}

TEST_CASE("raising the echo requirement does not raise the sum-rate") {
  ScenarioConfig cfg = desk_cfg(51);
  const ChannelSet ch = sample_channels(cfg);
  cfg.gamma_leak_req.assign(cfg.n_users, 1e12);

  // Anchor on what a half-power matched sensing beam achieves.
  {
    const StarRisState ris =
        StarRisState::uniform_split(cfg.n_ris, cfg.elements());
    const CascadedChannels casc = cascade_channels(cfg, ch, ris);
    BeamformerSet probe;
    const double per = 0.5 * cfg.p_bs_max / cfg.n_users;
    for (int k = 0; k < cfg.n_users; ++k) {
      const Vec& h = casc.eff_user[k];
      probe.w.push_back(std::sqrt(per) * h / h.norm());
    }
    const Vec& hs = casc.eff_target;
    probe.w_s = std::sqrt(0.5 * cfg.p_bs_max) * hs / hs.norm();
    cfg.gamma_sense_req =
        sensing_sinr(casc, probe, cfg, RisMode::passive);
  }

  AoConfig ao;
  ao.seed = 51;
  ao.max_outer = 8;
  ScenarioConfig lo = cfg, hi = cfg;
  lo.gamma_sense_req *= 1e-3;
  hi.gamma_sense_req *= 0.6;
  const AoResult res_lo = run_ao(lo, ch, ao);
  const AoResult res_hi = run_ao(hi, ch, ao);
  REQUIRE(res_lo.status != AoStatus::infeasible);
  REQUIRE(res_hi.status != AoStatus::infeasible);
  CHECK(res_hi.report.weighted_sum_rate <=
        res_lo.report.weighted_sum_rate * (1 + 1e-6));
}
