#include "staris/ao.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace staris {

namespace {

Mat interference_covariance(const ScenarioConfig& cfg,
                            const CascadedChannels& casc,
                            const EqualizerState& eq) {
  Mat r = Mat::Zero(cfg.n_antennas, cfg.n_antennas);
  for (int k = 0; k < cfg.n_users; ++k)
    r += cfg.rate_weight[k] * eq.xi[k] * std::norm(eq.u[k]) *
         (casc.eff_user[k] * casc.eff_user[k].adjoint());
  return r;
}

double comm_power(const BeamformerSet& bf) {
  double p = 0.0;
  for (const auto& w : bf.w) p += w.squaredNorm();
  return p;
}

/// One front-to-back pass scaling each RIS's amplitudes onto the given
/// fraction of its radiated-power budget. Exact with the beams fixed: RIS
/// l's power depends only on upstream coefficients, which are final once the
/// pass reaches l.
void scale_to_budget(const ScenarioConfig& cfg, const ChannelSet& ch,
                     StarRisState& ris, CascadedChannels& casc,
                     const BeamformerSet& bf, double fraction) {
  for (int l = 0; l < cfg.n_ris; ++l) {
    const double p = active_power(l, casc, ris, bf, cfg);
    if (p <= 0.0) continue;
    const double s = std::sqrt(fraction * cfg.p_a_max[l] / p);
    ris.beta_t[l] *= s;
    ris.beta_r[l] *= s;
    casc = cascade_channels(cfg, ch, ris);
  }
}

SensingSolution sensing_stage(const ScenarioConfig& cfg,
                              const CascadedChannels& casc,
                              const BeamformerSet& bf, RisMode mode) {
  const EqualizerState eq = update_equalizers(casc, bf, cfg, mode);
  const double c_s = required_beam_power(casc, bf, cfg, mode);
  const double p_res = std::max(0.0, cfg.p_bs_max - comm_power(bf));
  const Mat r_int = interference_covariance(cfg, casc, eq);
  // A small beam-power margin keeps the echo/leakage constraints strictly
  // slack at the iterate, so subsequent coefficient candidates are not
  // rejected by hair-thin violations. Fall back to the exact requirement
  // when the margin does not fit the budget.
  const SensingSolution margined = solve_sensing(SensingSubproblem::build(
      r_int, casc.eff_target, 1.05 * c_s, p_res));
  if (margined.feasible) return margined;
  return solve_sensing(
      SensingSubproblem::build(r_int, casc.eff_target, c_s, p_res));
}

}  // namespace

std::pair<StarRisState, BeamformerSet> initialize(const ScenarioConfig& cfg,
                                                  const ChannelSet& ch,
                                                  RisMode mode,
                                                  std::mt19937_64& rng) {
  StarRisState ris = StarRisState::uniform_split(cfg.n_ris, cfg.elements());
  std::uniform_real_distribution<double> ph(0.0, 2 * M_PI);
  for (int l = 0; l < cfg.n_ris; ++l)
    for (int i = 0; i < cfg.elements(); ++i) {
      ris.phi_t[l][i] = ph(rng);
      ris.phi_r[l][i] = ph(rng);
    }
  CascadedChannels casc = cascade_channels(cfg, ch, ris);

  BeamformerSet bf;
  bf.w_s = Vec::Zero(cfg.n_antennas);
  const double per_user =
      cfg.n_users > 0 ? 0.5 * cfg.p_bs_max / cfg.n_users : 0.0;
  for (int k = 0; k < cfg.n_users; ++k) {
    const Vec& h = casc.eff_user[k];
    bf.w.push_back(std::sqrt(per_user) * h / h.norm());
  }
  if (mode == RisMode::active)
    scale_to_budget(cfg, ch, ris, casc, bf, 0.9);

  // Sensing beam from the residual budget. Active mode alternates with the
  // amplitude rescaling a few times so the final pass leaves every radiated
  // power exactly at 90% of its budget with the full transmit set.
  const int rounds = mode == RisMode::active ? 3 : 1;
  for (int r = 0; r < rounds; ++r) {
    bf.w_s = sensing_stage(cfg, casc, bf, mode).w_s;
    if (mode == RisMode::active)
      scale_to_budget(cfg, ch, ris, casc, bf, 0.9);
  }
  return {std::move(ris), std::move(bf)};
}

bool audit_constraints(const ScenarioConfig& cfg,
                       const CascadedChannels& casc, const StarRisState& ris,
                       const BeamformerSet& bf, RisMode mode,
                       double rel_tol) {
  if (bf.total_power() > cfg.p_bs_max * (1.0 + rel_tol)) return false;
  return ris_point_feasible(cfg, casc, ris, bf, mode, rel_tol);
}

bool check_convergence(const std::vector<double>& history, double tol) {
  const std::size_t n = history.size();
  if (n < 3) return false;
  for (std::size_t i = n - 2; i < n; ++i) {
    const double ref = std::max(1.0, std::abs(history[i - 1]));
    if (!(std::abs(history[i] - history[i - 1]) <= tol * ref)) return false;
  }
  return true;
}

AoResult run_ao(const ScenarioConfig& cfg, const ChannelSet& ch,
                const AoConfig& ao) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0)
        .count();
  };
  std::mt19937_64 rng(ao.seed);
  auto [ris, bf] = ao.warm ? *ao.warm : initialize(cfg, ch, ao.mode, rng);
  CascadedChannels casc = cascade_channels(cfg, ch, ris);

  AoResult res;
  bool have_best = false, converged = false;
  double best_rate = -std::numeric_limits<double>::infinity();
  StarRisState best_ris = ris;
  BeamformerSet best_bf = bf;
  CascadedChannels best_casc = casc;
  MetricsReport best_rep;
  // Audit the starting point so a feasible warm start is never lost.
  if (audit_constraints(cfg, casc, ris, bf, ao.mode, ao.audit_tol)) {
    best_rep = evaluate(cfg, casc, ris, bf, ao.mode);
    best_rate = best_rep.weighted_sum_rate;
    have_best = true;
  }
  std::vector<double> hist;
  int fails = 0;

  for (int it = 0; it < ao.max_outer; ++it) {
    AoIteration step;

    const SensingSolution sense = sensing_stage(cfg, casc, bf, ao.mode);
    step.sensing_ok = sense.feasible;
    if (sense.feasible) bf.w_s = sense.w_s;

    const CommResult comm =
        solve_comm_beamformers(cfg, casc, ris, bf, ao.mode, ao.comm);
    step.comm_ok = comm.feasible;
    if (comm.feasible) {
      bf = comm.bf;
      step.lambda = comm.dual.lambda;
      step.mu_s = comm.dual.mu_s;
    }

    for (int q = 1; q <= cfg.n_ris; ++q) {
      const EqualizerState eq = update_equalizers(casc, bf, cfg, ao.mode);
      solve_theta_q(cfg, ch, ris, casc, eq, bf, q, ao.mode, rng, ao.ris);
    }

    const MetricsReport rep = evaluate(cfg, casc, ris, bf, ao.mode);
    step.sum_rate = rep.weighted_sum_rate;
    const EqualizerState eq = update_equalizers(casc, bf, cfg, ao.mode);
    step.mse = weighted_mse(cfg, casc, bf, eq, ao.mode);
    step.feasible =
        audit_constraints(cfg, casc, ris, bf, ao.mode, ao.audit_tol);
    if (step.feasible && rep.weighted_sum_rate > best_rate) {
      best_rate = rep.weighted_sum_rate;
      best_ris = ris;
      best_bf = bf;
      best_casc = casc;
      best_rep = rep;
      have_best = true;
    }
    step.best_sum_rate = best_rate;
    step.elapsed_s = elapsed();
    res.trace.push_back(step);

    if (step.sensing_ok && step.comm_ok)
      fails = 0;
    else if (++fails >= 3)
      break;
    hist.push_back(have_best ? best_rate : step.sum_rate);
    if (have_best && check_convergence(hist, ao.tol)) {
      converged = true;
      break;
    }
  }

  res.iterations = static_cast<int>(res.trace.size());
  if (ao.keep_best && have_best) {
    res.bf = std::move(best_bf);
    res.ris = std::move(best_ris);
    res.casc = std::move(best_casc);
    res.report = std::move(best_rep);
    res.status = converged ? AoStatus::converged : AoStatus::max_iter;
  } else {
    res.bf = std::move(bf);
    res.ris = std::move(ris);
    res.casc = std::move(casc);
    res.report = evaluate(cfg, res.casc, res.ris, res.bf, ao.mode);
    const bool final_ok = audit_constraints(cfg, res.casc, res.ris, res.bf,
                                            ao.mode, ao.audit_tol);
    res.status = !final_ok ? (have_best ? AoStatus::max_iter
                                        : AoStatus::infeasible)
                           : (converged ? AoStatus::converged
                                        : AoStatus::max_iter);
  }
  res.runtime_s = elapsed();
  return res;
}

}  // namespace staris
