#include "staris/sensing.hpp"

#include <cmath>
#include <limits>

namespace staris {

SensingSubproblem SensingSubproblem::build(Mat r_int, Vec h_s, double c_s,
                                           double p_res) {
  SensingSubproblem sub;
  sub.r_int = std::move(r_int);
  sub.h_s = std::move(h_s);
  sub.c_s = c_s;
  sub.p_res = p_res;
  Eigen::SelfAdjointEigenSolver<Mat> es(sub.r_int);
  sub.eigvals = es.eigenvalues().cwiseMax(0.0);
  sub.eigvecs = es.eigenvectors();
  sub.g = sub.eigvecs.adjoint() * sub.h_s;
  return sub;
}

double required_beam_power(const CascadedChannels& casc,
                           const BeamformerSet& bf, const ScenarioConfig& cfg,
                           RisMode mode) {
  const Vec& hs = casc.eff_target;
  auto [unused, sigma_sense] = noise_aggregates(casc, cfg, mode);
  (void)unused;

  std::vector<double> leak_power(cfg.n_users);
  double comm_sum = 0.0;
  for (int c = 0; c < cfg.n_users; ++c) {
    leak_power[c] = std::norm(hs.dot(bf.w[c]));
    comm_sum += leak_power[c];
  }
  double c_s = cfg.gamma_sense_req * (comm_sum + sigma_sense);

  double forward_noise = 0.0;
  if (mode == RisMode::active)
    for (int p = 0; p < cfg.n_ris; ++p)
      forward_noise +=
          cfg.sigma_ris_sq[p] * casc.hop_target[p].squaredNorm();
  for (int k = 0; k < cfg.n_users; ++k) {
    const double term = leak_power[k] / cfg.gamma_leak_req[k] -
                        (comm_sum - leak_power[k]) - forward_noise -
                        cfg.sigma_eve_sq;
    c_s = std::max(c_s, term);
  }
  return c_s;
}

Vec mvdr_solution(const SensingSubproblem& sub, double eps) {
  // (R + eps I)^{-1} h through the cached eigenbasis; components in the
  // null space are dropped when eps == 0, matching the power evaluation.
  Vec coeff = Vec::Zero(sub.g.size());
  for (Eigen::Index i = 0; i < sub.g.size(); ++i) {
    const double d = sub.eigvals[i] + eps;
    if (d > 0.0 && sub.g[i] != Complex(0, 0)) coeff[i] = sub.g[i] / d;
  }
  const Vec x = sub.eigvecs * coeff;
  const double denom = std::real(sub.h_s.dot(x));
  return std::sqrt(sub.c_s) / denom * x;
}

double beam_power_fast(const SensingSubproblem& sub, double eps) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < sub.g.size(); ++i) {
    const double p = std::norm(sub.g[i]);
    if (p == 0.0) continue;
    const double d = sub.eigvals[i] + eps;
    if (d <= 0.0) return std::numeric_limits<double>::infinity();
    num += p / (d * d);
    den += p / d;
  }
  return sub.c_s * num / (den * den);
}

SensingSolution solve_sensing(const SensingSubproblem& sub) {
  SensingSolution sol;
  const double hs2 = sub.h_s.squaredNorm();
  if (sub.c_s <= 0.0) {
    sol.w_s = Vec::Zero(sub.h_s.size());
    return sol;
  }
  const double floor = sub.c_s / hs2;
  if (sub.p_res < floor * (1.0 - 1e-12)) {
    sol.feasible = false;
    sol.w_s = Vec::Zero(sub.h_s.size());
    return sol;
  }

  if (beam_power_fast(sub, 0.0) <= sub.p_res) {
    sol.eps = 0.0;
    sol.w_s = mvdr_solution(sub, 0.0);
    return sol;
  }

  double hi = 1.0;
  while (beam_power_fast(sub, hi) > sub.p_res) hi *= 2.0;
  double lo = hi > 1.0 ? hi / 2.0 : 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double p = beam_power_fast(sub, mid);
    if (std::abs(p - sub.p_res) <= 1e-8 * sub.p_res) {
      lo = hi = mid;
      break;
    }
    (p > sub.p_res ? lo : hi) = mid;
  }
  sol.eps = 0.5 * (lo + hi);
  sol.w_s = mvdr_solution(sub, sol.eps);
  // Nudge onto the budget when the power tolerance left a tiny overshoot.
  const double pw = sol.w_s.squaredNorm();
  if (pw > sub.p_res) sol.w_s *= std::sqrt(sub.p_res / pw);
  return sol;
}

}  // namespace staris
