#include "staris/metrics.hpp"

#include <cmath>

namespace staris {

namespace {

double abs2(const Complex& z) { return std::norm(z); }

// Forward-path thermal noise seen through the per-hop channels toward `hops`.
double forward_noise(const std::vector<Vec>& hops, const ScenarioConfig& cfg) {
  double acc = 0.0;
  for (int p = 0; p < cfg.n_ris; ++p)
    acc += cfg.sigma_ris_sq[p] * hops[p].squaredNorm();
  return acc;
}

double hop_user_noise(int k, const CascadedChannels& casc,
                      const ScenarioConfig& cfg) {
  double acc = 0.0;
  for (int p = 0; p < cfg.n_ris; ++p)
    acc += cfg.sigma_ris_sq[p] * casc.hop_user[p][k].squaredNorm();
  return acc;
}

}  // namespace

double comm_sinr(int k, const CascadedChannels& casc, const BeamformerSet& bf,
                 const ScenarioConfig& cfg, RisMode mode) {
  const Vec& h = casc.eff_user[k];
  const double num = abs2(h.dot(bf.w[k]));
  double den = cfg.sigma_user_sq[k];
  for (int c = 0; c < cfg.n_users; ++c)
    if (c != k) den += abs2(h.dot(bf.w[c]));
  den += abs2(h.dot(bf.w_s));
  if (mode == RisMode::active) den += hop_user_noise(k, casc, cfg);
  return num / den;
}

double sensing_sinr(const CascadedChannels& casc, const BeamformerSet& bf,
                    const ScenarioConfig& cfg, RisMode mode) {
  const Vec& h = casc.eff_target;
  const double hs2 = h.squaredNorm();
  if (hs2 <= 0.0)
    throw DegenerateGeometryError("effective target channel vanishes");
  const double num = abs2(h.dot(bf.w_s));
  double den = cfg.sigma_radar_sq / (cfg.rcs_sq * hs2);
  for (int c = 0; c < cfg.n_users; ++c) den += abs2(h.dot(bf.w[c]));
  if (mode == RisMode::active) {
    den += forward_noise(casc.hop_target, cfg);
    for (int p = 0; p < cfg.n_ris; ++p)
      den += cfg.sigma_ris_sq[p] * casc.bs_to_ris[p].squaredNorm() /
             (cfg.rcs_sq * hs2);
  }
  return num / den;
}

double leak_sinr(int k, const CascadedChannels& casc, const BeamformerSet& bf,
                 const ScenarioConfig& cfg, RisMode mode) {
  const Vec& h = casc.eff_target;
  const double num = abs2(h.dot(bf.w[k]));
  double den = cfg.sigma_eve_sq;
  for (int c = 0; c < cfg.n_users; ++c)
    if (c != k) den += abs2(h.dot(bf.w[c]));
  den += abs2(h.dot(bf.w_s));
  if (mode == RisMode::active) den += forward_noise(casc.hop_target, cfg);
  return num / den;
}

double active_power(int l, const CascadedChannels& casc,
                    const StarRisState& ris, const BeamformerSet& bf,
                    const ScenarioConfig& cfg) {
  const Mat tt = ris.theta_t_mat(l);
  const Mat tr = ris.theta_r_mat(l);
  const Mat& hl = casc.bs_to_ris[l];
  double acc =
      (tt.squaredNorm() + tr.squaredNorm()) * cfg.sigma_ris_sq[l];
  auto add = [&](const Vec& w) {
    const Vec x = hl * w;
    acc += (tt * x).squaredNorm() + (tr * x).squaredNorm();
  };
  for (const auto& w : bf.w) add(w);
  add(bf.w_s);
  return acc;
}

double sum_rate(const RealVec& gamma, const std::vector<double>& weight) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < gamma.size(); ++k)
    acc += weight[k] * std::log1p(gamma[k]);
  return acc;
}

std::pair<RealVec, double> noise_aggregates(const CascadedChannels& casc,
                                            const ScenarioConfig& cfg,
                                            RisMode mode) {
  RealVec user(cfg.n_users);
  for (int k = 0; k < cfg.n_users; ++k) {
    user[k] = cfg.sigma_user_sq[k];
    if (mode == RisMode::active) user[k] += hop_user_noise(k, casc, cfg);
  }
  const double hs2 = casc.eff_target.squaredNorm();
  if (hs2 <= 0.0)
    throw DegenerateGeometryError("effective target channel vanishes");
  double sense = cfg.sigma_radar_sq / (cfg.rcs_sq * hs2);
  if (mode == RisMode::active) {
    sense += forward_noise(casc.hop_target, cfg);
    for (int p = 0; p < cfg.n_ris; ++p)
      sense += cfg.sigma_ris_sq[p] * casc.bs_to_ris[p].squaredNorm() /
               (cfg.rcs_sq * hs2);
  }
  return {user, sense};
}

MetricsReport evaluate(const ScenarioConfig& cfg, const CascadedChannels& casc,
                       const StarRisState& ris, const BeamformerSet& bf,
                       RisMode mode) {
  MetricsReport r;
  const int K = cfg.n_users, L = cfg.n_ris;
  r.gamma_user.resize(K);
  r.gamma_leak.resize(K);
  r.rate.resize(K);
  for (int k = 0; k < K; ++k) {
    r.gamma_user[k] = comm_sinr(k, casc, bf, cfg, mode);
    r.gamma_leak[k] = leak_sinr(k, casc, bf, cfg, mode);
    r.rate[k] = std::log1p(r.gamma_user[k]);
  }
  r.gamma_sense = sensing_sinr(casc, bf, cfg, mode);
  r.weighted_sum_rate = sum_rate(r.gamma_user, cfg.rate_weight);
  r.active_power.resize(L);
  for (int l = 0; l < L; ++l)
    r.active_power[l] = active_power(l, casc, ris, bf, cfg);
  auto [su, ss] = noise_aggregates(casc, cfg, mode);
  r.sigma_tilde_user_sq = su;
  r.sigma_tilde_sense_sq = ss;
  return r;
}

}  // namespace staris
