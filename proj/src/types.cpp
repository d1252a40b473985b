#include "staris/types.hpp"

#include <cmath>

namespace staris {

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(n_antennas >= 1, "n_antennas must be >= 1");
  require(n_users >= 0, "n_users must be >= 0");
  require(n_ris >= 1, "n_ris must be >= 1");
  require(elements_x >= 1 && elements_y >= 1, "RIS element grid must be >= 1x1");
  require(carrier_freq_hz > 0, "carrier_freq_hz must be positive");
  require(p_bs_max > 0, "p_bs_max must be positive");
  require(sigma_radar_sq > 0, "sigma_radar_sq must be positive");
  require(sigma_eve_sq > 0, "sigma_eve_sq must be positive");
  require(rcs_sq > 0, "rcs_sq must be positive");
  require(gamma_sense_req > 0, "gamma_sense_req must be positive");
  require(rician_bs_ris > 0 && rician_ris_ris > 0 && rician_ris_user > 0,
          "Rician factors must be positive");

  require(static_cast<int>(ris_pos.size()) == n_ris, "ris_pos size != n_ris");
  require(static_cast<int>(p_a_max.size()) == n_ris, "p_a_max size != n_ris");
  require(static_cast<int>(sigma_ris_sq.size()) == n_ris,
          "sigma_ris_sq size != n_ris");
  require(static_cast<int>(user_pos.size()) == n_users,
          "user_pos size != n_users");
  require(static_cast<int>(user_side.size()) == n_users,
          "user_side size != n_users");
  require(static_cast<int>(sigma_user_sq.size()) == n_users,
          "sigma_user_sq size != n_users");
  require(static_cast<int>(rate_weight.size()) == n_users,
          "rate_weight size != n_users");
  require(static_cast<int>(gamma_leak_req.size()) == n_users,
          "gamma_leak_req size != n_users");

  for (int l = 0; l < n_ris; ++l) {
    require(p_a_max[l] > 0, "p_a_max must be positive");
    require(sigma_ris_sq[l] > 0, "sigma_ris_sq must be positive");
  }
  for (int k = 0; k < n_users; ++k) {
    // n_ris + 1 marks a user past the whole chain (transmission side of
    // every RIS), mirroring the target_side = 0 convention.
    require(user_side[k] >= 1 && user_side[k] <= n_ris + 1,
            "user_side out of range [1, L+1]");
    require(sigma_user_sq[k] > 0, "sigma_user_sq must be positive");
    require(rate_weight[k] > 0, "rate_weight must be positive");
    require(gamma_leak_req[k] > 0, "gamma_leak_req must be positive");
  }
  if (target_side > 0)
    require(target_side >= 1 && target_side <= n_ris + 1,
            "target_side out of range [1, L+1]");
}

void apply_defaults(ScenarioConfig& cfg) {
  if (cfg.ris_pos.empty()) {
    cfg.ris_pos.resize(cfg.n_ris);
    for (int l = 0; l < cfg.n_ris; ++l)
      cfg.ris_pos[l] = {10.0 * (l + 1), 0.0, 0.0};
  }
  if (cfg.p_a_max.empty()) cfg.p_a_max.assign(cfg.n_ris, 200.0);
  if (cfg.sigma_ris_sq.empty()) cfg.sigma_ris_sq.assign(cfg.n_ris, 1e-11);
  if (cfg.sigma_user_sq.empty()) cfg.sigma_user_sq.assign(cfg.n_users, 1e-11);
  if (cfg.rate_weight.empty()) cfg.rate_weight.assign(cfg.n_users, 1.0);
  if (cfg.gamma_leak_req.empty())
    cfg.gamma_leak_req.assign(cfg.n_users, db_to_linear(5.0));
  if (cfg.user_side.empty()) {
    cfg.user_side.resize(cfg.n_users);
    for (int k = 0; k < cfg.n_users; ++k)
      cfg.user_side[k] = (k % cfg.n_ris) + 1;
  }
}

Vec StarRisState::theta_t(int l) const {
  const auto& b = beta_t[l];
  const auto& p = phi_t[l];
  Vec out(b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i)
    out[i] = b[i] * std::polar(1.0, p[i]);
  return out;
}

Vec StarRisState::theta_r(int l) const {
  const auto& b = beta_r[l];
  const auto& p = phi_r[l];
  Vec out(b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i)
    out[i] = b[i] * std::polar(1.0, p[i]);
  return out;
}

Vec StarRisState::theta_bar(int l) const {
  const Vec t = theta_t(l), r = theta_r(l);
  Vec out(t.size() + r.size());
  out << t, r;
  return out;
}

Mat StarRisState::theta_t_mat(int l) const {
  return theta_t(l).asDiagonal();
}

Mat StarRisState::theta_r_mat(int l) const {
  return theta_r(l).asDiagonal();
}

void StarRisState::set_theta_bar(int l, const Vec& theta) {
  const Eigen::Index m = theta.size() / 2;
  for (Eigen::Index i = 0; i < m; ++i) {
    beta_t[l][i] = std::abs(theta[i]);
    phi_t[l][i] = std::arg(theta[i]);
    if (phi_t[l][i] < 0) phi_t[l][i] += 2 * M_PI;
    beta_r[l][i] = std::abs(theta[m + i]);
    phi_r[l][i] = std::arg(theta[m + i]);
    if (phi_r[l][i] < 0) phi_r[l][i] += 2 * M_PI;
  }
}

StarRisState StarRisState::uniform_split(int n_ris, int m) {
  StarRisState s;
  const double amp = 1.0 / std::sqrt(2.0);
  s.beta_t.assign(n_ris, RealVec::Constant(m, amp));
  s.beta_r.assign(n_ris, RealVec::Constant(m, amp));
  s.phi_t.assign(n_ris, RealVec::Zero(m));
  s.phi_r.assign(n_ris, RealVec::Zero(m));
  return s;
}

}  // namespace staris
