#include "staris/comm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace staris {

namespace {

// Weighted-interference base matrix Sum_k alpha_k xi_k |u_k|^2 h_k h_k^H.
Mat interference_base(const EqualizerState& eq, const CascadedChannels& casc,
                      const ScenarioConfig& cfg) {
  Mat r = Mat::Zero(cfg.n_antennas, cfg.n_antennas);
  for (int k = 0; k < cfg.n_users; ++k)
    r += cfg.rate_weight[k] * eq.xi[k] * std::norm(eq.u[k]) *
         (casc.eff_user[k] * casc.eff_user[k].adjoint());
  return r;
}

// Coefficient of the h_S h_S^H rank-one term in the system matrix of beam m,
// optionally leaving out one multiplier (skip = user index, K = mu_S,
// -1 = keep everything).
double rank1_coeff(int m, const DualState& dual, const ScenarioConfig& cfg,
                   int skip = -1) {
  double c = 0.0;
  for (int l = 0; l < cfg.n_users; ++l) {
    if (l == skip) continue;
    c += (l == m) ? dual.mu[l] : -dual.mu[l] * cfg.gamma_leak_req[l];
  }
  if (skip != cfg.n_users) c += dual.mu_s * cfg.gamma_sense_req;
  return c;
}

double forward_target_noise(const CascadedChannels& casc,
                            const ScenarioConfig& cfg, RisMode mode) {
  double acc = 0.0;
  if (mode == RisMode::active)
    for (int p = 0; p < cfg.n_ris; ++p)
      acc += cfg.sigma_ris_sq[p] * casc.hop_target[p].squaredNorm();
  return acc;
}

}  // namespace

EqualizerState update_equalizers(const CascadedChannels& casc,
                                 const BeamformerSet& bf,
                                 const ScenarioConfig& cfg, RisMode mode) {
  auto [sigma_user, sigma_sense] = noise_aggregates(casc, cfg, mode);
  (void)sigma_sense;
  EqualizerState eq;
  const int K = cfg.n_users;
  eq.u.resize(K);
  eq.xi.resize(K);
  eq.e.resize(K);
  for (int k = 0; k < K; ++k) {
    const Vec& h = casc.eff_user[k];
    double total = sigma_user[k] + std::norm(h.dot(bf.w_s));
    for (const auto& w : bf.w) total += std::norm(h.dot(w));
    const Complex hw = h.dot(bf.w[k]);
    eq.u[k] = std::conj(hw) / total;
    eq.e[k] = 1.0 - std::norm(hw) / total;
    eq.xi[k] = 1.0 / eq.e[k];
  }
  return eq;
}

Mat active_penalty(const CascadedChannels& casc, const StarRisState& ris,
                   const ScenarioConfig& cfg, const RealVec& nu) {
  Mat v = Mat::Zero(cfg.n_antennas, cfg.n_antennas);
  for (int p = 0; p < cfg.n_ris; ++p) {
    if (nu[p] == 0.0) continue;
    Vec gain(cfg.elements());
    for (int i = 0; i < cfg.elements(); ++i)
      gain[i] = ris.beta_t[p][i] * ris.beta_t[p][i] +
                ris.beta_r[p][i] * ris.beta_r[p][i];
    v += nu[p] * casc.bs_to_ris[p].adjoint() * gain.asDiagonal() *
         casc.bs_to_ris[p];
  }
  return v;
}

std::vector<Vec> w_closed_form(const DualState& dual,
                               const EqualizerState& eq,
                               const CascadedChannels& casc,
                               const ScenarioConfig& cfg, const Mat& penalty) {
  const Mat base = interference_base(eq, casc, cfg) + penalty;
  const int n = cfg.n_antennas;
  std::vector<Vec> w(cfg.n_users);
  for (int k = 0; k < cfg.n_users; ++k) {
    Mat a = base + dual.lambda * Mat::Identity(n, n);
    a += rank1_coeff(k, dual, cfg) *
         (casc.eff_target * casc.eff_target.adjoint());
    const Vec rhs = cfg.rate_weight[k] * eq.xi[k] * std::conj(eq.u[k]) *
                    casc.eff_user[k];
    w[k] = a.partialPivLu().solve(rhs);
  }
  return w;
}

double solve_lambda(const DualState& dual, const EqualizerState& eq,
                    const CascadedChannels& casc, const ScenarioConfig& cfg,
                    const Mat& penalty, double p_budget) {
  const Mat base = interference_base(eq, casc, cfg) + penalty;
  const int K = cfg.n_users;
  std::vector<RealVec> lam(K), ups(K);
  double pd_floor = 0.0;
  for (int k = 0; k < K; ++k) {
    const Mat b = base + rank1_coeff(k, dual, cfg) *
                             (casc.eff_target * casc.eff_target.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(b);
    lam[k] = es.eigenvalues();
    pd_floor = std::max(pd_floor, -lam[k].minCoeff());
    const Vec y = es.eigenvectors().adjoint() * casc.eff_user[k];
    const double scale = std::pow(cfg.rate_weight[k] * eq.xi[k], 2) *
                         std::norm(eq.u[k]);
    ups[k] = scale * y.cwiseAbs2();
  }
  auto power = [&](double lambda) {
    double acc = 0.0;
    for (int k = 0; k < K; ++k)
      for (Eigen::Index i = 0; i < lam[k].size(); ++i) {
        const double d = lam[k][i] + lambda;
        acc += ups[k][i] / (d * d);
      }
    return acc;
  };

  const double floor_eps = 1e-12 * std::max(pd_floor, 1.0);
  const double lo_bound = pd_floor > 0.0 ? pd_floor + floor_eps : 0.0;
  if (power(lo_bound) <= p_budget) return lo_bound;

  double hi = std::max(1.0, 2.0 * lo_bound);
  while (power(hi) > p_budget) hi *= 2.0;
  double lo = lo_bound;
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    mid = 0.5 * (lo + hi);
    const double p = power(mid);
    if (std::abs(p - p_budget) <= 1e-10 * p_budget) break;
    (p > p_budget ? lo : hi) = mid;
  }
  return mid;
}

namespace {

// Shared scaffolding of the mu searches: Sherman-Morrison scalars for every
// beam with one multiplier struck from the system matrix.
struct MuScalars {
  RealVec alpha2;  // |alpha_m xi_m u_m|^2
  Vec g;           // h_S^H E_m^{-1} h_m
  RealVec kappa;   // h_S^H E_m^{-1} h_S
};

MuScalars mu_scalars(int skip, const DualState& dual,
                     const EqualizerState& eq, const CascadedChannels& casc,
                     const ScenarioConfig& cfg, const Mat& penalty) {
  const Mat base = interference_base(eq, casc, cfg) + penalty +
                   dual.lambda * Mat::Identity(cfg.n_antennas,
                                               cfg.n_antennas);
  const int K = cfg.n_users;
  MuScalars s;
  s.alpha2.resize(K);
  s.g.resize(K);
  s.kappa.resize(K);
  for (int m = 0; m < K; ++m) {
    const Mat e = base + rank1_coeff(m, dual, cfg, skip) *
                             (casc.eff_target * casc.eff_target.adjoint());
    const Vec y = e.partialPivLu().solve(casc.eff_target);
    s.g[m] = y.dot(casc.eff_user[m]);
    s.kappa[m] = std::real(y.dot(casc.eff_target));
    s.alpha2[m] =
        std::pow(cfg.rate_weight[m] * eq.xi[m], 2) * std::norm(eq.u[m]);
  }
  return s;
}

// Monotone-decreasing root find of f on (0, hi_pole) or (0, inf).
double bisect_root(const std::function<double(double)>& f, double pole) {
  double hi;
  if (std::isfinite(pole)) {
    hi = pole * (1.0 - 1e-9);
    if (f(hi) > 0.0) return -1.0;  // no sign change before the pole
  } else {
    hi = 1.0;
    int guard = 0;
    while (f(hi) > 0.0) {
      hi *= 2.0;
      if (++guard > 200) return -1.0;
    }
  }
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
    if (hi - lo <= 1e-14 * std::max(hi, 1.0)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double solve_mu(int k, const DualState& dual, const EqualizerState& eq,
                const CascadedChannels& casc, const ScenarioConfig& cfg,
                const Mat& penalty, double leak_target) {
  const MuScalars s = mu_scalars(k, dual, eq, casc, cfg, penalty);
  const double gamma = cfg.gamma_leak_req[k];
  auto f = [&](double mu) {
    double acc = s.alpha2[k] * std::norm(s.g[k]) /
                 (gamma * std::pow(1.0 + mu * s.kappa[k], 2));
    for (int m = 0; m < cfg.n_users; ++m) {
      if (m == k) continue;
      acc -= s.alpha2[m] * std::norm(s.g[m]) /
             std::pow(1.0 - mu * gamma * s.kappa[m], 2);
    }
    return acc - leak_target;
  };
  if (f(0.0) <= 0.0) return 0.0;
  double pole = std::numeric_limits<double>::infinity();
  for (int m = 0; m < cfg.n_users; ++m)
    if (m != k && s.kappa[m] > 0.0)
      pole = std::min(pole, 1.0 / (gamma * s.kappa[m]));
  return bisect_root(f, pole);
}

double solve_mu_s(const DualState& dual, const EqualizerState& eq,
                  const CascadedChannels& casc, const ScenarioConfig& cfg,
                  const Mat& penalty, double sense_target) {
  if (cfg.n_users == 0) return 0.0;
  const MuScalars s =
      mu_scalars(cfg.n_users, dual, eq, casc, cfg, penalty);
  auto f = [&](double mu) {
    double acc = -sense_target;
    for (int m = 0; m < cfg.n_users; ++m)
      acc += s.alpha2[m] * std::norm(s.g[m]) /
             std::pow(1.0 + mu * cfg.gamma_sense_req * s.kappa[m], 2);
    return acc;
  };
  if (sense_target <= 0.0) return -1.0;
  if (f(0.0) <= 0.0) return 0.0;
  return bisect_root(f, std::numeric_limits<double>::infinity());
}

void update_nu(DualState& dual, const CascadedChannels& casc,
               const StarRisState& ris, const BeamformerSet& bf,
               const ScenarioConfig& cfg, double step_scale) {
  // Multiplicative subgradient step on log(nu): the multipliers must span
  // many orders of magnitude because the cascaded channels are tiny, so an
  // additive step with any fixed size is either unstable or glacial.
  for (int p = 0; p < cfg.n_ris; ++p) {
    const double ratio =
        active_power(p, casc, ris, bf, cfg) / cfg.p_a_max[p];
    if (dual.nu[p] == 0.0) {
      if (ratio > 1.0) dual.nu[p] = 1e-12;
      continue;
    }
    const double factor =
        std::clamp(std::pow(ratio, step_scale), 0.25, 4.0);
    dual.nu[p] *= factor;
    if (dual.nu[p] < 1e-300) dual.nu[p] = 0.0;
  }
}

double comm_lagrangian(const ScenarioConfig& cfg,
                       const CascadedChannels& casc, const StarRisState& ris,
                       const BeamformerSet& bf, const EqualizerState& eq,
                       const DualState& dual, RisMode mode) {
  auto [sigma_user, sigma_sense] = noise_aggregates(casc, cfg, mode);
  double l = 0.0;
  for (int k = 0; k < cfg.n_users; ++k) {
    const Vec& h = casc.eff_user[k];
    double total = sigma_user[k] + std::norm(h.dot(bf.w_s));
    for (const auto& w : bf.w) total += std::norm(h.dot(w));
    l += cfg.rate_weight[k] * eq.xi[k] *
         (std::norm(eq.u[k]) * total -
          2.0 * std::real(eq.u[k] * h.dot(bf.w[k])) + 1.0);
  }
  l += dual.lambda * (bf.total_power() - cfg.p_bs_max);

  const Vec& hs = casc.eff_target;
  const double fw = forward_target_noise(casc, cfg, mode);
  std::vector<double> leak(cfg.n_users);
  for (int c = 0; c < cfg.n_users; ++c) leak[c] = std::norm(hs.dot(bf.w[c]));
  const double ws_leak = std::norm(hs.dot(bf.w_s));
  for (int k = 0; k < cfg.n_users; ++k) {
    double others = ws_leak + fw + cfg.sigma_eve_sq;
    for (int c = 0; c < cfg.n_users; ++c)
      if (c != k) others += leak[c];
    l += dual.mu[k] * (leak[k] - cfg.gamma_leak_req[k] * others);
  }
  double comm_sum = 0.0;
  for (int c = 0; c < cfg.n_users; ++c) comm_sum += leak[c];
  l -= dual.mu_s *
       (ws_leak - cfg.gamma_sense_req * (comm_sum + sigma_sense));

  if (mode == RisMode::active)
    for (int p = 0; p < cfg.n_ris; ++p)
      l += dual.nu[p] *
           (active_power(p, casc, ris, bf, cfg) - cfg.p_a_max[p]);
  return l;
}

CommResult solve_comm_beamformers(const ScenarioConfig& cfg,
                                  const CascadedChannels& casc,
                                  const StarRisState& ris,
                                  const BeamformerSet& init, RisMode mode,
                                  const CommOptions& opt) {
  CommResult res;
  res.bf = init;
  res.dual.mu = RealVec::Zero(cfg.n_users);
  res.dual.nu = RealVec::Zero(cfg.n_ris);

  const Vec& hs = casc.eff_target;
  auto [sigma_user, sigma_sense] = noise_aggregates(casc, cfg, mode);
  (void)sigma_user;
  const double fw = forward_target_noise(casc, cfg, mode);
  const double ws_leak = std::norm(hs.dot(res.bf.w_s));
  const double p_budget =
      std::max(cfg.p_bs_max - res.bf.w_s.squaredNorm(), 0.0);
  const double sense_target =
      ws_leak / cfg.gamma_sense_req - sigma_sense;

  auto constraints_ok = [&](const BeamformerSet& bf) {
    if (bf.total_power() > cfg.p_bs_max * (1.0 + opt.tol_cons)) return false;
    for (int k = 0; k < cfg.n_users; ++k) {
      if (bf.w[k].squaredNorm() == 0.0) continue;
      if (leak_sinr(k, casc, bf, cfg, mode) >
          cfg.gamma_leak_req[k] * (1.0 + opt.tol_cons))
        return false;
    }
    if (sensing_sinr(casc, bf, cfg, mode) <
        cfg.gamma_sense_req * (1.0 - opt.tol_cons))
      return false;
    if (mode == RisMode::active)
      for (int p = 0; p < cfg.n_ris; ++p)
        if (active_power(p, casc, ris, bf, cfg) >
            cfg.p_a_max[p] * (1.0 + opt.tol_cons))
          return false;
    return true;
  };

  double best_obj = -std::numeric_limits<double>::infinity();
  BeamformerSet best_bf = res.bf;
  bool have_best = false;

  for (res.rounds = 1; res.rounds <= opt.max_rounds; ++res.rounds) {
    const DualState prev = res.dual;
    res.eq = update_equalizers(casc, res.bf, cfg, mode);
    const Mat penalty =
        mode == RisMode::active
            ? active_penalty(casc, ris, cfg, res.dual.nu)
            : Mat::Zero(cfg.n_antennas, cfg.n_antennas);

    res.dual.lambda =
        solve_lambda(res.dual, res.eq, casc, cfg, penalty, p_budget);
    for (int k = 0; k < cfg.n_users; ++k) {
      const double mu = solve_mu(k, res.dual, res.eq, casc, cfg, penalty,
                                 ws_leak + fw + cfg.sigma_eve_sq);
      if (mu >= 0.0) res.dual.mu[k] = mu;
    }
    const double mu_s = solve_mu_s(res.dual, res.eq, casc, cfg, penalty,
                                   sense_target);
    if (mu_s >= 0.0) res.dual.mu_s = mu_s;

    res.bf.w = w_closed_form(res.dual, res.eq, casc, cfg, penalty);
    if (mode == RisMode::active)
      update_nu(res.dual, casc, ris, res.bf, cfg, opt.nu_step_scale);

    if (constraints_ok(res.bf)) {
      res.feasible = true;
      const MetricsReport rep = evaluate(cfg, casc, ris, res.bf, mode);
      if (rep.weighted_sum_rate > best_obj) {
        best_obj = rep.weighted_sum_rate;
        best_bf = res.bf;
        have_best = true;
      }
    }

    double delta = std::abs(res.dual.lambda - prev.lambda);
    delta = std::max(delta, std::abs(res.dual.mu_s - prev.mu_s));
    for (int k = 0; k < cfg.n_users; ++k)
      delta = std::max(delta, std::abs(res.dual.mu[k] - prev.mu[k]));
    for (int p = 0; p < cfg.n_ris; ++p)
      delta = std::max(delta, std::abs(res.dual.nu[p] - prev.nu[p]));
    if (delta < opt.tol_mult * std::max(1.0, res.dual.lambda)) {
      res.converged = true;
      break;
    }
  }

  if (have_best && !constraints_ok(res.bf)) res.bf = best_bf;
  res.feasible = constraints_ok(res.bf);
  res.eq = update_equalizers(casc, res.bf, cfg, mode);
  return res;
}

}  // namespace staris
