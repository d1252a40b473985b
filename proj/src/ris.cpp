#include "staris/ris.hpp"

#include <cmath>
#include <limits>

#include "staris/channel.hpp"
#include "staris/metrics.hpp"

namespace staris {

namespace {

/// Lift of (theta^T F + b^H) W (F^H theta* + b) into the (2M+1) space.
Mat quad_lift(const Mat& f, const Vec& b, const Mat& w) {
  const Eigen::Index r = f.rows();
  Mat out(r + 1, r + 1);
  const Mat wf = w * f.adjoint();
  out.topLeftCorner(r, r) = f * wf;
  const Vec col = f * (w * b);
  out.topRightCorner(r, 1) = col;
  out.bottomLeftCorner(1, r) = col.adjoint();
  out(r, r) = std::real(b.dot(w * b));
  return out;
}

}  // namespace

Mat lift_point(const Vec& theta_bar, double scale) {
  const Eigen::Index n = theta_bar.size();
  Vec t(n + 1);
  t.head(n) = theta_bar / scale;
  t[n] = 1.0;
  return t.conjugate() * t.transpose();
}

double lift_trace(const Mat& a, const Mat& x) {
  return std::real(a.cwiseProduct(x.transpose()).sum());
}

RisLift assemble_ris_lift(const ScenarioConfig& cfg, const ChannelSet& ch,
                          const StarRisState& ris,
                          const CascadedChannels& casc,
                          const EqualizerState& eq, const BeamformerSet& bf,
                          int q, RisMode mode, double scale) {
  const int M = cfg.elements(), K = cfg.n_users, L = cfg.n_ris;
  const int qi = q - 1, D = 2 * M + 1;
  RisLift lf;
  lf.q = q;
  lf.m = M;
  lf.dim = D;
  lf.mode = mode;
  lf.sigma_eve_sq = cfg.sigma_eve_sq;
  lf.sigma_sense_sq = cfg.sigma_radar_sq;
  lf.rho_sq = cfg.rcs_sq;
  lf.p_budget = mode == RisMode::active ? cfg.p_a_max[qi] : 0.0;
  if (scale > 0) {
    lf.scale = scale;
  } else if (mode == RisMode::active) {
    const double rms =
        std::sqrt(ris.theta_bar(qi).squaredNorm() / (2.0 * M));
    lf.scale = std::max(1.0, rms);
  }
  const double s = lf.scale;

  const DecompositionQ dec = decompose_wrt_q(cfg, ch, ris, casc, q);

  Mat wbar = bf.w_s * bf.w_s.adjoint();
  for (int k = 0; k < K; ++k) wbar += bf.w[k] * bf.w[k].adjoint();

  // Thermal-noise quadratic forms through the hop channels (active mode).
  auto n_tilde = [&](int k) {
    Mat out = Mat::Zero(D, D);
    const Mat eye = Mat::Identity(M, M);
    for (int p = 0; p < L; ++p)
      out += cfg.sigma_ris_sq[p] *
             quad_lift(Mat(s * dec.hop_f_bar[p][k]), dec.hop_b[p][k], eye);
    return out;
  };
  const Mat nts = mode == RisMode::active ? n_tilde(K) : Mat(Mat::Zero(D, D));

  lf.objective = Mat::Zero(D, D);
  for (int k = 0; k < K; ++k) {
    const double ax = cfg.rate_weight[k] * eq.xi[k];
    const Complex u = eq.u[k];
    const double u2 = std::norm(u);
    const Mat f = s * dec.f_bar[k];
    Mat base = u2 * quad_lift(f, dec.b[k], wbar);
    const Vec cross = u * (f * bf.w[k]);
    base.block(0, D - 1, 2 * M, 1) -= cross;
    base.block(D - 1, 0, 1, 2 * M) -= cross.adjoint();
    base(D - 1, D - 1) += u2 * cfg.sigma_user_sq[k] + 1.0 -
                          2.0 * std::real(u * dec.b[k].dot(bf.w[k]));
    if (mode == RisMode::active) base += u2 * n_tilde(k);
    lf.objective += ax * base;
  }

  const Mat fs = s * dec.f_bar[K];
  const Vec& bs = dec.b[K];
  lf.leak.resize(K);
  for (int k = 0; k < K; ++k) {
    const double g = cfg.gamma_leak_req[k];
    const Mat wmk =
        ((1.0 + g) / g) * (bf.w[k] * bf.w[k].adjoint()) - wbar;
    lf.leak[k] = quad_lift(fs, bs, wmk) - nts;
  }
  const double gs = cfg.gamma_sense_req;
  const Mat wms =
      ((1.0 + gs) / gs) * (bf.w_s * bf.w_s.adjoint()) - wbar;
  lf.sense = quad_lift(fs, bs, wms) - nts;
  lf.gram = quad_lift(fs, bs, Mat::Identity(cfg.n_antennas, cfg.n_antennas));

  lf.fro = Mat::Zero(D, D);
  lf.power_diag = RealVec::Zero(M);
  if (mode == RisMode::active) {
    const Mat& hq = casc.bs_to_ris[qi];
    for (int k = 0; k < K; ++k)
      lf.power_diag += Vec(hq * bf.w[k]).cwiseAbs2();
    lf.power_diag += Vec(hq * bf.w_s).cwiseAbs2();
    lf.power_diag.array() += cfg.sigma_ris_sq[qi];

    std::vector<Mat> ttil;
    for (int p = 0; p < L; ++p) {
      const double sp = cfg.sigma_ris_sq[p];
      if (p <= qi) {
        lf.fro(D - 1, D - 1) += sp * casc.bs_to_ris[p].squaredNorm();
        continue;
      }
      if (ttil.empty()) ttil = tilde_t(cfg, ch, ris, casc, q);
      const Mat& tt = ttil[p - qi];
      const Mat resid = casc.bs_to_ris[p] - casc.ris_to_ris[qi][p] * hq;
      lf.fro.block(0, 0, M, M) +=
          (sp * s * s) * Mat((tt.adjoint() * tt).conjugate())
                             .cwiseProduct(hq * hq.adjoint());
      const Vec omega = Mat(hq * resid.adjoint() * tt).diagonal();
      lf.fro.block(0, D - 1, M, 1) += (sp * s) * omega;
      lf.fro.block(D - 1, 0, 1, M) += (sp * s) * omega.adjoint();
      lf.fro(D - 1, D - 1) += sp * resid.squaredNorm();
    }
  }
  return lf;
}

double sensing_bilinear(const RisLift& lift, const Mat& x) {
  return lift.rho_sq * lift_trace(lift.gram, x) * lift_trace(lift.sense, x);
}

LinearizedSensing sca_sensing(const RisLift& lift, const Mat& point) {
  const double t1 = lift_trace(lift.gram, point);
  const double t2 = lift_trace(lift.sense, point);
  LinearizedSensing lin;
  lin.a = lift.rho_sq * (t2 * lift.gram + t1 * lift.sense) - lift.fro;
  lin.rhs = lift.sigma_sense_sq + lift.rho_sq * t1 * t2;
  return lin;
}

SdpProblem build_ris_sdp(const RisLift& lift, const Mat& sca_point) {
  const int M = lift.m, D = lift.dim;
  SdpProblem p;
  p.n = D;
  p.c = lift.objective;
  {
    Mat corner = Mat::Zero(D, D);
    corner(D - 1, D - 1) = 1.0;
    p.constraints.push_back({std::move(corner), ConstraintSense::eq, 1.0});
  }
  const double inv_s2 = 1.0 / (lift.scale * lift.scale);
  if (lift.mode == RisMode::passive) {
    for (int i = 0; i < M; ++i) {
      Mat e = Mat::Zero(D, D);
      e(i, i) = 1.0;
      e(M + i, M + i) = 1.0;
      p.constraints.push_back({std::move(e), ConstraintSense::eq, inv_s2});
    }
  }
  for (const Mat& mk : lift.leak)
    p.constraints.push_back({mk, ConstraintSense::le, lift.sigma_eve_sq});
  if (lift.mode == RisMode::active) {
    Mat pw = Mat::Zero(D, D);
    const double s2 = lift.scale * lift.scale;
    for (int i = 0; i < M; ++i) {
      pw(i, i) = s2 * lift.power_diag[i];
      pw(M + i, M + i) = s2 * lift.power_diag[i];
    }
    p.constraints.push_back({std::move(pw), ConstraintSense::le,
                             lift.p_budget});
  }
  LinearizedSensing lin = sca_sensing(lift, sca_point);
  p.constraints.push_back({std::move(lin.a), ConstraintSense::ge, lin.rhs});
  return p;
}

double weighted_mse(const ScenarioConfig& cfg, const CascadedChannels& casc,
                    const BeamformerSet& bf, const EqualizerState& eq,
                    RisMode mode) {
  const auto [sigma_user, sigma_sense] = noise_aggregates(casc, cfg, mode);
  (void)sigma_sense;
  double total = 0.0;
  for (int k = 0; k < cfg.n_users; ++k) {
    const Vec& h = casc.eff_user[k];
    double rx = std::norm(h.dot(bf.w_s));
    for (const auto& wc : bf.w) rx += std::norm(h.dot(wc));
    const Complex u = eq.u[k];
    const double e = std::norm(u) * (rx + sigma_user[k]) -
                     2.0 * std::real(u * h.dot(bf.w[k])) + 1.0;
    total += cfg.rate_weight[k] * eq.xi[k] * e;
  }
  return total;
}

bool ris_point_feasible(const ScenarioConfig& cfg,
                        const CascadedChannels& casc, const StarRisState& ris,
                        const BeamformerSet& bf, RisMode mode, double tol) {
  for (int k = 0; k < cfg.n_users; ++k)
    if (leak_sinr(k, casc, bf, cfg, mode) >
        cfg.gamma_leak_req[k] * (1.0 + tol))
      return false;
  try {
    if (sensing_sinr(casc, bf, cfg, mode) <
        cfg.gamma_sense_req * (1.0 - tol))
      return false;
  } catch (const DegenerateGeometryError&) {
    return false;
  }
  if (mode == RisMode::active)
    for (int l = 0; l < cfg.n_ris; ++l)
      if (active_power(l, casc, ris, bf, cfg) >
          cfg.p_a_max[l] * (1.0 + tol))
        return false;
  return true;
}

Vec project_candidate(const Vec& theta_bar, RisMode mode,
                      const RealVec& power_diag, double p_budget) {
  const Eigen::Index m = theta_bar.size() / 2;
  Vec out = theta_bar;
  constexpr double kFloor = StarRisState::kBetaFloor;
  if (mode == RisMode::passive) {
    const double split = 1.0 / std::sqrt(2.0);
    for (Eigen::Index i = 0; i < m; ++i) {
      Complex t = out[i], r = out[m + i];
      const double n = std::sqrt(std::norm(t) + std::norm(r));
      if (n < 1e-300) {
        t = split;
        r = split;
      } else {
        t /= n;
        r /= n;
      }
      if (std::abs(t) < kFloor) {
        t = std::polar(kFloor, std::arg(t));
        r = std::polar(std::sqrt(1.0 - kFloor * kFloor), std::arg(r));
      }
      out[i] = t;
      out[m + i] = r;
    }
    return out;
  }
  double pa = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    pa += power_diag[i] * (std::norm(out[i]) + std::norm(out[m + i]));
  if (pa > p_budget && pa > 0.0) out *= std::sqrt(p_budget / pa);
  for (Eigen::Index i = 0; i < m; ++i)
    if (std::abs(out[i]) < kFloor)
      out[i] = std::polar(kFloor, std::arg(out[i]));
  return out;
}

std::vector<Vec> extract_candidates(const RisLift& lift, const Mat& x,
                                    std::mt19937_64& rng, int n_random) {
  const int D = lift.dim, M = lift.m;
  Eigen::SelfAdjointEigenSolver<Mat> es(x);
  std::vector<Vec> out;
  auto push = [&](const Vec& c) {
    // x ~ c c^H with c = conj(t-tilde); undo the lift's conjugation.
    const Vec t = c.conjugate();
    const Complex last = t[D - 1];
    if (std::abs(last) < 1e-12) return;
    const Vec theta = lift.scale * Vec(t.head(2 * M) / last);
    out.push_back(
        project_candidate(theta, lift.mode, lift.power_diag, lift.p_budget));
  };
  push(Vec(std::sqrt(std::max(0.0, es.eigenvalues()[D - 1])) *
           es.eigenvectors().col(D - 1)));
  const Mat half = es.eigenvectors() *
                   es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  std::normal_distribution<double> g(0.0, 1.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int r = 0; r < n_random; ++r) {
    Vec z(D);
    for (int i = 0; i < D; ++i)
      z[i] = Complex(g(rng), g(rng)) * inv_sqrt2;
    push(Vec(half * z));
  }
  return out;
}

RisUpdateResult solve_theta_q(const ScenarioConfig& cfg, const ChannelSet& ch,
                              StarRisState& ris, CascadedChannels& casc,
                              const EqualizerState& eq,
                              const BeamformerSet& bf, int q, RisMode mode,
                              std::mt19937_64& rng,
                              const RisUpdateOptions& opt) {
  const int qi = q - 1;
  RisUpdateResult res;
  res.objective_before = weighted_mse(cfg, casc, bf, eq, mode);
  res.objective_after = res.objective_before;
  const bool prev_feasible =
      ris_point_feasible(cfg, casc, ris, bf, mode, opt.cons_tol);

  const RisLift lift =
      assemble_ris_lift(cfg, ch, ris, casc, eq, bf, q, mode);
  const int D = lift.dim;
  Mat point = lift_point(ris.theta_bar(qi), lift.scale);

  SdpSolution last;
  bool have = false;
  double prev_obj = 0.0;
  SdpOptions so = opt.sdp;
  for (int i = 0; i < opt.max_sca; ++i) {
    const SdpProblem sp = build_ris_sdp(lift, point);
    so.warm = have ? &last : nullptr;
    SdpSolution sol = solve_sdp(sp, so);
    res.sdp_status = sol.status;
    if (sol.status != SdpStatus::optimal) break;
    last = std::move(sol);
    have = true;
    ++res.sca_rounds;
    Mat xm = last.x;
    const double corner = std::real(xm(D - 1, D - 1));
    if (corner > 0.5) xm /= corner;
    point = std::move(xm);
    const double obj = lift_trace(lift.objective, point);
    if (i > 0 && std::abs(obj - prev_obj) <=
                     opt.sca_tol * std::max(1.0, std::abs(prev_obj))) {
      prev_obj = obj;
      break;
    }
    prev_obj = obj;
  }
  if (!have) return res;  // relaxation failed: keep previous coefficients

  {
    Eigen::SelfAdjointEigenSolver<Mat> es(last.x);
    const double l1 = es.eigenvalues()[D - 1];
    res.rank_ratio =
        l1 > 0 ? std::max(0.0, es.eigenvalues()[D - 2]) / l1 : 0.0;
  }

  const auto cands = extract_candidates(lift, last.x, rng, opt.n_random);
  const Vec prev_theta = ris.theta_bar(qi);
  double best_obj = std::numeric_limits<double>::infinity();
  Vec best;
  for (const auto& cand : cands) {
    ris.set_theta_bar(qi, cand);
    const CascadedChannels cc = cascade_channels(cfg, ch, ris);
    if (!ris_point_feasible(cfg, cc, ris, bf, mode, opt.cons_tol)) continue;
    const double obj = weighted_mse(cfg, cc, bf, eq, mode);
    if (obj < best_obj) {
      best_obj = obj;
      best = cand;
    }
  }
  ris.set_theta_bar(qi, prev_theta);

  const double slack =
      1e-12 * std::max(1.0, std::abs(res.objective_before));
  if (best.size() &&
      (best_obj <= res.objective_before + slack || !prev_feasible)) {
    ris.set_theta_bar(qi, best);
    casc = cascade_channels(cfg, ch, ris);
    res.accepted = true;
    res.objective_after = best_obj;
  }
  return res;
}

}  // namespace staris
