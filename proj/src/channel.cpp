#include "staris/channel.hpp"

#include <algorithm>
#include <cmath>

namespace staris {

namespace {

struct Angles {
  double azimuth{0};
  double elevation{0};
};

// Angles of the direction from `from` toward `to`.
Angles direction_angles(const Position& from, const Position& to) {
  const double dx = to.x - from.x, dy = to.y - from.y, dz = to.z - from.z;
  const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
  Angles a;
  a.azimuth = std::atan2(dy, dx);
  a.elevation = std::asin(dz / d);
  return a;
}

double checked_distance(const Position& a, const Position& b,
                        const std::string& link) {
  const double d = distance(a, b);
  if (d <= 0.0)
    throw DegenerateGeometryError("coincident node positions on link " + link);
  return d;
}

Mat complex_gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = 1.0 / std::sqrt(2.0);
  Mat out(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      out(i, j) = Complex(re * s, im * s);
    }
  return out;
}

Mat rician_mix(const Mat& los, double factor, double pathloss_over_dist,
               std::mt19937_64& rng) {
  const Mat nlos = complex_gaussian(los.rows(), los.cols(), rng);
  const double w_los = std::sqrt(factor / (factor + 1.0));
  const double w_nlos = std::sqrt(1.0 / (factor + 1.0));
  return pathloss_over_dist * (w_los * los + w_nlos * nlos);
}

}  // namespace

Vec steering_ula(double phi, int n, double spacing, double wavelength) {
  const double k = 2.0 * M_PI / wavelength;
  Vec a(n);
  for (int i = 0; i < n; ++i)
    a[i] = std::polar(1.0, k * spacing * i * std::sin(phi));
  return a;
}

Vec steering_upa(double azimuth, double elevation, int mx, int my, double dx,
                 double dy, double wavelength) {
  const double k = 2.0 * M_PI / wavelength;
  Vec ax(mx), ay(my);
  for (int i = 0; i < mx; ++i)
    ax[i] = std::polar(1.0, k * dx * i * std::sin(elevation) * std::cos(azimuth));
  for (int i = 0; i < my; ++i)
    ay[i] = std::polar(1.0, k * dy * i * std::sin(elevation) * std::sin(azimuth));
  Vec out(mx * my);
  for (int i = 0; i < mx; ++i)
    for (int j = 0; j < my; ++j) out[i * my + j] = ax[i] * ay[j];
  return out;
}

ChannelSet sample_channels(const ScenarioConfig& cfg) {
  std::mt19937_64 rng(cfg.rng_seed);
  return sample_channels(cfg, rng);
}

ChannelSet sample_channels(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const int L = cfg.n_ris, K = cfg.n_users, N = cfg.n_antennas;
  const int M = cfg.elements();
  const double lambda = cfg.wavelength();
  const double a_fs = std::pow(lambda / (4.0 * M_PI), 2);  // Friis constant
  const double amp = std::sqrt(a_fs);

  auto upa = [&](const Angles& an) {
    return steering_upa(an.azimuth, an.elevation, cfg.elements_x,
                        cfg.elements_y, cfg.spacing_x(), cfg.spacing_y(),
                        lambda);
  };

  ChannelSet ch;
  ch.bs_ris.resize(L);
  ch.ris_ris.assign(L, std::vector<Mat>(L));
  ch.ris_user.assign(L, std::vector<Vec>(K));
  ch.ris_target.resize(L);

  for (int l = 0; l < L; ++l) {
    const double d = checked_distance(cfg.bs_pos, cfg.ris_pos[l],
                                      "BS->RIS" + std::to_string(l + 1));
    const Angles arr = direction_angles(cfg.ris_pos[l], cfg.bs_pos);
    const Angles dep = direction_angles(cfg.bs_pos, cfg.ris_pos[l]);
    const Vec a_bs =
        steering_ula(dep.azimuth, N, cfg.spacing_bs(), lambda);
    const Mat los = upa(arr) * a_bs.adjoint();
    ch.bs_ris[l] = rician_mix(los, cfg.rician_bs_ris, amp / d, rng);
  }

  for (int l = 1; l < L; ++l)
    for (int p = 0; p < l; ++p) {
      const double d = checked_distance(cfg.ris_pos[p], cfg.ris_pos[l],
                                        "RIS->RIS");
      const Angles arr = direction_angles(cfg.ris_pos[l], cfg.ris_pos[p]);
      const Angles dep = direction_angles(cfg.ris_pos[p], cfg.ris_pos[l]);
      const Mat los = upa(arr) * upa(dep).adjoint();
      ch.ris_ris[p][l] = rician_mix(los, cfg.rician_ris_ris, amp / d, rng);
    }

  for (int l = 0; l < L; ++l)
    for (int k = 0; k < K; ++k) {
      const double d = checked_distance(cfg.ris_pos[l], cfg.user_pos[k],
                                        "RIS->user" + std::to_string(k + 1));
      const Angles dep = direction_angles(cfg.ris_pos[l], cfg.user_pos[k]);
      const Mat los = upa(dep).conjugate();
      ch.ris_user[l][k] = rician_mix(los, cfg.rician_ris_user, amp / d, rng);
    }

  for (int l = 0; l < L; ++l) {
    const double d =
        checked_distance(cfg.ris_pos[l], cfg.target_pos, "RIS->target");
    const Angles dep = direction_angles(cfg.ris_pos[l], cfg.target_pos);
    const Mat los = upa(dep).conjugate();
    ch.ris_target[l] = rician_mix(los, cfg.rician_ris_user, amp / d, rng);
  }
  return ch;
}

CascadedChannels cascade_channels(const ScenarioConfig& cfg,
                                  const ChannelSet& ch,
                                  const StarRisState& ris) {
  const int L = cfg.n_ris, K = cfg.n_users;
  const int M = cfg.elements();
  CascadedChannels casc;

  casc.bs_to_ris.resize(L);
  for (int l = 0; l < L; ++l) {
    Mat h = ch.bs_ris[l];
    for (int p = 0; p < l; ++p)
      h += ch.ris_ris[p][l] * ris.theta_t_mat(p) * casc.bs_to_ris[p];
    casc.bs_to_ris[l] = std::move(h);
  }

  casc.ris_to_ris.assign(L, std::vector<Mat>(L));
  for (int p = 0; p < L; ++p) {
    casc.ris_to_ris[p][p] = Mat::Identity(M, M);
    for (int l = p + 1; l < L; ++l) {
      Mat h = ch.ris_ris[p][l] * ris.theta_t_mat(p);
      for (int q = p + 1; q < l; ++q)
        h += ch.ris_ris[q][l] * ris.theta_t_mat(q) * casc.ris_to_ris[p][q];
      casc.ris_to_ris[p][l] = std::move(h);
    }
  }

  // Effective channels; user k splits at its serving RIS, the target is
  // reached through the transmission side of the whole chain.
  auto effective = [&](const std::vector<Vec>& link, int split) {
    Vec h = Vec::Zero(cfg.n_antennas);
    for (int l = 0; l < L; ++l) {
      const Mat& theta = (l < split - 1) ? ris.theta_t_mat(l)
                                         : ris.theta_r_mat(l);
      h += casc.bs_to_ris[l].adjoint() * theta.adjoint() * link[l];
    }
    return h;
  };
  auto hop_effective = [&](const std::vector<Vec>& link, int split, int p) {
    Vec h = Vec::Zero(M);
    for (int l = p; l < L; ++l) {
      if (l < split - 1) {
        h += casc.ris_to_ris[p][l].adjoint() * ris.theta_t_mat(l).adjoint() *
             link[l];
      } else if (l >= split - 1 && l >= p) {
        h += casc.ris_to_ris[p][l].adjoint() * ris.theta_r_mat(l).adjoint() *
             link[l];
      }
    }
    return h;
  };

  const int target_split = cfg.target_chain();
  casc.eff_user.resize(K);
  casc.hop_user.assign(L, std::vector<Vec>(K));
  for (int k = 0; k < K; ++k) {
    std::vector<Vec> link(L);
    for (int l = 0; l < L; ++l) link[l] = ch.ris_user[l][k];
    casc.eff_user[k] = effective(link, cfg.user_side[k]);
    for (int p = 0; p < L; ++p)
      casc.hop_user[p][k] = hop_effective(link, cfg.user_side[k], p);
  }
  casc.eff_target = effective(ch.ris_target, target_split);
  casc.hop_target.resize(L);
  for (int p = 0; p < L; ++p)
    casc.hop_target[p] = hop_effective(ch.ris_target, target_split, p);
  return casc;
}

std::vector<Mat> tilde_t(const ScenarioConfig& cfg, const ChannelSet& ch,
                         const StarRisState& ris,
                         const CascadedChannels& casc, int q) {
  const int L = cfg.n_ris;
  const int M = cfg.elements();
  const int qi = q - 1;
  const Vec theta = ris.theta_t(qi);
  for (int i = 0; i < M; ++i)
    if (std::abs(theta[i]) < StarRisState::kBetaFloor)
      throw ConfigError("transmission amplitude below floor; RIS " +
                        std::to_string(q) + " is not invertible");

  std::vector<Mat> out(L - qi);
  Vec inv(M);
  for (int i = 0; i < M; ++i) inv[i] = 1.0 / theta[i];
  out[0] = Mat(inv.asDiagonal());
  for (int l = qi + 1; l < L; ++l) {
    Mat t = ch.ris_ris[qi][l];
    for (int p = qi + 1; p < l; ++p)
      t += ch.ris_ris[p][l] * ris.theta_t_mat(p) * out[p - qi];
    out[l - qi] = std::move(t);
  }
  return out;
}

namespace {

// Row vector h^H Theta_{m,l} Ttilde_{q,l} accumulated over all hops at or
// after q; the l = q transmission term collapses to h^H directly.
Eigen::RowVectorXcd downstream_row(const ScenarioConfig& cfg,
                                   const StarRisState& ris,
                                   const std::vector<Mat>& ttil,
                                   const std::vector<Vec>& link, int split,
                                   int q) {
  const int L = cfg.n_ris;
  const int qi = q - 1;
  Eigen::RowVectorXcd row = Eigen::RowVectorXcd::Zero(cfg.elements());
  for (int l = qi; l < split - 1 && l < L; ++l) {
    if (l == qi)
      row += link[l].adjoint();
    else
      row += link[l].adjoint() * ris.theta_t_mat(l) * ttil[l - qi];
  }
  for (int l = std::max(split - 1, qi + 1); l < L; ++l)
    row += link[l].adjoint() * ris.theta_r_mat(l) * ttil[l - qi];
  return row;
}

}  // namespace

DecompositionQ decompose_wrt_q(const ScenarioConfig& cfg, const ChannelSet& ch,
                               const StarRisState& ris,
                               const CascadedChannels& casc, int q) {
  const int L = cfg.n_ris, K = cfg.n_users, N = cfg.n_antennas;
  const int M = cfg.elements();
  const int qi = q - 1;
  if (q < 1 || q > L) throw ConfigError("decompose_wrt_q: q out of range");

  // Ttilde entries for l > q do not touch RIS q's own coefficients, and the
  // l = q hop is folded analytically, so no amplitude floor is needed here.
  std::vector<Mat> ttil(L - qi);
  ttil[0] = Mat();  // unused
  for (int l = qi + 1; l < L; ++l) {
    Mat t = ch.ris_ris[qi][l];
    for (int p = qi + 1; p < l; ++p)
      t += ch.ris_ris[p][l] * ris.theta_t_mat(p) * ttil[p - qi];
    ttil[l - qi] = std::move(t);
  }

  DecompositionQ dec;
  dec.q = q;
  dec.f_bar.resize(K + 1);
  dec.b.resize(K + 1);
  dec.hop_f_bar.assign(L, std::vector<Mat>(K + 1));
  dec.hop_b.assign(L, std::vector<Vec>(K + 1));

  const int target_split = cfg.target_chain();
  for (int k = 0; k <= K; ++k) {
    const int split = (k < K) ? cfg.user_side[k] : target_split;
    std::vector<Vec> link(L);
    for (int l = 0; l < L; ++l)
      link[l] = (k < K) ? ch.ris_user[l][k] : ch.ris_target[l];

    const Eigen::RowVectorXcd t_row =
        downstream_row(cfg, ris, ttil, link, split, q);
    Eigen::RowVectorXcd r_row = Eigen::RowVectorXcd::Zero(M);
    if (q >= split) r_row = link[qi].adjoint();

    // Constant part b^H: hops strictly before q plus the residual of the
    // downstream hops with RIS q's contribution removed.
    auto b_row_for = [&](const Mat& h_base, int p) {
      // h_base = H_q (p < 0) or H_{p,q}; p is 0-based, p <= qi.
      Eigen::RowVectorXcd b = Eigen::RowVectorXcd::Zero(h_base.cols());
      const int lo = (p < 0) ? 0 : p;
      auto upstream = [&](int l) -> Mat {
        return (p < 0) ? casc.bs_to_ris[l] : casc.ris_to_ris[p][l];
      };
      for (int l = lo; l < std::min(qi, split - 1); ++l)
        b += link[l].adjoint() * ris.theta_t_mat(l) * upstream(l);
      for (int l = std::max(split - 1, lo); l < qi; ++l)
        b += link[l].adjoint() * ris.theta_r_mat(l) * upstream(l);
      for (int l = qi + 1; l < split - 1 && l < L; ++l)
        b += link[l].adjoint() * ris.theta_t_mat(l) *
             (upstream(l) - casc.ris_to_ris[qi][l] * h_base);
      for (int l = std::max(split - 1, qi + 1); l < L; ++l)
        b += link[l].adjoint() * ris.theta_r_mat(l) *
             (upstream(l) - casc.ris_to_ris[qi][l] * h_base);
      return b;
    };

    const Mat& h_q = casc.bs_to_ris[qi];
    Mat f(2 * M, N);
    f.topRows(M) = t_row.transpose().asDiagonal() * h_q;
    f.bottomRows(M) = r_row.transpose().asDiagonal() * h_q;
    dec.f_bar[k] = std::move(f);
    dec.b[k] = b_row_for(h_q, -1).adjoint();

    for (int p = 0; p < L; ++p) {
      if (q < p + 1) {
        dec.hop_f_bar[p][k] = Mat::Zero(2 * M, M);
        dec.hop_b[p][k] = (k < K) ? casc.hop_user[p][k] : casc.hop_target[p];
      } else {
        const Mat& h_pq = casc.ris_to_ris[p][qi];
        Mat fp(2 * M, M);
        fp.topRows(M) = t_row.transpose().asDiagonal() * h_pq;
        fp.bottomRows(M) = r_row.transpose().asDiagonal() * h_pq;
        dec.hop_f_bar[p][k] = std::move(fp);
        dec.hop_b[p][k] = b_row_for(h_pq, p).adjoint();
      }
    }
  }
  return dec;
}

void drop_users(ScenarioConfig& cfg, std::mt19937_64& rng) {
  if (cfg.user_side.empty()) {
    cfg.user_side.resize(cfg.n_users);
    for (int k = 0; k < cfg.n_users; ++k)
      cfg.user_side[k] = (k % cfg.n_ris) + 1;
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  cfg.user_pos.resize(cfg.n_users);
  for (int k = 0; k < cfg.n_users; ++k) {
    const Position& r =
        cfg.ris_pos[std::min(cfg.user_side[k], cfg.n_ris) - 1];
    const double rad = cfg.user_drop_radius * std::sqrt(unif(rng));
    const double ang = 2.0 * M_PI * unif(rng);
    const double dx = rad * std::cos(ang);
    const double dy = rad * std::sin(ang);
    // Mirror onto the BS-facing (reflection) side, with a minimum offset.
    cfg.user_pos[k] = {r.x - std::abs(dx) - 0.5, r.y + dy, cfg.user_height};
  }
}

}  // namespace staris
