#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "staris/channel.hpp"

using namespace staris;

namespace {

ScenarioConfig small_cfg(std::uint64_t seed = 7) {
  ScenarioConfig cfg;
  cfg.n_antennas = 4;
  cfg.n_users = 2;
  cfg.n_ris = 3;
  cfg.elements_x = 2;
  cfg.elements_y = 2;
  cfg.rng_seed = seed;
  apply_defaults(cfg);
  std::mt19937_64 rng(seed + 1000);
  drop_users(cfg, rng);
  cfg.validate();
  return cfg;
}

StarRisState random_state(const ScenarioConfig& cfg, std::uint64_t seed) {
  StarRisState s = StarRisState::uniform_split(cfg.n_ris, cfg.elements());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.2, 1.4);
  std::uniform_real_distribution<double> ph(0.0, 2 * M_PI);
  for (int l = 0; l < cfg.n_ris; ++l)
    for (int i = 0; i < cfg.elements(); ++i) {
      s.beta_t[l][i] = amp(rng);
      s.beta_r[l][i] = amp(rng);
      s.phi_t[l][i] = ph(rng);
      s.phi_r[l][i] = ph(rng);
    }
  return s;
}

}  // namespace

TEST_CASE("ULA steering: broadside is all ones") {
  const Vec a = steering_ula(0.0, 6, 0.05, 0.1);
  for (int i = 0; i < 6; ++i) CHECK(std::abs(a[i] - Complex(1, 0)) < 1e-14);
}

TEST_CASE("ULA steering: half-wavelength endfire alternates sign") {
  // d = lambda/2, phi = pi/2 -> phase step of pi per element.
  const Vec a = steering_ula(M_PI / 2, 4, 0.05, 0.1);
  for (int i = 0; i < 4; ++i) {
    const double expect = (i % 2 == 0) ? 1.0 : -1.0;
    CHECK(std::abs(a[i] - Complex(expect, 0)) < 1e-12);
  }
}

TEST_CASE("UPA steering is the Kronecker product of axis factors") {
  const int mx = 3, my = 2;
  const double lam = 0.1, dx = 0.03, dy = 0.04;
  const double az = 0.7, el = -0.4;
  const Vec a = steering_upa(az, el, mx, my, dx, dy, lam);
  REQUIRE(a.size() == mx * my);
  const double k = 2 * M_PI / lam;
  for (int i = 0; i < mx; ++i)
    for (int j = 0; j < my; ++j) {
      const Complex expect =
          std::polar(1.0, k * dx * i * std::sin(el) * std::cos(az)) *
          std::polar(1.0, k * dy * j * std::sin(el) * std::sin(az));
      CHECK(std::abs(a[i * my + j] - expect) < 1e-12);
    }
  for (int i = 0; i < a.size(); ++i) CHECK(std::abs(std::abs(a[i]) - 1.0) < 1e-14);
}

TEST_CASE("channel sampling is deterministic for a fixed seed") {
  const ScenarioConfig cfg = small_cfg(42);
  const ChannelSet a = sample_channels(cfg);
  const ChannelSet b = sample_channels(cfg);
  for (int l = 0; l < cfg.n_ris; ++l) {
    CHECK((a.bs_ris[l] - b.bs_ris[l]).norm() == 0.0);
    CHECK((a.ris_target[l] - b.ris_target[l]).norm() == 0.0);
    for (int k = 0; k < cfg.n_users; ++k)
      CHECK((a.ris_user[l][k] - b.ris_user[l][k]).norm() == 0.0);
  }
  for (int l = 1; l < cfg.n_ris; ++l)
    for (int p = 0; p < l; ++p)
      CHECK((a.ris_ris[p][l] - b.ris_ris[p][l]).norm() == 0.0);

  ScenarioConfig cfg2 = cfg;
  cfg2.rng_seed = 43;
  const ChannelSet c = sample_channels(cfg2);
  CHECK((a.bs_ris[0] - c.bs_ris[0]).norm() > 1e-12);
}

TEST_CASE("large Rician factor collapses onto the LoS geometry") {
  ScenarioConfig cfg = small_cfg(3);
  cfg.rician_bs_ris = cfg.rician_ris_ris = cfg.rician_ris_user = 1e9;
  const ChannelSet ch = sample_channels(cfg);
  const double lam = cfg.wavelength();
  const double amp = lam / (4 * M_PI);

  for (int l = 0; l < cfg.n_ris; ++l) {
    const double d = distance(cfg.bs_pos, cfg.ris_pos[l]);
    // Rank-1 outer product of unit-modulus steering vectors.
    Eigen::JacobiSVD<Mat> svd(ch.bs_ris[l]);
    const double expect =
        (amp / d) * std::sqrt(double(cfg.elements()) * cfg.n_antennas);
    CHECK(svd.singularValues()[0] == doctest::Approx(expect).epsilon(1e-3));
    CHECK(svd.singularValues()[1] < 1e-3 * expect);
    for (int i = 0; i < ch.bs_ris[l].rows(); ++i)
      for (int j = 0; j < ch.bs_ris[l].cols(); ++j)
        CHECK(std::abs(std::abs(ch.bs_ris[l](i, j)) - amp / d) <
              1e-3 * amp / d);
  }
  for (int k = 0; k < cfg.n_users; ++k) {
    const double d = distance(cfg.ris_pos[0], cfg.user_pos[k]);
    for (int i = 0; i < cfg.elements(); ++i)
      CHECK(std::abs(std::abs(ch.ris_user[0][k][i]) - amp / d) <
            1e-3 * amp / d);
  }
}

TEST_CASE("per-entry mean power matches free-space pathloss over distance^2") {
  ScenarioConfig cfg = small_cfg(9);
  cfg.rician_bs_ris = 1.0;
  const double lam = cfg.wavelength();
  const double d = distance(cfg.bs_pos, cfg.ris_pos[1]);
  const double expect = std::pow(lam / (4 * M_PI), 2) / (d * d);

  std::mt19937_64 rng(123);
  double acc = 0.0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    const ChannelSet ch = sample_channels(cfg, rng);
    acc += ch.bs_ris[1].squaredNorm() / ch.bs_ris[1].size();
  }
  acc /= trials;
  CHECK(acc == doctest::Approx(expect).epsilon(0.05));
}

TEST_CASE("degenerate geometry is rejected") {
  ScenarioConfig cfg = small_cfg(1);
  cfg.target_pos = cfg.ris_pos[2];
  CHECK_THROWS_AS((void)sample_channels(cfg), DegenerateGeometryError);
}

TEST_CASE("single-RIS cascade equals the direct link") {
  ScenarioConfig cfg = small_cfg(5);
  cfg.n_ris = 1;
  cfg.ris_pos.resize(1);
  cfg.p_a_max.resize(1);
  cfg.sigma_ris_sq.resize(1);
  for (int k = 0; k < cfg.n_users; ++k) cfg.user_side[k] = 1;
  const ChannelSet ch = sample_channels(cfg);
  const StarRisState ris = random_state(cfg, 77);
  const CascadedChannels casc = cascade_channels(cfg, ch, ris);
  CHECK((casc.bs_to_ris[0] - ch.bs_ris[0]).norm() == 0.0);
  CHECK((casc.ris_to_ris[0][0] - Mat::Identity(4, 4)).norm() == 0.0);
}

TEST_CASE("three-RIS cascade matches the hand-expanded recursion") {
  const ScenarioConfig cfg = small_cfg(11);
  const ChannelSet ch = sample_channels(cfg);
  const StarRisState ris = random_state(cfg, 13);
  const CascadedChannels casc = cascade_channels(cfg, ch, ris);

  const Mat t0 = ris.theta_t_mat(0), t1 = ris.theta_t_mat(1);
  const Mat h1 = ch.bs_ris[0];
  const Mat h2 = ch.bs_ris[1] + ch.ris_ris[0][1] * t0 * h1;
  const Mat h3 = ch.bs_ris[2] + ch.ris_ris[0][2] * t0 * h1 +
                 ch.ris_ris[1][2] * t1 * h2;
  CHECK((casc.bs_to_ris[0] - h1).norm() < 1e-12 * h1.norm());
  CHECK((casc.bs_to_ris[1] - h2).norm() < 1e-12 * h2.norm());
  CHECK((casc.bs_to_ris[2] - h3).norm() < 1e-12 * h3.norm());

  const int m = cfg.elements();
  for (int p = 0; p < 3; ++p)
    CHECK((casc.ris_to_ris[p][p] - Mat::Identity(m, m)).norm() == 0.0);
  const Mat h12 = ch.ris_ris[0][1] * t0;
  const Mat h13 = ch.ris_ris[0][2] * t0 + ch.ris_ris[1][2] * t1 * h12;
  const Mat h23 = ch.ris_ris[1][2] * t1;
  CHECK((casc.ris_to_ris[0][1] - h12).norm() < 1e-12 * h12.norm());
  CHECK((casc.ris_to_ris[0][2] - h13).norm() < 1e-12 * h13.norm());
  CHECK((casc.ris_to_ris[1][2] - h23).norm() < 1e-12 * h23.norm());
}

TEST_CASE("effective channels match the straight-line split sums") {
  const ScenarioConfig cfg = small_cfg(17);
  const ChannelSet ch = sample_channels(cfg);
  const StarRisState ris = random_state(cfg, 19);
  const CascadedChannels casc = cascade_channels(cfg, ch, ris);

  for (int k = 0; k < cfg.n_users; ++k) {
    const int split = cfg.user_side[k];
    Eigen::RowVectorXcd hbar = Eigen::RowVectorXcd::Zero(cfg.n_antennas);
    for (int l = 0; l < cfg.n_ris; ++l) {
      const Mat theta =
          (l + 1 < split) ? ris.theta_t_mat(l) : ris.theta_r_mat(l);
      hbar += ch.ris_user[l][k].adjoint() * theta * casc.bs_to_ris[l];
    }
    CHECK((casc.eff_user[k].adjoint() - hbar).norm() < 1e-12 * hbar.norm());
  }

  // Target rides the transmission side of every RIS.
  Eigen::RowVectorXcd hs = Eigen::RowVectorXcd::Zero(cfg.n_antennas);
  for (int l = 0; l < cfg.n_ris; ++l)
    hs += ch.ris_target[l].adjoint() * ris.theta_t_mat(l) * casc.bs_to_ris[l];
  CHECK((casc.eff_target.adjoint() - hs).norm() < 1e-12 * hs.norm());

  // Per-hop channels reproduce the tail sums.
  for (int p = 0; p < cfg.n_ris; ++p) {
    for (int k = 0; k < cfg.n_users; ++k) {
      const int split = cfg.user_side[k];
      Eigen::RowVectorXcd hp = Eigen::RowVectorXcd::Zero(cfg.elements());
      for (int l = p; l < cfg.n_ris; ++l) {
        const Mat theta =
            (l + 1 < split) ? ris.theta_t_mat(l) : ris.theta_r_mat(l);
        hp += ch.ris_user[l][k].adjoint() * theta * casc.ris_to_ris[p][l];
      }
      CHECK((casc.hop_user[p][k].adjoint() - hp).norm() <
            1e-12 * std::max(hp.norm(), 1.0));
    }
    Eigen::RowVectorXcd hps = Eigen::RowVectorXcd::Zero(cfg.elements());
    for (int l = p; l < cfg.n_ris; ++l)
      hps += ch.ris_target[l].adjoint() * ris.theta_t_mat(l) *
             casc.ris_to_ris[p][l];
    CHECK((casc.hop_target[p].adjoint() - hps).norm() <
          1e-12 * std::max(hps.norm(), 1.0));
  }
}

TEST_CASE("tilde factors reconstruct the inter-RIS cascades") {
  const ScenarioConfig cfg = small_cfg(23);
  const ChannelSet ch = sample_channels(cfg);
  const StarRisState ris = random_state(cfg, 29);
  const CascadedChannels casc = cascade_channels(cfg, ch, ris);
  const int m = cfg.elements();
  for (int q = 1; q <= cfg.n_ris; ++q) {
    const auto ttil = tilde_t(cfg, ch, ris, casc, q);
    const Mat tq = ris.theta_t_mat(q - 1);
    CHECK((ttil[0] * tq - Mat::Identity(m, m)).norm() < 1e-10);
    for (int l = q; l < cfg.n_ris; ++l) {
      const Mat lhs = ttil[l - (q - 1)] * tq;
      CHECK((lhs - casc.ris_to_ris[q - 1][l]).norm() <
            1e-10 * std::max(lhs.norm(), 1.0));
    }
  }
}

TEST_CASE("tilde factors reject amplitudes at the floor") {
  const ScenarioConfig cfg = small_cfg(31);
  const ChannelSet ch = sample_channels(cfg);
  StarRisState ris = random_state(cfg, 37);
  const CascadedChannels casc = cascade_channels(cfg, ch, ris);
  ris.beta_t[1][2] = 0.0;
  CHECK_THROWS_AS((void)tilde_t(cfg, ch, ris, casc, 2), ConfigError);
}

TEST_CASE("affine decomposition reproduces effective channels for random "
          "coefficient draws") {
  const ScenarioConfig cfg = small_cfg(41);
  const ChannelSet ch = sample_channels(cfg);
  const StarRisState base = random_state(cfg, 43);
  const CascadedChannels base_casc = cascade_channels(cfg, ch, base);
  const int K = cfg.n_users, L = cfg.n_ris, m = cfg.elements();

  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> amp(0.1, 1.5);
  std::uniform_real_distribution<double> ph(0.0, 2 * M_PI);

  for (int q = 1; q <= L; ++q) {
    const DecompositionQ dec = decompose_wrt_q(cfg, ch, base, base_casc, q);
    for (int draw = 0; draw < 20; ++draw) {
      StarRisState s = base;
      Vec theta(2 * m);
      for (int i = 0; i < 2 * m; ++i)
        theta[i] = std::polar(amp(rng), ph(rng));
      s.set_theta_bar(q - 1, theta);
      const CascadedChannels casc = cascade_channels(cfg, ch, s);

      for (int k = 0; k <= K; ++k) {
        const Vec truth = (k < K) ? casc.eff_user[k] : casc.eff_target;
        const Eigen::RowVectorXcd recon =
            theta.transpose() * dec.f_bar[k] + dec.b[k].adjoint();
        CHECK((truth.adjoint() - recon).norm() <
              1e-10 * std::max(truth.norm(), 1.0));

        for (int p = 0; p < L; ++p) {
          const Vec hop_truth =
              (k < K) ? casc.hop_user[p][k] : casc.hop_target[p];
          const Eigen::RowVectorXcd hop_recon =
              theta.transpose() * dec.hop_f_bar[p][k] +
              dec.hop_b[p][k].adjoint();
          CHECK((hop_truth.adjoint() - hop_recon).norm() <
                1e-10 * std::max(hop_truth.norm(), 1.0));
        }
      }
    }
  }
}

TEST_CASE("user drop lands inside the disc on the BS-facing side") {
  ScenarioConfig cfg;
  cfg.n_antennas = 4;
  cfg.n_users = 8;
  cfg.n_ris = 3;
  cfg.elements_x = 2;
  cfg.elements_y = 2;
  apply_defaults(cfg);
  std::mt19937_64 rng(55);
  drop_users(cfg, rng);
  cfg.validate();
  for (int k = 0; k < cfg.n_users; ++k) {
    const Position& r = cfg.ris_pos[cfg.user_side[k] - 1];
    CHECK(cfg.user_pos[k].x < r.x);
    CHECK(cfg.user_pos[k].z == doctest::Approx(cfg.user_height));
    const double dx = cfg.user_pos[k].x - r.x;
    const double dy = cfg.user_pos[k].y - r.y;
    CHECK(std::sqrt(dx * dx + dy * dy) <= cfg.user_drop_radius + 0.5 + 1e-9);
  }
}
