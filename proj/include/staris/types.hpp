#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace staris {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RealVec = Eigen::VectorXd;

inline constexpr double kSpeedOfLight = 299792458.0;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateGeometryError : std::runtime_error {
  explicit DegenerateGeometryError(const std::string& msg)
      : std::runtime_error(msg) {}
};

enum class RisMode { passive, active };

inline const char* to_string(RisMode m) {
  return m == RisMode::passive ? "passive" : "active";
}

struct Position {
  double x{0}, y{0}, z{0};
};

inline double distance(const Position& a, const Position& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// All physical and algorithmic scenario parameters. dB-valued inputs are
/// converted to linear once at load; every field here is linear scale.
struct ScenarioConfig {
  int n_antennas{20};   // N, BS ULA size
  int n_users{6};       // K
  int n_ris{3};         // L
  int elements_x{8};    // Mx
  int elements_y{8};    // My

  Position bs_pos{0, 0, 25};
  std::vector<Position> ris_pos;
  std::vector<Position> user_pos;  // filled by the user drop when empty
  Position target_pos{32, 0, 0};

  std::vector<int> user_side;  // l-hat per user, 1-based RIS index
  int target_side{0};          // 0 means L+1 (transmission side of all RISs)

  double carrier_freq_hz{3e9};
  double bs_spacing{0};     // 0 -> lambda/2
  double ris_spacing_x{0};  // 0 -> lambda/2
  double ris_spacing_y{0};  // 0 -> lambda/2

  double p_bs_max{1000.0};            // 30 dB
  std::vector<double> p_a_max;        // per-RIS amplification budget
  std::vector<double> sigma_user_sq;  // per-user receiver noise
  std::vector<double> sigma_ris_sq;   // per-RIS element thermal noise
  double sigma_radar_sq{1e-11};       // BS sensing receiver noise
  double sigma_eve_sq{1e-11};         // noise at the sensing target
  double rcs_sq{1.0};                 // radar cross section

  double rician_bs_ris{2.0};   // F for BS->RIS links (3 dB)
  double rician_ris_ris{2.0};  // F for RIS->RIS links
  double rician_ris_user{2.0}; // F for RIS->user/target links

  std::vector<double> rate_weight;      // alpha_k
  double gamma_sense_req{1e-3};         // -30 dB
  std::vector<double> gamma_leak_req;   // 5 dB each

  std::uint64_t rng_seed{1};
  double user_drop_radius{5.0};
  double user_height{1.5};

  int elements() const { return elements_x * elements_y; }
  double wavelength() const { return kSpeedOfLight / carrier_freq_hz; }
  double spacing_bs() const {
    return bs_spacing > 0 ? bs_spacing : 0.5 * wavelength();
  }
  double spacing_x() const {
    return ris_spacing_x > 0 ? ris_spacing_x : 0.5 * wavelength();
  }
  double spacing_y() const {
    return ris_spacing_y > 0 ? ris_spacing_y : 0.5 * wavelength();
  }
  int target_chain() const { return target_side > 0 ? target_side : n_ris + 1; }

  /// Throws ConfigError on inconsistent sizes or non-positive entries.
  void validate() const;
};

/// Fills empty per-user / per-RIS vector fields with Table-style defaults
/// (10 m RIS spacing on the x axis, equal noise floors, unit rate weights,
/// round-robin user-to-RIS assignment).
void apply_defaults(ScenarioConfig& cfg);

/// Raw per-link channels, sampled once per scenario drop.
struct ChannelSet {
  std::vector<Mat> bs_ris;                 // G[l], M x N
  std::vector<std::vector<Mat>> ris_ris;   // T[p][l], M x M, valid for p < l
  std::vector<std::vector<Vec>> ris_user;  // h[l][k], length M
  std::vector<Vec> ris_target;             // h[l][S], length M
};

/// Per-RIS transmission/reflection amplitudes and phases.
struct StarRisState {
  std::vector<RealVec> beta_t, beta_r;  // amplitudes, length M each
  std::vector<RealVec> phi_t, phi_r;    // phases in [0, 2pi)

  static constexpr double kBetaFloor = 1e-6;

  int n_ris() const { return static_cast<int>(beta_t.size()); }

  Vec theta_t(int l) const;             // beta_t .* exp(j phi_t)
  Vec theta_r(int l) const;
  Vec theta_bar(int l) const;           // [theta_t; theta_r], length 2M
  Mat theta_t_mat(int l) const;         // diag(theta_t)
  Mat theta_r_mat(int l) const;

  void set_theta_bar(int l, const Vec& theta);  // splits into beta/phi

  static StarRisState uniform_split(int n_ris, int m);  // beta = 1/sqrt(2)
};

/// Recursively composed channels for a given RIS state.
struct CascadedChannels {
  std::vector<Mat> bs_to_ris;                // H[l], M x N
  std::vector<std::vector<Mat>> ris_to_ris;  // H[p][l], M x M, p <= l
  std::vector<Vec> eff_user;                 // h-bar_k as column, length N
  Vec eff_target;                            // h-bar_S, length N
  std::vector<std::vector<Vec>> hop_user;    // h-bar_{p,k}, length M
  std::vector<Vec> hop_target;               // h-bar_{p,S}, length M
};

/// Affine decomposition of the effective channels with respect to the
/// coefficients of a single RIS q:  h-bar_k^H = theta_bar_q^T F + b^H.
/// User index K refers to the sensing target throughout.
struct DecompositionQ {
  int q{};  // 1-based RIS index
  std::vector<Mat> f_bar;                  // 2M x N, index 0..K (K = target)
  std::vector<Vec> b;                      // length N
  std::vector<std::vector<Mat>> hop_f_bar; // [p][k], 2M x M
  std::vector<std::vector<Vec>> hop_b;     // [p][k], length M
};

struct BeamformerSet {
  std::vector<Vec> w;  // per-user, length N
  Vec w_s;             // sensing beam, length N

  double total_power() const {
    double p = w_s.size() ? w_s.squaredNorm() : 0.0;
    for (const auto& wk : w) p += wk.squaredNorm();
    return p;
  }
};

}  // namespace staris
