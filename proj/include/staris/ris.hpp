#pragma once

#include <random>

#include "staris/comm.hpp"
#include "staris/sdp.hpp"
#include "staris/types.hpp"

namespace staris {

/// Lifted quadratic data for optimizing the coefficients of RIS q with all
/// other blocks fixed. The lifted variable is X = conj(t) t^T with
/// t = [theta_bar_q / scale; 1], so tr(X A) recovers the quadratic forms.
struct RisLift {
  int q{};              // 1-based RIS index
  int m{};              // elements per RIS
  int dim{};            // 2m + 1
  RisMode mode{RisMode::passive};
  double scale{1.0};    // coefficient normalization folded into the matrices

  Mat objective;        // weighted-MSE objective; exact for lifted points
  std::vector<Mat> leak;  // per-user, tr(X leak[k]) <= sigma_eve_sq
  Mat sense;            // echo quadratic form minus forward-noise terms
  Mat gram;             // ||effective target channel||^2
  Mat fro;              // sum_p sigma_p^2 ||H_p||_F^2 (zero in passive mode)
  RealVec power_diag;   // per-element radiated power weights (unscaled)

  double sigma_eve_sq{0};
  double sigma_sense_sq{0};  // receiver noise behind the echo
  double rho_sq{1.0};
  double p_budget{0};   // own radiated-power budget (active mode)
};

RisLift assemble_ris_lift(const ScenarioConfig& cfg, const ChannelSet& ch,
                          const StarRisState& ris,
                          const CascadedChannels& casc,
                          const EqualizerState& eq, const BeamformerSet& bf,
                          int q, RisMode mode, double scale = 0.0);

/// Lift of a coefficient vector: conj(t) t^T with t = [theta/scale; 1].
Mat lift_point(const Vec& theta_bar, double scale);

double lift_trace(const Mat& a, const Mat& x);

/// Bilinear echo-constraint surplus
/// g(X) = rho^2 tr(X gram) tr(X sense); feasible iff g >= tr(X fro) + noise.
double sensing_bilinear(const RisLift& lift, const Mat& x);

struct LinearizedSensing {
  Mat a;        // tr(X a) >= rhs
  double rhs{0};
};

/// First-order expansion of the bilinear echo constraint about `point`.
LinearizedSensing sca_sensing(const RisLift& lift, const Mat& point);

/// Relaxed coefficient subproblem at the given expansion point.
SdpProblem build_ris_sdp(const RisLift& lift, const Mat& sca_point);

/// Weighted-MSE objective at fixed equalizers; the quantity the coefficient
/// update must not worsen.
double weighted_mse(const ScenarioConfig& cfg, const CascadedChannels& casc,
                    const BeamformerSet& bf, const EqualizerState& eq,
                    RisMode mode);

/// True-constraint audit at a candidate point (leakage, echo, RIS power).
bool ris_point_feasible(const ScenarioConfig& cfg,
                        const CascadedChannels& casc, const StarRisState& ris,
                        const BeamformerSet& bf, RisMode mode, double tol);

/// Nearest feasible coefficient vector for the mode: passive renormalizes
/// each element onto the unit T/R circle, active rescales into the budget.
Vec project_candidate(const Vec& theta_bar, RisMode mode,
                      const RealVec& power_diag, double p_budget);

/// Dominant-eigenvector candidate plus Gaussian randomization; every
/// candidate is projected to the mode's feasible set. Candidate list is
/// ordered dominant-first.
std::vector<Vec> extract_candidates(const RisLift& lift, const Mat& x,
                                    std::mt19937_64& rng, int n_random);

struct RisUpdateOptions {
  int max_sca{10};
  double sca_tol{1e-4};
  int n_random{50};
  double cons_tol{1e-6};
  SdpOptions sdp{};
};

struct RisUpdateResult {
  bool accepted{false};
  double objective_before{0};
  double objective_after{0};
  double rank_ratio{0};
  int sca_rounds{0};
  SdpStatus sdp_status{SdpStatus::max_iter};
};

/// SCA loop over the relaxed subproblem followed by rank-one recovery.
/// Mutates `ris` and `casc` only when the candidate improves (or restores)
/// the true objective without breaking any true constraint.
RisUpdateResult solve_theta_q(const ScenarioConfig& cfg, const ChannelSet& ch,
                              StarRisState& ris, CascadedChannels& casc,
                              const EqualizerState& eq,
                              const BeamformerSet& bf, int q, RisMode mode,
                              std::mt19937_64& rng,
                              const RisUpdateOptions& opt = {});

}  // namespace staris
