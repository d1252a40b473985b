#pragma once

#include "staris/metrics.hpp"
#include "staris/types.hpp"

namespace staris {

/// Power-constrained MVDR subproblem for the sensing beam. The
/// eigendecomposition of the interference covariance is cached so repeated
/// power evaluations along the multiplier search are O(N).
struct SensingSubproblem {
  Mat r_int;       // interference covariance, Hermitian PSD
  Vec h_s;         // effective target channel
  double c_s{0};   // required beam power toward the target
  double p_res{0}; // power budget left for the sensing beam
  RealVec eigvals;
  Mat eigvecs;
  Vec g;           // eigvecs^H h_s

  static SensingSubproblem build(Mat r_int, Vec h_s, double c_s,
                                 double p_res);
};

/// Smallest |h_s^H w_S|^2 that keeps the echo-SINR and leakage constraints
/// satisfiable given the current communication beams.
double required_beam_power(const CascadedChannels& casc,
                           const BeamformerSet& bf, const ScenarioConfig& cfg,
                           RisMode mode);

/// Closed-form beam for a fixed multiplier; |h_s^H w|^2 == c_s by
/// construction.
Vec mvdr_solution(const SensingSubproblem& sub, double eps);

/// ||mvdr_solution(eps)||^2 through the cached eigendecomposition.
double beam_power_fast(const SensingSubproblem& sub, double eps);

struct SensingSolution {
  Vec w_s;
  double eps{0};
  bool feasible{true};
};

/// Picks the smallest multiplier whose beam fits the residual power budget.
SensingSolution solve_sensing(const SensingSubproblem& sub);

}  // namespace staris
