#pragma once

#include "staris/metrics.hpp"
#include "staris/types.hpp"

namespace staris {

/// MMSE receive auxiliaries for the rate reformulation.
struct EqualizerState {
  Vec u;       // receive equalizers
  RealVec xi;  // weights, 1/e at the update point
  RealVec e;   // mean squared errors
};

EqualizerState update_equalizers(const CascadedChannels& casc,
                                 const BeamformerSet& bf,
                                 const ScenarioConfig& cfg, RisMode mode);

struct DualState {
  double lambda{0};  // BS power budget
  RealVec mu;        // per-user leakage constraints
  double mu_s{0};    // sensing SINR constraint
  RealVec nu;        // per-RIS radiated power (active mode)
};

/// Sum_p nu_p H_p^H (Theta_T^H Theta_T + Theta_R^H Theta_R) H_p; the quadratic
/// coupling of the beams into the RIS power budgets.
Mat active_penalty(const CascadedChannels& casc, const StarRisState& ris,
                   const ScenarioConfig& cfg, const RealVec& nu);

/// Stationarity closed form for every communication beam at the given duals.
/// `penalty` is the active-mode term (pass a zero matrix in passive mode).
std::vector<Vec> w_closed_form(const DualState& dual,
                               const EqualizerState& eq,
                               const CascadedChannels& casc,
                               const ScenarioConfig& cfg, const Mat& penalty);

/// Smallest multiplier that brings the closed-form beams inside the BS power
/// budget left over by w_S. Evaluated through per-user eigendecompositions.
double solve_lambda(const DualState& dual, const EqualizerState& eq,
                    const CascadedChannels& casc, const ScenarioConfig& cfg,
                    const Mat& penalty, double p_budget);

/// Root of the leakage-constraint equation for user k, other duals fixed.
/// Returns 0 when the constraint is slack, -1 when no root exists.
double solve_mu(int k, const DualState& dual, const EqualizerState& eq,
                const CascadedChannels& casc, const ScenarioConfig& cfg,
                const Mat& penalty, double leak_target);

/// Root of the echo-SINR constraint equation; same conventions as solve_mu.
double solve_mu_s(const DualState& dual, const EqualizerState& eq,
                  const CascadedChannels& casc, const ScenarioConfig& cfg,
                  const Mat& penalty, double sense_target);

/// One projected-subgradient step on the RIS power multipliers, taken on a
/// log scale; `step_scale` is the exponent applied to the power ratio.
void update_nu(DualState& dual, const CascadedChannels& casc,
               const StarRisState& ris, const BeamformerSet& bf,
               const ScenarioConfig& cfg, double step_scale = 0.5);

/// Lagrangian of the beamformer subproblem at the given point; used by the
/// dual searches' correctness checks.
double comm_lagrangian(const ScenarioConfig& cfg,
                       const CascadedChannels& casc, const StarRisState& ris,
                       const BeamformerSet& bf, const EqualizerState& eq,
                       const DualState& dual, RisMode mode);

struct CommOptions {
  int max_rounds{100};
  double tol_mult{1e-6};
  double tol_cons{1e-6};
  double nu_step_scale{0.5};
};

struct CommResult {
  BeamformerSet bf;
  DualState dual;
  EqualizerState eq;
  bool converged{false};
  bool feasible{false};
  int rounds{0};
};

/// Block-coordinate loop over equalizers, duals, and the beam closed form.
/// `init` supplies the starting beams; its w_s stays fixed throughout.
CommResult solve_comm_beamformers(const ScenarioConfig& cfg,
                                  const CascadedChannels& casc,
                                  const StarRisState& ris,
                                  const BeamformerSet& init, RisMode mode,
                                  const CommOptions& opt = {});

}  // namespace staris
