#pragma once

#include "staris/types.hpp"

namespace staris {

/// Everything the optimizer and the constraint audits need from one candidate
/// solution, evaluated straight from the definitions.
struct MetricsReport {
  RealVec gamma_user;            // per-user communication SINR
  double gamma_sense{0};         // radar echo SINR at the BS
  RealVec gamma_leak;            // per-user leakage SINR at the target
  RealVec rate;                  // log(1 + gamma_user), nats
  double weighted_sum_rate{0};   // nats
  RealVec active_power;          // radiated power per RIS
  RealVec sigma_tilde_user_sq;   // aggregate noise per user
  double sigma_tilde_sense_sq{0};
};

double comm_sinr(int k, const CascadedChannels& casc, const BeamformerSet& bf,
                 const ScenarioConfig& cfg, RisMode mode);

/// Throws DegenerateGeometryError when the effective target channel vanishes.
double sensing_sinr(const CascadedChannels& casc, const BeamformerSet& bf,
                    const ScenarioConfig& cfg, RisMode mode);

double leak_sinr(int k, const CascadedChannels& casc, const BeamformerSet& bf,
                 const ScenarioConfig& cfg, RisMode mode);

double active_power(int l, const CascadedChannels& casc,
                    const StarRisState& ris, const BeamformerSet& bf,
                    const ScenarioConfig& cfg);

double sum_rate(const RealVec& gamma, const std::vector<double>& weight);

/// (sigma_tilde_k^2 for every user, sigma_tilde_S^2). Passive mode keeps only
/// the receiver noise terms.
std::pair<RealVec, double> noise_aggregates(const CascadedChannels& casc,
                                            const ScenarioConfig& cfg,
                                            RisMode mode);

MetricsReport evaluate(const ScenarioConfig& cfg, const CascadedChannels& casc,
                       const StarRisState& ris, const BeamformerSet& bf,
                       RisMode mode);

}  // namespace staris
