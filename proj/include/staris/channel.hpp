#pragma once

#include <random>

#include "staris/types.hpp"

namespace staris {

/// ULA steering vector, element n = exp(j 2pi/lambda * d * n * sin(phi)).
Vec steering_ula(double phi, int n, double spacing, double wavelength);

/// UPA steering vector, Kronecker product of the x- and y-axis factors.
Vec steering_upa(double azimuth, double elevation, int mx, int my, double dx,
                 double dy, double wavelength);

/// Samples all Rician link channels from the scenario geometry. Deterministic
/// for a fixed cfg.rng_seed. Throws DegenerateGeometryError on coincident
/// nodes.
ChannelSet sample_channels(const ScenarioConfig& cfg);
ChannelSet sample_channels(const ScenarioConfig& cfg, std::mt19937_64& rng);

/// Composes the recursive BS->RIS and RIS->RIS cascades and the effective
/// channels to every user and the target.
CascadedChannels cascade_channels(const ScenarioConfig& cfg,
                                  const ChannelSet& ch,
                                  const StarRisState& ris);

/// Auxiliary matrices expressing H_l as an affine function of RIS q's
/// transmission coefficients; entry [l - q] corresponds to RIS l, l = q..L.
/// Requires all transmission amplitudes of RIS q >= beta floor.
std::vector<Mat> tilde_t(const ScenarioConfig& cfg, const ChannelSet& ch,
                         const StarRisState& ris,
                         const CascadedChannels& casc, int q);

/// Affine decomposition of all effective channels with respect to RIS q.
DecompositionQ decompose_wrt_q(const ScenarioConfig& cfg, const ChannelSet& ch,
                               const StarRisState& ris,
                               const CascadedChannels& casc, int q);

/// Fills user positions (uniform disc drop on the reflection side of the
/// assigned RIS) and the user_side assignment when not given explicitly.
void drop_users(ScenarioConfig& cfg, std::mt19937_64& rng);

}  // namespace staris
