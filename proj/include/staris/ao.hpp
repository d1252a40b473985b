#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "staris/channel.hpp"
#include "staris/comm.hpp"
#include "staris/ris.hpp"
#include "staris/sensing.hpp"

namespace staris {

enum class AoStatus { converged, max_iter, infeasible };

inline const char* to_string(AoStatus s) {
  switch (s) {
    case AoStatus::converged: return "converged";
    case AoStatus::max_iter: return "max_iter";
    default: return "infeasible";
  }
}

struct AoConfig {
  RisMode mode{RisMode::passive};
  int max_outer{30};
  double tol{1e-4};        // relative sum-rate change, window of two steps
  bool keep_best{true};    // report the best audited iterate, not the last
  std::uint64_t seed{0};   // stream for the random phases and SDR rounding
  double audit_tol{1e-5};  // relative slack of the final constraint audit
  CommOptions comm{};
  RisUpdateOptions ris{};
  // Optional starting point, e.g. for continuation across a constraint
  // sweep; replaces the random initialization when set.
  std::optional<std::pair<StarRisState, BeamformerSet>> warm;
};

struct AoIteration {
  double sum_rate{0};       // raw iterate, nats
  double best_sum_rate{0};  // best audited iterate so far (-inf before one)
  double mse{0};            // weighted-MSE objective at the iterate
  double lambda{0};         // BS power multiplier from the beam stage
  double mu_s{0};           // echo-constraint multiplier from the beam stage
  bool sensing_ok{false};
  bool comm_ok{false};
  bool feasible{false};     // independent constraint audit of the iterate
  double elapsed_s{0};
};

struct AoResult {
  BeamformerSet bf;
  StarRisState ris;
  CascadedChannels casc;
  MetricsReport report;
  std::vector<AoIteration> trace;
  AoStatus status{AoStatus::infeasible};
  int iterations{0};
  double runtime_s{0};
};

/// Starting point: uniform-split amplitudes with random phases; matched
/// communication beams jointly scaled to half the BS budget; sensing beam
/// from the residual. Active mode rescales each RIS's amplitudes so its
/// radiated power sits at 90% of the budget. Deterministic per rng state.
std::pair<StarRisState, BeamformerSet> initialize(const ScenarioConfig& cfg,
                                                  const ChannelSet& ch,
                                                  RisMode mode,
                                                  std::mt19937_64& rng);

/// Audits the BS power budget plus every leakage/echo/RIS-power constraint
/// straight from the metrics definitions.
bool audit_constraints(const ScenarioConfig& cfg,
                       const CascadedChannels& casc, const StarRisState& ris,
                       const BeamformerSet& bf, RisMode mode, double rel_tol);

/// True when the last two relative changes of the history are below tol.
bool check_convergence(const std::vector<double>& history, double tol);

/// Alternating loop {sensing beam, communication beams, RIS 1..L} with
/// keep-best tracking; subproblem failures keep the previous block and three
/// consecutive failed iterations terminate with the best iterate so far.
AoResult run_ao(const ScenarioConfig& cfg, const ChannelSet& ch,
                const AoConfig& ao);

}  // namespace staris
