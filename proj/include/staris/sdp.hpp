#pragma once

#include <iosfwd>
#include <vector>

#include "staris/types.hpp"

namespace staris {

enum class ConstraintSense { eq, le, ge };

struct SdpConstraint {
  Mat a;  // Hermitian
  ConstraintSense sense{ConstraintSense::eq};
  double b{0};
};

/// min tr(C X)  s.t.  tr(A_i X) {=, <=, >=} b_i,  X Hermitian PSD.
struct SdpProblem {
  int n{0};
  Mat c;
  std::vector<SdpConstraint> constraints;
};

enum class SdpStatus { optimal, infeasible, max_iter };

struct SdpSolution {
  Mat x;                  // primal matrix
  double objective{0};
  double dual_objective{0};
  double primal_residual{0};
  double dual_residual{0};
  double gap{0};
  double min_eig{0};      // smallest eigenvalue of x
  SdpStatus status{SdpStatus::max_iter};
  int iterations{0};

  // Internal state kept for warm starts and KKT verification.
  RealVec dual_y;
  RealVec dual_s;   // vectorized dual slack over the product cone
  RealVec mult_x;   // vectorized primal iterate
  double penalty{1.0};
};

struct SdpOptions {
  double tol{1e-6};
  int max_iter{20000};
  double alpha{1.6};          // over-relaxation
  double penalty_init{1.0};
  const SdpSolution* warm{nullptr};
};

SdpSolution solve_sdp(const SdpProblem& p, const SdpOptions& opt = {});

struct KktReport {
  double primal_eq{0};     // worst equality violation
  double primal_ineq{0};   // worst inequality violation
  double psd_violation{0}; // max(0, -min_eig)
  double stationarity{0};  // ||C - A*(y) - S||_F, relative
  double comp_slack{0};    // |<X, S>| relative
  double duality_gap{0};   // |tr(CX) - b'y| relative
};

KktReport verify_kkt(const SdpProblem& p, const SdpSolution& sol);

/// Plain-text round trip for debugging.
void dump_sdp(const SdpProblem& p, std::ostream& os);
SdpProblem load_sdp(std::istream& is);

}  // namespace staris
