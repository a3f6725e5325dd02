#pragma once

#include <functional>

#include "crnnrt/hgru.hpp"

namespace crnn {

// Training through the fixed point of the recurrent map, without storing the
// unrolled graph: the implicit gradient c^T (I - J)^{-1} df/dtheta is
// approximated by a truncated Neumann series of vector-Jacobian products, and
// a penalty keeps the map contractive so that the series converges.

struct CRBPConfig {
  double gamma = 100.0;       // contraction-penalty weight in the total loss
  double lambda_c = 0.9;      // column-sum bound the penalty enforces
  int neumann_terms = 15;     // series truncation K
  double neumann_tol = 1e-6;  // stop early once a term's L2 norm falls below
};

// Rebuilds one application of the state map from a fresh state leaf. The
// closure carries everything else (weights, drive, normalization mode).
template <typename T>
using StepBuilder = std::function<Tensor<T>(const Tensor<T>& h)>;

struct CRBPStats {
  int terms = 0;              // VJP terms applied beyond the zeroth
  double last_term_norm = 0;  // L2 norm of the final series term
  bool converged = false;     // true if stopped by neumann_tol
};

// Accumulates dL/dtheta into the parameter .grad buffers reachable through
// `build_step`, given the loss cotangent c = dL/dh* at the fixed point.
// Memory is O(one step graph) regardless of rollout length. Throws
// NonContractiveError when series terms grow three times in a row.
template <typename T>
CRBPStats crbp_gradient(const StepBuilder<T>& build_step, const Tensor<T>& h_star,
                        const std::vector<T>& cotangent, const CRBPConfig& cfg);

// Column sums 1^T J of the state-map Jacobian at h_star, built symbolically
// from differentiable primitives so the contraction penalty can be trained.
// Normalization is treated as its frozen per-channel affine map (exact once
// running statistics are frozen). h_star enters as a constant; `z` is used
// as given, so a drive on the tape passes gradient to its parameters.
template <typename T>
Tensor<T> lcp_column_sums(HGRUParams<T>& p, const Tensor<T>& h_star, const Tensor<T>& z);

// || (1^T J - lambda_c)_+ ||_2 as a differentiable scalar.
template <typename T>
Tensor<T> lcp_penalty(HGRUParams<T>& p, const Tensor<T>& h_star, const Tensor<T>& z,
                      double lambda_c);

// Largest singular value of the state-map Jacobian at h_star, by power
// iteration on J^T J: forward products by central finite differences of the
// value map, transposed products by the tape.
template <typename T>
T estimate_contraction(const StepBuilder<T>& build_step, const Tensor<T>& h_star,
                       int iterations = 12, uint64_t seed = 0,
                       T fd_eps = static_cast<T>(1e-3));

// Convergence diagnostics of a completed rollout.
template <typename T>
struct EquilibriumReport {
  std::vector<std::vector<T>> residuals;  // [steps][N], ||h_{t+1}-h_t||_2
  std::vector<T> final_residual;          // [N]
  int steps = 0;

  static EquilibriumReport from_trace(const RolloutTrace<T>& trace);
  // Residuals over the last quarter of the rollout never grow by more than
  // the relative slack (with a small absolute floor for residuals near zero).
  bool non_increasing_last_quarter(int sample, T rel_slack = static_cast<T>(1e-3)) const;
};

}  // namespace crnn
