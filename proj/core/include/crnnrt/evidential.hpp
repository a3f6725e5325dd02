#pragma once

#include "crnnrt/tensor.hpp"

namespace crnn {

// Evidential readout: the head's logits parameterize a Dirichlet over class
// probabilities. evidence = softplus(logits), alpha = evidence + 1,
// S = sum(alpha), mean prediction p = alpha/S, and the scalar uncertainty is
// E = K/S: 1 with no evidence, falling toward 0 as evidence accumulates.

struct EDLConfig {
  int anneal_epochs = 16;  // tau: the balance term ramps in over this many epochs
};

template <typename T>
struct DirichletOutput {
  int n = 0, k = 0;
  std::vector<T> evidence;     // [N,K]
  std::vector<T> alpha;        // [N,K]
  std::vector<T> strength;     // [N], S
  std::vector<T> p_mean;       // [N,K]
  std::vector<T> uncertainty;  // [N], K/S in (0, 1]
  std::vector<int> predicted;  // [N], argmax of p_mean
};

// Value-level transform of head logits [N,K]; records nothing.
template <typename T>
DirichletOutput<T> evidence_to_output(const Tensor<T>& logits);

// Expected Brier risk under the Dirichlet:
// mean_i sum_j (y_ij - p_ij)^2 + p_ij(1 - p_ij)/(S_i + 1).
template <typename T>
Tensor<T> edl_risk(const Tensor<T>& logits, const std::vector<int>& labels);

// Evidence-balance regularizer: mean_i KL(Dir(alpha_hat_i) || Dir(1)) with
// alpha_hat = y + (1-y) .* alpha (the true class's evidence is masked out,
// so only misleading evidence is penalized).
template <typename T>
Tensor<T> kl_balance(const Tensor<T>& logits, const std::vector<int>& labels);

// risk + rho * balance with rho = min(1, epoch / tau); epoch counts from 0.
template <typename T>
Tensor<T> edl_loss(const Tensor<T>& logits, const std::vector<int>& labels, int epoch,
                   const EDLConfig& cfg);

// KL(Dir(alpha) || Dir(1)) for one concentration vector.
double kl_dirichlet_uniform(const std::vector<double>& alpha);

}  // namespace crnn
