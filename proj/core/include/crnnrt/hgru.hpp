#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crnnrt/tensor.hpp"

namespace crnn {

// Horizontal gated recurrent unit over feature maps: a convolutional state
// update with multiplicative inhibition followed by additive/multiplicative
// excitation, gated toward a fixed point. One set of weights is shared across
// all timesteps, including the normalization layers.

struct HGRUConfig {
  int channels = 32;      // state channels C
  int kernel = 5;         // recurrent kernel side E
  int input_kernel = 7;   // feed-forward drive kernel side
  int classes = 2;        // readout classes K
  uint64_t init_seed = 1234;
};

template <typename T>
struct HGRUParams {
  HGRUConfig cfg;

  Tensor<T> input_conv;            // [C,1,7,7]
  Tensor<T> bn_in_gamma, bn_in_beta;
  BNStats<T> bn_in;

  Tensor<T> u_s, b_us;             // inhibition gate conv [C,C,E,E] + bias [C]
  Tensor<T> w_s;                   // inhibition interaction conv [C,C,E,E]
  Tensor<T> bn_s_gamma, bn_s_beta;
  BNStats<T> bn_s;

  Tensor<T> u_f, b_uf;             // excitation mix gate conv + bias
  Tensor<T> w_f;                   // excitation interaction conv
  Tensor<T> bn_f_gamma, bn_f_beta;
  BNStats<T> bn_f;

  Tensor<T> alpha, mu, nu, omega;  // per-channel mixing coefficients [C]

  Tensor<T> readout_w;             // [K,C,1,1]
  Tensor<T> readout_b;             // [K]

  // Freshly initialized parameters: scaled-Gaussian kernels (recurrent ones
  // damped to start inside the contractive regime), alpha=0.1, mu=0, nu=1,
  // omega=0.1, gate biases +1, interaction BN gains 0.1.
  static HGRUParams init(const HGRUConfig& cfg);

  std::vector<Tensor<T>> parameters() const;
  static std::vector<std::string> parameter_names();
};

// Feed-forward drive: 7x7 conv -> softplus -> batch norm. [N,1,H,W] -> [N,C,H,W].
template <typename T>
Tensor<T> input_drive(HGRUParams<T>& p, const Tensor<T>& image, BNMode mode);

// Intermediates of one state update, exposed for equilibrium analysis.
template <typename T>
struct StepTrace {
  Tensor<T> g_s;         // inhibition gate
  Tensor<T> c_s;         // normalized inhibition interaction
  Tensor<T> inhib;       // (alpha h + mu) C_s, input to the inner softplus
  Tensor<T> pre_s;       // z - softplus(inhib), input to the outer softplus
  Tensor<T> s;           // inhibited drive
  Tensor<T> g_f;         // mix gate
  Tensor<T> c_f;         // normalized excitation interaction
  Tensor<T> pre_htilde;  // nu(C_f+S) + omega(C_f S), input to the final softplus
  Tensor<T> htilde;      // candidate state
};

// One recurrent update h -> h'. Raises NumericError naming the first
// non-finite subterm.
template <typename T>
Tensor<T> hgru_step(HGRUParams<T>& p, const Tensor<T>& h, const Tensor<T>& z, BNMode mode,
                    StepTrace<T>* trace = nullptr);

// Optional per-step capture during rollout.
template <typename T>
struct RolloutTrace {
  bool want_readouts = false;
  bool want_states = false;
  // residuals[t][n] = ||h_{t+1} - h_t||_2 for sample n; always recorded.
  std::vector<std::vector<T>> residuals;
  std::vector<Tensor<T>> readouts;  // logits [N,K] after each step
  std::vector<Tensor<T>> states;
};

// Iterate the update T times from h_0 = 0. Grad recording follows the
// caller's mode: run under NoGradGuard for value-only rollouts, or with
// gradients enabled to build the full unrolled graph.
template <typename T>
Tensor<T> rollout(HGRUParams<T>& p, const Tensor<T>& z, int steps, BNMode mode,
                  RolloutTrace<T>* trace = nullptr);

// Class logits from state: 1x1 conv -> global average pool -> bias. [N,C,H,W] -> [N,K].
template <typename T>
Tensor<T> readout(const HGRUParams<T>& p, const Tensor<T>& h);

}  // namespace crnn
