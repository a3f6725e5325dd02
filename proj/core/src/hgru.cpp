#include "crnnrt/hgru.hpp"

#include <cmath>
#include <random>

namespace crnn {

namespace {

template <typename T>
Tensor<T> gaussian_kernel(Shape shape, std::mt19937& rng, T scale) {
  int64_t fan_in = shape[1] * int64_t(shape[2]) * shape[3];
  std::normal_distribution<double> d(0.0, 1.0 / std::sqrt(double(fan_in)));
  std::vector<T> v(numel(shape));
  for (auto& x : v) x = static_cast<T>(d(rng)) * scale;
  return Tensor<T>::from(shape, std::move(v), /*requires_grad=*/true);
}

}  // namespace

template <typename T>
HGRUParams<T> HGRUParams<T>::init(const HGRUConfig& cfg) {
  std::mt19937 rng(static_cast<uint32_t>(cfg.init_seed));
  const int C = cfg.channels, E = cfg.kernel, F = cfg.input_kernel, K = cfg.classes;
  HGRUParams<T> p;
  p.cfg = cfg;

  p.input_conv = gaussian_kernel<T>({C, 1, F, F}, rng, T(1));
  p.bn_in_gamma = Tensor<T>::full({C}, T(1), true);
  p.bn_in_beta = Tensor<T>::zeros({C}, true);
  p.bn_in = BNStats<T>(C);

  // Recurrent kernels damped and interaction-path BN gains small: the update
  // map starts well inside the contractive regime and learns its way out.
  p.u_s = gaussian_kernel<T>({C, C, E, E}, rng, T(0.5));
  p.b_us = Tensor<T>::full({C}, T(1), true);
  p.w_s = gaussian_kernel<T>({C, C, E, E}, rng, T(0.5));
  p.bn_s_gamma = Tensor<T>::full({C}, T(0.1), true);
  p.bn_s_beta = Tensor<T>::zeros({C}, true);
  p.bn_s = BNStats<T>(C);

  p.u_f = gaussian_kernel<T>({C, C, E, E}, rng, T(0.5));
  p.b_uf = Tensor<T>::full({C}, T(1), true);
  p.w_f = gaussian_kernel<T>({C, C, E, E}, rng, T(0.5));
  p.bn_f_gamma = Tensor<T>::full({C}, T(0.1), true);
  p.bn_f_beta = Tensor<T>::zeros({C}, true);
  p.bn_f = BNStats<T>(C);

  p.alpha = Tensor<T>::full({C}, T(0.1), true);
  p.mu = Tensor<T>::zeros({C}, true);
  p.nu = Tensor<T>::full({C}, T(1), true);
  p.omega = Tensor<T>::full({C}, T(0.1), true);

  p.readout_w = gaussian_kernel<T>({K, C, 1, 1}, rng, T(1));
  p.readout_b = Tensor<T>::zeros({K}, true);
  return p;
}

template <typename T>
std::vector<Tensor<T>> HGRUParams<T>::parameters() const {
  return {input_conv, bn_in_gamma, bn_in_beta, u_s,   b_us,  w_s,        bn_s_gamma,
          bn_s_beta,  u_f,         b_uf,       w_f,   bn_f_gamma, bn_f_beta,
          alpha,      mu,          nu,         omega, readout_w,  readout_b};
}

template <typename T>
std::vector<std::string> HGRUParams<T>::parameter_names() {
  return {"input_conv", "bn_in_gamma", "bn_in_beta", "u_s",   "b_us",  "w_s",        "bn_s_gamma",
          "bn_s_beta",  "u_f",         "b_uf",       "w_f",   "bn_f_gamma", "bn_f_beta",
          "alpha",      "mu",          "nu",         "omega", "readout_w",  "readout_b"};
}

template <typename T>
Tensor<T> input_drive(HGRUParams<T>& p, const Tensor<T>& image, BNMode mode) {
  if (image.shape().size() != 4 || image.shape()[1] != 1)
    throw TensorError("input_drive: expected [N,1,H,W] grayscale batch, got " +
                      shape_str(image.shape()));
  auto z = batch_norm(softplus(conv2d(image, p.input_conv)), p.bn_in_gamma, p.bn_in_beta,
                      p.bn_in, mode);
  check_finite(z, "input_drive");
  return z;
}

template <typename T>
Tensor<T> hgru_step(HGRUParams<T>& p, const Tensor<T>& h, const Tensor<T>& z, BNMode mode,
                    StepTrace<T>* trace) {
  if (h.shape() != z.shape())
    throw TensorError("hgru_step: state " + shape_str(h.shape()) + " vs drive " +
                      shape_str(z.shape()));

  auto g_s = sigmoid(add_channel_bias(conv2d(h, p.u_s), p.b_us));
  check_finite(g_s, "hgru_step/G_s");
  auto c_s = batch_norm(conv2d(mul(h, g_s), p.w_s), p.bn_s_gamma, p.bn_s_beta, p.bn_s, mode);
  check_finite(c_s, "hgru_step/C_s");
  // S = sp(Z - sp((alpha h + mu) C_s)): inhibition suppresses the drive.
  auto inhib = mul(add_channel_bias(scale_channels(h, p.alpha), p.mu), c_s);
  auto pre_s = sub(z, softplus(inhib));
  auto s = softplus(pre_s);
  check_finite(s, "hgru_step/S");
  auto g_f = sigmoid(add_channel_bias(conv2d(s, p.u_f), p.b_uf));
  check_finite(g_f, "hgru_step/G_f");
  auto c_f = batch_norm(conv2d(s, p.w_f), p.bn_f_gamma, p.bn_f_beta, p.bn_f, mode);
  check_finite(c_f, "hgru_step/C_f");
  auto pre_htilde =
      add(scale_channels(add(c_f, s), p.nu), scale_channels(mul(c_f, s), p.omega));
  auto htilde = softplus(pre_htilde);
  check_finite(htilde, "hgru_step/Htilde");
  // (1-G_f) h + G_f Htilde, written so a closed gate preserves h exactly.
  auto h_next = add(h, mul(g_f, sub(htilde, h)));
  check_finite(h_next, "hgru_step/h_next");

  if (trace) {
    trace->g_s = g_s;
    trace->c_s = c_s;
    trace->inhib = inhib;
    trace->pre_s = pre_s;
    trace->s = s;
    trace->g_f = g_f;
    trace->c_f = c_f;
    trace->pre_htilde = pre_htilde;
    trace->htilde = htilde;
  }
  return h_next;
}

template <typename T>
Tensor<T> rollout(HGRUParams<T>& p, const Tensor<T>& z, int steps, BNMode mode,
                  RolloutTrace<T>* trace) {
  if (steps < 1) throw TensorError("rollout: steps must be >= 1");
  const auto& sh = z.shape();
  const int N = sh[0];
  const int64_t per = int64_t(sh[1]) * sh[2] * sh[3];
  auto h = Tensor<T>::zeros(sh);
  for (int t = 0; t < steps; ++t) {
    auto h_next = hgru_step(p, h, z, mode);
    if (trace) {
      std::vector<T> res(N);
      const auto& a = h_next.value();
      const auto& b = h.value();
      for (int n = 0; n < N; ++n) {
        double acc = 0;
        for (int64_t i = 0; i < per; ++i) {
          double d = double(a[n * per + i]) - double(b[n * per + i]);
          acc += d * d;
        }
        res[n] = static_cast<T>(std::sqrt(acc));
      }
      trace->residuals.push_back(std::move(res));
      if (trace->want_readouts) trace->readouts.push_back(readout(p, h_next));
      if (trace->want_states) trace->states.push_back(h_next);
    }
    h = h_next;
  }
  return h;
}

template <typename T>
Tensor<T> readout(const HGRUParams<T>& p, const Tensor<T>& h) {
  return add_bias2d(global_avg_pool(conv2d(h, p.readout_w)), p.readout_b);
}

#define CRNN_INSTANTIATE(T)                                                                     \
  template struct HGRUParams<T>;                                                                \
  template Tensor<T> input_drive(HGRUParams<T>&, const Tensor<T>&, BNMode);                     \
  template Tensor<T> hgru_step(HGRUParams<T>&, const Tensor<T>&, const Tensor<T>&, BNMode,      \
                               StepTrace<T>*);                                                  \
  template Tensor<T> rollout(HGRUParams<T>&, const Tensor<T>&, int, BNMode, RolloutTrace<T>*);  \
  template Tensor<T> readout(const HGRUParams<T>&, const Tensor<T>&);

CRNN_INSTANTIATE(float)
CRNN_INSTANTIATE(double)
#undef CRNN_INSTANTIATE

}  // namespace crnn
