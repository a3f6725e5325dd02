#include "crnnrt/equilibrium.hpp"

#include <cmath>
#include <random>

namespace crnn {

namespace {

template <typename T>
double l2(const std::vector<T>& v) {
  double acc = 0;
  for (T x : v) acc += double(x) * double(x);
  return std::sqrt(acc);
}

template <typename T>
Tensor<T> one_minus(const Tensor<T>& x) {
  return add_scalar(mul_scalar(x, T(-1)), T(1));
}

// gamma / sqrt(running_var + eps) as a tape tensor: the slope of the frozen
// affine normalization, differentiable in gamma.
template <typename T>
Tensor<T> bn_eval_slope(const Tensor<T>& gamma, const BNStats<T>& stats, T eps = T(1e-5)) {
  const int C = stats.channels();
  std::vector<T> inv(C);
  for (int c = 0; c < C; ++c) inv[c] = T(1) / std::sqrt(stats.running_var[c] + eps);
  return mul(gamma, Tensor<T>::from({C}, std::move(inv)));
}

}  // namespace

template <typename T>
CRBPStats crbp_gradient(const StepBuilder<T>& build_step, const Tensor<T>& h_star,
                        const std::vector<T>& cotangent, const CRBPConfig& cfg) {
  if (static_cast<int64_t>(cotangent.size()) != h_star.numel())
    throw TensorError("crbp_gradient: cotangent size does not match state");

  // One recorded step graph serves every series term (vjp is a pure query)
  // and the final parameter injection.
  auto h_leaf = Tensor<T>::from(h_star.shape(), h_star.value(), /*requires_grad=*/true);
  auto stepped = build_step(h_leaf);
  if (stepped.shape() != h_star.shape())
    throw TensorError("crbp_gradient: step output shape " + shape_str(stepped.shape()) +
                      " does not match state " + shape_str(h_star.shape()));

  std::vector<T> v = cotangent;          // c J^k
  std::vector<T> g = cotangent;          // sum of the series
  CRBPStats stats;
  double prev_norm = l2(v);
  int growth_streak = 0;
  for (int k = 1; k <= cfg.neumann_terms; ++k) {
    v = vjp(stepped, h_leaf, v);
    double n = l2(v);
    if (!std::isfinite(n))
      throw NonContractiveError("crbp_gradient: non-finite series term " + std::to_string(k), k,
                                n);
    stats.terms = k;
    stats.last_term_norm = n;
    for (size_t i = 0; i < g.size(); ++i) g[i] += v[i];
    if (n > prev_norm) {
      if (++growth_streak >= 3)
        throw NonContractiveError(
            "crbp_gradient: series terms grew 3 times in a row (term " + std::to_string(k) +
                " norm " + std::to_string(n) + "); state map is not contractive here",
            k, n);
    } else {
      growth_streak = 0;
    }
    prev_norm = n;
    if (n < cfg.neumann_tol) {
      stats.converged = true;
      break;
    }
  }
  backward_with_cotangent(stepped, g);
  return stats;
}

template <typename T>
Tensor<T> lcp_column_sums(HGRUParams<T>& p, const Tensor<T>& h_star, const Tensor<T>& z) {
  // Forward intermediates at (h*, z), recorded on the tape with h* constant.
  auto h_c = Tensor<T>::from(h_star.shape(), h_star.value());
  StepTrace<T> tr;
  (void)hgru_step(p, h_c, z, BNMode::Eval, &tr);

  // Hand-derived cotangent chain for 1^T J, written in differentiable
  // primitives. Mirrors the step in reverse; normalization contributes its
  // frozen affine slope.
  auto d_u = mul(tr.g_f, sigmoid(tr.pre_htilde));  // through Htilde, seed 1*G_f
  auto d_cf = mul(d_u, add_channel_bias(scale_channels(tr.s, p.omega), p.nu));
  auto d_s = mul(d_u, add_channel_bias(scale_channels(tr.c_f, p.omega), p.nu));
  auto d_c2 = scale_channels(d_cf, bn_eval_slope(p.bn_f_gamma, p.bn_f));
  d_s = add(d_s, conv2d(d_c2, kernel_flip_swap(p.w_f)));
  auto d_gf = sub(tr.htilde, h_c);  // seed 1*(Htilde - h)
  auto d_a2 = mul(d_gf, mul(tr.g_f, one_minus(tr.g_f)));
  d_s = add(d_s, conv2d(d_a2, kernel_flip_swap(p.u_f)));

  auto d_pre = mul(d_s, sigmoid(tr.pre_s));
  auto d_q = mul(mul_scalar(d_pre, T(-1)), sigmoid(tr.inhib));
  auto ahmu = add_channel_bias(scale_channels(h_c, p.alpha), p.mu);
  auto d_h2 = scale_channels(mul(d_q, tr.c_s), p.alpha);
  auto d_cs = mul(d_q, ahmu);
  auto d_c1 = scale_channels(d_cs, bn_eval_slope(p.bn_s_gamma, p.bn_s));
  auto d_m = conv2d(d_c1, kernel_flip_swap(p.w_s));
  auto d_h3 = mul(d_m, tr.g_s);
  auto d_gs = mul(d_m, h_c);
  auto d_a1 = mul(d_gs, mul(tr.g_s, one_minus(tr.g_s)));
  auto d_h4 = conv2d(d_a1, kernel_flip_swap(p.u_s));

  return add(add(one_minus(tr.g_f), d_h2), add(d_h3, d_h4));
}

template <typename T>
Tensor<T> lcp_penalty(HGRUParams<T>& p, const Tensor<T>& h_star, const Tensor<T>& z,
                      double lambda_c) {
  auto colsum = lcp_column_sums(p, h_star, z);
  return l2norm(relu(add_scalar(colsum, static_cast<T>(-lambda_c))));
}

template <typename T>
T estimate_contraction(const StepBuilder<T>& build_step, const Tensor<T>& h_star,
                       int iterations, uint64_t seed, T fd_eps) {
  const int64_t n = h_star.numel();
  std::mt19937 rng(static_cast<uint32_t>(seed ^ 0x9e3779b9));
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<T> u(n);
  for (auto& x : u) x = static_cast<T>(dist(rng));
  double nu = l2(u);
  for (auto& x : u) x = static_cast<T>(x / nu);

  // Transposed products reuse one recorded graph; forward products evaluate
  // the raw map twice per iteration.
  auto h_leaf = Tensor<T>::from(h_star.shape(), h_star.value(), true);
  auto stepped = build_step(h_leaf);

  const auto& h0 = h_star.value();
  std::vector<T> hp(n), hm(n);
  T sigma = T(0);
  for (int it = 0; it < iterations; ++it) {
    for (int64_t i = 0; i < n; ++i) {
      hp[i] = h0[i] + fd_eps * u[i];
      hm[i] = h0[i] - fd_eps * u[i];
    }
    std::vector<T> w(n);
    {
      NoGradGuard ng;
      auto fp = build_step(Tensor<T>::from(h_star.shape(), hp));
      auto fm = build_step(Tensor<T>::from(h_star.shape(), hm));
      const auto& fpv = fp.value();
      const auto& fmv = fm.value();
      for (int64_t i = 0; i < n; ++i) w[i] = (fpv[i] - fmv[i]) / (T(2) * fd_eps);
    }
    double wn = l2(w);  // ||J u|| with ||u|| = 1
    sigma = static_cast<T>(wn);
    if (wn == 0) return T(0);
    auto next = vjp(stepped, h_leaf, w);  // J^T (J u)
    double nn = l2(next);
    if (nn == 0) return sigma;
    for (int64_t i = 0; i < n; ++i) u[i] = static_cast<T>(next[i] / nn);
  }
  return sigma;
}

template <typename T>
EquilibriumReport<T> EquilibriumReport<T>::from_trace(const RolloutTrace<T>& trace) {
  EquilibriumReport<T> r;
  r.residuals = trace.residuals;
  r.steps = static_cast<int>(trace.residuals.size());
  if (r.steps > 0) r.final_residual = r.residuals.back();
  return r;
}

template <typename T>
bool EquilibriumReport<T>::non_increasing_last_quarter(int sample, T rel_slack) const {
  if (steps < 4) return true;
  const int start = steps - steps / 4;
  const T abs_floor = static_cast<T>(1e-6);
  for (int t = start; t < steps; ++t) {
    T prev = residuals[t - 1][sample];
    T cur = residuals[t][sample];
    if (cur > prev * (T(1) + rel_slack) + abs_floor) return false;
  }
  return true;
}

#define CRNN_INSTANTIATE(T)                                                                  \
  template CRBPStats crbp_gradient(const StepBuilder<T>&, const Tensor<T>&,                  \
                                   const std::vector<T>&, const CRBPConfig&);                \
  template Tensor<T> lcp_column_sums(HGRUParams<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> lcp_penalty(HGRUParams<T>&, const Tensor<T>&, const Tensor<T>&, double); \
  template T estimate_contraction(const StepBuilder<T>&, const Tensor<T>&, int, uint64_t, T); \
  template struct EquilibriumReport<T>;

CRNN_INSTANTIATE(float)
CRNN_INSTANTIATE(double)
#undef CRNN_INSTANTIATE

}  // namespace crnn
