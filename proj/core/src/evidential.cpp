#include "crnnrt/evidential.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>

namespace crnn {

namespace {

double softplus_d(double x) {
  double ax = std::abs(x);
  return (x > 0 ? x : 0) + std::log1p(std::exp(-ax));
}

double sigmoid_d(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
void check_logits(const char* op, const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.shape().size() != 2)
    throw TensorError(std::string(op) + ": expected [N,K] logits, got " +
                      shape_str(logits.shape()));
  if (static_cast<int>(labels.size()) != logits.shape()[0])
    throw TensorError(std::string(op) + ": " + std::to_string(labels.size()) +
                      " labels for batch of " + std::to_string(logits.shape()[0]));
  for (int y : labels)
    if (y < 0 || y >= logits.shape()[1])
      throw TensorError(std::string(op) + ": label " + std::to_string(y) + " out of range");
}

}  // namespace

double kl_dirichlet_uniform(const std::vector<double>& alpha) {
  const int k = static_cast<int>(alpha.size());
  double s = 0;
  for (double a : alpha) s += a;
  double kl = std::lgamma(s) - std::lgamma(double(k));
  double psi_s = boost::math::digamma(s);
  for (double a : alpha) kl += -std::lgamma(a) + (a - 1.0) * (boost::math::digamma(a) - psi_s);
  return kl;
}

template <typename T>
DirichletOutput<T> evidence_to_output(const Tensor<T>& logits) {
  if (logits.shape().size() != 2)
    throw TensorError("evidence_to_output: expected [N,K] logits, got " +
                      shape_str(logits.shape()));
  const int n = logits.shape()[0], k = logits.shape()[1];
  DirichletOutput<T> out;
  out.n = n;
  out.k = k;
  out.evidence.resize(size_t(n) * k);
  out.alpha.resize(size_t(n) * k);
  out.p_mean.resize(size_t(n) * k);
  out.strength.resize(n);
  out.uncertainty.resize(n);
  out.predicted.resize(n);
  const auto& lv = logits.value();
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int j = 0; j < k; ++j) {
      double e = softplus_d(double(lv[size_t(i) * k + j]));
      out.evidence[size_t(i) * k + j] = static_cast<T>(e);
      out.alpha[size_t(i) * k + j] = static_cast<T>(e + 1.0);
      s += e + 1.0;
    }
    out.strength[i] = static_cast<T>(s);
    out.uncertainty[i] = static_cast<T>(double(k) / s);
    int best = 0;
    for (int j = 0; j < k; ++j) {
      double p = double(out.alpha[size_t(i) * k + j]) / s;
      out.p_mean[size_t(i) * k + j] = static_cast<T>(p);
      if (p > double(out.p_mean[size_t(i) * k + best])) best = j;
    }
    out.predicted[i] = best;
  }
  return out;
}

template <typename T>
Tensor<T> edl_risk(const Tensor<T>& logits, const std::vector<int>& labels) {
  check_logits("edl_risk", logits, labels);
  const int n = logits.shape()[0], k = logits.shape()[1];
  const auto& lv = logits.value();

  double total = 0;
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int j = 0; j < k; ++j) s += softplus_d(double(lv[size_t(i) * k + j])) + 1.0;
    for (int j = 0; j < k; ++j) {
      double p = (softplus_d(double(lv[size_t(i) * k + j])) + 1.0) / s;
      double y = labels[i] == j ? 1.0 : 0.0;
      total += (y - p) * (y - p) + p * (1.0 - p) / (s + 1.0);
    }
  }
  std::vector<T> out{static_cast<T>(total / n)};

  auto bp = [labels, n, k](const Node<T>& self, const std::vector<T>& g,
                           const std::vector<std::vector<T>*>& pg) {
    if (!pg[0]) return;
    const auto& l = self.parents[0]->value;
    auto& d = *pg[0];
    const double gscale = double(g[0]) / n;
    std::vector<double> p(k), dp(k);
    for (int i = 0; i < n; ++i) {
      double s = 0;
      for (int j = 0; j < k; ++j) s += softplus_d(double(l[size_t(i) * k + j])) + 1.0;
      double drisk_ds = 0;  // explicit S-dependence of the variance term
      for (int j = 0; j < k; ++j) {
        p[j] = (softplus_d(double(l[size_t(i) * k + j])) + 1.0) / s;
        drisk_ds -= p[j] * (1.0 - p[j]) / ((s + 1.0) * (s + 1.0));
      }
      double dot = 0;
      for (int j = 0; j < k; ++j) {
        double y = labels[i] == j ? 1.0 : 0.0;
        dp[j] = -2.0 * (y - p[j]) + (1.0 - 2.0 * p[j]) / (s + 1.0);
        dot += dp[j] * p[j];
      }
      for (int j = 0; j < k; ++j) {
        double dalpha = (dp[j] - dot) / s + drisk_ds;
        d[size_t(i) * k + j] +=
            static_cast<T>(gscale * dalpha * sigmoid_d(double(l[size_t(i) * k + j])));
      }
    }
  };
  return make_op<T>("edl_risk", {1}, std::move(out), {logits}, bp);
}

template <typename T>
Tensor<T> kl_balance(const Tensor<T>& logits, const std::vector<int>& labels) {
  check_logits("kl_balance", logits, labels);
  const int n = logits.shape()[0], k = logits.shape()[1];
  const auto& lv = logits.value();

  double total = 0;
  {
    std::vector<double> ah(k);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < k; ++j)
        ah[j] = labels[i] == j ? 1.0 : softplus_d(double(lv[size_t(i) * k + j])) + 1.0;
      total += kl_dirichlet_uniform(ah);
    }
  }
  std::vector<T> out{static_cast<T>(total / n)};

  auto bp = [labels, n, k](const Node<T>& self, const std::vector<T>& g,
                           const std::vector<std::vector<T>*>& pg) {
    if (!pg[0]) return;
    const auto& l = self.parents[0]->value;
    auto& d = *pg[0];
    const double gscale = double(g[0]) / n;
    std::vector<double> ah(k);
    for (int i = 0; i < n; ++i) {
      double sh = 0;
      for (int j = 0; j < k; ++j) {
        ah[j] = labels[i] == j ? 1.0 : softplus_d(double(l[size_t(i) * k + j])) + 1.0;
        sh += ah[j];
      }
      double tri_sh = boost::math::trigamma(sh);
      for (int j = 0; j < k; ++j) {
        if (labels[i] == j) continue;  // masked: d alpha_hat / d alpha = 0
        double dkl = (ah[j] - 1.0) * boost::math::trigamma(ah[j]) - tri_sh * (sh - k);
        d[size_t(i) * k + j] +=
            static_cast<T>(gscale * dkl * sigmoid_d(double(l[size_t(i) * k + j])));
      }
    }
  };
  return make_op<T>("kl_balance", {1}, std::move(out), {logits}, bp);
}

template <typename T>
Tensor<T> edl_loss(const Tensor<T>& logits, const std::vector<int>& labels, int epoch,
                   const EDLConfig& cfg) {
  if (epoch < 0) throw TensorError("edl_loss: epoch must be >= 0");
  double rho = cfg.anneal_epochs <= 0 ? 1.0 : std::min(1.0, double(epoch) / cfg.anneal_epochs);
  auto risk = edl_risk(logits, labels);
  auto balance = kl_balance(logits, labels);
  return add(risk, mul_scalar(balance, static_cast<T>(rho)));
}

#define CRNN_INSTANTIATE(T)                                                              \
  template struct DirichletOutput<T>;                                                    \
  template DirichletOutput<T> evidence_to_output(const Tensor<T>&);                      \
  template Tensor<T> edl_risk(const Tensor<T>&, const std::vector<int>&);                \
  template Tensor<T> kl_balance(const Tensor<T>&, const std::vector<int>&);              \
  template Tensor<T> edl_loss(const Tensor<T>&, const std::vector<int>&, int,            \
                              const EDLConfig&);

CRNN_INSTANTIATE(float)
CRNN_INSTANTIATE(double)
#undef CRNN_INSTANTIATE

}  // namespace crnn
