#include "crnnrt/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace crnn {

int worker_count(int64_t items) {
  static const int cap = [] {
    const char* env = std::getenv("CRNN_RT_THREADS");
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (env) {
      int v = std::atoi(env);
      if (v >= 1 && v < hw) return v;
    }
    return hw;
  }();
  int n = cap;
  if (items < n) n = static_cast<int>(items < 1 ? 1 : items);
  return n;
}

namespace {

std::atomic<uint64_t> g_seq{1};
thread_local int g_no_grad_depth = 0;

template <typename T>
void require(bool ok, const std::string& msg) {
  if (!ok) throw TensorError(msg);
}

}  // namespace

bool grad_enabled() { return g_no_grad_depth == 0; }
NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

// --- Tensor ------------------------------------------------------------------

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& shape, bool requires_grad) {
  return from(shape, std::vector<T>(crnn::numel(shape), T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T fill, bool requires_grad) {
  return from(shape, std::vector<T>(crnn::numel(shape), fill), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(const Shape& shape, std::vector<T> data, bool requires_grad) {
  if (static_cast<int64_t>(data.size()) != crnn::numel(shape))
    throw TensorError("tensor data size " + std::to_string(data.size()) +
                      " does not match shape " + shape_str(shape));
  auto n = std::make_shared<Node<T>>();
  n->shape = shape;
  n->value = std::move(data);
  n->is_leaf = true;
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad.assign(n->value.size(), T(0));
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  n->op = "leaf";
  return Tensor<T>(n);
}

template <typename T>
std::vector<T>& Tensor<T>::mutable_value() {
  if (!node_->is_leaf)
    throw TensorError("mutable_value: only leaf tensors may be mutated in place");
  return node_->value;
}

template <typename T>
std::vector<T>& Tensor<T>::grad() {
  if (!node_->requires_grad || !node_->is_leaf)
    throw TensorError("grad: tensor is not a requires_grad leaf");
  return node_->grad;
}

template <typename T>
const std::vector<T>& Tensor<T>::grad() const {
  if (!node_->requires_grad || !node_->is_leaf)
    throw TensorError("grad: tensor is not a requires_grad leaf");
  return node_->grad;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1)
    throw TensorError("item: tensor has " + std::to_string(numel()) + " elements, expected 1");
  return node_->value[0];
}

// --- op factory ----------------------------------------------------------------

template <typename T>
Tensor<T> make_op(const std::string& name, Shape out_shape, std::vector<T> out_value,
                  const std::vector<Tensor<T>>& parents, BackpropFn<T> fn) {
  if (static_cast<int64_t>(out_value.size()) != crnn::numel(out_shape))
    throw TensorError(name + ": output size does not match shape " + shape_str(out_shape));
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(out_shape);
  n->value = std::move(out_value);
  n->op = name;
  bool rg = false;
  if (grad_enabled()) {
    for (const auto& p : parents) {
      if (!p.defined()) throw TensorError(name + ": undefined input tensor");
      rg = rg || p.requires_grad();
    }
  }
  if (rg) {
    n->is_leaf = false;
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backprop = std::move(fn);
  } else {
    n->is_leaf = true;  // constant: carries no history
  }
  n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
  return Tensor<T>(n);
}

// --- elementwise ---------------------------------------------------------------

namespace {

template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw TensorError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("add", a, b);
  std::vector<T> out(a.value());
  const auto& bv = b.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_op<T>("add", a.shape(), std::move(out), {a, b},
                    [](const Node<T>&, const std::vector<T>& g,
                       const std::vector<std::vector<T>*>& pg) {
                      for (int p = 0; p < 2; ++p)
                        if (pg[p])
                          for (size_t i = 0; i < g.size(); ++i) (*pg[p])[i] += g[i];
                    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("sub", a, b);
  std::vector<T> out(a.value());
  const auto& bv = b.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_op<T>("sub", a.shape(), std::move(out), {a, b},
                    [](const Node<T>&, const std::vector<T>& g,
                       const std::vector<std::vector<T>*>& pg) {
                      if (pg[0])
                        for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                      if (pg[1])
                        for (size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
                    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("mul", a, b);
  std::vector<T> out(a.value());
  const auto& bv = b.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_op<T>("mul", a.shape(), std::move(out), {a, b},
                    [](const Node<T>& self, const std::vector<T>& g,
                       const std::vector<std::vector<T>*>& pg) {
                      const auto& av = self.parents[0]->value;
                      const auto& bv2 = self.parents[1]->value;
                      if (pg[0])
                        for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * bv2[i];
                      if (pg[1])
                        for (size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * av[i];
                    });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.value());
  for (auto& v : out) v += s;
  return make_op<T>("add_scalar", a.shape(), std::move(out), {a},
                    [](const Node<T>&, const std::vector<T>& g,
                       const std::vector<std::vector<T>*>& pg) {
                      if (pg[0])
                        for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
                    });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.value());
  for (auto& v : out) v *= s;
  return make_op<T>("mul_scalar", a.shape(), std::move(out), {a},
                    [s](const Node<T>&, const std::vector<T>& g,
                        const std::vector<std::vector<T>*>& pg) {
                      if (pg[0])
                        for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * s;
                    });
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T softplus_scalar(T x) {
  // max(x,0) + log1p(exp(-|x|)) is stable in both tails.
  T ax = std::abs(x);
  return (x > T(0) ? x : T(0)) + std::log1p(std::exp(-ax));
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.value());
  for (auto& v : out) v = sigmoid_scalar(v);
  return make_op<T>("sigmoid", a.shape(), std::move(out), {a},
                    [](const Node<T>& self, const std::vector<T>& g,
                       const std::vector<std::vector<T>*>& pg) {
                      if (!pg[0]) return;
                      const auto& y = self.value;
                      for (size_t i = 0; i < g.size(); ++i)
                        (*pg[0])[i] += g[i] * y[i] * (T(1) - y[i]);
                    });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& a) {
  std::vector<T> out(a.value());
  for (auto& v : out) v = softplus_scalar(v);
  return make_op<T>("softplus", a.shape(), std::move(out), {a},
                    [](const Node<T>& self, const std::vector<T>& g,
                       const std::vector<std::vector<T>*>& pg) {
                      if (!pg[0]) return;
                      const auto& x = self.parents[0]->value;
                      for (size_t i = 0; i < g.size(); ++i)
                        (*pg[0])[i] += g[i] * sigmoid_scalar(x[i]);
                    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.value());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  return make_op<T>("relu", a.shape(), std::move(out), {a},
                    [](const Node<T>& self, const std::vector<T>& g,
                       const std::vector<std::vector<T>*>& pg) {
                      if (!pg[0]) return;
                      const auto& x = self.parents[0]->value;
                      for (size_t i = 0; i < g.size(); ++i)
                        if (x[i] > T(0)) (*pg[0])[i] += g[i];
                    });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  std::vector<T> out(a.value());
  for (auto& v : out) v *= v;
  return make_op<T>("square", a.shape(), std::move(out), {a},
                    [](const Node<T>& self, const std::vector<T>& g,
                       const std::vector<std::vector<T>*>& pg) {
                      if (!pg[0]) return;
                      const auto& x = self.parents[0]->value;
                      for (size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += T(2) * g[i] * x[i];
                    });
}

// --- reductions ------------------------------------------------------------------

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.value()) s += v;
  return make_op<T>("sum_all", {1}, {s}, {a},
                    [](const Node<T>& self, const std::vector<T>& g,
                       const std::vector<std::vector<T>*>& pg) {
                      if (!pg[0]) return;
                      size_t n = self.parents[0]->value.size();
                      for (size_t i = 0; i < n; ++i) (*pg[0])[i] += g[0];
                    });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.value()) s += v;
  T inv = T(1) / static_cast<T>(a.numel());
  return make_op<T>("mean_all", {1}, {s * inv}, {a},
                    [inv](const Node<T>& self, const std::vector<T>& g,
                          const std::vector<std::vector<T>*>& pg) {
                      if (!pg[0]) return;
                      size_t n = self.parents[0]->value.size();
                      for (size_t i = 0; i < n; ++i) (*pg[0])[i] += g[0] * inv;
                    });
}

template <typename T>
Tensor<T> l2norm(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.value()) s += v * v;
  T norm = std::sqrt(s);
  return make_op<T>("l2norm", {1}, {norm}, {a},
                    [norm](const Node<T>& self, const std::vector<T>& g,
                           const std::vector<std::vector<T>*>& pg) {
                      if (!pg[0]) return;
                      if (norm == T(0)) return;  // subgradient 0 at the origin
                      const auto& x = self.parents[0]->value;
                      T scale = g[0] / norm;
                      for (size_t i = 0; i < x.size(); ++i) (*pg[0])[i] += scale * x[i];
                    });
}

// --- NCHW ops ----------------------------------------------------------------------

namespace {

template <typename T>
void check_nchw(const char* op, const Tensor<T>& x, const Tensor<T>& v, const char* vname) {
  if (x.shape().size() != 4)
    throw TensorError(std::string(op) + ": expected 4-D NCHW input, got " + shape_str(x.shape()));
  if (v.shape().size() != 1 || v.shape()[0] != x.shape()[1])
    throw TensorError(std::string(op) + ": " + vname + " must be length-C vector, got " +
                      shape_str(v.shape()) + " for C=" + std::to_string(x.shape()[1]));
}

}  // namespace

template <typename T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s) {
  check_nchw("scale_channels", x, s, "scale");
  const auto sh = x.shape();
  int64_t N = sh[0], C = sh[1], HW = int64_t(sh[2]) * sh[3];
  std::vector<T> out(x.value());
  const auto& sv = s.value();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      T* p = out.data() + (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) p[i] *= sv[c];
    }
  return make_op<T>(
      "scale_channels", sh, std::move(out), {x, s},
      [N, C, HW](const Node<T>& self, const std::vector<T>& g,
                 const std::vector<std::vector<T>*>& pg) {
        const auto& xv = self.parents[0]->value;
        const auto& sv2 = self.parents[1]->value;
        if (pg[0]) {
          auto& d = *pg[0];
          for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c) {
              int64_t base = (n * C + c) * HW;
              for (int64_t i = 0; i < HW; ++i) d[base + i] += g[base + i] * sv2[c];
            }
        }
        if (pg[1]) {
          auto& d = *pg[1];
          for (int64_t n = 0; n < N; ++n)
            for (int64_t c = 0; c < C; ++c) {
              int64_t base = (n * C + c) * HW;
              T acc = 0;
              for (int64_t i = 0; i < HW; ++i) acc += g[base + i] * xv[base + i];
              d[c] += acc;
            }
        }
      });
}

template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b) {
  check_nchw("add_channel_bias", x, b, "bias");
  const auto sh = x.shape();
  int64_t N = sh[0], C = sh[1], HW = int64_t(sh[2]) * sh[3];
  std::vector<T> out(x.value());
  const auto& bv = b.value();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      T* p = out.data() + (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) p[i] += bv[c];
    }
  return make_op<T>("add_channel_bias", sh, std::move(out), {x, b},
                    [N, C, HW](const Node<T>&, const std::vector<T>& g,
                               const std::vector<std::vector<T>*>& pg) {
                      if (pg[0]) {
                        auto& d = *pg[0];
                        for (size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                      }
                      if (pg[1]) {
                        auto& d = *pg[1];
                        for (int64_t n = 0; n < N; ++n)
                          for (int64_t c = 0; c < C; ++c) {
                            int64_t base = (n * C + c) * HW;
                            T acc = 0;
                            for (int64_t i = 0; i < HW; ++i) acc += g[base + i];
                            d[c] += acc;
                          }
                      }
                    });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  if (x.shape().size() != 4)
    throw TensorError("global_avg_pool: expected 4-D NCHW input, got " + shape_str(x.shape()));
  const auto sh = x.shape();
  int64_t N = sh[0], C = sh[1], HW = int64_t(sh[2]) * sh[3];
  T inv = T(1) / static_cast<T>(HW);
  std::vector<T> out(N * C);
  const auto& xv = x.value();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const T* p = xv.data() + (n * C + c) * HW;
      T acc = 0;
      for (int64_t i = 0; i < HW; ++i) acc += p[i];
      out[n * C + c] = acc * inv;
    }
  return make_op<T>("global_avg_pool", {sh[0], sh[1]}, std::move(out), {x},
                    [N, C, HW, inv](const Node<T>&, const std::vector<T>& g,
                                    const std::vector<std::vector<T>*>& pg) {
                      if (!pg[0]) return;
                      auto& d = *pg[0];
                      for (int64_t n = 0; n < N; ++n)
                        for (int64_t c = 0; c < C; ++c) {
                          T gv = g[n * C + c] * inv;
                          int64_t base = (n * C + c) * HW;
                          for (int64_t i = 0; i < HW; ++i) d[base + i] += gv;
                        }
                    });
}

template <typename T>
Tensor<T> add_bias2d(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.shape().size() != 2)
    throw TensorError("add_bias2d: expected 2-D input, got " + shape_str(x.shape()));
  if (b.shape().size() != 1 || b.shape()[0] != x.shape()[1])
    throw TensorError("add_bias2d: bias shape " + shape_str(b.shape()) +
                      " does not match feature dim " + std::to_string(x.shape()[1]));
  int64_t N = x.shape()[0], K = x.shape()[1];
  std::vector<T> out(x.value());
  const auto& bv = b.value();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t k = 0; k < K; ++k) out[n * K + k] += bv[k];
  return make_op<T>("add_bias2d", x.shape(), std::move(out), {x, b},
                    [N, K](const Node<T>&, const std::vector<T>& g,
                           const std::vector<std::vector<T>*>& pg) {
                      if (pg[0]) {
                        auto& d = *pg[0];
                        for (size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                      }
                      if (pg[1]) {
                        auto& d = *pg[1];
                        for (int64_t n = 0; n < N; ++n)
                          for (int64_t k = 0; k < K; ++k) d[k] += g[n * K + k];
                      }
                    });
}

// --- batch norm -------------------------------------------------------------------

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BNStats<T>& stats, BNMode mode, T eps, T momentum) {
  check_nchw("batch_norm", x, gamma, "gamma");
  check_nchw("batch_norm", x, beta, "beta");
  const auto sh = x.shape();
  int64_t N = sh[0], C = sh[1], HW = int64_t(sh[2]) * sh[3];
  int64_t m = N * HW;
  if (stats.channels() != C)
    throw TensorError("batch_norm: running stats track " + std::to_string(stats.channels()) +
                      " channels, input has " + std::to_string(C));

  const auto& xv = x.value();
  const auto& gv = gamma.value();
  const auto& bv = beta.value();
  std::vector<T> mean(C), invstd(C);

  if (mode == BNMode::Eval) {
    for (int64_t c = 0; c < C; ++c) {
      mean[c] = stats.running_mean[c];
      invstd[c] = T(1) / std::sqrt(stats.running_var[c] + eps);
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      T acc = 0;
      for (int64_t n = 0; n < N; ++n) {
        const T* p = xv.data() + (n * C + c) * HW;
        for (int64_t i = 0; i < HW; ++i) acc += p[i];
      }
      T mu = acc / static_cast<T>(m);
      T vacc = 0;
      for (int64_t n = 0; n < N; ++n) {
        const T* p = xv.data() + (n * C + c) * HW;
        for (int64_t i = 0; i < HW; ++i) {
          T d = p[i] - mu;
          vacc += d * d;
        }
      }
      T var = vacc / static_cast<T>(m);
      mean[c] = mu;
      invstd[c] = T(1) / std::sqrt(var + eps);
      if (mode == BNMode::Train) {
        T unbiased = m > 1 ? vacc / static_cast<T>(m - 1) : var;
        stats.running_mean[c] = (T(1) - momentum) * stats.running_mean[c] + momentum * mu;
        stats.running_var[c] = (T(1) - momentum) * stats.running_var[c] + momentum * unbiased;
      }
    }
    if (mode == BNMode::Train) ++stats.updates;
  }

  std::vector<T> out(xv.size());
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const T* p = xv.data() + (n * C + c) * HW;
      T* q = out.data() + (n * C + c) * HW;
      T a = gv[c] * invstd[c];
      T b = bv[c] - mean[c] * a;
      for (int64_t i = 0; i < HW; ++i) q[i] = a * p[i] + b;
    }

  bool batch_stats = mode != BNMode::Eval;
  return make_op<T>(
      "batch_norm", sh, std::move(out), {x, gamma, beta},
      [N, C, HW, m, mean, invstd, batch_stats](const Node<T>& self, const std::vector<T>& g,
                                               const std::vector<std::vector<T>*>& pg) {
        const auto& xv2 = self.parents[0]->value;
        const auto& gv2 = self.parents[1]->value;
        for (int64_t c = 0; c < C; ++c) {
          // Per-channel sums in fixed n,i order keep reductions deterministic.
          T sum_g = 0, sum_gx = 0;
          for (int64_t n = 0; n < N; ++n) {
            int64_t base = (n * C + c) * HW;
            for (int64_t i = 0; i < HW; ++i) {
              T xh = (xv2[base + i] - mean[c]) * invstd[c];
              sum_g += g[base + i];
              sum_gx += g[base + i] * xh;
            }
          }
          if (pg[1]) (*pg[1])[c] += sum_gx;
          if (pg[2]) (*pg[2])[c] += sum_g;
          if (pg[0]) {
            auto& d = *pg[0];
            T a = gv2[c] * invstd[c];
            if (batch_stats) {
              T inv_m = T(1) / static_cast<T>(m);
              for (int64_t n = 0; n < N; ++n) {
                int64_t base = (n * C + c) * HW;
                for (int64_t i = 0; i < HW; ++i) {
                  T xh = (xv2[base + i] - mean[c]) * invstd[c];
                  d[base + i] += a * (g[base + i] - sum_g * inv_m - xh * sum_gx * inv_m);
                }
              }
            } else {
              for (int64_t n = 0; n < N; ++n) {
                int64_t base = (n * C + c) * HW;
                for (int64_t i = 0; i < HW; ++i) d[base + i] += a * g[base + i];
              }
            }
          }
        }
      });
}

// --- misc ----------------------------------------------------------------------

template <typename T>
void zero_grad(const std::vector<Tensor<T>>& params) {
  for (const auto& p : params) {
    auto& g = const_cast<Tensor<T>&>(p).grad();
    std::fill(g.begin(), g.end(), T(0));
  }
}

template <typename T>
void check_finite(const Tensor<T>& t, const std::string& label) {
  const auto& v = t.value();
  for (size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw NumericError("non-finite value in " + label + " at flat index " + std::to_string(i));
}

// --- explicit instantiations ------------------------------------------------------

#define CRNN_INSTANTIATE(T)                                                                       \
  template class Tensor<T>;                                                                       \
  template Tensor<T> make_op<T>(const std::string&, Shape, std::vector<T>,                        \
                                const std::vector<Tensor<T>>&, BackpropFn<T>);                    \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                             \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                             \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
  template Tensor<T> softplus(const Tensor<T>&);                                                  \
  template Tensor<T> relu(const Tensor<T>&);                                                      \
  template Tensor<T> square(const Tensor<T>&);                                                    \
  template Tensor<T> sum_all(const Tensor<T>&);                                                   \
  template Tensor<T> mean_all(const Tensor<T>&);                                                  \
  template Tensor<T> l2norm(const Tensor<T>&);                                                    \
  template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> add_channel_bias(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                           \
  template Tensor<T> add_bias2d(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,             \
                                BNStats<T>&, BNMode, T, T);                                       \
  template void zero_grad(const std::vector<Tensor<T>>&);                                         \
  template void check_finite(const Tensor<T>&, const std::string&);

CRNN_INSTANTIATE(float)
CRNN_INSTANTIATE(double)
#undef CRNN_INSTANTIATE

}  // namespace crnn
