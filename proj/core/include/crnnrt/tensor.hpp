#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "crnnrt/common.hpp"

namespace crnn {

// ---------------------------------------------------------------------------
// Define-by-run reverse-mode autodiff.
//
// Every op executes immediately and, when gradients are enabled and some
// input requires them, records a node holding the computed value, links to
// its parents, and a backprop closure. Node creation order is a topological
// order of the graph, so reverse traversal just walks nodes by descending
// sequence id. Graphs are kept alive by the tensors that reference them;
// dropping the last tensor of a graph frees it.
// ---------------------------------------------------------------------------

template <typename T>
struct Node;

// Accumulates this node's cotangent into the parents' cotangent buffers.
// `self` is the node being differentiated (its value and parents are live).
// pgrads[i] is null when parent i does not need a gradient; implementations
// must skip those (and may skip whole computations that feed only them).
template <typename T>
using BackpropFn = std::function<void(const Node<T>& self, const std::vector<T>& gout,
                                      const std::vector<std::vector<T>*>& pgrads)>;

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated only for leaves created with requires_grad
  bool requires_grad = false;
  bool is_leaf = true;
  bool backward_ran = false;  // set on a root after backward(); guards double-backward
  uint64_t seq = 0;           // creation order; strictly increasing per thread
  std::string op;             // op name, for error messages
  std::vector<std::shared_ptr<Node>> parents;
  BackpropFn<T> backprop;

  int64_t numel() const { return static_cast<int64_t>(value.size()); }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  // Leaf constructors. A requires_grad leaf owns a zero-initialized grad
  // buffer that backward() accumulates into.
  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, T fill, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<T> data, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  const std::vector<T>& value() const { return node_->value; }
  // In-place mutation is only sound for leaves (no recorded op depends on
  // the old value through a stale closure the caller cannot see).
  std::vector<T>& mutable_value();
  std::vector<T>& grad();
  const std::vector<T>& grad() const;

  T item() const;  // single-element tensors only

  std::shared_ptr<Node<T>> node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// --- gradient mode ----------------------------------------------------------

// Recording is on by default; NoGradGuard switches it off for its scope
// (nested guards behave like a counter). Ops run under a guard produce
// constant nodes with no parents and no closures.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Generic op factory: applies grad-mode / requires-grad inference and wires
// the node into the graph. All built-in ops go through this, and other
// modules use it to register fused ops with hand-written backprop closures.
template <typename T>
Tensor<T> make_op(const std::string& name, Shape out_shape, std::vector<T> out_value,
                  const std::vector<Tensor<T>>& parents, BackpropFn<T> fn);

// --- elementwise / scalar ----------------------------------------------------

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T> Tensor<T> softplus(const Tensor<T>& a);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);

// --- reductions ---------------------------------------------------------------

template <typename T> Tensor<T> sum_all(const Tensor<T>& a);
template <typename T> Tensor<T> mean_all(const Tensor<T>& a);
// Euclidean norm over all elements; gradient is x/||x|| (zero at the origin).
template <typename T> Tensor<T> l2norm(const Tensor<T>& a);

// --- NCHW feature-map ops ----------------------------------------------------

// x:[N,C,H,W] scaled / shifted per channel by a length-C vector.
template <typename T> Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& s);
template <typename T> Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& b);

// Stride-1 same-padding convolution, odd square kernels. x:[N,Ci,H,W],
// k:[Co,Ci,kh,kw], optional bias:[Co].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& bias = Tensor<T>());

// [Co,Ci,kh,kw] -> [Ci,Co,kh,kw] with both spatial axes flipped. With stride 1
// and symmetric same padding, conv2d(y, kernel_flip_swap(k)) is the exact
// transpose of x -> conv2d(x, k).
template <typename T> Tensor<T> kernel_flip_swap(const Tensor<T>& k);

// Mean over H,W: [N,C,H,W] -> [N,C].
template <typename T> Tensor<T> global_avg_pool(const Tensor<T>& x);

// x:[N,K] + b:[K].
template <typename T> Tensor<T> add_bias2d(const Tensor<T>& x, const Tensor<T>& b);

// --- batch normalization -------------------------------------------------------

enum class BNMode {
  Train,        // normalize with batch stats and update running stats
  TrainFrozen,  // normalize with batch stats, leave running stats untouched
  Eval,         // normalize with running stats (per-channel affine map)
};

template <typename T>
struct BNStats {
  std::vector<T> running_mean;
  std::vector<T> running_var;
  int64_t updates = 0;

  explicit BNStats(int channels = 0)
      : running_mean(channels, T(0)), running_var(channels, T(1)) {}
  int channels() const { return static_cast<int>(running_mean.size()); }
};

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BNStats<T>& stats, BNMode mode, T eps = T(1e-5), T momentum = T(0.1));

// --- reverse traversal ----------------------------------------------------------

// Backpropagate from a scalar root, accumulating into the .grad buffers of
// requires_grad leaves. A second backward() from the same root without
// re-running the forward is rejected.
template <typename T> void backward(const Tensor<T>& root);

// Same, but seeds the root with an explicit cotangent (any shape root).
template <typename T>
void backward_with_cotangent(const Tensor<T>& root, const std::vector<T>& cotangent);

// Pure vector-Jacobian product query: cotangent of `wrt` given a cotangent at
// `out`. Touches no .grad buffer and sets no flags, so it can be issued
// repeatedly against one recorded graph. Returns zeros if `out` does not
// depend on `wrt`.
template <typename T>
std::vector<T> vjp(const Tensor<T>& out, const Tensor<T>& wrt, const std::vector<T>& cotangent);

// Zero the .grad buffers of the given leaves.
template <typename T> void zero_grad(const std::vector<Tensor<T>>& params);

// Throws NumericError naming `label` if any element is NaN/Inf.
template <typename T> void check_finite(const Tensor<T>& t, const std::string& label);

}  // namespace crnn
