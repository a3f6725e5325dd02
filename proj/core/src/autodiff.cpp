#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "crnnrt/tensor.hpp"

namespace crnn {

namespace {

// Collect the subgraph reachable from root through parent links, sorted by
// ascending creation order (a topological order, since parents are always
// created before the ops that consume them).
template <typename T>
std::vector<Node<T>*> collect_ascending(Node<T>* root) {
  std::vector<Node<T>*> nodes;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack{root};
  seen.insert(root);
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    nodes.push_back(n);
    for (const auto& p : n->parents)
      if (seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->seq < b->seq; });
  return nodes;
}

// Shared reverse sweep. Seeds root with `seed` and pushes cotangents toward
// parents in reverse creation order. `needs` marks nodes whose cotangent must
// be materialized; others are pruned (their pgrads slot is null).
//
// If `wrt` is non-null the sweep is a pure VJP query: the cotangent reaching
// `wrt` is written to *wrt_out and no .grad buffer is touched. Otherwise
// cotangents are accumulated into the .grad of requires_grad leaves.
template <typename T>
void reverse_sweep(Node<T>* root, const std::vector<T>& seed,
                   const std::vector<Node<T>*>& ascending,
                   const std::unordered_set<Node<T>*>& needs, Node<T>* wrt,
                   std::vector<T>* wrt_out) {
  std::unordered_map<Node<T>*, std::vector<T>> cot;
  cot.emplace(root, seed);

  for (auto it = ascending.rbegin(); it != ascending.rend(); ++it) {
    Node<T>* n = *it;
    auto ci = cot.find(n);
    if (ci == cot.end()) continue;
    std::vector<T> g = std::move(ci->second);
    cot.erase(ci);

    if (wrt && n == wrt) {
      *wrt_out = std::move(g);
      return;  // every path from root to wrt has been folded in by now
    }
    if (!wrt && n->is_leaf && n->requires_grad) {
      auto& acc = n->grad;
      for (size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
      continue;
    }
    if (n->parents.empty() || !n->backprop) continue;

    std::vector<std::vector<T>*> pg(n->parents.size(), nullptr);
    for (size_t i = 0; i < n->parents.size(); ++i) {
      Node<T>* p = n->parents[i].get();
      if (!needs.count(p)) continue;
      auto [slot, inserted] = cot.try_emplace(p);
      if (inserted) slot->second.assign(p->value.size(), T(0));
      pg[i] = &slot->second;
    }
    n->backprop(*n, g, pg);
  }
}

}  // namespace

template <typename T>
void backward_with_cotangent(const Tensor<T>& root, const std::vector<T>& cotangent) {
  if (!root.defined()) throw TensorError("backward: undefined tensor");
  Node<T>* r = root.node().get();
  if (static_cast<int64_t>(cotangent.size()) != r->numel())
    throw TensorError("backward: cotangent size " + std::to_string(cotangent.size()) +
                      " does not match root " + shape_str(r->shape));
  if (!r->requires_grad)
    throw TensorError("backward: root does not require grad (op '" + r->op + "')");
  if (r->backward_ran)
    throw TensorError("backward: already ran for this root; re-run the forward first");
  r->backward_ran = true;

  auto ascending = collect_ascending(r);
  // A node needs a cotangent iff it requires grad (constants are pruned).
  std::unordered_set<Node<T>*> needs;
  for (Node<T>* n : ascending)
    if (n->requires_grad) needs.insert(n);
  reverse_sweep<T>(r, cotangent, ascending, needs, nullptr, nullptr);
}

template <typename T>
void backward(const Tensor<T>& root) {
  if (!root.defined()) throw TensorError("backward: undefined tensor");
  if (root.numel() != 1)
    throw TensorError("backward: root must be scalar, got " + shape_str(root.shape()) +
                      "; use backward_with_cotangent for non-scalar roots");
  backward_with_cotangent(root, std::vector<T>{T(1)});
}

template <typename T>
std::vector<T> vjp(const Tensor<T>& out, const Tensor<T>& wrt, const std::vector<T>& cotangent) {
  if (!out.defined() || !wrt.defined()) throw TensorError("vjp: undefined tensor");
  Node<T>* r = out.node().get();
  Node<T>* w = wrt.node().get();
  if (static_cast<int64_t>(cotangent.size()) != r->numel())
    throw TensorError("vjp: cotangent size " + std::to_string(cotangent.size()) +
                      " does not match out " + shape_str(r->shape));

  std::vector<T> result(w->value.size(), T(0));
  if (r == w) return cotangent;

  auto ascending = collect_ascending(r);
  // Need-set: nodes lying on a path from wrt to out, i.e. descendants of wrt
  // within the subgraph. Ascending order makes this a single forward pass.
  std::unordered_set<Node<T>*> needs;
  bool wrt_reachable = false;
  for (Node<T>* n : ascending) {
    if (n == w) {
      needs.insert(n);
      wrt_reachable = true;
      continue;
    }
    for (const auto& p : n->parents)
      if (needs.count(p.get())) {
        needs.insert(n);
        break;
      }
  }
  if (!wrt_reachable || !needs.count(r)) return result;  // out independent of wrt

  reverse_sweep<T>(r, cotangent, ascending, needs, w, &result);
  return result;
}

template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template void backward_with_cotangent(const Tensor<float>&, const std::vector<float>&);
template void backward_with_cotangent(const Tensor<double>&, const std::vector<double>&);
template std::vector<float> vjp(const Tensor<float>&, const Tensor<float>&,
                                const std::vector<float>&);
template std::vector<double> vjp(const Tensor<double>&, const Tensor<double>&,
                                 const std::vector<double>&);

}  // namespace crnn
