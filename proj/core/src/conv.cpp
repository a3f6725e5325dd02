#include <Eigen/Core>
#include <cstring>

#include "crnnrt/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace crnn {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

// Unfold one sample into a (Ci*kh*kw) x (H*W) row-major matrix for stride-1
// same-padding convolution. Each (ci,ky,kx,y) slice is a contiguous row
// segment of the input, so the inner loop is a single memcpy.
template <typename T>
void im2col(const T* x, int Ci, int H, int W, int kh, int kw, T* col) {
  const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  const int64_t HW = int64_t(H) * W;
  std::memset(col, 0, sizeof(T) * size_t(Ci) * kh * kw * HW);
  for (int ci = 0; ci < Ci; ++ci)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        T* dst_row = col + ((int64_t(ci) * kh + ky) * kw + kx) * HW;
        const int x0 = std::max(0, pw - kx);
        const int x1 = std::min(W - 1, W - 1 + pw - kx);
        const int len = x1 - x0 + 1;
        if (len <= 0) continue;
        const int xs0 = x0 + kx - pw;
        for (int y = 0; y < H; ++y) {
          const int ys = y + ky - ph;
          if (ys < 0 || ys >= H) continue;
          std::memcpy(dst_row + int64_t(y) * W + x0, x + (int64_t(ci) * H + ys) * W + xs0,
                      sizeof(T) * len);
        }
      }
}

// Transpose of im2col: scatter-add column-matrix gradients back to the input.
template <typename T>
void col2im_add(const T* col, int Ci, int H, int W, int kh, int kw, T* dx) {
  const int ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  const int64_t HW = int64_t(H) * W;
  for (int ci = 0; ci < Ci; ++ci)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const T* src_row = col + ((int64_t(ci) * kh + ky) * kw + kx) * HW;
        const int x0 = std::max(0, pw - kx);
        const int x1 = std::min(W - 1, W - 1 + pw - kx);
        const int len = x1 - x0 + 1;
        if (len <= 0) continue;
        const int xs0 = x0 + kx - pw;
        for (int y = 0; y < H; ++y) {
          const int ys = y + ky - ph;
          if (ys < 0 || ys >= H) continue;
          T* d = dx + (int64_t(ci) * H + ys) * W + xs0;
          const T* s = src_row + int64_t(y) * W + x0;
          for (int i = 0; i < len; ++i) d[i] += s[i];
        }
      }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& bias) {
  if (x.shape().size() != 4 || k.shape().size() != 4)
    throw TensorError("conv2d: expected 4-D input and kernel, got " + shape_str(x.shape()) +
                      " and " + shape_str(k.shape()));
  const int N = x.shape()[0], Ci = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const int Co = k.shape()[0], kh = k.shape()[2], kw = k.shape()[3];
  if (k.shape()[1] != Ci)
    throw TensorError("conv2d: kernel expects " + std::to_string(k.shape()[1]) +
                      " input channels, input has " + std::to_string(Ci));
  if (kh % 2 == 0 || kw % 2 == 0)
    throw TensorError("conv2d: same padding requires odd kernel sides, got " + shape_str(k.shape()));
  const bool has_bias = bias.defined();
  if (has_bias && (bias.shape().size() != 1 || bias.shape()[0] != Co))
    throw TensorError("conv2d: bias must be length-Co vector, got " + shape_str(bias.shape()));

  const int64_t HW = int64_t(H) * W;
  const int64_t R = int64_t(Ci) * kh * kw;
  const bool onebyone = (kh == 1 && kw == 1);

  std::vector<T> out(size_t(N) * Co * HW);
  const T* xv = x.value().data();
  const T* kv = k.value().data();
  const int nw = worker_count(N);

#pragma omp parallel for schedule(static) num_threads(nw)
  for (int n = 0; n < N; ++n) {
    CMapRM<T> K(kv, Co, R);
    MapRM<T> O(out.data() + int64_t(n) * Co * HW, Co, HW);
    if (onebyone) {
      CMapRM<T> X(xv + int64_t(n) * Ci * HW, Ci, HW);
      O.noalias() = K * X;
    } else {
      std::vector<T> col(size_t(R) * HW);
      im2col(xv + int64_t(n) * Ci * HW, Ci, H, W, kh, kw, col.data());
      CMapRM<T> Col(col.data(), R, HW);
      O.noalias() = K * Col;
    }
  }
  if (has_bias) {
    const T* bv = bias.value().data();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < Co; ++c) {
        T* p = out.data() + (int64_t(n) * Co + c) * HW;
        for (int64_t i = 0; i < HW; ++i) p[i] += bv[c];
      }
  }

  std::vector<Tensor<T>> parents = has_bias ? std::vector<Tensor<T>>{x, k, bias}
                                            : std::vector<Tensor<T>>{x, k};
  auto bp = [N, Ci, H, W, Co, kh, kw, HW, R, onebyone, has_bias](
                const Node<T>& self, const std::vector<T>& g,
                const std::vector<std::vector<T>*>& pg) {
    const T* xv2 = self.parents[0]->value.data();
    const T* kv2 = self.parents[1]->value.data();
    const bool want_dx = pg[0] != nullptr;
    const bool want_dk = pg[1] != nullptr;
    const bool want_db = has_bias && pg[2] != nullptr;

    // Per-sample kernel-gradient slabs, reduced sequentially afterwards, keep
    // the result independent of the worker count.
    std::vector<T> dk_partial;
    if (want_dk) dk_partial.assign(size_t(N) * Co * R, T(0));

    const int nw2 = worker_count(N);
#pragma omp parallel for schedule(static) num_threads(nw2)
    for (int n = 0; n < N; ++n) {
      CMapRM<T> K(kv2, Co, R);
      CMapRM<T> G(g.data() + int64_t(n) * Co * HW, Co, HW);
      if (onebyone) {
        if (want_dx) {
          MapRM<T> DX(pg[0]->data() + int64_t(n) * Ci * HW, Ci, HW);
          DX.noalias() += K.transpose() * G;
        }
        if (want_dk) {
          CMapRM<T> X(xv2 + int64_t(n) * Ci * HW, Ci, HW);
          MapRM<T> DK(dk_partial.data() + int64_t(n) * Co * R, Co, R);
          DK.noalias() = G * X.transpose();
        }
      } else {
        if (want_dx) {
          std::vector<T> dcol(size_t(R) * HW);
          MapRM<T> DCol(dcol.data(), R, HW);
          DCol.noalias() = K.transpose() * G;
          col2im_add(dcol.data(), Ci, H, W, kh, kw, pg[0]->data() + int64_t(n) * Ci * HW);
        }
        if (want_dk) {
          std::vector<T> col(size_t(R) * HW);
          im2col(xv2 + int64_t(n) * Ci * HW, Ci, H, W, kh, kw, col.data());
          CMapRM<T> Col(col.data(), R, HW);
          MapRM<T> DK(dk_partial.data() + int64_t(n) * Co * R, Co, R);
          DK.noalias() = G * Col.transpose();
        }
      }
    }
    if (want_dk) {
      auto& dk = *pg[1];
      for (int n = 0; n < N; ++n) {
        const T* p = dk_partial.data() + int64_t(n) * Co * R;
        for (int64_t i = 0; i < Co * R; ++i) dk[i] += p[i];
      }
    }
    if (want_db) {
      auto& db = *pg[2];
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < Co; ++c) {
          const T* p = g.data() + (int64_t(n) * Co + c) * HW;
          T acc = 0;
          for (int64_t i = 0; i < HW; ++i) acc += p[i];
          db[c] += acc;
        }
    }
  };
  return make_op<T>("conv2d", {N, Co, H, W}, std::move(out), parents, bp);
}

template <typename T>
Tensor<T> kernel_flip_swap(const Tensor<T>& k) {
  if (k.shape().size() != 4)
    throw TensorError("kernel_flip_swap: expected 4-D kernel, got " + shape_str(k.shape()));
  const int Co = k.shape()[0], Ci = k.shape()[1], kh = k.shape()[2], kw = k.shape()[3];
  const auto& kv = k.value();
  std::vector<T> out(kv.size());
  for (int co = 0; co < Co; ++co)
    for (int ci = 0; ci < Ci; ++ci)
      for (int y = 0; y < kh; ++y)
        for (int x = 0; x < kw; ++x)
          out[((int64_t(ci) * Co + co) * kh + (kh - 1 - y)) * kw + (kw - 1 - x)] =
              kv[((int64_t(co) * Ci + ci) * kh + y) * kw + x];
  return make_op<T>("kernel_flip_swap", {Ci, Co, kh, kw}, std::move(out), {k},
                    [Co, Ci, kh, kw](const Node<T>&, const std::vector<T>& g,
                                     const std::vector<std::vector<T>*>& pg) {
                      if (!pg[0]) return;
                      auto& d = *pg[0];
                      for (int co = 0; co < Co; ++co)
                        for (int ci = 0; ci < Ci; ++ci)
                          for (int y = 0; y < kh; ++y)
                            for (int x = 0; x < kw; ++x)
                              d[((int64_t(co) * Ci + ci) * kh + y) * kw + x] +=
                                  g[((int64_t(ci) * Co + co) * kh + (kh - 1 - y)) * kw +
                                    (kw - 1 - x)];
                    });
}

template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&,
                               const Tensor<double>&);
template Tensor<float> kernel_flip_swap(const Tensor<float>&);
template Tensor<double> kernel_flip_swap(const Tensor<double>&);

}  // namespace crnn
