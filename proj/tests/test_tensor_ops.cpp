#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "crnnrt/tensor.hpp"
#include "testutil.hpp"

using crnn::BNMode;
using crnn::BNStats;
using crnn::Tensor;
using testutil::rel_err;

TEST_CASE("conv2d identity kernel returns input") {
  auto xv = testutil::randn(size_t(2) * 3 * 5 * 5, 11);
  auto x = Tensor<double>::from({2, 3, 5, 5}, xv);
  std::vector<double> kv(size_t(3) * 3 * 3 * 3, 0.0);
  for (int c = 0; c < 3; ++c) kv[((c * 3 + c) * 3 + 1) * 3 + 1] = 1.0;  // delta at center
  auto k = Tensor<double>::from({3, 3, 3, 3}, kv);
  auto y = crnn::conv2d(x, k);
  for (size_t i = 0; i < xv.size(); ++i) CHECK(y.value()[i] == doctest::Approx(xv[i]).epsilon(1e-12));
}

TEST_CASE("conv2d all-ones 3x3 kernel counts valid neighbors") {
  auto x = Tensor<double>::full({1, 1, 4, 4}, 1.0);
  auto k = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  auto y = crnn::conv2d(x, k);
  // Same padding: corners see a 2x2 window, edges 2x3, interior 3x3.
  CHECK(y.value()[0] == doctest::Approx(4.0));
  CHECK(y.value()[1] == doctest::Approx(6.0));
  CHECK(y.value()[5] == doctest::Approx(9.0));
}

TEST_CASE("conv2d matches direct-loop reference") {
  const int N = 2, Ci = 3, H = 7, W = 6, Co = 4, kk = 5;
  auto xv = testutil::randn(size_t(N) * Ci * H * W, 21);
  auto kv = testutil::randn(size_t(Co) * Ci * kk * kk, 22);
  auto bv = testutil::randn(Co, 23);
  auto y = crnn::conv2d(Tensor<double>::from({N, Ci, H, W}, xv),
                        Tensor<double>::from({Co, Ci, kk, kk}, kv),
                        Tensor<double>::from({Co}, bv));
  auto ref = testutil::naive_conv2d(xv, N, Ci, H, W, kv, Co, kk, kk, &bv);
  for (size_t i = 0; i < ref.size(); ++i) CHECK(rel_err(y.value()[i], ref[i]) < 1e-12);
}

TEST_CASE("conv2d 1x1 fast path matches reference") {
  const int N = 2, Ci = 5, H = 4, W = 4, Co = 3;
  auto xv = testutil::randn(size_t(N) * Ci * H * W, 31);
  auto kv = testutil::randn(size_t(Co) * Ci, 32);
  auto y = crnn::conv2d(Tensor<double>::from({N, Ci, H, W}, xv),
                        Tensor<double>::from({Co, Ci, 1, 1}, kv));
  auto ref = testutil::naive_conv2d(xv, N, Ci, H, W, kv, Co, 1, 1);
  for (size_t i = 0; i < ref.size(); ++i) CHECK(rel_err(y.value()[i], ref[i]) < 1e-12);
}

TEST_CASE("kernel_flip_swap gives the exact transpose map") {
  // <conv(x,k), y> == <x, conv(y, flip_swap(k))> for stride-1 same padding.
  const int N = 1, Ci = 3, H = 6, W = 5, Co = 2, kk = 3;
  auto xv = testutil::randn(size_t(N) * Ci * H * W, 41);
  auto kv = testutil::randn(size_t(Co) * Ci * kk * kk, 42);
  auto yv = testutil::randn(size_t(N) * Co * H * W, 43);
  auto x = Tensor<double>::from({N, Ci, H, W}, xv);
  auto k = Tensor<double>::from({Co, Ci, kk, kk}, kv);
  auto y = Tensor<double>::from({N, Co, H, W}, yv);
  auto kx = crnn::conv2d(x, k);
  auto kty = crnn::conv2d(y, crnn::kernel_flip_swap(k));
  double lhs = 0, rhs = 0;
  for (size_t i = 0; i < yv.size(); ++i) lhs += kx.value()[i] * yv[i];
  for (size_t i = 0; i < xv.size(); ++i) rhs += kty.value()[i] * xv[i];
  CHECK(rel_err(lhs, rhs) < 1e-12);
}

TEST_CASE("softplus and sigmoid basics and tails") {
  auto x = Tensor<double>::from({4}, {0.0, -800.0, 800.0, 1.0});
  auto sp = crnn::softplus(x);
  CHECK(sp.value()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(sp.value()[1] >= 0.0);
  CHECK(std::isfinite(sp.value()[1]));
  CHECK(sp.value()[2] == doctest::Approx(800.0));
  auto sg = crnn::sigmoid(x);
  CHECK(sg.value()[0] == doctest::Approx(0.5));
  CHECK(sg.value()[1] >= 0.0);
  CHECK(sg.value()[2] <= 1.0);
  CHECK(std::isfinite(sg.value()[1]));
}

TEST_CASE("batch_norm of a constant channel yields beta") {
  auto x = Tensor<double>::full({2, 2, 3, 3}, 5.0);
  auto gamma = Tensor<double>::from({2}, {2.0, 3.0});
  auto beta = Tensor<double>::from({2}, {-1.0, 4.0});
  BNStats<double> stats(2);
  auto y = crnn::batch_norm(x, gamma, beta, stats, BNMode::Train);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 9; ++i) {
      CHECK(y.value()[size_t(c) * 9 + i] == doctest::Approx(beta.value()[c]).epsilon(1e-6));
      CHECK(std::isfinite(y.value()[size_t(c) * 9 + i]));
    }
  CHECK(stats.updates == 1);
}

TEST_CASE("batch_norm train normalizes to zero mean unit variance") {
  auto xv = testutil::randn(size_t(4) * 3 * 6 * 6, 51, 3.0);
  auto x = Tensor<double>::from({4, 3, 6, 6}, xv);
  auto gamma = Tensor<double>::full({3}, 1.0);
  auto beta = Tensor<double>::zeros({3});
  BNStats<double> stats(3);
  auto y = crnn::batch_norm(x, gamma, beta, stats, BNMode::Train);
  const int64_t m = 4 * 36;
  for (int c = 0; c < 3; ++c) {
    double s = 0, s2 = 0;
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 36; ++i) {
        double v = y.value()[(size_t(n) * 3 + c) * 36 + i];
        s += v;
        s2 += v * v;
      }
    CHECK(std::abs(s / m) < 1e-10);
    CHECK(s2 / m == doctest::Approx(1.0).epsilon(1e-3));  // (var)/(var+eps)
  }
}

TEST_CASE("batch_norm TrainFrozen leaves running stats untouched") {
  auto xv = testutil::randn(size_t(2) * 2 * 4 * 4, 52);
  auto x = Tensor<double>::from({2, 2, 4, 4}, xv);
  auto gamma = Tensor<double>::full({2}, 1.0);
  auto beta = Tensor<double>::zeros({2});
  BNStats<double> stats(2);
  auto before_m = stats.running_mean, before_v = stats.running_var;
  auto y1 = crnn::batch_norm(x, gamma, beta, stats, BNMode::TrainFrozen);
  CHECK(stats.running_mean == before_m);
  CHECK(stats.running_var == before_v);
  CHECK(stats.updates == 0);
  // Same normalization as Train mode (stats differ, values do not).
  BNStats<double> stats2(2);
  auto y2 = crnn::batch_norm(x, gamma, beta, stats2, BNMode::Train);
  for (size_t i = 0; i < y1.value().size(); ++i)
    CHECK(y1.value()[i] == doctest::Approx(y2.value()[i]).epsilon(1e-14));
}

TEST_CASE("batch_norm eval is a per-channel affine map") {
  auto gamma = Tensor<double>::from({2}, {1.5, 0.5});
  auto beta = Tensor<double>::from({2}, {0.2, -0.3});
  BNStats<double> stats(2);
  stats.running_mean = {1.0, -2.0};
  stats.running_var = {4.0, 0.25};
  auto x = Tensor<double>::from({1, 2, 1, 2}, {3.0, 5.0, -1.0, 0.0});
  auto y = crnn::batch_norm(x, gamma, beta, stats, BNMode::Eval);
  double eps = 1e-5;
  CHECK(y.value()[0] == doctest::Approx(1.5 * (3.0 - 1.0) / std::sqrt(4.0 + eps) + 0.2));
  CHECK(y.value()[1] == doctest::Approx(1.5 * (5.0 - 1.0) / std::sqrt(4.0 + eps) + 0.2));
  CHECK(y.value()[2] == doctest::Approx(0.5 * (-1.0 + 2.0) / std::sqrt(0.25 + eps) - 0.3));
  CHECK(y.value()[3] == doctest::Approx(0.5 * (0.0 + 2.0) / std::sqrt(0.25 + eps) - 0.3));
}

TEST_CASE("backward on sum gives unit gradients; double backward rejected") {
  auto x = Tensor<double>::from({3}, {1.0, 2.0, 3.0}, /*requires_grad=*/true);
  auto loss = crnn::sum_all(crnn::mul(x, x));
  crnn::backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
  CHECK(x.grad()[2] == doctest::Approx(6.0));
  CHECK_THROWS_AS(crnn::backward(loss), crnn::TensorError);
  // Grads persist until explicitly zeroed; a fresh forward accumulates.
  auto loss2 = crnn::sum_all(crnn::mul(x, x));
  crnn::backward(loss2);
  CHECK(x.grad()[0] == doctest::Approx(4.0));
  crnn::zero_grad<double>({x});
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("backward requires scalar root") {
  auto x = Tensor<double>::from({2}, {1.0, 2.0}, true);
  auto y = crnn::mul(x, x);
  CHECK_THROWS_AS(crnn::backward(y), crnn::TensorError);
}

TEST_CASE("NoGradGuard suppresses recording") {
  auto x = Tensor<double>::from({2}, {1.0, 2.0}, true);
  crnn::Tensor<double> y;
  {
    crnn::NoGradGuard ng;
    y = crnn::sum_all(crnn::mul(x, x));
  }
  CHECK_FALSE(y.requires_grad());
  CHECK_THROWS_AS(crnn::backward(y), crnn::TensorError);
}

TEST_CASE("vjp is a pure repeatable query") {
  auto x = Tensor<double>::from({3}, {0.5, -1.0, 2.0}, true);
  auto y = crnn::mul(x, x);
  std::vector<double> cot = {1.0, 2.0, 3.0};
  auto g1 = crnn::vjp(y, x, cot);
  auto g2 = crnn::vjp(y, x, cot);
  CHECK(g1 == g2);
  CHECK(g1[0] == doctest::Approx(1.0));   // 2*0.5*1
  CHECK(g1[1] == doctest::Approx(-4.0));  // 2*-1*2
  CHECK(g1[2] == doctest::Approx(12.0));  // 2*2*3
  // vjp leaves .grad untouched and does not trip the double-backward guard.
  CHECK(x.grad()[0] == 0.0);
  crnn::backward(crnn::sum_all(y));
  CHECK(x.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("vjp of an unrelated tensor is zero") {
  auto x = Tensor<double>::from({2}, {1.0, 2.0}, true);
  auto z = Tensor<double>::from({2}, {3.0, 4.0}, true);
  auto y = crnn::mul(x, x);
  auto g = crnn::vjp(y, z, {1.0, 1.0});
  CHECK(g == std::vector<double>{0.0, 0.0});
}

TEST_CASE("vjp against a dense linear-map oracle") {
  // y = A x realized as a 1x1 convolution over a [1,n,1,1] tensor; the
  // cotangent pullback must equal A^T v from a dense solve route.
  const int n = 6, m = 4;
  auto Av = testutil::randn(size_t(m) * n, 61);
  auto xv = testutil::randn(n, 62);
  auto vv = testutil::randn(m, 63);
  auto x = Tensor<double>::from({1, n, 1, 1}, xv, true);
  auto A = Tensor<double>::from({m, n, 1, 1}, Av);
  auto y = crnn::conv2d(x, A);
  auto g = crnn::vjp(y, x, vv);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> Am(
      Av.data(), m, n);
  Eigen::Map<Eigen::VectorXd> vm(vv.data(), m);
  Eigen::VectorXd ref = Am.transpose() * vm;
  for (int i = 0; i < n; ++i) CHECK(rel_err(g[i], ref[i]) < 1e-12);
}

TEST_CASE("shape mismatches are rejected with TensorError") {
  auto a = Tensor<double>::zeros({2, 3});
  auto b = Tensor<double>::zeros({3, 2});
  CHECK_THROWS_AS(crnn::add(a, b), crnn::TensorError);
  CHECK_THROWS_AS(crnn::mul(a, b), crnn::TensorError);
  auto x = Tensor<double>::zeros({1, 2, 4, 4});
  auto k_even = Tensor<double>::zeros({1, 2, 2, 2});
  CHECK_THROWS_AS(crnn::conv2d(x, k_even), crnn::TensorError);
  auto k_badc = Tensor<double>::zeros({1, 3, 3, 3});
  CHECK_THROWS_AS(crnn::conv2d(x, k_badc), crnn::TensorError);
  auto s = Tensor<double>::zeros({3});
  CHECK_THROWS_AS(crnn::scale_channels(x, s), crnn::TensorError);
}

TEST_CASE("check_finite flags NaN and Inf") {
  auto ok = Tensor<double>::from({2}, {1.0, 2.0});
  CHECK_NOTHROW(crnn::check_finite(ok, "ok"));
  auto bad = Tensor<double>::from({2}, {1.0, std::nan("")});
  CHECK_THROWS_AS(crnn::check_finite(bad, "bad"), crnn::NumericError);
}

TEST_CASE("conv2d forward and backward are run-to-run deterministic") {
  const int N = 4, Ci = 8, H = 12, W = 12, Co = 8, kk = 5;
  auto xv = testutil::randn_f(size_t(N) * Ci * H * W, 71);
  auto kv = testutil::randn_f(size_t(Co) * Ci * kk * kk, 72);
  std::vector<float> out1, out2, gx1, gx2, gk1, gk2;
  for (int rep = 0; rep < 2; ++rep) {
    auto x = Tensor<float>::from({N, Ci, H, W}, xv, true);
    auto k = Tensor<float>::from({Co, Ci, kk, kk}, kv, true);
    auto y = crnn::conv2d(x, k);
    crnn::backward(crnn::sum_all(crnn::mul(y, y)));
    (rep == 0 ? out1 : out2) = y.value();
    (rep == 0 ? gx1 : gx2) = x.grad();
    (rep == 0 ? gk1 : gk2) = k.grad();
  }
  CHECK(out1 == out2);  // bitwise
  CHECK(gx1 == gx2);
  CHECK(gk1 == gk2);
}

// --- finite-difference gradient oracle, 64-bit --------------------------------

TEST_CASE("gradients: elementwise chain") {
  auto x = Tensor<double>::from({6}, testutil::randn(6, 81), true);
  auto res = testutil::check_gradient(
      [&] {
        auto a = crnn::sigmoid(x);
        auto b = crnn::softplus(crnn::mul_scalar(x, 1.3));
        auto c = crnn::add(crnn::mul(a, b), crnn::square(x));
        return crnn::mean_all(c);
      },
      {x});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradients: conv2d with bias") {
  auto x = Tensor<double>::from({2, 2, 5, 5}, testutil::randn(size_t(2) * 2 * 5 * 5, 82), true);
  auto k = Tensor<double>::from({3, 2, 3, 3}, testutil::randn(size_t(3) * 2 * 3 * 3, 83, 0.4), true);
  auto b = Tensor<double>::from({3}, testutil::randn(3, 84), true);
  auto res = testutil::check_gradient(
      [&] { return crnn::mean_all(crnn::square(crnn::conv2d(x, k, b))); }, {x, k, b});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradients: batch_norm train mode") {
  auto x = Tensor<double>::from({3, 2, 4, 4}, testutil::randn(size_t(3) * 2 * 4 * 4, 85), true);
  auto gamma = Tensor<double>::from({2}, {1.2, 0.7}, true);
  auto beta = Tensor<double>::from({2}, {0.1, -0.2}, true);
  auto res = testutil::check_gradient(
      [&] {
        BNStats<double> stats(2);  // fresh stats: FD re-runs must see identical state
        auto y = crnn::batch_norm(x, gamma, beta, stats, BNMode::TrainFrozen);
        return crnn::mean_all(crnn::square(y));
      },
      {x, gamma, beta});
  CHECK(res.max_rel_err < 1e-5);
}

TEST_CASE("gradients: batch_norm eval mode") {
  auto x = Tensor<double>::from({2, 2, 3, 3}, testutil::randn(size_t(2) * 2 * 3 * 3, 86), true);
  auto gamma = Tensor<double>::from({2}, {1.1, 0.9}, true);
  auto beta = Tensor<double>::from({2}, {0.3, -0.4}, true);
  BNStats<double> stats(2);
  stats.running_mean = {0.2, -0.5};
  stats.running_var = {1.5, 0.8};
  auto res = testutil::check_gradient(
      [&] {
        auto y = crnn::batch_norm(x, gamma, beta, stats, BNMode::Eval);
        return crnn::mean_all(crnn::square(y));
      },
      {x, gamma, beta});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradients: channel affine and pooling head") {
  auto x = Tensor<double>::from({2, 3, 4, 4}, testutil::randn(size_t(2) * 3 * 4 * 4, 87), true);
  auto s = Tensor<double>::from({3}, {0.5, -1.0, 2.0}, true);
  auto b = Tensor<double>::from({3}, {0.1, 0.2, -0.3}, true);
  auto w = Tensor<double>::from({2, 3, 1, 1}, testutil::randn(6, 88), true);
  auto hb = Tensor<double>::from({2}, {0.05, -0.05}, true);
  auto res = testutil::check_gradient(
      [&] {
        auto y = crnn::add_channel_bias(crnn::scale_channels(x, s), b);
        auto logits = crnn::add_bias2d(crnn::global_avg_pool(crnn::conv2d(y, w)), hb);
        return crnn::sum_all(crnn::square(logits));
      },
      {x, s, b, w, hb});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradients: l2norm and relu away from kinks") {
  auto x = Tensor<double>::from({5}, {0.7, -1.3, 2.1, -0.6, 1.9}, true);
  auto res = testutil::check_gradient(
      [&] { return crnn::l2norm(crnn::relu(crnn::add_scalar(x, 0.05))); }, {x});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradients: kernel_flip_swap composite") {
  auto x = Tensor<double>::from({1, 2, 4, 4}, testutil::randn(size_t(2) * 16, 89), true);
  auto k = Tensor<double>::from({3, 2, 3, 3}, testutil::randn(size_t(3) * 2 * 9, 90, 0.5), true);
  auto res = testutil::check_gradient(
      [&] {
        auto y = crnn::conv2d(x, k);
        auto back = crnn::conv2d(y, crnn::kernel_flip_swap(k));
        return crnn::mean_all(crnn::mul(back, back));
      },
      {x, k});
  CHECK(res.max_rel_err < 1e-6);
}
