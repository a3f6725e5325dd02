// Microbenchmarks for the hot paths: convolution, one recurrent step, whole
// rollouts, and the implicit gradient.
#include <benchmark/benchmark.h>

#include <vector>

#include "crnnrt/equilibrium.hpp"
#include "crnnrt/evidential.hpp"
#include "crnnrt/hgru.hpp"
#include "crnnrt/tensor.hpp"

using crnn::BNMode;
using crnn::Tensor;

namespace {

std::vector<float> ramp(size_t n, float lo = -1.0f, float hi = 1.0f) {
  std::vector<float> v(n);
  for (size_t i = 0; i < n; ++i)
    v[i] = lo + (hi - lo) * float(i % 997) / 996.0f;
  return v;
}

crnn::HGRUParams<float> make_params(int channels) {
  crnn::HGRUConfig cfg;
  cfg.channels = channels;
  cfg.init_seed = 7;
  return crnn::HGRUParams<float>::init(cfg);
}

void BM_Conv2dForward(benchmark::State& state) {
  const int c = int(state.range(0));
  auto x = Tensor<float>::from({4, c, 32, 32}, ramp(size_t(4) * c * 32 * 32));
  auto w = Tensor<float>::from({c, c, 5, 5}, ramp(size_t(c) * c * 25, -0.1f, 0.1f));
  auto b = Tensor<float>::from({c}, ramp(size_t(c)));
  crnn::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(crnn::conv2d(x, w, b));
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(32);

void BM_Conv2dBackward(benchmark::State& state) {
  const int c = int(state.range(0));
  for (auto _ : state) {
    auto x = Tensor<float>::from({4, c, 32, 32}, ramp(size_t(4) * c * 32 * 32), true);
    auto w = Tensor<float>::from({c, c, 5, 5}, ramp(size_t(c) * c * 25, -0.1f, 0.1f), true);
    auto b = Tensor<float>::from({c}, ramp(size_t(c)), true);
    auto loss = crnn::mean_all(crnn::square(crnn::conv2d(x, w, b)));
    crnn::backward(loss);
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(8)->Arg(32);

void BM_InputDrive(benchmark::State& state) {
  auto p = make_params(int(state.range(0)));
  auto img = Tensor<float>::from({4, 1, 48, 48}, ramp(size_t(4) * 48 * 48, 0.0f, 1.0f));
  crnn::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(crnn::input_drive(p, img, BNMode::Eval));
}
BENCHMARK(BM_InputDrive)->Arg(32);

void BM_HGRUStep(benchmark::State& state) {
  const int c = int(state.range(0));
  auto p = make_params(c);
  crnn::NoGradGuard ng;
  auto img = Tensor<float>::from({4, 1, 48, 48}, ramp(size_t(4) * 48 * 48, 0.0f, 1.0f));
  auto z = crnn::input_drive(p, img, BNMode::Eval);
  auto h = Tensor<float>::from(z.shape(), std::vector<float>(z.value().size(), 0.0f));
  for (auto _ : state) benchmark::DoNotOptimize(crnn::hgru_step(p, h, z, BNMode::Eval));
}
BENCHMARK(BM_HGRUStep)->Arg(8)->Arg(32);

void BM_Rollout(benchmark::State& state) {
  auto p = make_params(16);
  crnn::NoGradGuard ng;
  auto img = Tensor<float>::from({4, 1, 48, 48}, ramp(size_t(4) * 48 * 48, 0.0f, 1.0f));
  auto z = crnn::input_drive(p, img, BNMode::Eval);
  const int steps = int(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(crnn::rollout(p, z, steps, BNMode::Eval));
}
BENCHMARK(BM_Rollout)->Arg(10)->Arg(40);

void BM_ImplicitGradient(benchmark::State& state) {
  auto p = make_params(16);
  auto img = Tensor<float>::from({2, 1, 48, 48}, ramp(size_t(2) * 48 * 48, 0.0f, 1.0f));
  Tensor<float> z, hT;
  {
    crnn::NoGradGuard ng;
    z = crnn::input_drive(p, img, BNMode::Eval);
    hT = crnn::rollout(p, z, 20, BNMode::Eval);
  }
  std::vector<float> cot(hT.value().size(), 1e-3f);
  crnn::CRBPConfig cfg;
  auto params = p.parameters();
  auto build = [&](const Tensor<float>& hh) {
    return crnn::hgru_step(p, hh, z, BNMode::Eval);
  };
  for (auto _ : state) {
    crnn::zero_grad(params);
    benchmark::DoNotOptimize(crnn::crbp_gradient<float>(build, hT, cot, cfg));
  }
}
BENCHMARK(BM_ImplicitGradient);

void BM_EvidentialLoss(benchmark::State& state) {
  const int n = 32, k = 2;
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i & 1;
  for (auto _ : state) {
    auto logits = Tensor<float>::from({n, k}, ramp(size_t(n) * k), true);
    auto loss = crnn::add(crnn::edl_risk(logits, labels),
                          crnn::kl_balance(logits, labels));
    crnn::backward(loss);
    benchmark::DoNotOptimize(logits.grad().data());
  }
}
BENCHMARK(BM_EvidentialLoss);

}  // namespace
