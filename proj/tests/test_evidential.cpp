#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <random>

#include "crnnrt/evidential.hpp"
#include "testutil.hpp"

using crnn::EDLConfig;
using crnn::Tensor;

namespace {

// Inverse softplus: logit whose softplus equals the requested evidence.
double inv_softplus(double e) { return std::log(std::expm1(e)); }

// Logits that realize a target concentration vector (alpha_j = evidence_j + 1).
// alpha == 1 needs zero evidence; a large negative logit underflows softplus
// to exactly 0.
std::vector<double> logits_for_alpha(const std::vector<double>& alpha) {
  std::vector<double> l(alpha.size());
  for (size_t j = 0; j < alpha.size(); ++j)
    l[j] = alpha[j] <= 1.0 ? -1e3 : inv_softplus(alpha[j] - 1.0);
  return l;
}

}  // namespace

TEST_CASE("special-function routine agrees with high-precision anchors") {
  CHECK(boost::math::digamma(1.0) == doctest::Approx(-0.577215664901533).epsilon(1e-12));
  CHECK(boost::math::digamma(3.0) == doctest::Approx(0.922784335098467).epsilon(1e-12));
  CHECK(boost::math::digamma(100.5) == doctest::Approx(4.605174352581845).epsilon(1e-12));
  CHECK(boost::math::trigamma(1.0) == doctest::Approx(1.644934066848226).epsilon(1e-12));
  CHECK(boost::math::trigamma(100.5) == doctest::Approx(0.009999916669583).epsilon(1e-9));
}

TEST_CASE("zero logits produce the book-keeping quantities") {
  auto logits = Tensor<double>::zeros({1, 2});
  auto out = crnn::evidence_to_output(logits);
  const double ln2 = std::log(2.0);
  CHECK(out.evidence[0] == doctest::Approx(ln2).epsilon(1e-12));
  CHECK(out.alpha[0] == doctest::Approx(1.0 + ln2).epsilon(1e-12));
  CHECK(out.strength[0] == doctest::Approx(2.0 * (1.0 + ln2)).epsilon(1e-12));
  CHECK(out.p_mean[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.p_mean[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.uncertainty[0] == doctest::Approx(1.0 / (1.0 + ln2)).epsilon(1e-12));
}

TEST_CASE("no evidence means uncertainty is exactly one") {
  auto logits = Tensor<double>::full({3, 2}, -1e3);  // softplus underflows to 0
  auto out = crnn::evidence_to_output(logits);
  for (int i = 0; i < 3; ++i) {
    CHECK(out.uncertainty[i] == 1.0);
    CHECK(out.strength[i] == 2.0);
    CHECK(out.alpha[size_t(i) * 2] == 1.0);
  }
}

TEST_CASE("uncertainty invariants hold over a thousand random draws") {
  std::mt19937 rng(404);
  std::uniform_real_distribution<double> U(-10.0, 10.0);
  const int K = 2;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> l(K);
    for (auto& x : l) x = U(rng);
    auto out = crnn::evidence_to_output(Tensor<double>::from({1, K}, l));
    CHECK(out.uncertainty[0] > 0.0);
    CHECK(out.uncertainty[0] <= 1.0);
    CHECK(out.strength[0] >= double(K));
    double psum = out.p_mean[0] + out.p_mean[1];
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-12));
    for (double a : out.alpha) CHECK(a >= 1.0);
    // more evidence everywhere -> strictly less uncertainty
    std::vector<double> l2 = {l[0] + 2.0, l[1] + 2.0};
    auto out2 = crnn::evidence_to_output(Tensor<double>::from({1, K}, l2));
    CHECK(out2.uncertainty[0] < out.uncertainty[0]);
  }
}

TEST_CASE("expected risk matches closed forms") {
  // y = (1,0) throughout; tolerances far inside the 1e-4 contract.
  struct Case {
    std::vector<double> alpha;
    double expect;
  };
  const std::vector<Case> cases = {
      {{1.0, 1.0}, 2.0 / 3.0},
      {{2.0, 1.0}, 1.0 / 3.0},
      {{9.0, 1.0}, 0.036363636363636},
  };
  for (const auto& c : cases) {
    auto logits = Tensor<double>::from({1, 2}, logits_for_alpha(c.alpha));
    auto risk = crnn::edl_risk(logits, {0});
    CHECK(risk.item() == doctest::Approx(c.expect).epsilon(1e-9));
  }
}

TEST_CASE("balance term matches high-precision references") {
  CHECK(crnn::kl_dirichlet_uniform({1.0, 3.0}) ==
        doctest::Approx(0.431945622001443).epsilon(1e-12));
  CHECK(crnn::kl_dirichlet_uniform({2.5, 1.25}) ==
        doctest::Approx(0.228835692095466).epsilon(1e-12));
  CHECK(crnn::kl_dirichlet_uniform({1.0, 7.0}) ==
        doctest::Approx(1.0887672919124562).epsilon(1e-12));
  CHECK(crnn::kl_dirichlet_uniform({1.0, 2.0, 3.0, 4.0}) ==
        doctest::Approx(1.0513518372558905).epsilon(1e-12));

  // Masked balance: true class pinned at alpha_hat = 1, so only the off-class
  // evidence matters.
  auto logits = Tensor<double>::from({1, 2}, logits_for_alpha({5.0, 3.0}));
  auto kl = crnn::kl_balance(logits, {0});
  CHECK(kl.item() == doctest::Approx(0.431945622001443).epsilon(1e-9));

  // Invariance: the true-class logit does not change the balance term.
  auto logits2 = Tensor<double>::from({1, 2}, logits_for_alpha({1.0, 3.0}));
  auto kl2 = crnn::kl_balance(logits2, {0});
  CHECK(kl2.item() == doctest::Approx(kl.item()).epsilon(1e-12));

  // All concentrations at one -> exactly zero.
  auto logits3 = Tensor<double>::full({2, 2}, -1e3);
  CHECK(crnn::kl_balance(logits3, {0, 1}).item() == 0.0);
}

TEST_CASE("balance weight anneals linearly and saturates") {
  EDLConfig cfg;
  cfg.anneal_epochs = 16;
  auto logits = Tensor<double>::from({1, 2}, logits_for_alpha({4.0, 2.5}));
  std::vector<int> y = {0};
  double risk = crnn::edl_risk(logits, y).item();
  double kl = crnn::kl_balance(logits, y).item();
  CHECK(crnn::edl_loss(logits, y, 0, cfg).item() == doctest::Approx(risk).epsilon(1e-12));
  CHECK(crnn::edl_loss(logits, y, 8, cfg).item() ==
        doctest::Approx(risk + 0.5 * kl).epsilon(1e-12));
  CHECK(crnn::edl_loss(logits, y, 16, cfg).item() ==
        doctest::Approx(risk + kl).epsilon(1e-12));
  CHECK(crnn::edl_loss(logits, y, 100, cfg).item() ==
        doctest::Approx(risk + kl).epsilon(1e-12));
  CHECK_THROWS_AS(crnn::edl_loss(logits, y, -1, cfg), crnn::TensorError);
}

TEST_CASE("batch reduction is the mean of per-sample losses") {
  auto la = logits_for_alpha({2.0, 1.5});
  auto lb = logits_for_alpha({1.2, 6.0});
  std::vector<double> both = {la[0], la[1], lb[0], lb[1]};
  double ra = crnn::edl_risk(Tensor<double>::from({1, 2}, la), {0}).item();
  double rb = crnn::edl_risk(Tensor<double>::from({1, 2}, lb), {1}).item();
  double rboth = crnn::edl_risk(Tensor<double>::from({2, 2}, both), {0, 1}).item();
  CHECK(rboth == doctest::Approx(0.5 * (ra + rb)).epsilon(1e-12));
}

TEST_CASE("label validation") {
  auto logits = Tensor<double>::zeros({2, 2});
  CHECK_THROWS_AS(crnn::edl_risk(logits, {0}), crnn::TensorError);       // batch mismatch
  CHECK_THROWS_AS(crnn::edl_risk(logits, {0, 2}), crnn::TensorError);    // class out of range
  CHECK_THROWS_AS(crnn::kl_balance(logits, {0, -1}), crnn::TensorError);
}

TEST_CASE("gradients: risk term") {
  auto logits = Tensor<double>::from({3, 2}, testutil::randn(6, 211, 2.0), true);
  std::vector<int> y = {0, 1, 0};
  auto res =
      testutil::check_gradient([&] { return crnn::edl_risk(logits, y); }, {logits}, 1e-6);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradients: balance term") {
  auto logits = Tensor<double>::from({3, 2}, testutil::randn(6, 221, 2.0), true);
  std::vector<int> y = {1, 0, 0};
  auto res =
      testutil::check_gradient([&] { return crnn::kl_balance(logits, y); }, {logits}, 1e-6);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradients: combined annealed loss") {
  EDLConfig cfg;
  cfg.anneal_epochs = 20;
  auto logits = Tensor<double>::from({4, 2}, testutil::randn(8, 231, 1.5), true);
  std::vector<int> y = {0, 1, 1, 0};
  auto res = testutil::check_gradient([&] { return crnn::edl_loss(logits, y, 7, cfg); },
                                      {logits}, 1e-6);
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("gradients flow through a readout-style graph") {
  // The fused losses must compose with upstream tape ops.
  auto h = Tensor<double>::from({2, 2}, testutil::randn(4, 241), true);
  auto w = Tensor<double>::from({2, 2}, testutil::randn(4, 242), true);
  auto b = Tensor<double>::from({2, 2}, testutil::randn(4, 243, 0.5), true);
  std::vector<int> y = {0, 1};
  EDLConfig cfg;
  auto res = testutil::check_gradient(
      [&] { return crnn::edl_loss(crnn::add(crnn::mul(h, w), b), y, 5, cfg); },
      {h, w, b});
  CHECK(res.max_rel_err < 1e-6);
}
