#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "crnnrt/stats.hpp"

using crnn::Alternative;

TEST_CASE("pearson: exact anchors and reference agreement") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0, 6.5, 7.1, 8.9};
  std::vector<double> mx;
  for (double v : x) mx.push_back(-v);
  CHECK(crnn::pearson(x, x).r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(crnn::pearson(x, mx).r == doctest::Approx(-1.0).epsilon(1e-12));

  // Reference values from an independent implementation.
  std::vector<double> y = {2.1, 1.9, 3.4, 3.1, 5.2, 5.9, 6.4, 9.1};
  auto res = crnn::pearson(x, y);
  CHECK(res.r == doctest::Approx(0.970799480153390).epsilon(1e-12));
  CHECK(res.p == doctest::Approx(0.000060890793037).epsilon(1e-6));

  CHECK_THROWS_AS(crnn::pearson({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), crnn::TensorError);
  CHECK_THROWS_AS(crnn::pearson({1.0, 2.0}, {1.0, 2.0}), crnn::TensorError);
  CHECK_THROWS_AS(crnn::pearson({1.0, 2.0, NAN}, {1.0, 2.0, 3.0}), crnn::TensorError);
}

TEST_CASE("ks statistic matches reference and bounds") {
  std::vector<double> a = {0.1, 0.5, 0.7, 1.2, 1.5, 2.0, 2.2};
  std::vector<double> b = {0.3, 0.6, 0.9, 1.0, 1.8, 2.5};
  CHECK(crnn::ks_2sample(a, b) == doctest::Approx(0.238095238095238).epsilon(1e-12));
  CHECK(crnn::ks_2sample(a, a) == 0.0);
  // Disjoint supports -> statistic 1.
  std::vector<double> lo = {0.0, 0.1, 0.2, 0.3};
  std::vector<double> hi = {5.0, 5.1, 5.2};
  CHECK(crnn::ks_2sample(lo, hi) == 1.0);
}

TEST_CASE("ols recovers exact linear relations and reference inference") {
  // Noise-free y = 1 + 2x.
  std::vector<double> x = {0, 1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(1.0 + 2.0 * v);
  auto fit = crnn::ols(y, {x});
  CHECK(fit.coef[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.coef[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));

  // Two-predictor reference fit (independent implementation).
  std::vector<double> x1 = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<double> x2 = {2, 1, 4, 3, 6, 5, 8, 7};
  std::vector<double> yy = {3.1, 4.2, 7.3, 7.9, 11.6, 12.1, 15.4, 15.9};
  auto ref = crnn::ols(yy, {x1, x2});
  CHECK(ref.coef[0] == doctest::Approx(0.631249999999998).epsilon(1e-9));
  CHECK(ref.coef[1] == doctest::Approx(1.343750000000000).epsilon(1e-9));
  CHECK(ref.coef[2] == doctest::Approx(0.668750000000000).epsilon(1e-9));
  CHECK(ref.se[0] == doctest::Approx(0.155387620163255).epsilon(1e-9));
  CHECK(ref.se[1] == doctest::Approx(0.070854163603842).epsilon(1e-9));
  CHECK(ref.se[2] == doctest::Approx(0.070854163603842).epsilon(1e-9));
  CHECK(ref.t[1] == doctest::Approx(18.965011110894523).epsilon(1e-9));
  CHECK(ref.p[1] == doctest::Approx(7.51082087148546e-06).epsilon(1e-6));
  CHECK(ref.p[2] == doctest::Approx(0.000225396462479624).epsilon(1e-6));
  CHECK(ref.r2 == doctest::Approx(0.998827469403082).epsilon(1e-10));

  // Perfectly collinear columns are rejected.
  CHECK_THROWS_AS(crnn::ols(yy, {x1, x1}), crnn::TensorError);
}

TEST_CASE("paired permutation test matches exhaustive enumeration on small n") {
  std::vector<double> a = {1.2, 0.8, 1.5, 2.0, 0.3, 1.1, 0.9, 1.7};
  std::vector<double> b = {0.9, 0.7, 1.0, 1.1, 0.5, 0.6, 0.8, 1.2};
  const size_t n = a.size();
  std::vector<double> d(n);
  double obs = 0;
  for (size_t i = 0; i < n; ++i) {
    d[i] = a[i] - b[i];
    obs += d[i];
  }
  obs /= double(n);

  // Exhaustive sign-flip null (2^8 = 256 assignments).
  int ge = 0, total = 1 << n;
  for (int m = 0; m < total; ++m) {
    double s = 0;
    for (size_t i = 0; i < n; ++i) s += (m >> i & 1) ? d[i] : -d[i];
    s /= double(n);
    ge += (s >= obs) ? 1 : 0;
  }
  const double exact_p = double(ge) / double(total);

  auto res = crnn::paired_permutation(a, b, Alternative::Greater, 200000, 42);
  CHECK(res.statistic == doctest::Approx(obs).epsilon(1e-12));
  CHECK(res.p == doctest::Approx(exact_p).epsilon(0.15));  // Monte Carlo tolerance
  // Identical inputs: statistic 0, p near 1.
  auto null_res = crnn::paired_permutation(a, a, Alternative::Greater, 2000, 1);
  CHECK(null_res.statistic == 0.0);
  CHECK(null_res.p > 0.5);
}

TEST_CASE("pearson permutation null behaves") {
  std::mt19937 rng(5);
  std::normal_distribution<double> N(0, 1);
  std::vector<double> x(60), y(60), z(60);
  for (size_t i = 0; i < x.size(); ++i) {
    x[i] = N(rng);
    y[i] = 2.0 * x[i] + 0.1 * N(rng);  // strongly dependent
    z[i] = N(rng);                     // independent
  }
  auto dep = crnn::pearson_permutation(x, y, Alternative::TwoSided, 2000, 3);
  CHECK(dep.p < 0.01);
  auto ind = crnn::pearson_permutation(x, z, Alternative::TwoSided, 2000, 3);
  CHECK(ind.p > 0.05);
}

TEST_CASE("dependent correlation comparison prefers the stronger correlate") {
  std::mt19937 rng(11);
  std::normal_distribution<double> N(0, 1);
  const size_t n = 150;
  std::vector<double> strong(n), weak(n), y(n);
  for (size_t i = 0; i < n; ++i) {
    y[i] = N(rng);
    strong[i] = y[i] + 0.3 * N(rng);
    weak[i] = y[i] + 2.5 * N(rng);
  }
  auto res = crnn::compare_dependent_correlations(strong, weak, y, 2000, 9);
  CHECK(res.r1 > res.r2);
  CHECK(res.delta > 0.0);
  CHECK(res.p < 0.01);

  // Symmetric case: same correlate twice -> delta exactly 0, p near 1.
  auto same = crnn::compare_dependent_correlations(strong, strong, y, 500, 9);
  CHECK(same.delta == 0.0);
  CHECK(same.p > 0.9);
}

TEST_CASE("paired effect size") {
  CHECK(crnn::cohens_d_paired({1.0, 1.0, 1.0, 1.0}) == 0.0);  // zero spread guard
  std::vector<double> d = {2.0, 4.0};                         // mean 3, sd sqrt(2)
  CHECK(crnn::cohens_d_paired(d) == doctest::Approx(3.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("determinism: seeded resampling is bit-stable") {
  std::vector<double> a = {1.2, 0.8, 1.5, 2.0, 0.3, 1.1};
  std::vector<double> b = {0.9, 0.7, 1.0, 1.1, 0.5, 0.6};
  auto r1 = crnn::paired_permutation(a, b, Alternative::Greater, 5000, 77);
  auto r2 = crnn::paired_permutation(a, b, Alternative::Greater, 5000, 77);
  CHECK(r1.p == r2.p);
  auto k1 = crnn::compare_dependent_correlations(a, b, b, 500, 3);
  auto k2 = crnn::compare_dependent_correlations(a, b, b, 500, 3);
  CHECK(k1.p == k2.p);
}
