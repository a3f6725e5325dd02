#include "crnnrt/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <random>

namespace crnn {

namespace {

void check_finite_vec(const std::vector<double>& v, const char* name) {
  for (double x : v)
    if (!std::isfinite(x)) throw TensorError(std::string(name) + ": non-finite input");
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double a = x[i] - mx, b = y[i] - my;
    sxx += a * a;
    syy += b * b;
    sxy += a * b;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw TensorError("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

double t_sf2(double t, double dof) {  // two-sided tail
  boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

}  // namespace

PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw TensorError("pearson: length mismatch");
  if (x.size() < 3) throw TensorError("pearson: need at least 3 points");
  check_finite_vec(x, "pearson");
  check_finite_vec(y, "pearson");
  PearsonResult out;
  out.n = int(x.size());
  out.r = pearson_r(x, y);
  const double dof = double(out.n - 2);
  const double r2 = std::min(out.r * out.r, 1.0 - 1e-15);
  const double t = out.r * std::sqrt(dof / (1.0 - r2));
  out.p = t_sf2(t, dof);
  return out;
}

PermTestResult paired_permutation(const std::vector<double>& a, const std::vector<double>& b,
                                  Alternative alt, int resamples, uint64_t seed) {
  if (a.size() != b.size()) throw TensorError("paired_permutation: length mismatch");
  if (a.size() < 3) throw TensorError("paired_permutation: need at least 3 pairs");
  check_finite_vec(a, "paired_permutation");
  check_finite_vec(b, "paired_permutation");
  const size_t n = a.size();
  std::vector<double> d(n);
  double obs = 0;
  for (size_t i = 0; i < n; ++i) {
    d[i] = a[i] - b[i];
    obs += d[i];
  }
  obs /= double(n);

  std::mt19937_64 rng(seed);
  int hits = 0;
  for (int rrep = 0; rrep < resamples; ++rrep) {
    double s = 0;
    for (size_t i = 0; i < n; ++i) s += (rng() & 1) ? d[i] : -d[i];
    s /= double(n);
    const bool hit =
        alt == Alternative::Greater ? (s >= obs) : (std::fabs(s) >= std::fabs(obs));
    hits += hit ? 1 : 0;
  }
  PermTestResult out;
  out.statistic = obs;
  out.resamples = resamples;
  out.p = double(hits + 1) / double(resamples + 1);
  return out;
}

PermTestResult pearson_permutation(const std::vector<double>& x, const std::vector<double>& y,
                                   Alternative alt, int resamples, uint64_t seed) {
  if (x.size() != y.size()) throw TensorError("pearson_permutation: length mismatch");
  if (x.size() < 3) throw TensorError("pearson_permutation: need at least 3 points");
  const double obs = pearson_r(x, y);
  std::mt19937_64 rng(seed);
  std::vector<double> ys = y;
  int hits = 0;
  for (int rrep = 0; rrep < resamples; ++rrep) {
    std::shuffle(ys.begin(), ys.end(), rng);
    const double r = pearson_r(x, ys);
    const bool hit = alt == Alternative::Greater ? (r >= obs) : (std::fabs(r) >= std::fabs(obs));
    hits += hit ? 1 : 0;
  }
  PermTestResult out;
  out.statistic = obs;
  out.resamples = resamples;
  out.p = double(hits + 1) / double(resamples + 1);
  return out;
}

OLSResult ols(const std::vector<double>& y, const std::vector<std::vector<double>>& X) {
  const int n = int(y.size());
  const int k = int(X.size()) + 1;
  if (n < k + 1) throw TensorError("ols: too few observations");
  check_finite_vec(y, "ols");
  for (const auto& col : X) {
    if (int(col.size()) != n) throw TensorError("ols: column length mismatch");
    check_finite_vec(col, "ols");
  }

  Eigen::MatrixXd M(n, k);
  Eigen::VectorXd yv(n);
  for (int i = 0; i < n; ++i) {
    M(i, 0) = 1.0;
    for (int j = 1; j < k; ++j) M(i, j) = X[size_t(j - 1)][size_t(i)];
    yv(i) = y[size_t(i)];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(M);
  if (qr.rank() < k) throw TensorError("ols: rank-deficient design matrix");
  Eigen::VectorXd beta = qr.solve(yv);
  Eigen::VectorXd resid = yv - M * beta;
  const double dof = double(n - k);
  const double s2 = resid.squaredNorm() / dof;
  Eigen::MatrixXd xtx_inv = (M.transpose() * M).inverse();

  OLSResult out;
  out.n = n;
  out.k = k;
  out.coef.resize(size_t(k));
  out.se.resize(size_t(k));
  out.t.resize(size_t(k));
  out.p.resize(size_t(k));
  for (int j = 0; j < k; ++j) {
    out.coef[size_t(j)] = beta(j);
    out.se[size_t(j)] = std::sqrt(s2 * xtx_inv(j, j));
    out.t[size_t(j)] = out.se[size_t(j)] > 0 ? beta(j) / out.se[size_t(j)] : 0.0;
    out.p[size_t(j)] = dof > 0 ? t_sf2(out.t[size_t(j)], dof) : 1.0;
  }
  const double ymean = yv.mean();
  const double ss_tot = (yv.array() - ymean).square().sum();
  out.r2 = ss_tot > 0 ? 1.0 - resid.squaredNorm() / ss_tot : 0.0;
  return out;
}

double ks_2sample(std::vector<double> a, std::vector<double> b) {
  if (a.size() < 3 || b.size() < 3) throw TensorError("ks_2sample: need at least 3 points");
  check_finite_vec(a, "ks_2sample");
  check_finite_vec(b, "ks_2sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = double(a.size()), nb = double(b.size());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::fabs(double(i) / na - double(j) / nb));
  }
  return d;
}

CorrCompareResult compare_dependent_correlations(const std::vector<double>& x1,
                                                 const std::vector<double>& x2,
                                                 const std::vector<double>& y, int resamples,
                                                 uint64_t seed) {
  const size_t n = y.size();
  if (x1.size() != n || x2.size() != n) throw TensorError("corr compare: length mismatch");
  if (n < 3) throw TensorError("corr compare: need at least 3 points");

  CorrCompareResult out;
  out.r1 = pearson_r(x1, y);
  out.r2 = pearson_r(x2, y);
  out.delta = out.r1 - out.r2;
  out.resamples = resamples;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, n - 1);
  std::vector<double> bx1(n), bx2(n), by(n);
  int le = 0, valid = 0;
  for (int rrep = 0; rrep < resamples; ++rrep) {
    for (size_t i = 0; i < n; ++i) {
      const size_t s = pick(rng);
      bx1[i] = x1[s];
      bx2[i] = x2[s];
      by[i] = y[s];
    }
    double d;
    try {
      d = pearson_r(bx1, by) - pearson_r(bx2, by);
    } catch (const TensorError&) {
      continue;  // degenerate resample
    }
    ++valid;
    le += (d <= 0.0) ? 1 : 0;
  }
  out.p = valid > 0 ? double(le + 1) / double(valid + 1) : 1.0;
  return out;
}

double cohens_d_paired(const std::vector<double>& diffs) {
  if (diffs.size() < 2) throw TensorError("cohens_d: need at least 2 differences");
  double m = 0;
  for (double d : diffs) m += d;
  m /= double(diffs.size());
  double s2 = 0;
  for (double d : diffs) s2 += (d - m) * (d - m);
  s2 /= double(diffs.size() - 1);
  if (s2 <= 0) return 0.0;
  return m / std::sqrt(s2);
}

}  // namespace crnn
