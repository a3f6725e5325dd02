#pragma once

#include <cstdint>
#include <vector>

#include "crnnrt/common.hpp"

namespace crnn {

// Small statistics kit used by the experiment drivers. All permutation and
// bootstrap routines take an explicit seed and fixed resample counts, so
// results are reproducible.

struct PearsonResult {
  double r = 0.0;
  double p = 1.0;  // two-sided, Student-t with n-2 dof
  int n = 0;
};
PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y);

enum class Alternative { Greater, TwoSided };

// Sign-flip permutation test on paired differences a-b. statistic = mean(a-b).
struct PermTestResult {
  double statistic = 0.0;
  double p = 1.0;
  int resamples = 0;
};
PermTestResult paired_permutation(const std::vector<double>& a, const std::vector<double>& b,
                                  Alternative alt = Alternative::Greater,
                                  int resamples = 10000, uint64_t seed = 0);

// Permutation p-value for a Pearson correlation (shuffles y).
PermTestResult pearson_permutation(const std::vector<double>& x, const std::vector<double>& y,
                                   Alternative alt = Alternative::TwoSided,
                                   int resamples = 10000, uint64_t seed = 0);

// Ordinary least squares of y on columns of X plus an intercept (first
// coefficient). SE/t/p from the classical homoskedastic covariance.
struct OLSResult {
  std::vector<double> coef, se, t, p;
  double r2 = 0.0;
  int n = 0, k = 0;  // observations, fitted coefficients (incl. intercept)
};
OLSResult ols(const std::vector<double>& y, const std::vector<std::vector<double>>& X);

// Two-sample Kolmogorov-Smirnov statistic (no p-value).
double ks_2sample(std::vector<double> a, std::vector<double> b);

// Bootstrap comparison of two dependent correlations sharing y:
// delta = r(x1,y) - r(x2,y); p = fraction of bootstrap deltas <= 0.
struct CorrCompareResult {
  double r1 = 0.0, r2 = 0.0, delta = 0.0;
  double p = 1.0;
  int resamples = 0;
};
CorrCompareResult compare_dependent_correlations(const std::vector<double>& x1,
                                                 const std::vector<double>& x2,
                                                 const std::vector<double>& y,
                                                 int resamples = 2000, uint64_t seed = 0);

// Paired-difference effect size mean(d)/sd(d).
double cohens_d_paired(const std::vector<double>& diffs);

}  // namespace crnn
