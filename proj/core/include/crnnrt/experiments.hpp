#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crnnrt/config.hpp"
#include "crnnrt/dataset.hpp"
#include "crnnrt/hgru.hpp"
#include "crnnrt/stimuli.hpp"
#include "crnnrt/train.hpp"

namespace crnn {

// ---------------------------------------------------------------------------
// Distance effect: does xi grow with cue separation on the same outline?

struct DistanceFit {
  double slope = 0.0, se = 0.0;
  double p_value = 1.0;  // one-sided (slope > 0), within-outline permutation
  int n = 0, n_outlines = 0, n_levels = 0;
  int skipped = 0;  // outlines where the distance series did not fit
};

// Per-outline centered OLS of xi on distance (a fixed-effect approximation of
// a mixed model: each outline contributes only its within-outline contrast).
// The permutation test shuffles xi within each outline. Exposed separately so
// synthetic-data sanities can exercise the regression without a model.
DistanceFit centered_distance_fit(const std::vector<int>& outline_of,
                                  const std::vector<double>& distance,
                                  const std::vector<double>& xi, int resamples = 10000,
                                  uint64_t seed = 0);

template <typename T>
DistanceFit experiment_distance(HGRUParams<T>& p, int n_outlines, int series_steps,
                                int rollout_steps, uint64_t seed, int canvas_px = 96,
                                int batch = 32);

// ---------------------------------------------------------------------------
// Topology / anisotropy: paired hard-vs-easy conditions on matched scenes.

struct ConditionPair {
  Stimulus hard, easy;
};

// Pair i draws both conditions from identical seed streams, so the underlying
// scenes correspond; only the preset-controlled geometry differs.
std::vector<ConditionPair> gen_condition_pairs(ShapePreset hard, ShapePreset easy, int count,
                                               uint64_t seed, int canvas_px = 96);

struct PairedDeltaStats {
  int n = 0;
  double mean_hard = 0.0, mean_easy = 0.0, mean_delta = 0.0;
  double cohens_d = 0.0;
  double p_value = 1.0;  // one-sided paired sign-flip permutation (delta > 0)
};

// Throws on unpaired inputs (length mismatch).
PairedDeltaStats paired_delta_stats(const std::vector<double>& xi_hard,
                                    const std::vector<double>& xi_easy, int resamples = 10000,
                                    uint64_t seed = 0);

template <typename T>
PairedDeltaStats experiment_topology(HGRUParams<T>& p, const std::vector<ConditionPair>& pairs,
                                     int steps, int batch = 32);

// ---------------------------------------------------------------------------
// Path length: xi against maze path metrics.

struct PathlengthStats {
  int n_yes = 0, n_no = 0;
  double r_path = 0.0, p_path = 1.0;      // yes-mazes: xi vs corridor path length
  double r_euclid = 0.0, p_euclid = 1.0;  // yes-mazes: xi vs straight-line cue distance
  double delta_r = 0.0, p_delta = 1.0;    // bootstrap comparison of the two
  double r_segment = 0.0, p_segment = 1.0;  // no-mazes: xi vs mean segment size
  bool segment_degenerate = false;  // predictor had (near-)zero variance; r_segment is NaN
  double r_shuffled = 0.0, p_shuffled = 1.0;  // permuted-xi null on the yes set
};

// Pure-stats core for injected-xi sanities. xi_no/seg_len may be empty (the
// no-maze analysis is then skipped with n_no = 0).
PathlengthStats pathlength_fit(const std::vector<double>& xi_yes,
                               const std::vector<double>& path_len,
                               const std::vector<double>& euclid,
                               const std::vector<double>& xi_no,
                               const std::vector<double>& seg_len, int resamples = 2000,
                               uint64_t seed = 0);

template <typename T>
PathlengthStats experiment_pathlength(HGRUParams<T>& p, const Dataset& mazes, int steps,
                                      int batch = 32, uint64_t seed = 0);

// ---------------------------------------------------------------------------
// T-junction control: xi ~ 1 + path_len + junctions.

struct TJunctionFit {
  int n = 0;
  double coef_path = 0.0, se_path = 0.0;
  double coef_junc = 0.0, se_junc = 0.0, p_junc = 1.0;
  double r2 = 0.0;
  double junction_path_r = 0.0;  // predictor correlation
  bool collinear = false;        // |junction_path_r| > 0.95: estimates unstable
};

TJunctionFit tjunction_fit(const std::vector<double>& xi, const std::vector<double>& path_len,
                           const std::vector<double>& junctions);

struct TJunctionStats {
  TJunctionFit on_path;     // junction count along the connecting path
  TJunctionFit on_segment;  // junction count on the cued segment
};

template <typename T>
TJunctionStats experiment_tjunction(HGRUParams<T>& p, const Dataset& mazes, int steps,
                                    int batch = 32);

// ---------------------------------------------------------------------------
// Short-to-long generalization.

// Keeps stimuli with min_px < euclidean_dist <= max_px.
Dataset filter_by_distance(const Dataset& data, double min_px, double max_px);

struct GeneralizationReport {
  int n_train = 0, n_short_eval = 0, n_long_eval = 0;
  double acc_short = 0.0, acc_long = 0.0;
  double untrained_short = 0.0, untrained_long = 0.0;  // fresh-init baseline
  std::string checkpoint;
  TrainResult train;
};

// Trains on the short-distance set (internal 90/10 split), then evaluates the
// held-out short tail and the entire long-distance set. Distance splits are
// re-filtered here as a hard guarantee: short keeps d <= 44/150 * canvas,
// long keeps d > 82/150 * canvas. Throws if either split is empty.
GeneralizationReport experiment_generalization(const TrainConfig& cfg, const Dataset& short_data,
                                               const Dataset& long_data,
                                               const std::string& out_dir);

// ---------------------------------------------------------------------------
// Finite-difference audit for the CLI.

struct GradCheckRow {
  std::string op;
  double max_rel_err = 0.0;
  int checks = 0;
};

// Central-difference audit (64-bit, tiny shapes) of every differentiable op
// the training path composes.
std::vector<GradCheckRow> gradcheck_report(uint64_t seed = 0);

}  // namespace crnn
