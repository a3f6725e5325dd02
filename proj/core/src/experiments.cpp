#include "crnnrt/experiments.hpp"

#include <algorithm>
#include <map>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "crnnrt/equilibrium.hpp"
#include "crnnrt/evaluate.hpp"
#include "crnnrt/evidential.hpp"
#include "crnnrt/rt_metric.hpp"
#include "crnnrt/stats.hpp"

namespace crnn {

namespace {

template <typename T>
std::vector<double> xi_batched(HGRUParams<T>& p, const std::vector<const GrayImage*>& imgs,
                               int steps, int batch) {
  std::vector<double> out;
  out.reserve(imgs.size());
  for (size_t lo = 0; lo < imgs.size(); lo += size_t(batch)) {
    const size_t hi = std::min(imgs.size(), lo + size_t(batch));
    std::vector<GrayImage> chunk;
    chunk.reserve(hi - lo);
    for (size_t i = lo; i < hi; ++i) chunk.push_back(*imgs[i]);
    auto xs = xi_for_images(p, images_to_tensor<T>(chunk), steps);
    out.insert(out.end(), xs.begin(), xs.end());
  }
  return out;
}

// Centered-OLS slope given group-mean-removed predictors. Returns false when
// the within-group predictor variance vanishes.
bool centered_slope(const std::vector<double>& xc, const std::vector<double>& yc, double* slope,
                    double* sxx_out) {
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < xc.size(); ++i) {
    sxx += xc[i] * xc[i];
    sxy += xc[i] * yc[i];
  }
  if (sxx <= 0) return false;
  *slope = sxy / sxx;
  if (sxx_out) *sxx_out = sxx;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Distance effect

DistanceFit centered_distance_fit(const std::vector<int>& outline_of,
                                  const std::vector<double>& distance,
                                  const std::vector<double>& xi, int resamples, uint64_t seed) {
  const size_t n = xi.size();
  if (outline_of.size() != n || distance.size() != n)
    throw TensorError("experiment_distance: outline/distance/xi lengths differ");
  if (n < 3) throw TensorError("experiment_distance: need at least 3 stimuli");

  std::set<double> levels(distance.begin(), distance.end());
  if (levels.size() < 2) throw TensorError("experiment_distance: fewer than 2 distance levels");

  // Group rows by outline and remove per-outline means from both variables.
  std::map<int, std::vector<size_t>> groups;
  for (size_t i = 0; i < n; ++i) groups[outline_of[i]].push_back(i);
  std::vector<double> xc(n), yc(n);
  for (const auto& [g, rows] : groups) {
    double mx = 0, my = 0;
    for (size_t i : rows) {
      mx += distance[i];
      my += xi[i];
    }
    mx /= double(rows.size());
    my /= double(rows.size());
    for (size_t i : rows) {
      xc[i] = distance[i] - mx;
      yc[i] = xi[i] - my;
    }
  }

  DistanceFit fit;
  fit.n = int(n);
  fit.n_outlines = int(groups.size());
  fit.n_levels = int(levels.size());

  double sxx = 0;
  if (!centered_slope(xc, yc, &fit.slope, &sxx))
    throw TensorError("experiment_distance: fewer than 2 distance levels within outlines");

  double rss = 0;
  for (size_t i = 0; i < n; ++i) {
    const double e = yc[i] - fit.slope * xc[i];
    rss += e * e;
  }
  const int dof = int(n) - fit.n_outlines - 1;  // one mean per outline + the slope
  fit.se = dof > 0 ? std::sqrt(rss / dof / sxx) : 0.0;

  // Within-outline permutation of xi; one-sided (slope > 0).
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 0xD157ull);
  std::vector<double> yp = yc;
  int hits = 0;
  for (int r = 0; r < resamples; ++r) {
    for (const auto& [g, rows] : groups) {
      for (size_t i = rows.size(); i > 1; --i) {
        const size_t j = rng() % i;
        std::swap(yp[rows[i - 1]], yp[rows[j]]);
      }
    }
    // Re-center y within groups after shuffling (means are permutation
    // invariant per group, so yp stays centered; the slope is direct).
    double bs = 0;
    centered_slope(xc, yp, &bs, nullptr);
    if (bs >= fit.slope) ++hits;
  }
  fit.p_value = (1.0 + hits) / (1.0 + resamples);
  return fit;
}

template <typename T>
DistanceFit experiment_distance(HGRUParams<T>& p, int n_outlines, int series_steps,
                                int rollout_steps, uint64_t seed, int canvas_px, int batch) {
  if (n_outlines < 1) throw TensorError("experiment_distance: need at least 1 outline");
  std::vector<Stimulus> stims;
  std::vector<int> outline_of;
  int skipped = 0;
  for (int o = 0; o < n_outlines; ++o) {
    std::mt19937_64 rng(pair_stream_seed(seed, uint64_t(o)));
    auto outline = gen_outline(rng, canvas_px, ShapePreset::Standard);
    std::vector<Stimulus> series;
    try {
      series = gen_distance_series(outline, series_steps);
    } catch (const TensorError&) {
      ++skipped;  // shape too small for two separations; skip it
      continue;
    }
    for (auto& s : series) {
      stims.push_back(std::move(s));
      outline_of.push_back(o);
    }
  }
  if (stims.size() < 3)
    throw TensorError("experiment_distance: too few usable stimuli (" +
                      std::to_string(stims.size()) + "); all outlines skipped?");

  std::vector<const GrayImage*> imgs;
  std::vector<double> dist;
  for (const auto& s : stims) {
    imgs.push_back(&s.image);
    dist.push_back(s.euclidean_dist);
  }
  const auto xi = xi_batched(p, imgs, rollout_steps, batch);
  auto fit = centered_distance_fit(outline_of, dist, xi, 10000, seed);
  fit.skipped = skipped;
  return fit;
}

// ---------------------------------------------------------------------------
// Topology / anisotropy

std::vector<ConditionPair> gen_condition_pairs(ShapePreset hard, ShapePreset easy, int count,
                                               uint64_t seed, int canvas_px) {
  std::vector<ConditionPair> out;
  out.reserve(size_t(count));
  GroupingCondition hc, ec;
  hc.preset = hard;
  ec.preset = easy;
  hc.label = ec.label = 1;
  hc.canvas_px = ec.canvas_px = canvas_px;
  for (int i = 0; i < count; ++i) {
    const uint64_t s = pair_stream_seed(seed, uint64_t(i));
    std::mt19937_64 r1(s), r2(s);
    ConditionPair pr;
    pr.hard = gen_grouping(r1, hc);
    pr.easy = gen_grouping(r2, ec);
    out.push_back(std::move(pr));
  }
  return out;
}

PairedDeltaStats paired_delta_stats(const std::vector<double>& xi_hard,
                                    const std::vector<double>& xi_easy, int resamples,
                                    uint64_t seed) {
  if (xi_hard.size() != xi_easy.size())
    throw TensorError("experiment_topology: unpaired inputs (" + std::to_string(xi_hard.size()) +
                      " hard vs " + std::to_string(xi_easy.size()) + " easy)");
  if (xi_hard.empty()) throw TensorError("experiment_topology: no pairs");

  PairedDeltaStats st;
  st.n = int(xi_hard.size());
  std::vector<double> diffs(xi_hard.size());
  double sd_acc = 0;
  for (size_t i = 0; i < xi_hard.size(); ++i) {
    st.mean_hard += xi_hard[i];
    st.mean_easy += xi_easy[i];
    diffs[i] = xi_hard[i] - xi_easy[i];
  }
  st.mean_hard /= st.n;
  st.mean_easy /= st.n;
  st.mean_delta = st.mean_hard - st.mean_easy;
  for (double d : diffs) sd_acc += (d - st.mean_delta) * (d - st.mean_delta);
  const double sd = st.n > 1 ? std::sqrt(sd_acc / (st.n - 1)) : 0.0;
  st.cohens_d = sd > 0 ? cohens_d_paired(diffs) : 0.0;
  st.p_value = paired_permutation(xi_hard, xi_easy, Alternative::Greater, resamples, seed).p;
  return st;
}

template <typename T>
PairedDeltaStats experiment_topology(HGRUParams<T>& p, const std::vector<ConditionPair>& pairs,
                                     int steps, int batch) {
  if (pairs.empty()) throw TensorError("experiment_topology: no pairs");
  std::vector<const GrayImage*> hard, easy;
  for (const auto& pr : pairs) {
    hard.push_back(&pr.hard.image);
    easy.push_back(&pr.easy.image);
  }
  const auto xh = xi_batched(p, hard, steps, batch);
  const auto xe = xi_batched(p, easy, steps, batch);
  return paired_delta_stats(xh, xe);
}

// ---------------------------------------------------------------------------
// Path length

PathlengthStats pathlength_fit(const std::vector<double>& xi_yes,
                               const std::vector<double>& path_len,
                               const std::vector<double>& euclid,
                               const std::vector<double>& xi_no,
                               const std::vector<double>& seg_len, int resamples, uint64_t seed) {
  if (xi_yes.size() != path_len.size() || xi_yes.size() != euclid.size())
    throw TensorError("experiment_pathlength: yes-maze vectors differ in length");
  if (xi_yes.size() < 3) throw TensorError("experiment_pathlength: need at least 3 yes-mazes");

  PathlengthStats st;
  st.n_yes = int(xi_yes.size());

  auto pr = pearson(xi_yes, path_len);
  st.r_path = pr.r;
  st.p_path = pr.p;
  auto pe = pearson(xi_yes, euclid);
  st.r_euclid = pe.r;
  st.p_euclid = pe.p;
  auto cmp = compare_dependent_correlations(path_len, euclid, xi_yes, resamples, seed);
  st.delta_r = cmp.delta;
  st.p_delta = cmp.p;

  // Permuted-xi null: a single seeded shuffle must kill the correlation.
  std::vector<double> shuf = xi_yes;
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x5Fu);
  std::shuffle(shuf.begin(), shuf.end(), rng);
  auto ps = pearson(shuf, path_len);
  st.r_shuffled = ps.r;
  st.p_shuffled = ps.p;

  if (!xi_no.empty()) {
    if (xi_no.size() != seg_len.size())
      throw TensorError("experiment_pathlength: no-maze vectors differ in length");
    st.n_no = int(xi_no.size());
    double m = std::accumulate(seg_len.begin(), seg_len.end(), 0.0) / seg_len.size();
    double var = 0;
    for (double v : seg_len) var += (v - m) * (v - m);
    var /= seg_len.size();
    if (var <= 1e-12 * std::max(1.0, m * m)) {
      // The one-cut no-maze construction fixes segment sizes to sum to the
      // grid, so their mean can be constant by design. Report that honestly
      // instead of a fabricated correlation.
      st.segment_degenerate = true;
      st.r_segment = std::nan("");
      st.p_segment = std::nan("");
    } else {
      auto sg = pearson(xi_no, seg_len);
      st.r_segment = sg.r;
      st.p_segment = sg.p;
    }
  }
  return st;
}

template <typename T>
PathlengthStats experiment_pathlength(HGRUParams<T>& p, const Dataset& mazes, int steps,
                                      int batch, uint64_t seed) {
  std::vector<const GrayImage*> yes_imgs, no_imgs;
  std::vector<double> path, euclid, seg;
  for (const auto& s : mazes.items) {
    if (s.label == 1 && s.path_len > 0) {
      yes_imgs.push_back(&s.image);
      path.push_back(s.path_len);
      euclid.push_back(s.euclidean_dist);
    } else if (s.label == 0 && s.segment_lens[0] >= 0) {
      no_imgs.push_back(&s.image);
      seg.push_back(0.5 * (s.segment_lens[0] + s.segment_lens[1]));
    }
  }
  const auto xi_yes = xi_batched(p, yes_imgs, steps, batch);
  const auto xi_no = xi_batched(p, no_imgs, steps, batch);
  return pathlength_fit(xi_yes, path, euclid, xi_no, seg, 2000, seed);
}

// ---------------------------------------------------------------------------
// T-junctions

TJunctionFit tjunction_fit(const std::vector<double>& xi, const std::vector<double>& path_len,
                           const std::vector<double>& junctions) {
  if (xi.size() != path_len.size() || xi.size() != junctions.size())
    throw TensorError("experiment_tjunction: vector lengths differ");
  if (xi.size() < 4) throw TensorError("experiment_tjunction: need at least 4 mazes");

  TJunctionFit fit;
  fit.n = int(xi.size());
  try {
    fit.junction_path_r = pearson(path_len, junctions).r;
  } catch (const TensorError&) {
    fit.junction_path_r = std::nan("");  // a constant predictor; OLS will object
  }
  fit.collinear = std::fabs(fit.junction_path_r) > 0.95;

  auto res = ols(xi, {path_len, junctions});
  fit.coef_path = res.coef[1];
  fit.se_path = res.se[1];
  fit.coef_junc = res.coef[2];
  fit.se_junc = res.se[2];
  fit.p_junc = res.p[2];
  fit.r2 = res.r2;
  return fit;
}

template <typename T>
TJunctionStats experiment_tjunction(HGRUParams<T>& p, const Dataset& mazes, int steps,
                                    int batch) {
  std::vector<const GrayImage*> imgs;
  std::vector<double> path, jpath, jseg;
  for (const auto& s : mazes.items) {
    if (s.label != 1 || s.path_len <= 0) continue;
    if (s.t_junctions_on_path < 0 || s.t_junctions_on_segment < 0) continue;
    imgs.push_back(&s.image);
    path.push_back(s.path_len);
    jpath.push_back(double(s.t_junctions_on_path));
    jseg.push_back(double(s.t_junctions_on_segment));
  }
  const auto xi = xi_batched(p, imgs, steps, batch);
  TJunctionStats st;
  st.on_path = tjunction_fit(xi, path, jpath);
  st.on_segment = tjunction_fit(xi, path, jseg);
  return st;
}

// ---------------------------------------------------------------------------
// Generalization

Dataset filter_by_distance(const Dataset& data, double min_px, double max_px) {
  Dataset out;
  out.manifest = data.manifest;
  for (const auto& s : data.items)
    if (s.euclidean_dist > min_px && s.euclidean_dist <= max_px) out.items.push_back(s);
  out.manifest.count = int(out.items.size());
  out.manifest.checksum = 0;  // subset; the stored checksum no longer applies
  return out;
}

namespace {

template <typename T>
std::pair<double, double> untrained_accuracy(const TrainConfig& cfg, const Dataset& short_eval,
                                             const Dataset& long_eval) {
  HGRUConfig mc;
  mc.channels = cfg.channels;
  mc.classes = 2;
  mc.init_seed = pair_stream_seed(cfg.seed, 0xBA5Eull);
  auto p = HGRUParams<T>::init(mc);
  const double a = evaluate_model<T>(p, short_eval, cfg.T, cfg.batch).accuracy;
  const double b = evaluate_model<T>(p, long_eval, cfg.T, cfg.batch).accuracy;
  return {a, b};
}

}  // namespace

GeneralizationReport experiment_generalization(const TrainConfig& cfg, const Dataset& short_data,
                                               const Dataset& long_data,
                                               const std::string& out_dir) {
  if (short_data.items.empty() || long_data.items.empty())
    throw TensorError("experiment_generalization: empty input dataset");
  const int canvas = short_data.items[0].image.width;
  const double short_max = 44.0 / 150.0 * canvas;
  const double long_min = 82.0 / 150.0 * canvas;

  Dataset short_f = filter_by_distance(short_data, 0.0, short_max);
  Dataset long_f = filter_by_distance(long_data, long_min, 1e18);
  if (short_f.items.empty())
    throw TensorError("experiment_generalization: short split is empty after the " +
                      std::to_string(short_max) + "px cut");
  if (long_f.items.empty())
    throw TensorError("experiment_generalization: long split is empty after the " +
                      std::to_string(long_min) + "px cut");

  auto tr = train_model(cfg, short_f, out_dir);

  // Held-out short tail = the same final-10% slice train_model validated on.
  const int n = int(short_f.items.size());
  const int n_val = std::max(1, n / 10);
  Dataset short_eval;
  short_eval.manifest = short_f.manifest;
  short_eval.items.assign(short_f.items.end() - n_val, short_f.items.end());
  short_eval.manifest.count = n_val;

  GeneralizationReport rep;
  rep.n_train = n - n_val;
  rep.n_short_eval = n_val;
  rep.n_long_eval = int(long_f.items.size());
  rep.checkpoint = tr.best_checkpoint;
  rep.acc_short = evaluate_checkpoint(tr.best_checkpoint, short_eval, cfg.T, cfg.batch).accuracy;
  rep.acc_long = evaluate_checkpoint(tr.best_checkpoint, long_f, cfg.T, cfg.batch).accuracy;
  if (cfg.precision == "f64") {
    std::tie(rep.untrained_short, rep.untrained_long) =
        untrained_accuracy<double>(cfg, short_eval, long_f);
  } else {
    std::tie(rep.untrained_short, rep.untrained_long) =
        untrained_accuracy<float>(cfg, short_eval, long_f);
  }
  rep.train = std::move(tr);
  return rep;
}

// ---------------------------------------------------------------------------
// Finite-difference audit

namespace {

struct FDResult {
  double max_rel = 0.0;
  int checks = 0;
};

template <typename F>
FDResult fd_check(const F& build, std::vector<Tensor<double>> params, double eps = 1e-5) {
  zero_grad(params);
  auto loss = build();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) analytic.push_back(p.grad());

  FDResult res;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& val = params[pi].mutable_value();
    for (size_t i = 0; i < val.size(); ++i) {
      const double keep = val[i];
      NoGradGuard ng;
      val[i] = keep + eps;
      const double fp = build().item();
      val[i] = keep - eps;
      const double fm = build().item();
      val[i] = keep;
      const double fd = (fp - fm) / (2.0 * eps);
      const double re = std::fabs(analytic[pi][i] - fd) /
                        std::max({std::fabs(analytic[pi][i]), std::fabs(fd), 1.0});
      res.max_rel = std::max(res.max_rel, re);
      ++res.checks;
    }
  }
  zero_grad(params);
  return res;
}

std::vector<double> draw(std::mt19937_64& rng, size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Values bounded away from zero, so kinked ops (relu, l2norm) see no
// sign flips within the finite-difference window.
std::vector<double> draw_offzero(std::mt19937_64& rng, size_t n) {
  auto v = draw(rng, n);
  for (auto& x : v) x += x >= 0 ? 0.3 : -0.3;
  return v;
}

}  // namespace

std::vector<GradCheckRow> gradcheck_report(uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 0x6D22ull);
  std::vector<GradCheckRow> rows;
  auto push = [&rows](const std::string& op, const FDResult& r) {
    rows.push_back({op, r.max_rel, r.checks});
  };

  using Td = Tensor<double>;
  const Shape xs{2, 3, 6, 6};
  const size_t xn = size_t(2) * 3 * 6 * 6;
  auto wconst = Td::from(xs, draw(rng, xn));  // fixed probe weights, not a leaf

  {
    auto x = Td::from(xs, draw(rng, xn), true);
    auto y = Td::from(xs, draw(rng, xn), true);
    push("add_mul", fd_check([&] { return sum_all(mul(wconst, mul(add(x, y), y))); }, {x, y}));
  }
  {
    auto x = Td::from(xs, draw(rng, xn), true);
    push("sigmoid", fd_check([&] { return sum_all(mul(wconst, sigmoid(x))); }, {x}));
  }
  {
    auto x = Td::from(xs, draw(rng, xn), true);
    push("softplus", fd_check([&] { return sum_all(mul(wconst, softplus(x))); }, {x}));
  }
  {
    auto x = Td::from(xs, draw_offzero(rng, xn), true);
    push("relu_square", fd_check([&] { return sum_all(mul(wconst, square(relu(x)))); }, {x}));
  }
  {
    auto x = Td::from(xs, draw_offzero(rng, xn), true);
    push("l2norm", fd_check([&] { return l2norm(x); }, {x}));
  }
  {
    auto x = Td::from(xs, draw(rng, xn), true);
    auto s = Td::from({3}, draw(rng, 3), true);
    auto b = Td::from({3}, draw(rng, 3), true);
    push("channel_scale_bias",
         fd_check([&] { return sum_all(mul(wconst, add_channel_bias(scale_channels(x, s), b))); },
                  {x, s, b}));
  }
  {
    auto x = Td::from(xs, draw(rng, xn), true);
    auto wp = Td::from({2, 3}, draw(rng, 6));
    push("global_avg_pool",
         fd_check([&] { return sum_all(mul(wp, global_avg_pool(x))); }, {x}));
  }
  {
    auto x = Td::from(xs, draw(rng, xn), true);
    auto k = Td::from({4, 3, 3, 3}, draw(rng, size_t(4) * 3 * 3 * 3), true);
    auto b = Td::from({4}, draw(rng, 4), true);
    auto wc = Td::from({2, 4, 6, 6}, draw(rng, size_t(2) * 4 * 6 * 6));
    push("conv2d", fd_check([&] { return sum_all(mul(wc, conv2d(x, k, b))); }, {x, k, b}));
  }
  {
    auto x = Td::from(xs, draw(rng, xn), true);
    auto g = Td::from({3}, draw_offzero(rng, 3), true);
    auto b = Td::from({3}, draw(rng, 3), true);
    BNStats<double> st(3);
    push("batch_norm_train", fd_check(
        [&] { return sum_all(mul(wconst, batch_norm(x, g, b, st, BNMode::Train))); }, {x, g, b}));
  }
  {
    auto x = Td::from(xs, draw(rng, xn), true);
    auto g = Td::from({3}, draw_offzero(rng, 3), true);
    auto b = Td::from({3}, draw(rng, 3), true);
    BNStats<double> st(3);
    st.running_mean = draw(rng, 3);
    st.running_var = {0.7, 1.3, 2.1};
    push("batch_norm_eval", fd_check(
        [&] { return sum_all(mul(wconst, batch_norm(x, g, b, st, BNMode::Eval))); }, {x, g, b}));
  }

  // Model-level heads on a tiny network.
  HGRUConfig mc;
  mc.channels = 4;
  mc.classes = 2;
  mc.init_seed = seed + 77;
  auto p = HGRUParams<double>::init(mc);
  auto params = p.parameters();
  const Shape hs{2, 4, 6, 6};
  const size_t hn = size_t(2) * 4 * 6 * 6;
  auto imgs = Td::from({2, 1, 6, 6}, draw(rng, size_t(2) * 36, 0.5));
  const std::vector<int> labels = {0, 1};

  {
    auto h = Td::from(hs, draw(rng, hn, 0.5), true);
    auto wr = Td::from({2, 2}, draw(rng, 4));
    std::vector<Td> ps = params;
    ps.push_back(h);
    push("readout", fd_check([&] { return sum_all(mul(wr, readout(p, h))); }, ps));
  }
  {
    auto logits = Td::from({2, 2}, draw(rng, 4), true);
    push("edl_risk", fd_check([&] { return edl_risk(logits, labels); }, {logits}));
  }
  {
    auto logits = Td::from({2, 2}, draw(rng, 4), true);
    push("kl_balance", fd_check([&] { return kl_balance(logits, labels); }, {logits}));
  }
  {
    std::vector<Td> ps = params;
    auto wz = Td::from(hs, draw(rng, hn));
    push("input_drive",
         fd_check([&] { return sum_all(mul(wz, input_drive(p, imgs, BNMode::Train))); }, ps));
  }
  {
    auto h = Td::from(hs, draw(rng, hn, 0.5), true);
    auto z = Td::from(hs, draw(rng, hn, 0.5), true);
    auto wh = Td::from(hs, draw(rng, hn));
    std::vector<Td> ps = params;
    ps.push_back(h);
    ps.push_back(z);
    push("hgru_step", fd_check(
        [&] { return sum_all(mul(wh, hgru_step(p, h, z, BNMode::TrainFrozen))); }, ps));
  }
  {
    auto z = Td::from(hs, draw(rng, hn, 0.5), true);
    auto wh = Td::from(hs, draw(rng, hn));
    std::vector<Td> ps = params;
    ps.push_back(z);
    push("rollout_3step",
         fd_check([&] { return sum_all(mul(wh, rollout(p, z, 3, BNMode::TrainFrozen))); }, ps));
  }
  {
    auto h = Td::from(hs, draw(rng, hn, 0.5));
    auto z = Td::from(hs, draw(rng, hn, 0.5));
    // Threshold 0 keeps every column-sum term active (they are strictly
    // positive), so the penalty gradient path is genuinely exercised.
    push("lcp_penalty", fd_check([&] { return lcp_penalty(p, h, z, 0.0); }, params));
  }
  return rows;
}

// ---------------------------------------------------------------------------

template DistanceFit experiment_distance<float>(HGRUParams<float>&, int, int, int, uint64_t, int,
                                                int);
template DistanceFit experiment_distance<double>(HGRUParams<double>&, int, int, int, uint64_t,
                                                 int, int);
template PairedDeltaStats experiment_topology<float>(HGRUParams<float>&,
                                                     const std::vector<ConditionPair>&, int, int);
template PairedDeltaStats experiment_topology<double>(HGRUParams<double>&,
                                                      const std::vector<ConditionPair>&, int,
                                                      int);
template PathlengthStats experiment_pathlength<float>(HGRUParams<float>&, const Dataset&, int,
                                                      int, uint64_t);
template PathlengthStats experiment_pathlength<double>(HGRUParams<double>&, const Dataset&, int,
                                                       int, uint64_t);
template TJunctionStats experiment_tjunction<float>(HGRUParams<float>&, const Dataset&, int, int);
template TJunctionStats experiment_tjunction<double>(HGRUParams<double>&, const Dataset&, int,
                                                     int);

}  // namespace crnn
