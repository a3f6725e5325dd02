// crnn: dataset generation, training, evaluation, reaction-time analyses.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>

#include "CLI11.hpp"
#include "crnnrt/checkpoint.hpp"
#include "crnnrt/config.hpp"
#include "crnnrt/dataset.hpp"
#include "crnnrt/evaluate.hpp"
#include "crnnrt/experiments.hpp"
#include "crnnrt/rt_metric.hpp"
#include "crnnrt/train.hpp"

using nlohmann::json;

namespace {

int fail(const std::string& where, const std::string& msg, int code = 1) {
  json e;
  e["error"] = msg;
  e["where"] = where;
  std::cerr << e.dump() << std::endl;
  return code;
}

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

// Loads a checkpoint in whichever precision it was saved and hands the params
// plus metadata to a generic callable.
template <typename Fn>
int with_checkpoint(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw crnn::TensorError("cannot read checkpoint " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw crnn::TensorError("checkpoint " + path + " is not valid JSON: " + e.what());
  }
  const std::string dtype = j.value("dtype", "");
  std::string meta;
  if (dtype == "f64") {
    auto p = crnn::load_checkpoint<double>(path, &meta);
    return fn(p, meta);
  }
  if (dtype == "f32") {
    auto p = crnn::load_checkpoint<float>(path, &meta);
    return fn(p, meta);
  }
  throw crnn::TensorError("checkpoint " + path + " has unknown dtype '" + dtype + "'");
}

int steps_from_meta(const std::string& meta_json, int fallback) {
  try {
    return json::parse(meta_json).value("config", json::object()).value("T", fallback);
  } catch (const json::exception&) {
    return fallback;
  }
}

crnn::ShapePreset parse_preset(const std::string& name) {
  if (name == "standard") return crnn::ShapePreset::Standard;
  if (name == "convex") return crnn::ShapePreset::Convex;
  if (name == "narrow") return crnn::ShapePreset::Narrow;
  if (name == "wide") return crnn::ShapePreset::Wide;
  if (name == "curved") return crnn::ShapePreset::Curved;
  if (name == "straight") return crnn::ShapePreset::Straight;
  throw crnn::TensorError("unknown shape preset '" + name +
                          "' (standard|convex|narrow|wide|curved|straight)");
}

// Stimulus fetch for curve/sumap/frames: either a standalone PNG or an
// indexed dataset entry.
crnn::GrayImage load_input_image(const std::string& image_path, const std::string& data_dir,
                                 int index, bool erase_second_cue) {
  if (!image_path.empty()) return crnn::read_png_gray(image_path);
  if (data_dir.empty())
    throw crnn::TensorError("provide --image PNG or --data DIR with --index");
  auto ds = crnn::read_dataset(data_dir);
  if (index < 0 || index >= int(ds.items.size()))
    throw crnn::TensorError("--index " + std::to_string(index) + " outside dataset of " +
                            std::to_string(ds.items.size()));
  auto& s = ds.items[size_t(index)];
  if (erase_second_cue) {
    // Probe base: keep the scene and the first cue, blank the second dot
    // back to interior black so the map can move it everywhere.
    crnn::stamp_disk(s.image, s.cues[1].first, s.cues[1].second, 2, 0);
  }
  return s.image;
}

json fit_json(const crnn::TJunctionFit& f) {
  json o;
  o["n"] = f.n;
  o["coef_path"] = f.coef_path;
  o["se_path"] = f.se_path;
  o["coef_junction"] = f.coef_junc;
  o["se_junction"] = f.se_junc;
  o["p_junction"] = f.p_junc;
  o["r2"] = f.r2;
  o["junction_path_r"] = f.junction_path_r;
  o["collinear"] = f.collinear;
  return o;
}

double nan_to_null_guard(double v) { return v; }  // JSON lib maps NaN to null on dump

template <typename T>
void run_curve(crnn::HGRUParams<T>& p, const crnn::GrayImage& img, int steps,
               const std::string& csv_out) {
  auto curve = crnn::uncertainty_curve(p, crnn::images_to_tensor<T>({img}), steps);
  const auto& eps = curve.epsilon[0];
  if (!csv_out.empty()) {
    std::ofstream f(csv_out);
    if (!f) throw crnn::TensorError("cannot write " + csv_out);
    f << "t,epsilon\n";
    for (size_t t = 0; t < eps.size(); ++t) f << (t + 1) << ',' << eps[t] << '\n';
  }
  json out;
  out["steps"] = steps;
  out["xi"] = crnn::xi_integral(eps);
  out["epsilon"] = eps;
  if (!csv_out.empty()) out["csv"] = csv_out;
  emit(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent grouping model: data, training, evaluation, RT analyses"};
  app.require_subcommand(1);

  // ---- gen-mazes ----
  auto* gm = app.add_subcommand("gen-mazes", "Generate a maze dataset");
  std::string gm_preset = "desk", gm_out;
  int gm_count = 2000;
  uint64_t gm_seed = 7;
  gm->add_option("--preset", gm_preset, "desk (12x12, 48px) or paper (18x18, 144px)");
  gm->add_option("--count", gm_count, "stimulus count")->check(CLI::PositiveNumber);
  gm->add_option("--seed", gm_seed, "generator seed");
  gm->add_option("--out", gm_out, "output dataset directory")->required();

  // ---- gen-grouping ----
  auto* gg = app.add_subcommand("gen-grouping", "Generate a grouping dataset");
  std::string gg_preset = "standard", gg_out;
  int gg_count = 5000, gg_canvas = 96;
  uint64_t gg_seed = 7;
  double gg_dmin = 0.20, gg_dmax = 0.55;
  gg->add_option("--preset", gg_preset, "standard|convex|narrow|wide|curved|straight");
  gg->add_option("--count", gg_count, "stimulus count")->check(CLI::PositiveNumber);
  gg->add_option("--seed", gg_seed, "generator seed");
  gg->add_option("--canvas", gg_canvas, "canvas side, px");
  gg->add_option("--d-min-frac", gg_dmin, "dot distance law lower bound, canvas fraction");
  gg->add_option("--d-max-frac", gg_dmax, "dot distance law upper bound, canvas fraction");
  gg->add_option("--out", gg_out, "output dataset directory")->required();

  // ---- train ----
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_config, tr_preset, tr_resume, tr_data, tr_out = "runs/run";
  crnn::TrainConfig tr_cfg;
  std::string tr_task, tr_precision;
  int tr_T = 0, tr_batch = 0, tr_epochs = 0, tr_tau = 0, tr_channels = 0;
  double tr_gamma = -1, tr_lr = 0;
  uint64_t tr_seed = 0;
  tr->add_option("--config", tr_config, "TrainConfig JSON file");
  tr->add_option("--preset", tr_preset, "mazes-desk|mazes-paper|grouping-desk|grouping-paper");
  tr->add_option("--resume", tr_resume, "checkpoint to resume from");
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--out", tr_out, "run output directory");
  tr->add_option("--task", tr_task, "mazes|grouping");
  tr->add_option("--T", tr_T, "rollout steps");
  tr->add_option("--gamma", tr_gamma, "contraction penalty weight");
  tr->add_option("--lr", tr_lr, "learning rate");
  tr->add_option("--batch", tr_batch, "batch size");
  tr->add_option("--epochs", tr_epochs, "epochs");
  tr->add_option("--tau", tr_tau, "balance annealing epochs");
  tr->add_option("--seed", tr_seed, "training seed");
  tr->add_option("--channels", tr_channels, "state channels");
  tr->add_option("--precision", tr_precision, "f32|f64");

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_out;
  int ev_steps = 0, ev_batch = 0;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--out", ev_out, "per-stimulus CSV path");
  ev->add_option("--steps", ev_steps, "rollout steps (default: from checkpoint)");
  ev->add_option("--batch", ev_batch, "batch size");

  // ---- curve ----
  auto* cv = app.add_subcommand("curve", "Uncertainty-vs-time curve for one stimulus");
  std::string cv_ckpt, cv_image, cv_data, cv_out;
  int cv_index = 0, cv_steps = 0;
  cv->add_option("--ckpt", cv_ckpt, "checkpoint path")->required();
  cv->add_option("--image", cv_image, "stimulus PNG");
  cv->add_option("--data", cv_data, "dataset directory (with --index)");
  cv->add_option("--index", cv_index, "stimulus index in --data");
  cv->add_option("--steps", cv_steps, "rollout steps (default: from checkpoint)");
  cv->add_option("--out", cv_out, "optional CSV path (t,epsilon)");

  // ---- sumap ----
  auto* su = app.add_subcommand("sumap", "Spatial uncertainty map over probe positions");
  std::string su_ckpt, su_image, su_data, su_png, su_csv;
  int su_index = 0, su_steps = 0, su_stride = 6, su_radius = 2;
  su->add_option("--ckpt", su_ckpt, "checkpoint path")->required();
  su->add_option("--image", su_image, "probe base PNG (one cue only)");
  su->add_option("--data", su_data, "dataset directory (second cue is blanked)");
  su->add_option("--index", su_index, "stimulus index in --data");
  su->add_option("--steps", su_steps, "rollout steps (default: from checkpoint)");
  su->add_option("--stride", su_stride, "probe grid stride, px");
  su->add_option("--radius", su_radius, "probe dot radius, px");
  su->add_option("--out", su_png, "heatmap PNG path");
  su->add_option("--csv", su_csv, "per-cell CSV path");

  // ---- frames ----
  auto* fr = app.add_subcommand("frames", "Export per-step latent activity frames");
  std::string fr_ckpt, fr_image, fr_data, fr_out;
  int fr_index = 0, fr_steps = 0;
  fr->add_option("--ckpt", fr_ckpt, "checkpoint path")->required();
  fr->add_option("--image", fr_image, "stimulus PNG");
  fr->add_option("--data", fr_data, "dataset directory (with --index)");
  fr->add_option("--index", fr_index, "stimulus index in --data");
  fr->add_option("--steps", fr_steps, "rollout steps (default: from checkpoint)");
  fr->add_option("--out", fr_out, "output directory")->required();

  // ---- exp-distance ----
  auto* xd = app.add_subcommand("exp-distance", "Dot-distance effect on xi");
  std::string xd_ckpt;
  int xd_outlines = 40, xd_series = 6, xd_steps = 0, xd_canvas = 96, xd_batch = 32;
  uint64_t xd_seed = 17;
  xd->add_option("--ckpt", xd_ckpt, "trained grouping checkpoint")->required();
  xd->add_option("--outlines", xd_outlines, "number of outlines");
  xd->add_option("--series-steps", xd_series, "max separations per outline");
  xd->add_option("--steps", xd_steps, "rollout steps (default: from checkpoint)");
  xd->add_option("--canvas", xd_canvas, "canvas side, px");
  xd->add_option("--batch", xd_batch, "batch size");
  xd->add_option("--seed", xd_seed, "outline seed");

  // ---- exp-topology ----
  auto* xt = app.add_subcommand("exp-topology", "Paired hard-vs-easy condition contrast");
  std::string xt_ckpt, xt_hard = "narrow", xt_easy = "wide";
  int xt_count = 100, xt_steps = 0, xt_canvas = 96, xt_batch = 32;
  uint64_t xt_seed = 17;
  xt->add_option("--ckpt", xt_ckpt, "trained grouping checkpoint")->required();
  xt->add_option("--hard", xt_hard, "hard condition preset");
  xt->add_option("--easy", xt_easy, "easy condition preset");
  xt->add_option("--count", xt_count, "pair count");
  xt->add_option("--steps", xt_steps, "rollout steps (default: from checkpoint)");
  xt->add_option("--canvas", xt_canvas, "canvas side, px");
  xt->add_option("--batch", xt_batch, "batch size");
  xt->add_option("--seed", xt_seed, "pair seed");

  // ---- exp-pathlength ----
  auto* xp = app.add_subcommand("exp-pathlength", "xi vs maze path metrics");
  std::string xp_ckpt, xp_data;
  int xp_steps = 0, xp_batch = 32;
  uint64_t xp_seed = 17;
  xp->add_option("--ckpt", xp_ckpt, "trained maze checkpoint")->required();
  xp->add_option("--data", xp_data, "maze dataset directory")->required();
  xp->add_option("--steps", xp_steps, "rollout steps (default: from checkpoint)");
  xp->add_option("--batch", xp_batch, "batch size");
  xp->add_option("--seed", xp_seed, "resampling seed");

  // ---- exp-tjunction ----
  auto* xj = app.add_subcommand("exp-tjunction", "xi vs T-junction count, path length held");
  std::string xj_ckpt, xj_data;
  int xj_steps = 0, xj_batch = 32;
  xj->add_option("--ckpt", xj_ckpt, "trained maze checkpoint")->required();
  xj->add_option("--data", xj_data, "maze dataset directory")->required();
  xj->add_option("--steps", xj_steps, "rollout steps (default: from checkpoint)");
  xj->add_option("--batch", xj_batch, "batch size");

  // ---- exp-generalize ----
  auto* xg = app.add_subcommand("exp-generalize", "Short-distance training, long-distance test");
  std::string xg_config, xg_preset, xg_short, xg_long, xg_out = "runs/generalize";
  std::string xg_precision;
  int xg_T = 0, xg_batch = 0, xg_epochs = 0, xg_channels = 0;
  double xg_gamma = -1, xg_lr = 0;
  uint64_t xg_seed = 0;
  xg->add_option("--config", xg_config, "TrainConfig JSON file");
  xg->add_option("--preset", xg_preset, "TrainConfig preset name");
  xg->add_option("--short", xg_short, "short-distance dataset directory")->required();
  xg->add_option("--long", xg_long, "long-distance dataset directory")->required();
  xg->add_option("--out", xg_out, "run output directory");
  xg->add_option("--T", xg_T, "rollout steps");
  xg->add_option("--gamma", xg_gamma, "contraction penalty weight");
  xg->add_option("--lr", xg_lr, "learning rate");
  xg->add_option("--batch", xg_batch, "batch size");
  xg->add_option("--epochs", xg_epochs, "epochs");
  xg->add_option("--seed", xg_seed, "training seed");
  xg->add_option("--channels", xg_channels, "state channels");
  xg->add_option("--precision", xg_precision, "f32|f64");

  // ---- gradcheck ----
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference audit of every op");
  uint64_t gc_seed = 0;
  gc->add_option("--seed", gc_seed, "probe seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    return fail("cli", e.what(), e.get_exit_code());
  }

  const std::string where = app.get_subcommands().front()->get_name();
  try {
    if (gm->parsed()) {
      crnn::MazeSpec spec = gm_preset == "paper" ? crnn::MazeSpec::paper()
                                                 : crnn::MazeSpec::desk();
      if (gm_preset != "desk" && gm_preset != "paper")
        throw crnn::TensorError("unknown maze preset '" + gm_preset + "' (desk|paper)");
      auto items = crnn::gen_maze_dataset(spec, gm_count, gm_seed);
      crnn::DatasetManifest m;
      m.task = "mazes";
      json sj;
      sj["grid_rows"] = spec.grid_rows;
      sj["grid_cols"] = spec.grid_cols;
      sj["cell_px"] = spec.cell_px;
      sj["wall_px"] = spec.wall_px;
      sj["preset"] = gm_preset;
      m.spec_json = sj.dump();
      m.seed = gm_seed;
      m.count = gm_count;
      crnn::write_dataset(gm_out, m, items);
      auto ds = crnn::read_dataset(gm_out);
      emit({{"task", "mazes"},
            {"out", gm_out},
            {"count", ds.manifest.count},
            {"checksum", ds.manifest.checksum}});
    } else if (gg->parsed()) {
      crnn::GroupingCondition cond;
      cond.preset = parse_preset(gg_preset);
      cond.canvas_px = gg_canvas;
      cond.d_min_frac = gg_dmin;
      cond.d_max_frac = gg_dmax;
      auto items = crnn::gen_grouping_dataset(cond, gg_count, gg_seed);
      crnn::DatasetManifest m;
      m.task = "grouping";
      json sj;
      sj["preset"] = gg_preset;
      sj["canvas_px"] = gg_canvas;
      sj["d_min_frac"] = gg_dmin;
      sj["d_max_frac"] = gg_dmax;
      m.spec_json = sj.dump();
      m.seed = gg_seed;
      m.count = gg_count;
      crnn::write_dataset(gg_out, m, items);
      auto ds = crnn::read_dataset(gg_out);
      emit({{"task", "grouping"},
            {"out", gg_out},
            {"count", ds.manifest.count},
            {"checksum", ds.manifest.checksum}});
    } else if (tr->parsed()) {
      crnn::TrainConfig cfg;
      if (!tr_config.empty()) cfg = crnn::load_train_config(tr_config);
      else if (!tr_preset.empty()) cfg = crnn::train_preset(tr_preset);
      if (tr->count("--task")) cfg.task = tr_task;
      if (tr->count("--T")) cfg.T = tr_T;
      if (tr->count("--gamma")) cfg.gamma = tr_gamma;
      if (tr->count("--lr")) cfg.lr = tr_lr;
      if (tr->count("--batch")) cfg.batch = tr_batch;
      if (tr->count("--epochs")) cfg.epochs = tr_epochs;
      if (tr->count("--tau")) cfg.tau = tr_tau;
      if (tr->count("--seed")) cfg.seed = tr_seed;
      if (tr->count("--channels")) cfg.channels = tr_channels;
      if (tr->count("--precision")) cfg.precision = tr_precision;
      cfg.validate();
      auto data = crnn::read_dataset(tr_data);
      auto res = crnn::train_model(cfg, data, tr_out, tr_resume);
      json out;
      out["epochs_run"] = res.epochs_run;
      out["best_val_acc"] = res.best_val_acc;
      out["last_checkpoint"] = res.last_checkpoint;
      out["best_checkpoint"] = res.best_checkpoint;
      out["run_log"] = res.run_log;
      if (!res.records.empty()) {
        out["final_val_acc"] = res.records.back().val_acc;
        out["final_total_loss"] = res.records.back().total;
      }
      emit(out);
    } else if (ev->parsed()) {
      auto data = crnn::read_dataset(ev_data);
      auto rep = crnn::evaluate_checkpoint(ev_ckpt, data, ev_steps, ev_batch, ev_out);
      json out;
      out["n"] = int(rep.rows.size());
      out["accuracy"] = rep.accuracy;
      out["mean_xi"] = rep.mean_xi;
      if (!ev_out.empty()) out["csv"] = ev_out;
      emit(out);
    } else if (cv->parsed()) {
      auto img = load_input_image(cv_image, cv_data, cv_index, /*erase_second_cue=*/false);
      with_checkpoint(cv_ckpt, [&](auto& p, const std::string& meta) {
        const int steps = cv_steps > 0 ? cv_steps : steps_from_meta(meta, 40);
        run_curve(p, img, steps, cv_out);
        return 0;
      });
    } else if (su->parsed()) {
      auto img = load_input_image(su_image, su_data, su_index, /*erase_second_cue=*/true);
      with_checkpoint(su_ckpt, [&](auto& p, const std::string& meta) {
        const int steps = su_steps > 0 ? su_steps : steps_from_meta(meta, 40);
        auto map = crnn::spatial_uncertainty_map(p, img, steps, su_stride, su_radius);
        int finite = 0;
        double lo = 0, hi = 0;
        bool first = true;
        for (double v : map.xi) {
          if (!std::isfinite(v)) continue;
          ++finite;
          lo = first ? v : std::min(lo, v);
          hi = first ? v : std::max(hi, v);
          first = false;
        }
        if (!su_csv.empty()) {
          std::ofstream f(su_csv);
          if (!f) throw crnn::TensorError("cannot write " + su_csv);
          f << "cell_x,cell_y,px_x,px_y,xi\n";
          for (int cy = 0; cy < map.cells_y; ++cy)
            for (int cx = 0; cx < map.cells_x; ++cx)
              f << cx << ',' << cy << ',' << cx * map.stride << ',' << cy * map.stride << ','
                << map.at(cx, cy) << '\n';
        }
        if (!su_png.empty()) {
          // Nearest-neighbour rendering: probed cells shaded by normalized
          // xi (32..255), unprobed pixels left black.
          crnn::GrayImage heat(img.width, img.height, 0);
          const double span = hi > lo ? hi - lo : 1.0;
          for (int y = 0; y < heat.height; ++y)
            for (int x = 0; x < heat.width; ++x) {
              const int cx = std::min(map.cells_x - 1, x / map.stride);
              const int cy = std::min(map.cells_y - 1, y / map.stride);
              const double v = map.at(cx, cy);
              if (!std::isfinite(v)) continue;
              heat.px[size_t(y) * heat.width + x] =
                  uint8_t(32 + std::lround(223.0 * (v - lo) / span));
            }
          crnn::write_png_gray(su_png, heat);
        }
        json out;
        out["cells_x"] = map.cells_x;
        out["cells_y"] = map.cells_y;
        out["stride"] = map.stride;
        out["probed_cells"] = finite;
        out["xi_min"] = nan_to_null_guard(finite ? lo : std::nan(""));
        out["xi_max"] = nan_to_null_guard(finite ? hi : std::nan(""));
        if (!su_png.empty()) out["png"] = su_png;
        if (!su_csv.empty()) out["csv"] = su_csv;
        emit(out);
        return 0;
      });
    } else if (fr->parsed()) {
      auto img = load_input_image(fr_image, fr_data, fr_index, /*erase_second_cue=*/false);
      with_checkpoint(fr_ckpt, [&](auto& p, const std::string& meta) {
        const int steps = fr_steps > 0 ? fr_steps : steps_from_meta(meta, 40);
        crnn::export_latent_frames(p, img, steps, fr_out);
        emit({{"out", fr_out}, {"steps", steps}, {"frames", steps - 1}});
        return 0;
      });
    } else if (xd->parsed()) {
      with_checkpoint(xd_ckpt, [&](auto& p, const std::string& meta) {
        const int steps = xd_steps > 0 ? xd_steps : steps_from_meta(meta, 40);
        auto fit = crnn::experiment_distance(p, xd_outlines, xd_series, steps, xd_seed,
                                             xd_canvas, xd_batch);
        emit({{"slope", fit.slope},
              {"se", fit.se},
              {"p_value", fit.p_value},
              {"n", fit.n},
              {"n_outlines", fit.n_outlines},
              {"n_levels", fit.n_levels},
              {"skipped_outlines", fit.skipped}});
        return 0;
      });
    } else if (xt->parsed()) {
      auto pairs = crnn::gen_condition_pairs(parse_preset(xt_hard), parse_preset(xt_easy),
                                             xt_count, xt_seed, xt_canvas);
      with_checkpoint(xt_ckpt, [&](auto& p, const std::string& meta) {
        const int steps = xt_steps > 0 ? xt_steps : steps_from_meta(meta, 40);
        auto st = crnn::experiment_topology(p, pairs, steps, xt_batch);
        emit({{"hard", xt_hard},
              {"easy", xt_easy},
              {"n", st.n},
              {"mean_hard", st.mean_hard},
              {"mean_easy", st.mean_easy},
              {"mean_delta", st.mean_delta},
              {"cohens_d", st.cohens_d},
              {"p_value", st.p_value}});
        return 0;
      });
    } else if (xp->parsed()) {
      auto data = crnn::read_dataset(xp_data);
      with_checkpoint(xp_ckpt, [&](auto& p, const std::string& meta) {
        const int steps = xp_steps > 0 ? xp_steps : steps_from_meta(meta, 40);
        auto st = crnn::experiment_pathlength(p, data, steps, xp_batch, xp_seed);
        json out;
        out["n_yes"] = st.n_yes;
        out["r_path"] = st.r_path;
        out["p_path"] = st.p_path;
        out["r_euclid"] = st.r_euclid;
        out["p_euclid"] = st.p_euclid;
        out["delta_r"] = st.delta_r;
        out["p_delta"] = st.p_delta;
        out["r_shuffled"] = st.r_shuffled;
        out["p_shuffled"] = st.p_shuffled;
        out["n_no"] = st.n_no;
        out["segment_degenerate"] = st.segment_degenerate;
        out["r_segment"] = nan_to_null_guard(st.r_segment);
        out["p_segment"] = nan_to_null_guard(st.p_segment);
        emit(out);
        return 0;
      });
    } else if (xj->parsed()) {
      auto data = crnn::read_dataset(xj_data);
      with_checkpoint(xj_ckpt, [&](auto& p, const std::string& meta) {
        const int steps = xj_steps > 0 ? xj_steps : steps_from_meta(meta, 40);
        auto st = crnn::experiment_tjunction(p, data, steps, xj_batch);
        emit({{"on_path", fit_json(st.on_path)}, {"on_segment", fit_json(st.on_segment)}});
        return 0;
      });
    } else if (xg->parsed()) {
      crnn::TrainConfig cfg = crnn::train_preset("grouping-desk");
      if (!xg_config.empty()) cfg = crnn::load_train_config(xg_config);
      else if (!xg_preset.empty()) cfg = crnn::train_preset(xg_preset);
      if (xg->count("--T")) cfg.T = xg_T;
      if (xg->count("--gamma")) cfg.gamma = xg_gamma;
      if (xg->count("--lr")) cfg.lr = xg_lr;
      if (xg->count("--batch")) cfg.batch = xg_batch;
      if (xg->count("--epochs")) cfg.epochs = xg_epochs;
      if (xg->count("--seed")) cfg.seed = xg_seed;
      if (xg->count("--channels")) cfg.channels = xg_channels;
      if (xg->count("--precision")) cfg.precision = xg_precision;
      cfg.task = "grouping";
      cfg.validate();
      auto short_data = crnn::read_dataset(xg_short);
      auto long_data = crnn::read_dataset(xg_long);
      auto rep = crnn::experiment_generalization(cfg, short_data, long_data, xg_out);
      emit({{"n_train", rep.n_train},
            {"n_short_eval", rep.n_short_eval},
            {"n_long_eval", rep.n_long_eval},
            {"acc_short", rep.acc_short},
            {"acc_long", rep.acc_long},
            {"untrained_short", rep.untrained_short},
            {"untrained_long", rep.untrained_long},
            {"checkpoint", rep.checkpoint}});
    } else if (gc->parsed()) {
      auto rows = crnn::gradcheck_report(gc_seed);
      for (const auto& r : rows)
        std::printf("%-20s max_rel_err=%.3e checks=%d\n", r.op.c_str(), r.max_rel_err, r.checks);
    }
  } catch (const crnn::TrainDivergence& e) {
    json err;
    err["error"] = e.what();
    err["where"] = where;
    err["last_checkpoint"] = e.last_checkpoint;
    std::cerr << err.dump() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    return fail(where, e.what());
  }
  return 0;
}
