#include "crnnrt/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "crnnrt/checkpoint.hpp"
#include "crnnrt/equilibrium.hpp"
#include "crnnrt/evidential.hpp"
#include "crnnrt/hgru.hpp"
#include "crnnrt/rt_metric.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace crnn {

namespace {

constexpr double kLambdaC = 0.9;  // contraction target for the penalty

struct AdamState {
  std::vector<std::vector<double>> m, v;  // kept in double for both precisions
  int64_t t = 0;
};

template <typename T>
AdamState fresh_adam(const std::vector<Tensor<T>>& params) {
  AdamState s;
  s.m.resize(params.size());
  s.v.resize(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    s.m[i].assign(size_t(params[i].numel()), 0.0);
    s.v[i].assign(size_t(params[i].numel()), 0.0);
  }
  return s;
}

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState& st, const TrainConfig& cfg) {
  ++st.t;
  const double b1 = cfg.optimizer.beta1, b2 = cfg.optimizer.beta2;
  const double corr1 = 1.0 - std::pow(b1, double(st.t));
  const double corr2 = 1.0 - std::pow(b2, double(st.t));
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i].grad();
    auto& w = params[i].mutable_value();
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (size_t k = 0; k < w.size(); ++k) {
      const double gk = double(g[k]);
      m[k] = b1 * m[k] + (1.0 - b1) * gk;
      v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
      const double mh = m[k] / corr1, vh = v[k] / corr2;
      w[k] = static_cast<T>(double(w[k]) - cfg.lr * mh / (std::sqrt(vh) + cfg.optimizer.eps));
    }
  }
}

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + (salt + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename T>
Tensor<T> batch_tensor(const std::vector<Stimulus>& items, const std::vector<int>& ids,
                       size_t lo, size_t hi) {
  std::vector<GrayImage> imgs;
  imgs.reserve(hi - lo);
  for (size_t i = lo; i < hi; ++i) imgs.push_back(items[size_t(ids[i])].image);
  return images_to_tensor<T>(imgs);
}

struct ValStats {
  double acc = 0, mean_residual = 0, mean_xi = 0;
  int n = 0;
};

template <typename T>
ValStats validate(HGRUParams<T>& p, const std::vector<Stimulus>& items,
                  const std::vector<int>& ids, int steps, int batch, bool record_xi) {
  NoGradGuard ng;
  ValStats out;
  double res_acc = 0, xi_acc = 0;
  int correct = 0;
  for (size_t lo = 0; lo < ids.size(); lo += size_t(batch)) {
    const size_t hi = std::min(ids.size(), lo + size_t(batch));
    auto imgs = batch_tensor<T>(items, ids, lo, hi);
    auto z = input_drive(p, imgs, BNMode::Eval);
    RolloutTrace<T> tr;
    tr.want_readouts = true;
    auto hT = rollout(p, z, steps, BNMode::Eval, &tr);
    (void)hT;
    const auto final_out = evidence_to_output(tr.readouts.back());
    const size_t nb = hi - lo;
    for (size_t i = 0; i < nb; ++i) {
      if (final_out.predicted[i] == items[size_t(ids[lo + i])].label) ++correct;
      res_acc += double(tr.residuals.back()[i]);
    }
    if (record_xi) {
      std::vector<std::vector<double>> eps(nb);
      for (const auto& logits : tr.readouts) {
        const auto o = evidence_to_output(logits);
        for (size_t i = 0; i < nb; ++i) eps[i].push_back(double(o.uncertainty[i]));
      }
      for (size_t i = 0; i < nb; ++i) xi_acc += xi_integral(eps[i]);
    }
  }
  out.n = int(ids.size());
  out.acc = out.n ? double(correct) / out.n : 0.0;
  out.mean_residual = out.n ? res_acc / out.n : 0.0;
  out.mean_xi = record_xi && out.n ? xi_acc / out.n : std::nan("");
  return out;
}

template <typename T>
double sigma_hat_sample(HGRUParams<T>& p, const std::vector<Stimulus>& items,
                        const std::vector<int>& ids, int steps, uint64_t seed) {
  const size_t n = std::min<size_t>(8, ids.size());
  if (n == 0) return std::nan("");
  Tensor<T> z, hT;
  {
    NoGradGuard ng;
    auto imgs = batch_tensor<T>(items, ids, 0, n);
    z = input_drive(p, imgs, BNMode::Eval);
    hT = rollout(p, z, steps, BNMode::Eval);
  }
  auto build = [&](const Tensor<T>& hh) { return hgru_step(p, hh, z, BNMode::Eval); };
  return double(estimate_contraction<T>(build, hT, /*iterations=*/8, seed));
}

template <typename T>
void save_state(const std::string& out_dir, const HGRUParams<T>& p, const AdamState& st,
                const TrainConfig& cfg, int epoch, double val_acc, int img_w, int img_h,
                const std::string& stem) {
  json meta;
  meta["task"] = cfg.task;
  meta["epoch"] = epoch;
  meta["val_acc"] = val_acc;
  meta["image_w"] = img_w;
  meta["image_h"] = img_h;
  meta["config"] = json::parse(dump_train_config(cfg));
  save_checkpoint<T>(out_dir + "/" + stem + ".ckpt", p, meta.dump());

  auto names = HGRUParams<T>::parameter_names();
  std::vector<std::pair<std::string, std::vector<double>>> entries;
  for (size_t i = 0; i < names.size(); ++i) {
    entries.emplace_back("m." + names[i], st.m[i]);
    entries.emplace_back("v." + names[i], st.v[i]);
  }
  json ometa;
  ometa["adam_t"] = st.t;
  ometa["epoch"] = epoch;
  save_tensor_map<double>(out_dir + "/" + stem + ".opt", entries, ometa.dump());
}

template <typename T>
TrainResult train_impl(const TrainConfig& cfg, const Dataset& data, const std::string& out_dir,
                       const std::string& resume_from) {
  cfg.validate();
  const auto& items = data.items;
  if (items.size() < 10) throw TensorError("train: dataset too small (need >= 10 stimuli)");
  if (!data.manifest.task.empty() && data.manifest.task != cfg.task)
    throw TensorError("train: config task '" + cfg.task + "' does not match dataset task '" +
                      data.manifest.task + "'");

  double yes = 0;
  for (const auto& s : items) yes += s.label;
  const double frac = yes / double(items.size());
  if (std::fabs(frac - 0.5) > 0.02)
    throw TensorError("train: dataset is label-unbalanced (yes fraction " +
                      std::to_string(frac) + ", allowed 0.48..0.52)");

  const int img_w = items[0].image.width, img_h = items[0].image.height;
  for (const auto& s : items)
    if (s.image.width != img_w || s.image.height != img_h)
      throw TensorError("train: dataset images are not uniformly sized");

  // Validation = final 10% in stored (seed) order; never reshuffled.
  const int n = int(items.size());
  const int n_val = std::max(1, n / 10);
  const int n_train = n - n_val;
  std::vector<int> train_ids(static_cast<size_t>(n_train));
  std::vector<int> val_ids(static_cast<size_t>(n_val));
  for (int i = 0; i < n_train; ++i) train_ids[size_t(i)] = i;
  for (int i = 0; i < n_val; ++i) val_ids[size_t(i)] = n_train + i;

  fs::create_directories(out_dir);

  HGRUConfig mc;
  mc.channels = cfg.channels;
  mc.classes = 2;
  mc.init_seed = mix_seed(cfg.seed, 0x5eed);
  auto p = HGRUParams<T>::init(mc);
  auto params = p.parameters();
  AdamState adam = fresh_adam(params);
  int start_epoch = 0;

  if (!resume_from.empty()) {
    std::string meta_json;
    p = load_checkpoint<T>(resume_from, &meta_json);
    params = p.parameters();
    if (p.cfg.channels != cfg.channels)
      throw TensorError("train: resume checkpoint has " + std::to_string(p.cfg.channels) +
                        " channels, config wants " + std::to_string(cfg.channels));
    json meta = json::parse(meta_json);
    if (meta.value("task", cfg.task) != cfg.task)
      throw TensorError("train: resume checkpoint task '" + meta.value("task", "") +
                        "' does not match config task '" + cfg.task + "'");
    start_epoch = meta.value("epoch", -1) + 1;

    const fs::path opt_path = fs::path(resume_from).replace_extension(".opt");
    std::string ometa_json;
    auto entries = load_tensor_map<double>(opt_path.string(), &ometa_json);
    auto names = HGRUParams<T>::parameter_names();
    if (entries.size() != 2 * names.size())
      throw TensorError("train: optimizer state holds " + std::to_string(entries.size()) +
                        " buffers, model needs " + std::to_string(2 * names.size()));
    adam = fresh_adam(params);
    for (size_t i = 0; i < names.size(); ++i) {
      if (entries[2 * i].first != "m." + names[i] || entries[2 * i + 1].first != "v." + names[i])
        throw TensorError("train: optimizer state order does not match parameter list");
      if (entries[2 * i].second.size() != adam.m[i].size())
        throw TensorError("train: optimizer buffer size mismatch for " + names[i]);
      adam.m[i] = std::move(entries[2 * i].second);
      adam.v[i] = std::move(entries[2 * i + 1].second);
    }
    adam.t = json::parse(ometa_json).value("adam_t", int64_t(0));
  }

  TrainResult result;
  result.run_log = out_dir + "/run.jsonl";
  result.last_checkpoint = out_dir + "/last.ckpt";
  result.best_checkpoint = out_dir + "/best.ckpt";
  std::string last_good;  // most recent completed-epoch checkpoint
  if (!resume_from.empty()) last_good = resume_from;

  CRBPConfig crbp;
  crbp.gamma = cfg.gamma;
  crbp.lambda_c = kLambdaC;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double rho = std::min(1.0, double(epoch) / double(cfg.tau));

    std::vector<int> order = train_ids;
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x45504f43u + uint64_t(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double risk_sum = 0, bal_sum = 0, lcp_sum = 0, total_sum = 0;
    int batches = 0, fallbacks = 0;

    for (size_t lo = 0; lo < order.size(); lo += size_t(cfg.batch)) {
      const size_t hi = std::min(order.size(), lo + size_t(cfg.batch));
      std::vector<int> labels;
      for (size_t i = lo; i < hi; ++i) labels.push_back(items[size_t(order[i])].label);

      double risk_v, bal_v, lcp_v;
      try {
        auto imgs = batch_tensor<T>(items, order, lo, hi);
        auto z = input_drive(p, imgs, BNMode::Train);
        Tensor<T> hT;
        {
          NoGradGuard ng;
          hT = rollout(p, z, cfg.T, BNMode::Train);
        }

        zero_grad(params);
        auto h_var = Tensor<T>::from(hT.shape(), hT.value(), /*requires_grad=*/true);
        auto logits = readout(p, h_var);
        auto risk_t = edl_risk(logits, labels);
        auto bal_t = kl_balance(logits, labels);
        auto head = add(risk_t, mul_scalar(bal_t, static_cast<T>(rho)));
        backward(head);

        auto lcp_t = lcp_penalty(p, hT, z, kLambdaC);
        risk_v = double(risk_t.item());
        bal_v = double(bal_t.item());
        lcp_v = double(lcp_t.item());
        const double total_v = risk_v + rho * bal_v + cfg.gamma * lcp_v;
        if (!std::isfinite(total_v))
          throw NumericError("loss is non-finite (risk " + std::to_string(risk_v) +
                             ", balance " + std::to_string(bal_v) + ", lcp " +
                             std::to_string(lcp_v) + ")");
        if (cfg.gamma > 0) backward_with_cotangent(lcp_t, {static_cast<T>(cfg.gamma)});

        auto build = [&](const Tensor<T>& hh) {
          return hgru_step(p, hh, z, BNMode::TrainFrozen);
        };
        try {
          crbp_gradient<T>(build, hT, h_var.grad(), crbp);
        } catch (const NonContractiveError& e) {
          ++fallbacks;
          std::fprintf(stderr,
                       "[train] epoch %d batch %d: %s; falling back to the truncated "
                       "(identity-term) gradient\n",
                       epoch, batches, e.what());
          CRBPConfig k0 = crbp;
          k0.neumann_terms = 0;
          crbp_gradient<T>(build, hT, h_var.grad(), k0);
        }

        adam_step(params, adam, cfg);
        risk_sum += risk_v;
        bal_sum += bal_v;
        lcp_sum += lcp_v;
        total_sum += total_v;
        ++batches;
      } catch (const NumericError& e) {
        throw TrainDivergence("train: divergence at epoch " + std::to_string(epoch) +
                                  ", batch " + std::to_string(batches) + ": " + e.what() +
                                  (last_good.empty() ? "; no checkpoint written yet"
                                                     : "; last good checkpoint: " + last_good),
                              last_good);
      }
    }

    auto vs = validate(p, items, val_ids, cfg.T, cfg.batch, cfg.eval_record);
    const double sigma =
        sigma_hat_sample(p, items, val_ids, cfg.T, mix_seed(cfg.seed, 0x51ull + uint64_t(epoch)));

    save_state(out_dir, p, adam, cfg, epoch, vs.acc, img_w, img_h, "last");
    last_good = result.last_checkpoint;
    if (vs.acc >= result.best_val_acc || result.records.empty()) {
      result.best_val_acc = vs.acc;
      save_state(out_dir, p, adam, cfg, epoch, vs.acc, img_w, img_h, "best");
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.risk = batches ? risk_sum / batches : 0;
    rec.balance = batches ? bal_sum / batches : 0;
    rec.lcp = batches ? lcp_sum / batches : 0;
    rec.total = batches ? total_sum / batches : 0;
    rec.rho = rho;
    rec.val_acc = vs.acc;
    rec.mean_residual = vs.mean_residual;
    rec.mean_xi = vs.mean_xi;
    rec.sigma_hat = sigma;
    rec.crbp_fallbacks = fallbacks;
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.checkpoint = result.last_checkpoint;
    result.records.push_back(rec);
    ++result.epochs_run;

    json line;
    line["epoch"] = rec.epoch;
    line["risk"] = rec.risk;
    line["balance"] = rec.balance;
    line["lcp"] = rec.lcp;
    line["total"] = rec.total;
    line["rho"] = rec.rho;
    line["val_acc"] = rec.val_acc;
    line["mean_residual"] = rec.mean_residual;
    if (std::isfinite(rec.mean_xi)) line["mean_xi"] = rec.mean_xi;
    line["sigma_hat"] = rec.sigma_hat;
    line["crbp_fallbacks"] = rec.crbp_fallbacks;
    line["wall_s"] = rec.wall_s;
    line["checkpoint"] = rec.checkpoint;
    std::ofstream log(result.run_log, std::ios::app);
    if (!log) throw TensorError("train: cannot append to " + result.run_log);
    log << line.dump() << "\n";
  }

  return result;
}

}  // namespace

TrainResult train_model(const TrainConfig& cfg, const Dataset& data, const std::string& out_dir,
                        const std::string& resume_from) {
  if (cfg.precision == "f64") return train_impl<double>(cfg, data, out_dir, resume_from);
  return train_impl<float>(cfg, data, out_dir, resume_from);
}

}  // namespace crnn
