#pragma once

#include <string>
#include <vector>

#include "crnnrt/config.hpp"
#include "crnnrt/dataset.hpp"

namespace crnn {

// One appended line of the run log (run.jsonl under the output directory).
struct EpochRecord {
  int epoch = 0;
  double risk = 0, balance = 0, lcp = 0, total = 0;  // epoch means of batch losses
  double rho = 0;
  double val_acc = 0;
  double mean_residual = 0;  // mean final-step ||h_T - h_{T-1}|| over the validation split
  double mean_xi = 0;        // recorded when eval_record is on, else NaN
  double sigma_hat = 0;      // step-Jacobian spectral-norm estimate on a validation batch
  int crbp_fallbacks = 0;    // batches where the Neumann series diverged (truncated fallback)
  double wall_s = 0;
  std::string checkpoint;
};

// Loss went non-finite; training stops and the message names the last intact
// checkpoint (empty when divergence hit before the first epoch completed).
struct TrainDivergence : TensorError {
  std::string last_checkpoint;
  TrainDivergence(const std::string& msg, std::string ckpt)
      : TensorError(msg), last_checkpoint(std::move(ckpt)) {}
};

struct TrainResult {
  std::vector<EpochRecord> records;
  std::string last_checkpoint;  // <out_dir>/last.ckpt (+ sibling last.opt)
  std::string best_checkpoint;  // <out_dir>/best.ckpt, highest validation accuracy
  std::string run_log;          // <out_dir>/run.jsonl
  double best_val_acc = 0;
  int epochs_run = 0;
};

// Trains on the first 90% of `data` (in stored order) and validates on the
// final 10%. Dispatches on cfg.precision. `resume_from` must point at a
// last.ckpt written by a previous run with the same architecture; optimizer
// state is restored from the sibling .opt file and the epoch counter resumes.
TrainResult train_model(const TrainConfig& cfg, const Dataset& data, const std::string& out_dir,
                        const std::string& resume_from = "");

}  // namespace crnn
