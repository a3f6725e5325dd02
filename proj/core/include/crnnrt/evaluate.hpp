#pragma once

#include <string>
#include <vector>

#include "crnnrt/config.hpp"
#include "crnnrt/dataset.hpp"
#include "crnnrt/hgru.hpp"

namespace crnn {

// One scored stimulus: prediction from the final readout, xi from the
// uncertainty curve over the whole rollout.
struct EvalRow {
  int id = 0;
  int label = 0;
  int pred = 0;
  bool correct = false;
  double xi = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double accuracy = 0.0;
  double mean_xi = 0.0;
  std::string csv_path;  // empty when no CSV was requested
};

// Runs an Eval-mode rollout over every stimulus and scores it. When csv_path
// is non-empty, writes one row per stimulus:
//   id,label,pred,correct,xi,euclidean_dist,path_len,geodesic,segment_len_0,
//   segment_len_1,t_junctions_on_path,t_junctions_on_segment,condition,seed
// Accuracy is recomputable from the label/pred columns alone. Repeated calls
// on the same inputs produce byte-identical files.
template <typename T>
EvalReport evaluate_model(HGRUParams<T>& p, const Dataset& data, int steps, int batch,
                          const std::string& csv_path = "");

// Loads a checkpoint (either precision), cross-checks its metadata against the
// dataset (task name, image size, class count), and evaluates. `steps`/`batch`
// <= 0 fall back to the values stored in the checkpoint's config.
EvalReport evaluate_checkpoint(const std::string& ckpt_path, const Dataset& data, int steps = 0,
                               int batch = 0, const std::string& csv_path = "");

// Recomputes accuracy from a CSV produced by evaluate_model, using only the
// label and pred columns.
double accuracy_from_csv(const std::string& csv_path);

}  // namespace crnn
