#pragma once

#include <cstdint>
#include <string>

#include "crnnrt/common.hpp"

namespace crnn {

struct AdamConfig {
  std::string name = "adam";
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Training hyperparameters. The JSON form mirrors these field names exactly;
// unknown keys are rejected so typos cannot silently fall back to defaults.
struct TrainConfig {
  std::string task = "mazes";  // "mazes" | "grouping"
  int T = 40;                  // rollout steps
  double gamma = 100.0;        // contraction-penalty weight
  double lr = 1e-3;
  AdamConfig optimizer;
  int batch = 32;
  int epochs = 30;
  int tau = 20;  // balance-term annealing horizon, in epochs
  uint64_t seed = 0;
  int channels = 32;
  std::string precision = "f32";  // "f32" | "f64"
  bool eval_record = true;        // also log mean xi over the validation split

  void validate() const;  // throws TensorError on out-of-range fields
};

TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::string& path);
std::string dump_train_config(const TrainConfig& cfg);
void save_train_config(const TrainConfig& cfg, const std::string& path);

// Named presets: "mazes-desk", "mazes-paper", "grouping-desk", "grouping-paper".
TrainConfig train_preset(const std::string& name);

}  // namespace crnn
