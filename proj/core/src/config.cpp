#include "crnnrt/config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

using nlohmann::json;

namespace crnn {

void TrainConfig::validate() const {
  if (task != "mazes" && task != "grouping")
    throw TensorError("config: task must be 'mazes' or 'grouping', got '" + task + "'");
  if (T < 1) throw TensorError("config: T must be >= 1");
  if (gamma < 0) throw TensorError("config: gamma must be >= 0");
  if (!(lr > 0)) throw TensorError("config: lr must be > 0");
  if (optimizer.name != "adam")
    throw TensorError("config: optimizer.name must be 'adam', got '" + optimizer.name + "'");
  if (!(optimizer.beta1 >= 0 && optimizer.beta1 < 1) ||
      !(optimizer.beta2 >= 0 && optimizer.beta2 < 1))
    throw TensorError("config: adam betas must lie in [0, 1)");
  if (!(optimizer.eps > 0)) throw TensorError("config: optimizer.eps must be > 0");
  if (batch < 1) throw TensorError("config: batch must be >= 1");
  if (epochs < 1) throw TensorError("config: epochs must be >= 1");
  if (tau < 1) throw TensorError("config: tau must be >= 1");
  if (channels < 1) throw TensorError("config: channels must be >= 1");
  if (precision != "f32" && precision != "f64")
    throw TensorError("config: precision must be 'f32' or 'f64', got '" + precision + "'");
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw TensorError("config: unknown field '" + it.key() + "' in " + where);
}

}  // namespace

TrainConfig parse_train_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw TensorError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw TensorError("config: top level must be a JSON object");
  reject_unknown(j,
                 {"task", "T", "gamma", "lr", "optimizer", "batch", "epochs", "tau", "seed",
                  "channels", "precision", "eval_record"},
                 "config");
  TrainConfig c;
  try {
    c.task = j.value("task", c.task);
    c.T = j.value("T", c.T);
    c.gamma = j.value("gamma", c.gamma);
    c.lr = j.value("lr", c.lr);
    if (j.contains("optimizer")) {
      const json& o = j["optimizer"];
      if (!o.is_object()) throw TensorError("config: optimizer must be an object");
      reject_unknown(o, {"name", "beta1", "beta2", "eps"}, "optimizer");
      c.optimizer.name = o.value("name", c.optimizer.name);
      c.optimizer.beta1 = o.value("beta1", c.optimizer.beta1);
      c.optimizer.beta2 = o.value("beta2", c.optimizer.beta2);
      c.optimizer.eps = o.value("eps", c.optimizer.eps);
    }
    c.batch = j.value("batch", c.batch);
    c.epochs = j.value("epochs", c.epochs);
    c.tau = j.value("tau", c.tau);
    c.seed = j.value("seed", c.seed);
    c.channels = j.value("channels", c.channels);
    c.precision = j.value("precision", c.precision);
    c.eval_record = j.value("eval_record", c.eval_record);
  } catch (const json::exception& e) {
    throw TensorError(std::string("config: type error: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw TensorError("config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_train_config(text);
}

std::string dump_train_config(const TrainConfig& cfg) {
  json j;
  j["task"] = cfg.task;
  j["T"] = cfg.T;
  j["gamma"] = cfg.gamma;
  j["lr"] = cfg.lr;
  j["optimizer"] = {{"name", cfg.optimizer.name},
                    {"beta1", cfg.optimizer.beta1},
                    {"beta2", cfg.optimizer.beta2},
                    {"eps", cfg.optimizer.eps}};
  j["batch"] = cfg.batch;
  j["epochs"] = cfg.epochs;
  j["tau"] = cfg.tau;
  j["seed"] = cfg.seed;
  j["channels"] = cfg.channels;
  j["precision"] = cfg.precision;
  j["eval_record"] = cfg.eval_record;
  return j.dump(2);
}

void save_train_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw TensorError("config: cannot open '" + path + "' for writing");
  f << dump_train_config(cfg) << "\n";
}

TrainConfig train_preset(const std::string& name) {
  TrainConfig c;
  if (name == "mazes-desk") {
    c.task = "mazes";
    c.T = 40;
    c.gamma = 1000.0;
    c.epochs = 30;
    c.tau = 20;
    c.channels = 32;
  } else if (name == "mazes-paper") {
    c.task = "mazes";
    c.T = 80;
    c.gamma = 1000.0;
    c.epochs = 30;
    c.tau = 20;
    c.channels = 32;
  } else if (name == "grouping-desk") {
    c.task = "grouping";
    c.T = 30;
    c.gamma = 100.0;
    c.epochs = 40;
    c.tau = 16;
    c.channels = 8;
  } else if (name == "grouping-paper") {
    c.task = "grouping";
    c.T = 40;
    c.gamma = 100.0;
    c.epochs = 40;
    c.tau = 16;
    c.channels = 32;
  } else {
    throw TensorError("config: unknown preset '" + name +
                      "' (expected mazes-desk, mazes-paper, grouping-desk, grouping-paper)");
  }
  c.validate();
  return c;
}

}  // namespace crnn
