#include "crnnrt/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "crnnrt/checkpoint.hpp"
#include "crnnrt/evidential.hpp"
#include "crnnrt/rt_metric.hpp"

using nlohmann::json;

namespace crnn {

namespace {

// %.17g round-trips doubles exactly, so repeated runs emit identical bytes.
std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

template <typename T>
EvalReport evaluate_model(HGRUParams<T>& p, const Dataset& data, int steps, int batch,
                          const std::string& csv_path) {
  if (steps < 1) throw TensorError("evaluate: steps must be >= 1");
  if (batch < 1) throw TensorError("evaluate: batch must be >= 1");
  const auto& items = data.items;
  if (items.empty()) throw TensorError("evaluate: dataset is empty");

  NoGradGuard ng;
  EvalReport rep;
  rep.rows.reserve(items.size());
  int correct = 0;
  double xi_sum = 0;

  for (size_t lo = 0; lo < items.size(); lo += size_t(batch)) {
    const size_t hi = std::min(items.size(), lo + size_t(batch));
    std::vector<GrayImage> imgs;
    imgs.reserve(hi - lo);
    for (size_t i = lo; i < hi; ++i) imgs.push_back(items[i].image);
    auto z = input_drive(p, images_to_tensor<T>(imgs), BNMode::Eval);
    RolloutTrace<T> tr;
    tr.want_readouts = true;
    rollout(p, z, steps, BNMode::Eval, &tr);

    const size_t nb = hi - lo;
    std::vector<std::vector<double>> eps(nb);
    for (const auto& logits : tr.readouts) {
      const auto o = evidence_to_output(logits);
      for (size_t i = 0; i < nb; ++i) eps[i].push_back(double(o.uncertainty[i]));
    }
    const auto fin = evidence_to_output(tr.readouts.back());
    for (size_t i = 0; i < nb; ++i) {
      EvalRow row;
      row.id = int(lo + i);
      row.label = items[lo + i].label;
      row.pred = fin.predicted[i];
      row.correct = row.pred == row.label;
      row.xi = xi_integral(eps[i]);
      correct += row.correct;
      xi_sum += row.xi;
      rep.rows.push_back(row);
    }
  }

  rep.accuracy = double(correct) / double(items.size());
  rep.mean_xi = xi_sum / double(items.size());

  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw TensorError("evaluate: cannot write " + csv_path);
    out << "id,label,pred,correct,xi,euclidean_dist,path_len,geodesic,segment_len_0,"
           "segment_len_1,t_junctions_on_path,t_junctions_on_segment,condition,seed\n";
    for (const auto& row : rep.rows) {
      const auto& s = items[size_t(row.id)];
      out << row.id << ',' << row.label << ',' << row.pred << ',' << int(row.correct) << ','
          << num(row.xi) << ',' << num(s.euclidean_dist) << ',' << num(s.path_len) << ','
          << num(s.geodesic) << ',' << s.segment_lens[0] << ',' << s.segment_lens[1] << ','
          << s.t_junctions_on_path << ',' << s.t_junctions_on_segment << ',' << s.condition
          << ',' << s.seed << '\n';
    }
    rep.csv_path = csv_path;
  }
  return rep;
}

EvalReport evaluate_checkpoint(const std::string& ckpt_path, const Dataset& data, int steps,
                               int batch, const std::string& csv_path) {
  std::ifstream in(ckpt_path, std::ios::binary);
  if (!in) throw TensorError("evaluate: cannot read checkpoint " + ckpt_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw TensorError("evaluate: checkpoint " + ckpt_path + " is not valid JSON: " + e.what());
  }
  const std::string dtype = j.value("dtype", "");
  const json meta = j.value("meta", json::object());
  const json arch = j.value("arch", json::object());

  const std::string ckpt_task = meta.value("task", "");
  if (!ckpt_task.empty() && !data.manifest.task.empty() && ckpt_task != data.manifest.task)
    throw TensorError("evaluate: checkpoint was trained on task '" + ckpt_task +
                      "' but the dataset is task '" + data.manifest.task + "'");

  if (!data.items.empty()) {
    const int img_w = meta.value("image_w", 0), img_h = meta.value("image_h", 0);
    const auto& im0 = data.items[0].image;
    if (img_w > 0 && (im0.width != img_w || im0.height != img_h))
      throw TensorError("evaluate: checkpoint expects " + std::to_string(img_w) + "x" +
                        std::to_string(img_h) + " images, dataset provides " +
                        std::to_string(im0.width) + "x" + std::to_string(im0.height));
    int max_label = 0;
    for (const auto& s : data.items) max_label = std::max(max_label, s.label);
    const int classes = arch.value("classes", 2);
    if (max_label + 1 > classes)
      throw TensorError("evaluate: checkpoint has " + std::to_string(classes) +
                        " classes but the dataset uses labels up to " +
                        std::to_string(max_label));
  }

  const json cfgj = meta.value("config", json::object());
  if (steps <= 0) steps = cfgj.value("T", 40);
  if (batch <= 0) batch = cfgj.value("batch", 32);

  if (dtype == "f64") {
    auto p = load_checkpoint<double>(ckpt_path);
    return evaluate_model<double>(p, data, steps, batch, csv_path);
  }
  if (dtype == "f32") {
    auto p = load_checkpoint<float>(ckpt_path);
    return evaluate_model<float>(p, data, steps, batch, csv_path);
  }
  throw TensorError("evaluate: checkpoint has unknown dtype '" + dtype + "'");
}

double accuracy_from_csv(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw TensorError("evaluate: cannot read " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw TensorError("evaluate: " + csv_path + " is empty");
  const auto header = split_csv_line(line);
  int label_col = -1, pred_col = -1;
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "label") label_col = int(i);
    if (header[i] == "pred") pred_col = int(i);
  }
  if (label_col < 0 || pred_col < 0)
    throw TensorError("evaluate: " + csv_path + " lacks label/pred columns");
  int64_t n = 0, correct = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (int(cells.size()) <= std::max(label_col, pred_col))
      throw TensorError("evaluate: malformed row in " + csv_path);
    ++n;
    correct += cells[size_t(label_col)] == cells[size_t(pred_col)];
  }
  if (n == 0) throw TensorError("evaluate: " + csv_path + " has no data rows");
  return double(correct) / double(n);
}

template EvalReport evaluate_model<float>(HGRUParams<float>&, const Dataset&, int, int,
                                          const std::string&);
template EvalReport evaluate_model<double>(HGRUParams<double>&, const Dataset&, int, int,
                                           const std::string&);

}  // namespace crnn
