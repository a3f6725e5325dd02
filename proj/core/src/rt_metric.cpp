#include "crnnrt/rt_metric.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

namespace crnn {

double xi_integral(const std::vector<double>& eps) {
  if (eps.empty()) throw TensorError("xi_integral: empty curve");
  // Knots at t=0..T with value(0) := value(1).
  double xi = eps[0];  // (eps[0] + eps[0]) / 2
  for (size_t t = 0; t + 1 < eps.size(); ++t) xi += 0.5 * (eps[t] + eps[t + 1]);
  return xi;
}

template <typename T>
UncertaintyCurve uncertainty_curve(HGRUParams<T>& p, const Tensor<T>& images, int steps) {
  NoGradGuard ng;
  const int n = images.shape()[0];
  RolloutTrace<T> trace;
  trace.want_readouts = true;
  auto z = input_drive(p, images, BNMode::Eval);
  rollout(p, z, steps, BNMode::Eval, &trace);

  UncertaintyCurve out;
  out.steps = steps;
  out.epsilon.assign(size_t(n), std::vector<double>(size_t(steps), 0.0));
  for (int t = 0; t < steps; ++t) {
    auto d = evidence_to_output(trace.readouts[size_t(t)]);
    for (int i = 0; i < n; ++i) out.epsilon[size_t(i)][size_t(t)] = d.uncertainty[size_t(i)];
  }
  return out;
}

template <typename T>
std::vector<double> xi_for_images(HGRUParams<T>& p, const Tensor<T>& images, int steps) {
  auto curve = uncertainty_curve(p, images, steps);
  std::vector<double> xi(curve.epsilon.size());
  for (size_t i = 0; i < xi.size(); ++i) xi[i] = xi_integral(curve.epsilon[i]);
  return xi;
}

template <typename T>
SUMap spatial_uncertainty_map(HGRUParams<T>& p, const GrayImage& base, int steps, int stride,
                              int dot_radius, uint8_t dot_value, int batch) {
  if (stride <= 0 || steps <= 0) throw TensorError("spatial_uncertainty_map: bad arguments");
  SUMap map;
  map.width = base.width;
  map.height = base.height;
  map.stride = stride;
  map.radius = dot_radius;
  map.cells_x = (base.width + stride - 1) / stride;
  map.cells_y = (base.height + stride - 1) / stride;
  map.xi.assign(size_t(map.cells_x) * size_t(map.cells_y),
                std::numeric_limits<double>::quiet_NaN());

  const auto interior = enclosed_interior(base);
  std::vector<size_t> cells;
  std::vector<GrayImage> probes;
  auto flush = [&]() {
    if (probes.empty()) return;
    auto xs = images_to_tensor<T>(probes);
    auto xi = xi_for_images(p, xs, steps);
    for (size_t k = 0; k < cells.size(); ++k) map.xi[cells[k]] = xi[k];
    cells.clear();
    probes.clear();
  };

  for (int cy = 0; cy < map.cells_y; ++cy)
    for (int cx = 0; cx < map.cells_x; ++cx) {
      const int px = cx * stride + stride / 2;
      const int py = cy * stride + stride / 2;
      if (!base.inside(px, py)) continue;
      if (!disk_fits(interior, base.width, base.height, px, py, dot_radius)) continue;
      GrayImage probe = base;
      stamp_disk(probe, px, py, dot_radius, dot_value);
      cells.push_back(size_t(cy) * map.cells_x + cx);
      probes.push_back(std::move(probe));
      if (int(probes.size()) >= batch) flush();
    }
  flush();
  return map;
}

template <typename T>
void export_latent_frames(HGRUParams<T>& p, const GrayImage& image, int steps,
                          const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  NoGradGuard ng;
  RolloutTrace<T> trace;
  trace.want_readouts = true;
  trace.want_states = true;
  auto x = images_to_tensor<T>({image});
  auto z = input_drive(p, x, BNMode::Eval);
  rollout(p, z, steps, BNMode::Eval, &trace);

  const int C = p.cfg.channels, H = image.height, W = image.width;
  const size_t hw = size_t(H) * W;
  std::vector<std::vector<double>> mags(static_cast<size_t>(steps));
  double peak = 0.0;
  for (int t = 0; t < steps; ++t) {
    const auto& h = trace.states[size_t(t)].value();
    auto& m = mags[size_t(t)];
    m.assign(hw, 0.0);
    for (int c = 0; c < C; ++c)
      for (size_t i = 0; i < hw; ++i) {
        const double v = double(h[size_t(c) * hw + i]);
        m[i] += v * v;
      }
    for (size_t i = 0; i < hw; ++i) {
      m[i] = std::sqrt(m[i]);
      peak = std::max(peak, m[i]);
    }
  }
  if (peak <= 0.0) peak = 1.0;

  char name[32];
  for (int t = 0; t < steps; ++t) {
    for (auto& v : mags[size_t(t)]) v /= peak;
    std::snprintf(name, sizeof(name), "frame_%03d.png", t);
    write_png_gray((fs::path(out_dir) / name).string(),
                   gray_from_values(mags[size_t(t)], W, H));
  }

  std::ofstream csv(fs::path(out_dir) / "epsilon.csv");
  if (!csv) throw TensorError("export_latent_frames: cannot write epsilon.csv");
  csv << "t,epsilon\n";
  for (int t = 0; t < steps; ++t) {
    auto d = evidence_to_output(trace.readouts[size_t(t)]);
    csv << (t + 1) << "," << d.uncertainty[0] << "\n";
  }
}

#define CRNN_RT_INSTANTIATE(T)                                                              \
  template UncertaintyCurve uncertainty_curve<T>(HGRUParams<T>&, const Tensor<T>&, int);    \
  template std::vector<double> xi_for_images<T>(HGRUParams<T>&, const Tensor<T>&, int);     \
  template SUMap spatial_uncertainty_map<T>(HGRUParams<T>&, const GrayImage&, int, int,     \
                                            int, uint8_t, int);                            \
  template void export_latent_frames<T>(HGRUParams<T>&, const GrayImage&, int,             \
                                        const std::string&);

CRNN_RT_INSTANTIATE(float)
CRNN_RT_INSTANTIATE(double)

}  // namespace crnn
