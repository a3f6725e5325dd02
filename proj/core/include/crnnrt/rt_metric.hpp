#pragma once

#include <string>
#include <vector>

#include "crnnrt/evidential.hpp"
#include "crnnrt/hgru.hpp"
#include "crnnrt/image.hpp"

namespace crnn {

// Per-sample Dirichlet uncertainty after each recurrent step.
struct UncertaintyCurve {
  int steps = 0;
  std::vector<std::vector<double>> epsilon;  // [n][steps]; index t holds step t+1
};

// Area under the uncertainty trace over [0, steps] by the trapezoid rule. The
// unrecorded t=0 value is taken as the first recorded point, so a curve that
// is constant at 1 integrates to exactly the step count.
double xi_integral(const std::vector<double>& eps);

// Value-only rollout recording the readout uncertainty at every step.
// Runs with frozen normalization statistics.
template <typename T>
UncertaintyCurve uncertainty_curve(HGRUParams<T>& p, const Tensor<T>& images, int steps);

// Convenience: xi_integral over each sample's curve.
template <typename T>
std::vector<double> xi_for_images(HGRUParams<T>& p, const Tensor<T>& images, int steps);

// xi sampled on a probe grid: a disk-shaped cue is stamped at each grid cell
// whose disk fits inside the region enclosed by the image's strokes, and the
// model is run on each probed variant. Cells whose probe does not fit hold NaN.
struct SUMap {
  int width = 0, height = 0;  // source image size
  int stride = 6, radius = 2;
  int cells_x = 0, cells_y = 0;
  std::vector<double> xi;  // [cells_y * cells_x], row-major

  double at(int cx, int cy) const { return xi[size_t(cy) * cells_x + cx]; }
};

template <typename T>
SUMap spatial_uncertainty_map(HGRUParams<T>& p, const GrayImage& base, int steps,
                              int stride = 6, int dot_radius = 2, uint8_t dot_value = 128,
                              int batch = 32);

// Writes frame_000.png ... frame_{T-1}.png (per-pixel state magnitude, jointly
// normalized across the run) plus epsilon.csv with "t,epsilon" rows into
// out_dir, creating the directory if needed.
template <typename T>
void export_latent_frames(HGRUParams<T>& p, const GrayImage& image, int steps,
                          const std::string& out_dir);

}  // namespace crnn
