#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crnnrt/common.hpp"
#include "crnnrt/tensor.hpp"

namespace crnn {

// 8-bit grayscale raster, row-major, origin top-left.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> px;

  GrayImage() = default;
  GrayImage(int w, int h, uint8_t fill = 0)
      : width(w), height(h), px(size_t(w) * size_t(h), fill) {}

  uint8_t at(int x, int y) const { return px[size_t(y) * width + x]; }
  void set(int x, int y, uint8_t v) { px[size_t(y) * width + x] = v; }
  bool inside(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

// PNG IO (8-bit grayscale; reads convert other PNG layouts down to gray).
GrayImage read_png_gray(const std::string& path);
void write_png_gray(const std::string& path, const GrayImage& img);

// Batch of images -> [n,1,h,w] tensor scaled to [0,1]. All images must share
// one size.
template <typename T>
Tensor<T> images_to_tensor(const std::vector<GrayImage>& imgs);

// Values in [0,1] (clamped) -> 8-bit raster.
GrayImage gray_from_values(const std::vector<double>& v, int w, int h);

// 4-connected component labeling over mask!=0 pixels. labels gets one id per
// pixel (-1 where mask==0); returns the number of components.
int label_components(const std::vector<uint8_t>& mask, int w, int h, std::vector<int>& labels);

// Pixels strictly enclosed by bright strokes: below the stroke threshold and
// not reachable from the image border through below-threshold pixels.
std::vector<uint8_t> enclosed_interior(const GrayImage& img, uint8_t stroke_threshold = 200);

// Filled disk of the given radius (Euclidean, inclusive) clipped to bounds.
void stamp_disk(GrayImage& img, int cx, int cy, int radius, uint8_t value);

// True when every pixel of the disk lies inside the image and on mask!=0.
bool disk_fits(const std::vector<uint8_t>& mask, int w, int h, int cx, int cy, int radius);

}  // namespace crnn
