#include "crnnrt/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace crnn {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

GrayImage read_png_gray(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw TensorError("cannot open image for reading: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw TensorError("png read init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw TensorError("png info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw TensorError("png decode failed: " + path);
  }

  png_init_io(png, f.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.px.data() + size_t(y) * w;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png_gray(const std::string& path, const GrayImage& img) {
  if (img.width <= 0 || img.height <= 0 ||
      img.px.size() != size_t(img.width) * size_t(img.height))
    throw TensorError("write_png_gray: malformed image");

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw TensorError("cannot open image for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw TensorError("png write init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw TensorError("png info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw TensorError("png encode failed: " + path);
  }

  png_init_io(png, f.get());
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.px.data() + size_t(y) * img.width);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

template <typename T>
Tensor<T> images_to_tensor(const std::vector<GrayImage>& imgs) {
  if (imgs.empty()) throw TensorError("images_to_tensor: empty batch");
  const int w = imgs[0].width, h = imgs[0].height;
  std::vector<T> data;
  data.reserve(imgs.size() * size_t(w) * size_t(h));
  for (const auto& im : imgs) {
    if (im.width != w || im.height != h)
      throw TensorError("images_to_tensor: mixed image sizes in batch");
    for (uint8_t v : im.px) data.push_back(T(v) / T(255));
  }
  return Tensor<T>::from({int(imgs.size()), 1, h, w}, std::move(data));
}

GrayImage gray_from_values(const std::vector<double>& v, int w, int h) {
  if (v.size() != size_t(w) * size_t(h)) throw TensorError("gray_from_values: size mismatch");
  GrayImage img(w, h);
  for (size_t i = 0; i < v.size(); ++i) {
    double x = std::min(1.0, std::max(0.0, v[i]));
    img.px[i] = uint8_t(std::lround(x * 255.0));
  }
  return img;
}

int label_components(const std::vector<uint8_t>& mask, int w, int h, std::vector<int>& labels) {
  if (mask.size() != size_t(w) * size_t(h)) throw TensorError("label_components: size mismatch");
  labels.assign(mask.size(), -1);
  int next = 0;
  std::vector<int> stack;
  for (size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || labels[start] != -1) continue;
    stack.push_back(int(start));
    labels[start] = next;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      const int x = i % w, y = i / w;
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
        const int j = ny[k] * w + nx[k];
        if (mask[j] && labels[j] == -1) {
          labels[j] = next;
          stack.push_back(j);
        }
      }
    }
    ++next;
  }
  return next;
}

std::vector<uint8_t> enclosed_interior(const GrayImage& img, uint8_t stroke_threshold) {
  const int w = img.width, h = img.height;
  std::vector<uint8_t> open(size_t(w) * h, 0);  // below-threshold pixels
  for (size_t i = 0; i < img.px.size(); ++i) open[i] = img.px[i] < stroke_threshold;

  std::vector<uint8_t> outside(open.size(), 0);
  std::vector<int> stack;
  auto seed = [&](int x, int y) {
    const int i = y * w + x;
    if (open[i] && !outside[i]) {
      outside[i] = 1;
      stack.push_back(i);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const int x = i % w, y = i / w;
    const int nx[4] = {x - 1, x + 1, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
      const int j = ny[k] * w + nx[k];
      if (open[j] && !outside[j]) {
        outside[j] = 1;
        stack.push_back(j);
      }
    }
  }

  std::vector<uint8_t> interior(open.size(), 0);
  for (size_t i = 0; i < open.size(); ++i) interior[i] = open[i] && !outside[i];
  return interior;
}

void stamp_disk(GrayImage& img, int cx, int cy, int radius, uint8_t value) {
  for (int y = cy - radius; y <= cy + radius; ++y)
    for (int x = cx - radius; x <= cx + radius; ++x) {
      if (!img.inside(x, y)) continue;
      const int dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= radius * radius) img.set(x, y, value);
    }
}

bool disk_fits(const std::vector<uint8_t>& mask, int w, int h, int cx, int cy, int radius) {
  for (int y = cy - radius; y <= cy + radius; ++y)
    for (int x = cx - radius; x <= cx + radius; ++x) {
      const int dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy > radius * radius) continue;
      if (x < 0 || x >= w || y < 0 || y >= h) return false;
      if (!mask[size_t(y) * w + x]) return false;
    }
  return true;
}

template Tensor<float> images_to_tensor<float>(const std::vector<GrayImage>&);
template Tensor<double> images_to_tensor<double>(const std::vector<GrayImage>&);

}  // namespace crnn
