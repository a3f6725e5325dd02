#include <algorithm>
#include <cmath>
#include <deque>

#include "crnnrt/stimuli.hpp"

namespace crnn {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSeriesStepPx = 14.0;
constexpr double kSeriesInsetPx = 3.0;  // per-end inset beyond the dot-fit erosion

double urand(std::mt19937_64& rng) {  // uniform [0,1)
  return double(rng() >> 11) * 0x1.0p-53;
}

// Smooth closed shape: radius r0 modulated by harmonics k=2..5 of the polar
// angle, then stretched by `aspect` along the (axc, axs) axis. Single-valued
// in angle before the affine stretch, so the contour never self-intersects.
struct Blob {
  double cx = 0, cy = 0, r0 = 0;
  double amp[4] = {0, 0, 0, 0};
  double phase[4] = {0, 0, 0, 0};
  double aspect = 1.0, axc = 1.0, axs = 0.0;

  double radius_at(double theta) const {
    double r = r0;
    for (int k = 0; k < 4; ++k) r += r0 * amp[k] * std::cos((k + 2) * theta + phase[k]);
    return r;
  }
  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = (dx * axc + dy * axs) / aspect;
    const double v = -dx * axs + dy * axc;
    return std::hypot(u, v) <= radius_at(std::atan2(v, u));
  }
  double max_radius() const {
    double a = 0;
    for (double v : amp) a += v;
    return r0 * (1.0 + a);
  }
  // Upper bound on the support (farthest extent from the center) along a unit
  // direction; contour points are (aspect*r*cos, r*sin) in the local frame.
  double bound_dir(double ux, double uy) const {
    const double c = ux * axc + uy * axs, s = -ux * axs + uy * axc;
    return max_radius() * std::sqrt(aspect * aspect * c * c + s * s);
  }
  double bound_x() const { return bound_dir(1.0, 0.0); }
  double bound_y() const { return bound_dir(0.0, 1.0); }
};

Blob random_blob(std::mt19937_64& rng, int canvas, double r_lo_frac, double r_hi_frac,
                 double max_amp) {
  Blob b;
  b.r0 = canvas * (r_lo_frac + (r_hi_frac - r_lo_frac) * urand(rng));
  for (int k = 0; k < 4; ++k) {
    b.amp[k] = max_amp * urand(rng);
    b.phase[k] = 2.0 * kPi * urand(rng);
  }
  return b;
}

template <typename InsideFn>
std::vector<uint8_t> rasterize(int w, int h, InsideFn inside) {
  std::vector<uint8_t> m(size_t(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m[size_t(y) * w + x] = inside(double(x), double(y)) ? 1 : 0;
  return m;
}

std::vector<uint8_t> erode4(const std::vector<uint8_t>& m, int w, int h) {
  std::vector<uint8_t> out(m.size(), 0);
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      const size_t i = size_t(y) * w + x;
      out[i] = m[i] && m[i - 1] && m[i + 1] && m[i - size_t(w)] && m[i + size_t(w)];
    }
  return out;
}

// Pixels where a dot disk of the given radius fits entirely inside the mask.
std::vector<int> fit_pixels(const std::vector<uint8_t>& mask, int w, int h, int radius) {
  std::vector<int> out;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask[size_t(y) * w + x] && disk_fits(mask, w, h, x, y, radius))
        out.push_back(y * w + x);
  return out;
}

// 4-connected BFS distance within a mask, in pixel steps; -1 unreachable.
int mask_geodesic(const std::vector<uint8_t>& mask, int w, int h, int from, int to) {
  std::vector<int> dist(mask.size(), -1);
  std::deque<int> q{from};
  dist[size_t(from)] = 0;
  while (!q.empty()) {
    const int i = q.front();
    q.pop_front();
    if (i == to) return dist[size_t(i)];
    const int x = i % w, y = i / w;
    const int nx[4] = {x - 1, x + 1, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
      const int j = ny[k] * w + nx[k];
      if (mask[size_t(j)] && dist[size_t(j)] < 0) {
        dist[size_t(j)] = dist[size_t(i)] + 1;
        q.push_back(j);
      }
    }
  }
  return -1;
}

// Distance from the whole non-mask region, per mask pixel (medialness).
std::vector<int> boundary_distance(const std::vector<uint8_t>& mask, int w, int h) {
  std::vector<int> dist(mask.size(), -1);
  std::deque<int> q;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t i = size_t(y) * w + x;
      if (!mask[i]) {
        dist[i] = 0;
        q.push_back(int(i));
      }
    }
  while (!q.empty()) {
    const int i = q.front();
    q.pop_front();
    const int x = i % w, y = i / w;
    const int nx[4] = {x - 1, x + 1, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
      const int j = ny[k] * w + nx[k];
      if (dist[size_t(j)] < 0) {
        dist[size_t(j)] = dist[size_t(i)] + 1;
        q.push_back(j);
      }
    }
  }
  return dist;
}

double dist_point_segment(double px, double py, double ax, double ay, double bx, double by) {
  const double vx = bx - ax, vy = by - ay;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
  t = std::min(1.0, std::max(0.0, t));
  return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

struct SceneParts {
  std::vector<std::vector<uint8_t>> regions;  // filled shapes incl. future stroke
  std::vector<std::pair<int, int>> anchors;
};

// Places one distractor blob with the given clearance function (signed
// distance from a candidate center to the primary shape).
template <typename ClearFn>
bool place_distractor(std::mt19937_64& rng, int canvas, ClearFn clearance, Blob& out) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    Blob b = random_blob(rng, canvas, 0.085, 0.105, 0.06);
    const double margin = b.max_radius() + 3.0;
    b.cx = margin + (canvas - 2 * margin) * urand(rng);
    b.cy = margin + (canvas - 2 * margin) * urand(rng);
    if (clearance(b.cx, b.cy) >= b.max_radius() + 3.0) {
      out = b;
      return true;
    }
  }
  return false;
}

bool build_scene(std::mt19937_64& rng, int canvas, ShapePreset preset, SceneParts& parts) {
  const int w = canvas, h = canvas;
  parts.regions.clear();
  parts.anchors.clear();

  if (preset == ShapePreset::Standard || preset == ShapePreset::Convex) {
    const double max_amp = preset == ShapePreset::Convex ? 0.04 : 0.12;
    Blob a = random_blob(rng, canvas, 0.12, 0.20, max_amp);
    Blob b = random_blob(rng, canvas, 0.12, 0.20, max_amp);
    for (Blob* blob : {&a, &b}) {
      const double axis = 2.0 * kPi * urand(rng);
      blob->axc = std::cos(axis);
      blob->axs = std::sin(axis);
      // Cap keeps the stretched bounding box placeable inside the canvas.
      blob->aspect = std::min(1.0 + 1.2 * urand(rng), 0.44 * canvas / blob->max_radius());
    }
    const double amx = a.bound_x() + 3.0, amy = a.bound_y() + 3.0;
    const double bmx = b.bound_x() + 3.0, bmy = b.bound_y() + 3.0;
    bool placed = false;
    for (int attempt = 0; attempt < 200; ++attempt) {
      a.cx = amx + (canvas - 2 * amx) * urand(rng);
      a.cy = amy + (canvas - 2 * amy) * urand(rng);
      b.cx = bmx + (canvas - 2 * bmx) * urand(rng);
      b.cy = bmy + (canvas - 2 * bmy) * urand(rng);
      const double dist = std::hypot(b.cx - a.cx, b.cy - a.cy);
      if (dist <= 0) continue;
      const double ux = (b.cx - a.cx) / dist, uy = (b.cy - a.cy) / dist;
      if (dist >= a.bound_dir(ux, uy) + b.bound_dir(ux, uy) + 4.0) {
        placed = true;
        break;
      }
    }
    if (!placed) return false;
    parts.regions.push_back(rasterize(w, h, [&](double x, double y) { return a.contains(x, y); }));
    parts.regions.push_back(rasterize(w, h, [&](double x, double y) { return b.contains(x, y); }));
    return true;
  }

  if (preset == ShapePreset::Narrow || preset == ShapePreset::Wide) {
    const double R = 0.12 * canvas;
    const double D = 0.42 * canvas;
    // Neck half-widths leave a connected interior channel after the 2px
    // stroke erosion: ~5px of fill when narrow, ~14px when wide.
    const double hw = preset == ShapePreset::Narrow ? std::max(4.5, 0.047 * canvas)
                                                    : std::max(9.0, 0.094 * canvas);
    const double cx = canvas / 2.0 + (urand(rng) - 0.5) * 0.08 * canvas;
    const double cy = canvas / 2.0 + (urand(rng) - 0.5) * 0.08 * canvas;
    const double lx = cx - D / 2, rx = cx + D / 2;
    auto inside = [&](double x, double y) {
      if (std::hypot(x - lx, y - cy) <= R || std::hypot(x - rx, y - cy) <= R) return true;
      return std::fabs(y - cy) <= hw && x >= lx && x <= rx;
    };
    auto clearance = [&](double px, double py) {
      const double d_lobes =
          std::min(std::hypot(px - lx, py - cy), std::hypot(px - rx, py - cy)) - R;
      const double d_neck = dist_point_segment(px, py, lx, cy, rx, cy) - hw;
      return std::min(d_lobes, d_neck);
    };
    Blob distractor;
    if (!place_distractor(rng, canvas, clearance, distractor)) return false;
    parts.regions.push_back(rasterize(w, h, inside));
    parts.regions.push_back(
        rasterize(w, h, [&](double x, double y) { return distractor.contains(x, y); }));
    parts.anchors = {{int(std::lround(lx)), int(std::lround(cy))},
                     {int(std::lround(rx)), int(std::lround(cy))}};
    return true;
  }

  // Curved / Straight: tube with matched tip separation E.
  const double E = 0.42 * canvas;
  const double tube_hw = std::max(3.0, 0.05 * canvas);
  const double cx = canvas / 2.0 + (urand(rng) - 0.5) * 0.06 * canvas;
  const double cy = canvas / 2.0 + (urand(rng) - 0.5) * 0.06 * canvas;
  const double orient = 2.0 * kPi * urand(rng);

  if (preset == ShapePreset::Curved) {
    // Arc of 240 degrees: the gap spans 120 degrees around `orient`, so the
    // arc endpoints sit 60 degrees either side of it and their chord (across
    // the gap) is 2R*sin(60) = R*sqrt(3) = E.
    const double R = E / std::sqrt(3.0);
    const double t0 = orient + kPi / 3.0;  // tip angles at the gap edges
    const double t1 = orient - kPi / 3.0;
    auto angdiff = [](double a, double b) {
      double d = std::fmod(a - b + 3.0 * kPi, 2.0 * kPi) - kPi;
      return std::fabs(d);
    };
    const double tip0x = cx + R * std::cos(t0), tip0y = cy + R * std::sin(t0);
    const double tip1x = cx + R * std::cos(t1), tip1y = cy + R * std::sin(t1);
    auto inside = [&](double x, double y) {
      if (std::hypot(x - tip0x, y - tip0y) <= tube_hw) return true;  // end caps
      if (std::hypot(x - tip1x, y - tip1y) <= tube_hw) return true;
      const double rr = std::hypot(x - cx, y - cy);
      if (std::fabs(rr - R) > tube_hw) return false;
      return angdiff(std::atan2(y - cy, x - cx), orient) >= kPi / 3.0;  // outside the gap
    };
    auto clearance = [&](double px, double py) {
      return std::fabs(std::hypot(px - cx, py - cy)) - (R + tube_hw);
    };
    Blob distractor;
    if (!place_distractor(rng, canvas, clearance, distractor)) return false;
    parts.regions.push_back(rasterize(canvas, canvas, inside));
    parts.regions.push_back(rasterize(
        canvas, canvas, [&](double x, double y) { return distractor.contains(x, y); }));
    parts.anchors = {{int(std::lround(tip0x)), int(std::lround(tip0y))},
                     {int(std::lround(tip1x)), int(std::lround(tip1y))}};
    return true;
  }

  // Straight tube.
  const double ax = cx - (E / 2) * std::cos(orient), ay = cy - (E / 2) * std::sin(orient);
  const double bx = cx + (E / 2) * std::cos(orient), by = cy + (E / 2) * std::sin(orient);
  auto inside = [&](double x, double y) {
    return dist_point_segment(x, y, ax, ay, bx, by) <= tube_hw;
  };
  auto clearance = [&](double px, double py) {
    return dist_point_segment(px, py, ax, ay, bx, by) - tube_hw;
  };
  Blob distractor;
  if (!place_distractor(rng, canvas, clearance, distractor)) return false;
  parts.regions.push_back(rasterize(canvas, canvas, inside));
  parts.regions.push_back(
      rasterize(canvas, canvas, [&](double x, double y) { return distractor.contains(x, y); }));
  parts.anchors = {{int(std::lround(ax)), int(std::lround(ay))},
                   {int(std::lround(bx)), int(std::lround(by))}};
  return true;
}

}  // namespace

OutlineSet gen_outline(std::mt19937_64& rng, int canvas_px, ShapePreset preset) {
  if (canvas_px < 48) throw TensorError("gen_outline: canvas too small");
  const int w = canvas_px, h = canvas_px;

  for (int attempt = 0; attempt < 50; ++attempt) {
    SceneParts parts;
    if (!build_scene(rng, canvas_px, preset, parts)) continue;

    // Shapes must stay clear of the border and of each other.
    bool overlap = false;
    for (size_t i = 0; i < parts.regions[0].size() && !overlap; ++i)
      overlap = parts.regions[0][i] && parts.regions[1][i];
    if (overlap) continue;

    OutlineSet out;
    out.image = GrayImage(w, h, 0);
    out.anchors = parts.anchors;
    bool viable = true;
    for (const auto& region : parts.regions) {
      auto interior = erode4(erode4(region, w, h), w, h);  // ~2 px stroke
      size_t count = 0;
      for (uint8_t v : interior) count += v;
      if (count < 100) {
        viable = false;
        break;
      }
      for (size_t i = 0; i < region.size(); ++i)
        if (region[i] && !interior[i]) out.image.px[i] = 255;
      out.masks.push_back(std::move(interior));
    }
    if (!viable) continue;
    return out;
  }
  throw TensorError("gen_outline: could not place shapes after repeated attempts");
}

Stimulus gen_grouping(std::mt19937_64& rng, const GroupingCondition& cond) {
  if (cond.label != 0 && cond.label != 1) throw TensorError("gen_grouping: label must be 0 or 1");
  if (cond.dot_radius < 1) throw TensorError("gen_grouping: dot radius must be >= 1");
  if (!(cond.d_min_frac > 0 && cond.d_min_frac < cond.d_max_frac && cond.d_max_frac < 1.0))
    throw TensorError("gen_grouping: bad distance fractions");
  const bool conditioned = cond.preset != ShapePreset::Standard &&
                           cond.preset != ShapePreset::Convex;
  if (conditioned && cond.label != 1)
    throw TensorError("gen_grouping: condition presets generate yes-stimuli only");
  const int w = cond.canvas_px, h = cond.canvas_px;

  for (int outer = 0; outer < 500; ++outer) {
    const double d_draw =
        (cond.d_min_frac + (cond.d_max_frac - cond.d_min_frac) * urand(rng)) * cond.canvas_px;
    const double d_target = cond.d_exact > 0 ? cond.d_exact : d_draw;
    auto outline = gen_outline(rng, cond.canvas_px, cond.preset);

    int p1 = -1, p2 = -1, host = 0;
    if (!conditioned) {
      auto fit0 = fit_pixels(outline.masks[0], w, h, cond.dot_radius);
      auto fit1 = fit_pixels(outline.masks[1], w, h, cond.dot_radius);
      if (fit0.empty() || fit1.empty()) continue;
      host = int(rng() & 1);
      const auto& fa = host == 0 ? fit0 : fit1;
      const auto& fb = cond.label == 1 ? fa : (host == 0 ? fit1 : fit0);
      std::vector<int> match;
      for (int attempt = 0; attempt < 200 && p1 < 0; ++attempt) {
        const int c1 = fa[size_t(rng() % fa.size())];
        match.clear();
        for (int q : fb) {
          if (q == c1) continue;
          const double d = std::hypot(double(c1 % w - q % w), double(c1 / w - q / w));
          if (std::fabs(d - d_target) <= 1.0) match.push_back(q);
        }
        if (!match.empty()) {
          p1 = c1;
          p2 = match[size_t(rng() % match.size())];
        }
      }
      if (p1 < 0) continue;  // budget exhausted: fresh outline
    } else {
      auto fit0 = fit_pixels(outline.masks[0], w, h, cond.dot_radius);
      if (fit0.empty()) continue;
      auto jittered = [&](std::pair<int, int> anchor) {
        for (int attempt = 0; attempt < 200; ++attempt) {
          const int jx = int(rng() % 5) - 2, jy = int(rng() % 5) - 2;
          const int x = anchor.first + jx, y = anchor.second + jy;
          if (x < 0 || x >= w || y < 0 || y >= h) continue;
          if (disk_fits(outline.masks[0], w, h, x, y, cond.dot_radius)) return y * w + x;
        }
        return -1;
      };
      p1 = jittered(outline.anchors[0]);
      p2 = jittered(outline.anchors[1]);
      if (p1 < 0 || p2 < 0 || p1 == p2) continue;
    }

    Stimulus s;
    s.image = outline.image;
    s.label = cond.label;
    s.cues[0] = {p1 % w, p1 / w};
    s.cues[1] = {p2 % w, p2 / w};
    s.euclidean_dist = std::hypot(double(s.cues[0].first - s.cues[1].first),
                                  double(s.cues[0].second - s.cues[1].second));
    switch (cond.preset) {
      case ShapePreset::Standard: s.condition = "standard"; break;
      case ShapePreset::Convex: s.condition = "convex"; break;
      case ShapePreset::Narrow: s.condition = "narrow"; break;
      case ShapePreset::Wide: s.condition = "wide"; break;
      case ShapePreset::Curved: s.condition = "curved"; break;
      case ShapePreset::Straight: s.condition = "straight"; break;
    }
    if (cond.label == 1) {
      const auto& mask = conditioned ? outline.masks[0] : outline.masks[size_t(host)];
      const int geo = mask_geodesic(mask, w, h, p1, p2);
      if (geo < 0) continue;  // should not happen; defensive retry
      s.geodesic = double(geo);
      s.path_len = s.geodesic;
    }
    stamp_disk(s.image, s.cues[0].first, s.cues[0].second, cond.dot_radius, 128);
    stamp_disk(s.image, s.cues[1].first, s.cues[1].second, cond.dot_radius, 128);
    return s;
  }
  throw TensorError("gen_grouping: rejection budget exhausted across outlines");
}

std::vector<Stimulus> gen_distance_series(const OutlineSet& outline, int n_steps,
                                          int dot_radius) {
  if (n_steps < 2) throw TensorError("gen_distance_series: need at least 2 steps");
  const int w = outline.image.width, h = outline.image.height;
  const auto& mask = outline.masks.at(0);

  auto fit = fit_pixels(mask, w, h, dot_radius);
  if (fit.size() < 8) throw TensorError("gen_distance_series: mask too small");
  const auto bdist = boundary_distance(mask, w, h);

  // Principal axis of the mask.
  double mx = 0, my = 0;
  size_t count = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask[size_t(y) * w + x]) {
        mx += x;
        my += y;
        ++count;
      }
  mx /= double(count);
  my /= double(count);
  double sxx = 0, syy = 0, sxy = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask[size_t(y) * w + x]) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
      }
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const double axx = std::cos(theta), axy = std::sin(theta);

  auto proj = [&](int px) { return (px % w - mx) * axx + (px / w - my) * axy; };
  double lo = 1e9, hi = -1e9;
  for (int p : fit) {
    lo = std::min(lo, proj(p));
    hi = std::max(hi, proj(p));
  }
  const double span = hi - lo;
  const int capacity = int(std::floor((span - 2.0 * kSeriesInsetPx) / kSeriesStepPx));
  if (capacity < 2)
    throw TensorError("gen_distance_series: mask too small for 2 separations");
  const int steps = std::min(n_steps, capacity);

  // Pick the most medial fit pixel near a target projection.
  auto pick = [&](double target) {
    for (double window : {0.6, 1.2, 2.4}) {
      int best = -1, best_d = -1;
      for (int p : fit)
        if (std::fabs(proj(p) - target) <= window && bdist[size_t(p)] > best_d) {
          best = p;
          best_d = bdist[size_t(p)];
        }
      if (best >= 0) return best;
    }
    return -1;
  };

  const int p1 = pick(lo + kSeriesInsetPx);
  if (p1 < 0) throw TensorError("gen_distance_series: could not place the anchor dot");
  const double start = proj(p1);

  std::vector<Stimulus> out;
  for (int k = 1; k <= steps; ++k) {
    const double want = kSeriesStepPx * k;
    int p2 = pick(start + want);
    if (p2 >= 0) {
      const double d = std::hypot(double(p1 % w - p2 % w), double(p1 / w - p2 / w));
      if (std::fabs(d - want) > 1.0) {
        // Straighten up: choose the fit pixel matching the Euclidean target.
        int best = -1;
        double best_err = 1e9;
        for (int p : fit) {
          if (std::fabs(proj(p) - (start + want)) > 2.0) continue;
          const double e =
              std::fabs(std::hypot(double(p1 % w - p % w), double(p1 / w - p % w)) - want);
          if (e < best_err) {
            best = p;
            best_err = e;
          }
        }
        p2 = best_err <= 1.0 ? best : -1;
      }
    }
    if (p2 < 0) break;

    Stimulus s;
    s.image = outline.image;
    s.label = 1;
    s.cues[0] = {p1 % w, p1 / w};
    s.cues[1] = {p2 % w, p2 / w};
    s.euclidean_dist = std::hypot(double(s.cues[0].first - s.cues[1].first),
                                  double(s.cues[0].second - s.cues[1].second));
    const int geo = mask_geodesic(mask, w, h, p1, p2);
    s.geodesic = double(geo);
    s.path_len = s.geodesic;
    s.condition = "distance_step=" + std::to_string(k);
    stamp_disk(s.image, s.cues[0].first, s.cues[0].second, dot_radius, 128);
    stamp_disk(s.image, s.cues[1].first, s.cues[1].second, dot_radius, 128);
    out.push_back(std::move(s));
  }
  if (out.size() < 2) throw TensorError("gen_distance_series: fewer than 2 placements fit");
  return out;
}

}  // namespace crnn
