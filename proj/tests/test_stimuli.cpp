#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <vector>

#include "crnnrt/image.hpp"
#include "crnnrt/stats.hpp"
#include "crnnrt/stimuli.hpp"

using namespace crnn;

namespace {

// Test-local flood fill over traversable pixels (>64), 4-connected. Pixel-level
// oracle, independent of the cell-graph logic inside the generators.
std::vector<int> flood_labels(const GrayImage& img) {
  std::vector<int> lab(img.px.size(), -1);
  int next = 0;
  for (size_t start = 0; start < img.px.size(); ++start) {
    if (img.px[start] <= 64 || lab[start] >= 0) continue;
    std::vector<size_t> stack{start};
    lab[start] = next;
    while (!stack.empty()) {
      const size_t i = stack.back();
      stack.pop_back();
      const int x = int(i) % img.width, y = int(i) / img.width;
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (!img.inside(nx[k], ny[k])) continue;
        const size_t j = size_t(ny[k]) * img.width + nx[k];
        if (img.px[j] > 64 && lab[j] < 0) {
          lab[j] = next;
          stack.push_back(j);
        }
      }
    }
    ++next;
  }
  return lab;
}

int label_at(const std::vector<int>& lab, const GrayImage& img, std::pair<int, int> p) {
  return lab[size_t(p.second) * img.width + p.first];
}

// Test-local cell-graph extractor + Dijkstra (unit weights, priority queue):
// an algorithmically different route to path lengths and degrees.
struct CellGraph {
  int rows, cols;
  std::vector<uint8_t> cell, east, south;

  std::vector<int> adj(int v) const {
    const int r = v / cols, c = v % cols;
    std::vector<int> out;
    if (c + 1 < cols && east[size_t(v)]) out.push_back(v + 1);
    if (c > 0 && east[size_t(v) - 1]) out.push_back(v - 1);
    if (r + 1 < rows && south[size_t(v)]) out.push_back(v + cols);
    if (r > 0 && south[size_t(v) - cols]) out.push_back(v - cols);
    return out;
  }
};

CellGraph extract_cells(const Stimulus& s) {
  CellGraph g{s.grid_rows, s.grid_cols, {}, {}, {}};
  const int cp = s.cell_px, half = cp / 2;
  g.cell.assign(size_t(g.rows) * g.cols, 0);
  g.east.assign(g.cell.size(), 0);
  g.south.assign(g.cell.size(), 0);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const size_t v = size_t(r) * g.cols + c;
      g.cell[v] = s.image.at(c * cp + half, r * cp + half) > 64;
      if (c + 1 < g.cols) g.east[v] = s.image.at((c + 1) * cp, r * cp + half) > 64;
      if (r + 1 < g.rows) g.south[v] = s.image.at(c * cp + half, (r + 1) * cp) > 64;
    }
  return g;
}

int dijkstra_cells(const CellGraph& g, int from, int to) {
  std::vector<int> dist(g.cell.size(), -1);
  using QE = std::pair<int, int>;
  std::priority_queue<QE, std::vector<QE>, std::greater<>> pq;
  pq.push({0, from});
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (dist[size_t(v)] >= 0) continue;
    dist[size_t(v)] = d;
    if (v == to) return d;
    for (int u : g.adj(v))
      if (dist[size_t(u)] < 0) pq.push({d + 1, u});
  }
  return dist[size_t(to)];
}

int cue_cell_of(const Stimulus& s, int which) {
  return (s.cues[size_t(which)].second / s.cell_px) * s.grid_cols +
         (s.cues[size_t(which)].first / s.cell_px);
}

Stimulus corridor_stimulus(int n_cells) {
  MazeSpec spec;
  spec.grid_rows = 1;
  spec.grid_cols = n_cells;
  spec.cell_px = 4;
  spec.wall_px = 1;
  std::vector<int> cells(static_cast<size_t>(n_cells));
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n_cells; ++i) {
    cells[size_t(i)] = i;
    if (i + 1 < n_cells) edges.push_back({i, i + 1});
  }
  Stimulus s;
  s.image = render_maze(spec, cells, edges, 0, n_cells - 1);
  s.label = 1;
  s.grid_rows = 1;
  s.grid_cols = n_cells;
  s.cell_px = 4;
  s.wall_px = 1;
  s.cues[0] = {2, 2};
  s.cues[1] = {(n_cells - 1) * 4 + 2, 2};
  return s;
}

}  // namespace

TEST_CASE("straight corridor: path length is cells-1 times cell_px, no junctions") {
  const auto s = corridor_stimulus(8);
  CHECK(s.image.width == 32);
  CHECK(s.image.height == 4);
  CHECK(maze_path_length(s) == doctest::Approx(7 * 4.0));
  CHECK(count_t_junctions(s, JunctionScope::Path) == 0);
  CHECK(count_t_junctions(s, JunctionScope::Segment) == 0);
}

TEST_CASE("plus-shaped maze: one junction on path and segment") {
  MazeSpec spec;
  spec.grid_rows = 3;
  spec.grid_cols = 3;
  spec.cell_px = 4;
  spec.wall_px = 1;
  const std::vector<int> cells{1, 3, 4, 5, 7};
  const std::vector<std::pair<int, int>> edges{{1, 4}, {3, 4}, {4, 5}, {4, 7}};
  Stimulus s;
  s.image = render_maze(spec, cells, edges, 1, 7);
  s.label = 1;
  s.grid_rows = 3;
  s.grid_cols = 3;
  s.cell_px = 4;
  s.wall_px = 1;
  s.cues[0] = {1 * 4 + 2, 0 * 4 + 2};
  s.cues[1] = {1 * 4 + 2, 2 * 4 + 2};

  CHECK(maze_path_length(s) == doctest::Approx(2 * 4.0));
  CHECK(count_t_junctions(s, JunctionScope::Path) == 1);
  CHECK(count_t_junctions(s, JunctionScope::Segment) == 1);

  // Unrendered corner cells are walls.
  CHECK(s.image.at(2, 2) == 0);
  CHECK(s.image.at(2 * 4 + 2, 2) == 0);
}

TEST_CASE("render_maze rejects bad cells and non-adjacent edges") {
  MazeSpec spec;
  spec.grid_rows = 3;
  spec.grid_cols = 3;
  spec.cell_px = 4;
  spec.wall_px = 1;
  CHECK_THROWS_AS(render_maze(spec, {9}, {}, 0, 1), TensorError);
  CHECK_THROWS_AS(render_maze(spec, {0, 5}, {{0, 5}}, 0, 5), TensorError);
  MazeSpec bad = spec;
  bad.cell_px = 2;  // no corridor room at wall_px=1
  CHECK_THROWS_AS(render_maze(bad, {0}, {}, 0, 0), TensorError);
}

TEST_CASE("gen_maze yes label: cues pixel-connected (flood oracle)") {
  const MazeSpec spec = MazeSpec::desk();
  std::mt19937_64 rng(101);
  for (int i = 0; i < 30; ++i) {
    const auto s = gen_maze(spec, 1, rng);
    REQUIRE(s.label == 1);
    const auto lab = flood_labels(s.image);
    CHECK(label_at(lab, s.image, s.cues[0]) >= 0);
    CHECK(label_at(lab, s.image, s.cues[0]) == label_at(lab, s.image, s.cues[1]));
    CHECK(s.path_len >= s.euclidean_dist - 1e-9);
    CHECK(s.t_junctions_on_segment >= s.t_junctions_on_path);
  }
}

TEST_CASE("gen_maze no label: exactly two components, cues astride (flood oracle)") {
  const MazeSpec spec = MazeSpec::desk();
  std::mt19937_64 rng(202);
  for (int i = 0; i < 30; ++i) {
    const auto s = gen_maze(spec, 0, rng);
    REQUIRE(s.label == 0);
    const auto lab = flood_labels(s.image);
    const int n_comp = 1 + *std::max_element(lab.begin(), lab.end());
    CHECK(n_comp == 2);
    CHECK(label_at(lab, s.image, s.cues[0]) != label_at(lab, s.image, s.cues[1]));
    CHECK(s.segment_lens[0] + s.segment_lens[1] ==
          doctest::Approx(double(spec.grid_rows * spec.grid_cols)));
  }
}

TEST_CASE("maze_path_length agrees with a unit-weight Dijkstra oracle") {
  MazeSpec spec;
  spec.grid_rows = 8;
  spec.grid_cols = 8;
  spec.cell_px = 4;
  spec.wall_px = 1;
  std::mt19937_64 rng(303);
  for (int i = 0; i < 20; ++i) {
    const auto s = gen_maze(spec, 1, rng);
    const auto g = extract_cells(s);
    const int d = dijkstra_cells(g, cue_cell_of(s, 0), cue_cell_of(s, 1));
    REQUIRE(d > 0);
    CHECK(maze_path_length(s) == doctest::Approx(double(d) * s.cell_px));
    CHECK(s.path_len == doctest::Approx(double(d) * s.cell_px));
  }
}

TEST_CASE("no-maze path summary is the mean of both segment sizes (cell flood oracle)") {
  const MazeSpec spec = MazeSpec::desk();
  std::mt19937_64 rng(404);
  for (int i = 0; i < 10; ++i) {
    const auto s = gen_maze(spec, 0, rng);
    const auto g = extract_cells(s);
    // Count reachable cells from each cue by Dijkstra distances.
    auto comp_size = [&](int from) {
      int n = 0;
      for (size_t v = 0; v < g.cell.size(); ++v)
        if (dijkstra_cells(g, from, int(v)) >= 0) ++n;
      return n;
    };
    const int sa = comp_size(cue_cell_of(s, 0));
    const int sb = comp_size(cue_cell_of(s, 1));
    CHECK(sa + sb == spec.grid_rows * spec.grid_cols);
    CHECK(maze_path_length(s) == doctest::Approx(0.5 * (sa + sb)));
    CHECK(s.segment_lens[0] == doctest::Approx(double(sa)));
    CHECK(s.segment_lens[1] == doctest::Approx(double(sb)));
  }
}

TEST_CASE("t-junction counts agree with a degree-census oracle") {
  MazeSpec spec;
  spec.grid_rows = 8;
  spec.grid_cols = 8;
  spec.cell_px = 4;
  spec.wall_px = 1;
  std::mt19937_64 rng(505);
  for (int i = 0; i < 20; ++i) {
    const auto s = gen_maze(spec, 1, rng);
    const auto g = extract_cells(s);
    const int a = cue_cell_of(s, 0), b = cue_cell_of(s, 1);

    // Oracle path: BFS parents re-derived here.
    std::vector<int> parent(g.cell.size(), -2), order{a};
    parent[size_t(a)] = -1;
    for (size_t qi = 0; qi < order.size(); ++qi)
      for (int u : g.adj(order[qi]))
        if (parent[size_t(u)] == -2) {
          parent[size_t(u)] = order[qi];
          order.push_back(u);
        }
    int on_path = 0;
    for (int v = b; v != -1; v = parent[size_t(v)]) on_path += g.adj(v).size() >= 3;
    int on_segment = 0;
    for (size_t v = 0; v < g.cell.size(); ++v)
      if (parent[v] != -2) on_segment += g.adj(int(v)).size() >= 3;

    CHECK(count_t_junctions(s, JunctionScope::Path) == on_path);
    CHECK(count_t_junctions(s, JunctionScope::Segment) == on_segment);
    CHECK(s.t_junctions_on_path == on_path);
    CHECK(s.t_junctions_on_segment == on_segment);
  }
  Stimulus no_maze;
  std::mt19937_64 rng2(1);
  no_maze = gen_maze(spec, 0, rng2);
  CHECK_THROWS_AS(count_t_junctions(no_maze, JunctionScope::Path), TensorError);
}

TEST_CASE("yes/no twins share cues and differ by one sealed passage") {
  const MazeSpec spec = MazeSpec::desk();
  const int wp = spec.wall_px, cp = spec.cell_px;
  for (uint64_t seed : {7ULL, 8ULL, 9ULL, 10ULL}) {
    std::mt19937_64 rng_yes(seed), rng_no(seed);
    const auto yes = gen_maze(spec, 1, rng_yes);
    const auto no = gen_maze(spec, 0, rng_no);
    CHECK(yes.cues[0] == no.cues[0]);
    CHECK(yes.cues[1] == no.cues[1]);
    CHECK(yes.euclidean_dist == no.euclidean_dist);
    int diff = 0;
    bool polarity_ok = true;
    for (size_t i = 0; i < yes.image.px.size(); ++i)
      if (yes.image.px[i] != no.image.px[i]) {
        ++diff;
        polarity_ok = polarity_ok && yes.image.px[i] == 255 && no.image.px[i] == 0;
      }
    CHECK(diff > 0);
    CHECK(diff <= wp * (cp - wp));
    CHECK(polarity_ok);
  }
}

TEST_CASE("paired maze corpus: distance distributions identical across labels") {
  const MazeSpec spec = MazeSpec::desk();
  std::vector<double> yes_d, no_d;
  for (int p = 0; p < 100; ++p) {
    std::mt19937_64 rng_yes(uint64_t(9000 + p)), rng_no(uint64_t(9000 + p));
    yes_d.push_back(gen_maze(spec, 1, rng_yes).euclidean_dist);
    no_d.push_back(gen_maze(spec, 0, rng_no).euclidean_dist);
  }
  CHECK(ks_2sample(yes_d, no_d) == 0.0);
}

TEST_CASE("maze presets and input validation") {
  const MazeSpec desk = MazeSpec::desk();
  CHECK(desk.image_w() == 48);
  CHECK(desk.image_h() == 48);
  const MazeSpec paper = MazeSpec::paper();
  CHECK(paper.image_w() == 144);
  CHECK(paper.image_h() == 144);

  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(gen_maze(desk, 2, rng), TensorError);
  MazeSpec tiny = desk;
  tiny.grid_rows = 3;
  CHECK_THROWS_AS(gen_maze(tiny, 1, rng), TensorError);

  // A cue sitting on a wall cell is rejected by the measurement ops.
  MazeSpec spec3;
  spec3.grid_rows = 3;
  spec3.grid_cols = 3;
  spec3.cell_px = 4;
  spec3.wall_px = 1;
  Stimulus s;
  s.image = render_maze(spec3, {1, 4, 7}, {{1, 4}, {4, 7}}, 1, 7);
  s.label = 1;
  s.grid_rows = 3;
  s.grid_cols = 3;
  s.cell_px = 4;
  s.wall_px = 1;
  s.cues[0] = {2, 2};  // cell 0: never rendered, a wall
  s.cues[1] = {1 * 4 + 2, 2 * 4 + 2};
  CHECK_THROWS_AS(maze_path_length(s), TensorError);
}

TEST_CASE("gen_maze is deterministic for a fixed seed") {
  const MazeSpec spec = MazeSpec::desk();
  std::mt19937_64 r1(42), r2(42);
  const auto s1 = gen_maze(spec, 1, r1);
  const auto s2 = gen_maze(spec, 1, r2);
  CHECK(s1.image.px == s2.image.px);
  CHECK(s1.cues == s2.cues);
  CHECK(s1.path_len == s2.path_len);
  CHECK(s1.t_junctions_on_path == s2.t_junctions_on_path);
}

TEST_CASE("outlines: two disjoint closed shapes with sizeable interiors") {
  for (ShapePreset preset : {ShapePreset::Standard, ShapePreset::Convex, ShapePreset::Narrow,
                             ShapePreset::Wide, ShapePreset::Curved, ShapePreset::Straight}) {
    std::mt19937_64 rng(77);
    const auto o = gen_outline(rng, 96, preset);
    REQUIRE(o.masks.size() == 2);
    size_t c0 = 0, c1 = 0, both = 0, stroke = 0;
    for (size_t i = 0; i < o.masks[0].size(); ++i) {
      c0 += o.masks[0][i];
      c1 += o.masks[1][i];
      both += o.masks[0][i] && o.masks[1][i];
      stroke += o.image.px[i] == 255;
    }
    CHECK(both == 0);
    CHECK(c0 > 100);
    CHECK(c1 > 100);
    CHECK(stroke > 0);
    if (preset != ShapePreset::Standard && preset != ShapePreset::Convex) {
      REQUIRE(o.anchors.size() == 2);
      for (auto [x, y] : o.anchors) CHECK(o.image.inside(x, y));
    }

    // The strokes seal both interiors: border flood never reaches a mask px.
    const auto enclosed = enclosed_interior(o.image);
    for (size_t i = 0; i < enclosed.size(); ++i)
      CHECK(enclosed[i] == (o.masks[0][i] || o.masks[1][i]));
  }
}

TEST_CASE("grouping labels match component membership (flood oracle)") {
  GroupingCondition cond;
  for (int label : {1, 0}) {
    cond.label = label;
    for (uint64_t seed = 0; seed < 15; ++seed) {
      std::mt19937_64 rng(1000 + seed);
      const auto s = gen_grouping(rng, cond);
      REQUIRE(s.label == label);
      // Dots are gray accents stamped inside an interior.
      CHECK(s.image.at(s.cues[0].first, s.cues[0].second) == 128);
      CHECK(s.image.at(s.cues[1].first, s.cues[1].second) == 128);

      const auto interior = enclosed_interior(s.image);
      std::vector<int> lab;
      label_components(interior, s.image.width, s.image.height, lab);
      const int l0 = label_at(lab, s.image, s.cues[0]);
      const int l1 = label_at(lab, s.image, s.cues[1]);
      REQUIRE(l0 >= 0);
      REQUIRE(l1 >= 0);
      CHECK((l0 == l1) == (label == 1));
      if (label == 1) {
        CHECK(s.geodesic >= s.euclidean_dist - 1.0);
        CHECK(s.path_len == s.geodesic);
      }
      const double lo = 0.20 * 96 - 1.0, hi = 0.55 * 96 + 1.0;
      CHECK(s.euclidean_dist >= lo);
      CHECK(s.euclidean_dist <= hi);
    }
  }
}

TEST_CASE("curved vs straight twins: geodesic detour only when curved") {
  GroupingCondition curved, straight;
  curved.preset = ShapePreset::Curved;
  straight.preset = ShapePreset::Straight;
  for (uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    std::mt19937_64 rc(seed), rs(seed);
    const auto sc = gen_grouping(rc, curved);
    const auto ss = gen_grouping(rs, straight);
    const double ratio_c = sc.geodesic / sc.euclidean_dist;
    const double ratio_s = ss.geodesic / ss.euclidean_dist;
    CHECK(ratio_c > 1.8);
    CHECK(ratio_c > ratio_s + 0.5);
    // Matched by construction: tips sit one chord length E apart in both.
    CHECK(sc.euclidean_dist == doctest::Approx(ss.euclidean_dist).epsilon(0.25));
  }
}

TEST_CASE("narrow and wide presets produce connected dumbbells") {
  for (ShapePreset preset : {ShapePreset::Narrow, ShapePreset::Wide}) {
    GroupingCondition cond;
    cond.preset = preset;
    std::mt19937_64 rng(99);
    const auto s = gen_grouping(rng, cond);
    CHECK(s.label == 1);
    CHECK(s.geodesic > 0);
    CHECK(s.condition == (preset == ShapePreset::Narrow ? "narrow" : "wide"));
  }
  GroupingCondition bad;
  bad.preset = ShapePreset::Narrow;
  bad.label = 0;
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(gen_grouping(rng, bad), TensorError);
}

TEST_CASE("gen_grouping is deterministic for a fixed seed") {
  GroupingCondition cond;
  std::mt19937_64 r1(314), r2(314);
  const auto s1 = gen_grouping(r1, cond);
  const auto s2 = gen_grouping(r2, cond);
  CHECK(s1.image.px == s2.image.px);
  CHECK(s1.cues == s2.cues);
}

namespace {

OutlineSet rect_outline(int canvas, int x0, int x1, int y0, int y1) {
  // Filled rectangle region -> 2px stroke + interior mask, mirroring the
  // generator's construction for a shape whose geometry we can reason about.
  OutlineSet o;
  o.image = GrayImage(canvas, canvas, 0);
  std::vector<uint8_t> interior(size_t(canvas) * canvas, 0);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const bool deep = x >= x0 + 2 && x <= x1 - 2 && y >= y0 + 2 && y <= y1 - 2;
      if (deep)
        interior[size_t(y) * canvas + x] = 1;
      else
        o.image.set(x, y, 255);
    }
  o.masks.push_back(std::move(interior));
  return o;
}

}  // namespace

TEST_CASE("distance series: 14px ladder with analytic capacity on a rectangle") {
  // Interior x in [12,85]: dot-fit span 69px -> floor((69-6)/14) = 4 steps.
  const auto o = rect_outline(96, 10, 87, 40, 55);
  const auto series = gen_distance_series(o, 10, 2);
  REQUIRE(series.size() == 4);
  for (size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    CHECK(std::fabs(s.euclidean_dist - 14.0 * double(k + 1)) <= 1.0);
    CHECK(s.label == 1);
    CHECK(s.geodesic >= 0);
    CHECK(s.condition == "distance_step=" + std::to_string(k + 1));
    // Both dots sit on interior pixels of the mask.
    CHECK(o.masks[0][size_t(s.cues[0].second) * 96 + s.cues[0].first] == 1);
    CHECK(o.masks[0][size_t(s.cues[1].second) * 96 + s.cues[1].first] == 1);
    // Shared anchor dot across the series.
    CHECK(s.cues[0] == series[0].cues[0]);
  }

  // Requested step count caps the ladder.
  CHECK(gen_distance_series(o, 2, 2).size() == 2);

  // Too-small masks cannot hold two separations.
  const auto tiny = rect_outline(96, 10, 40, 40, 55);
  CHECK_THROWS_AS(gen_distance_series(tiny, 10, 2), TensorError);
  CHECK_THROWS_AS(gen_distance_series(o, 1, 2), TensorError);
}

TEST_CASE("distance series works on generated outlines") {
  std::mt19937_64 rng(2024);
  const auto o = gen_outline(rng, 96, ShapePreset::Straight);
  const auto series = gen_distance_series(o, 3, 2);
  CHECK(series.size() >= 2);
  for (size_t k = 0; k < series.size(); ++k) {
    CHECK(std::fabs(series[k].euclidean_dist - 14.0 * double(k + 1)) <= 1.0);
    CHECK(series[k].geodesic >= series[k].euclidean_dist - 1.0);
  }
}
