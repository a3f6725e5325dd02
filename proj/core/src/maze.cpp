#include <algorithm>
#include <cmath>
#include <deque>

#include "crnnrt/stimuli.hpp"

namespace crnn {

namespace {

void validate_spec(const MazeSpec& spec) {
  if (spec.grid_rows < 1 || spec.grid_cols < 1) throw TensorError("maze: empty grid");
  if (spec.wall_px < 1) throw TensorError("maze: wall_px must be >= 1");
  if (spec.cell_px < 2 * spec.wall_px + 1)
    throw TensorError("maze: cell_px must leave corridor room (>= 2*wall_px + 1)");
}

// Corridor graph of a rendered maze, re-derived purely from pixels: a cell is
// traversable when its center pixel is non-wall, a passage exists when the
// wall strip between two traversable cells has been opened.
struct MazeGraph {
  int rows = 0, cols = 0, cp = 0;
  std::vector<uint8_t> cell;         // [rows*cols]
  std::vector<uint8_t> east, south;  // passage from (r,c) to (r,c+1) / (r+1,c)

  int id(int r, int c) const { return r * cols + c; }

  std::vector<int> neighbors(int v) const {
    const int r = v / cols, c = v % cols;
    std::vector<int> out;
    if (c + 1 < cols && east[size_t(v)]) out.push_back(v + 1);
    if (c > 0 && east[size_t(v - 1)]) out.push_back(v - 1);
    if (r + 1 < rows && south[size_t(v)]) out.push_back(v + cols);
    if (r > 0 && south[size_t(v - cols)]) out.push_back(v - cols);
    return out;
  }
  int degree(int v) const { return int(neighbors(v).size()); }
};

constexpr uint8_t kTraversable = 64;  // corridor 255 or cue tint 128, wall 0

MazeGraph derive_graph(const Stimulus& s) {
  if (s.grid_rows <= 0 || s.grid_cols <= 0 || s.cell_px <= 0)
    throw TensorError("maze ops: stimulus carries no maze grid geometry");
  MazeGraph g;
  g.rows = s.grid_rows;
  g.cols = s.grid_cols;
  g.cp = s.cell_px;
  const auto& img = s.image;
  if (img.width < g.cols * g.cp || img.height < g.rows * g.cp)
    throw TensorError("maze ops: image smaller than its grid");
  g.cell.assign(size_t(g.rows) * g.cols, 0);
  g.east.assign(g.cell.size(), 0);
  g.south.assign(g.cell.size(), 0);
  const int half = g.cp / 2;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      g.cell[size_t(g.id(r, c))] = img.at(c * g.cp + half, r * g.cp + half) > kTraversable;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c + 1 < g.cols; ++c) {
      const int v = g.id(r, c);
      g.east[size_t(v)] = g.cell[size_t(v)] && g.cell[size_t(v + 1)] &&
                          img.at((c + 1) * g.cp, r * g.cp + half) > kTraversable;
    }
  for (int r = 0; r + 1 < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const int v = g.id(r, c);
      g.south[size_t(v)] = g.cell[size_t(v)] && g.cell[size_t(v + g.cols)] &&
                           img.at(c * g.cp + half, (r + 1) * g.cp) > kTraversable;
    }
  return g;
}

int cue_cell(const Stimulus& s, int which) {
  const auto [x, y] = s.cues[size_t(which)];
  return (y / s.cell_px) * s.grid_cols + (x / s.cell_px);
}

// BFS over the corridor graph; dist -1 where unreachable; parent trail kept.
void bfs(const MazeGraph& g, int from, std::vector<int>& dist, std::vector<int>& parent) {
  dist.assign(g.cell.size(), -1);
  parent.assign(g.cell.size(), -1);
  if (!g.cell[size_t(from)]) return;
  std::deque<int> q{from};
  dist[size_t(from)] = 0;
  while (!q.empty()) {
    const int v = q.front();
    q.pop_front();
    for (int u : g.neighbors(v))
      if (dist[size_t(u)] < 0) {
        dist[size_t(u)] = dist[size_t(v)] + 1;
        parent[size_t(u)] = v;
        q.push_back(u);
      }
  }
}

// Uniform random spanning tree over the rows x cols grid graph, built from
// loop-erased random walks. Returns carved passages as cell-id pairs.
std::vector<std::pair<int, int>> uniform_spanning_tree(int rows, int cols,
                                                       std::mt19937_64& rng) {
  const int n = rows * cols;
  std::vector<uint8_t> intree(size_t(n), 0);
  std::vector<int> next(size_t(n), -1);
  intree[size_t(rng() % uint64_t(n))] = 1;

  auto random_neighbor = [&](int v) {
    const int r = v / cols, c = v % cols;
    int nb[4];
    int k = 0;
    if (r > 0) nb[k++] = v - cols;
    if (r + 1 < rows) nb[k++] = v + cols;
    if (c > 0) nb[k++] = v - 1;
    if (c + 1 < cols) nb[k++] = v + 1;
    return nb[rng() % uint64_t(k)];
  };

  std::vector<std::pair<int, int>> edges;
  edges.reserve(size_t(n - 1));
  for (int start = 0; start < n; ++start) {
    if (intree[size_t(start)]) continue;
    int cur = start;
    while (!intree[size_t(cur)]) {  // walk until the tree, loop-erased via next[]
      next[size_t(cur)] = random_neighbor(cur);
      cur = next[size_t(cur)];
    }
    cur = start;
    while (!intree[size_t(cur)]) {
      intree[size_t(cur)] = 1;
      edges.emplace_back(cur, next[size_t(cur)]);
      cur = next[size_t(cur)];
    }
  }
  return edges;
}

MazeGraph graph_from_edges(int rows, int cols, const std::vector<std::pair<int, int>>& edges) {
  MazeGraph g;
  g.rows = rows;
  g.cols = cols;
  g.cp = 1;
  g.cell.assign(size_t(rows) * cols, 1);
  g.east.assign(g.cell.size(), 0);
  g.south.assign(g.cell.size(), 0);
  for (auto [a, b] : edges) {
    const int lo = std::min(a, b), hi = std::max(a, b);
    if (hi == lo + 1 && hi % cols != 0)
      g.east[size_t(lo)] = 1;
    else if (hi == lo + cols)
      g.south[size_t(lo)] = 1;
    else
      throw TensorError("maze: non-adjacent edge");
  }
  return g;
}

}  // namespace

GrayImage render_maze(const MazeSpec& spec, const std::vector<int>& cells,
                      const std::vector<std::pair<int, int>>& edges, int cue_a, int cue_b) {
  validate_spec(spec);
  const int W = spec.image_w(), H = spec.image_h();
  const int cp = spec.cell_px, wp = spec.wall_px, cols = spec.grid_cols;
  GrayImage img(W, H, 0);

  auto paint_cell = [&](int id, uint8_t v) {
    const int r = id / cols, c = id % cols;
    const int x1 = std::min((c + 1) * cp, W - wp), y1 = std::min((r + 1) * cp, H - wp);
    for (int y = r * cp + wp; y < y1; ++y)
      for (int x = c * cp + wp; x < x1; ++x) img.set(x, y, v);
  };
  for (int id : cells) {
    if (id < 0 || id >= spec.grid_rows * cols) throw TensorError("maze: cell id out of range");
    paint_cell(id, 255);
  }
  for (auto [a, b] : edges) {
    const int lo = std::min(a, b), hi = std::max(a, b);
    const int r = lo / cols, c = lo % cols;
    if (hi == lo + 1 && hi % cols != 0) {  // east passage
      const int y1 = std::min((r + 1) * cp, H - wp);
      for (int y = r * cp + wp; y < y1; ++y)
        for (int x = (c + 1) * cp; x < (c + 1) * cp + wp; ++x) img.set(x, y, 255);
    } else if (hi == lo + cols) {  // south passage
      const int x1 = std::min((c + 1) * cp, W - wp);
      for (int y = (r + 1) * cp; y < (r + 1) * cp + wp; ++y)
        for (int x = c * cp + wp; x < x1; ++x) img.set(x, y, 255);
    } else {
      throw TensorError("maze: non-adjacent edge");
    }
  }
  paint_cell(cue_a, 128);
  paint_cell(cue_b, 128);
  return img;
}

Stimulus gen_maze(const MazeSpec& spec, int label, std::mt19937_64& rng) {
  validate_spec(spec);
  if (spec.grid_rows < 4 || spec.grid_cols < 4)
    throw TensorError("gen_maze: grid must be at least 4x4");
  if (label != 0 && label != 1) throw TensorError("gen_maze: label must be 0 or 1");
  const int rows = spec.grid_rows, cols = spec.grid_cols;
  constexpr double kMinCueCells = 3.0;  // minimum cue offset, in cells
  constexpr int kBudget = 200;

  for (int topology = 0; topology < 50; ++topology) {
    auto edges = uniform_spanning_tree(rows, cols, rng);

    int a = -1, b = -1;
    for (int attempt = 0; attempt < kBudget; ++attempt) {
      const int di = int(rng() % uint64_t(2 * rows - 1)) - (rows - 1);
      const int dj = int(rng() % uint64_t(2 * cols - 1)) - (cols - 1);
      if (std::hypot(double(di), double(dj)) < kMinCueCells) continue;
      const int ar = std::max(0, -di) + int(rng() % uint64_t(rows - std::abs(di)));
      const int ac = std::max(0, -dj) + int(rng() % uint64_t(cols - std::abs(dj)));
      a = ar * cols + ac;
      b = (ar + di) * cols + (ac + dj);
      break;
    }
    if (a < 0) continue;  // budget exhausted: regenerate topology

    auto tree = graph_from_edges(rows, cols, edges);
    std::vector<int> dist, parent;
    bfs(tree, a, dist, parent);
    std::vector<int> path{b};  // unique tree path, b back to a
    while (path.back() != a) path.push_back(parent[size_t(path.back())]);

    if (label == 0) {
      // Seal one passage on the path: the maze splits into exactly two
      // components with one cue on each side.
      const size_t cut = rng() % uint64_t(path.size() - 1);
      const std::pair<int, int> gone{std::min(path[cut], path[cut + 1]),
                                     std::max(path[cut], path[cut + 1])};
      edges.erase(std::find_if(edges.begin(), edges.end(),
                               [&](const std::pair<int, int>& e) {
                                 return std::minmax(e.first, e.second) ==
                                        std::minmax(gone.first, gone.second);
                               }));
    }

    std::vector<int> all_cells(size_t(rows) * cols);
    for (size_t i = 0; i < all_cells.size(); ++i) all_cells[i] = int(i);

    Stimulus s;
    s.image = render_maze(spec, all_cells, edges, a, b);
    s.label = label;
    s.condition = "maze";
    s.grid_rows = rows;
    s.grid_cols = cols;
    s.cell_px = spec.cell_px;
    s.wall_px = spec.wall_px;
    const int half = spec.cell_px / 2;
    s.cues[0] = {(a % cols) * spec.cell_px + half, (a / cols) * spec.cell_px + half};
    s.cues[1] = {(b % cols) * spec.cell_px + half, (b / cols) * spec.cell_px + half};
    s.euclidean_dist = std::hypot(double(s.cues[0].first - s.cues[1].first),
                                  double(s.cues[0].second - s.cues[1].second));
    if (label == 1) {
      s.path_len = maze_path_length(s);
      s.t_junctions_on_path = count_t_junctions(s, JunctionScope::Path);
      s.t_junctions_on_segment = count_t_junctions(s, JunctionScope::Segment);
    } else {
      auto g = derive_graph(s);
      std::vector<int> da, pa;
      bfs(g, a, da, pa);
      int size_a = 0;
      for (int d : da) size_a += (d >= 0);
      s.segment_lens = {size_a, rows * cols - size_a};
    }
    return s;
  }
  throw TensorError("gen_maze: could not place cues after repeated topology regeneration");
}

double maze_path_length(const Stimulus& s) {
  auto g = derive_graph(s);
  const int a = cue_cell(s, 0), b = cue_cell(s, 1);
  if (!g.cell[size_t(a)] || !g.cell[size_t(b)])
    throw TensorError("maze_path_length: cue lies on a wall");
  std::vector<int> dist, parent;
  bfs(g, a, dist, parent);
  if (s.label == 1) {
    if (dist[size_t(b)] < 0)
      throw TensorError("maze_path_length: corrupt stimulus, cues disconnected under yes label");
    return double(dist[size_t(b)]) * double(s.cell_px);
  }
  int size_a = 0;
  for (int d : dist) size_a += (d >= 0);
  std::vector<int> dist_b, parent_b;
  bfs(g, b, dist_b, parent_b);
  int size_b = 0;
  for (int d : dist_b) size_b += (d >= 0);
  return 0.5 * (double(size_a) + double(size_b));
}

int count_t_junctions(const Stimulus& s, JunctionScope scope) {
  if (s.label != 1)
    throw TensorError("count_t_junctions: defined for yes-label stimuli only");
  auto g = derive_graph(s);
  const int a = cue_cell(s, 0), b = cue_cell(s, 1);
  std::vector<int> dist, parent;
  bfs(g, a, dist, parent);
  if (dist[size_t(b)] < 0)
    throw TensorError("count_t_junctions: corrupt stimulus, cues disconnected");

  int count = 0;
  if (scope == JunctionScope::Path) {
    for (int v = b;; v = parent[size_t(v)]) {
      count += g.degree(v) >= 3;
      if (v == a) break;
    }
  } else {
    for (size_t v = 0; v < g.cell.size(); ++v)
      count += dist[v] >= 0 && g.degree(int(v)) >= 3;
  }
  return count;
}

}  // namespace crnn
