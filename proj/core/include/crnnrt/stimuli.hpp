#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "crnnrt/image.hpp"

namespace crnn {

// One generated classification stimulus plus its ground-truth structure.
// Fields not applicable to a task/label stay at their -1 defaults.
struct Stimulus {
  GrayImage image;
  int label = 1;  // 1 = yes (connected / same object), 0 = no
  std::array<std::pair<int, int>, 2> cues{{{0, 0}, {0, 0}}};  // pixel coords

  uint64_t seed = 0;
  double euclidean_dist = 0.0;  // px between cue centers
  double path_len = -1.0;       // mazes yes: BFS edges * cell_px; series/grouping yes: geodesic px
  std::array<int, 2> segment_lens{{-1, -1}};  // mazes no: component cell counts
  int t_junctions_on_path = -1;
  int t_junctions_on_segment = -1;
  std::string condition;  // free-form tags, e.g. "maze", "standard", "curved"

  // Maze grid geometry, needed to re-derive the corridor graph from pixels.
  int grid_rows = 0, grid_cols = 0, cell_px = 0, wall_px = 0;
  double geodesic = -1.0;  // grouping yes: in-mask 4-connected distance, px
};

// ---------------------------------------------------------------------------
// Mazes

struct MazeSpec {
  int grid_rows = 12, grid_cols = 12;
  int cell_px = 4;
  int wall_px = 1;
  int cue_marker = 2;  // cue cells are tinted over their corridor pixels

  int image_w() const { return grid_cols * cell_px; }
  int image_h() const { return grid_rows * cell_px; }

  static MazeSpec desk() { return {}; }                  // 48x48
  static MazeSpec paper() { return {18, 18, 8, 2, 2}; }  // 144x144
};

// Renders the wall/corridor layout for an explicit cell graph: corridor cells
// (ids row*cols+col) painted white, carved passages opened between adjacent
// listed cells, cue cells tinted gray. Used by the generator and by tests that
// build exact topologies.
GrayImage render_maze(const MazeSpec& spec, const std::vector<int>& cells,
                      const std::vector<std::pair<int, int>>& edges, int cue_a, int cue_b);

// Generates one maze stimulus. The corridor graph is a uniform random spanning
// tree (loop-erased random walks); label 0 additionally seals one passage on
// the cue-to-cue path, splitting the maze into exactly two components with one
// cue each. Cue offsets are drawn from a class-independent law, so calling
// this with the same rng state and both labels yields distance-matched twins.
Stimulus gen_maze(const MazeSpec& spec, int label, std::mt19937_64& rng);

// Shortest-path measure between the cue cells, re-derived from the rendered
// image. Yes-label: BFS path length in cells scaled to px. No-label: mean of
// the two component sizes in cells.
double maze_path_length(const Stimulus& s);

enum class JunctionScope { Path, Segment };

// Number of branching cells (carved degree >= 3) on the cue-to-cue path or in
// the whole component containing the cues. Yes-label stimuli only.
int count_t_junctions(const Stimulus& s, JunctionScope scope);

// ---------------------------------------------------------------------------
// Incremental-grouping outlines

enum class ShapePreset { Standard, Convex, Narrow, Wide, Curved, Straight };

// A rendered outline scene: white strokes on black, plus per-object fill
// masks (stroke excluded) and preset-specific dot anchor points.
struct OutlineSet {
  GrayImage image;
  std::vector<std::vector<uint8_t>> masks;
  std::vector<std::pair<int, int>> anchors;
};

// Renders two non-overlapping closed shapes. Standard/Convex: two smooth
// radial-harmonic blobs. Narrow/Wide: a two-lobe shape joined by a thin/thick
// neck plus one distractor blob. Curved/Straight: a bent/straight tube of
// matched tip separation plus one distractor blob.
OutlineSet gen_outline(std::mt19937_64& rng, int canvas_px = 96,
                       ShapePreset preset = ShapePreset::Standard);

struct GroupingCondition {
  ShapePreset preset = ShapePreset::Standard;
  int label = 1;
  int canvas_px = 96;
  double d_min_frac = 0.20, d_max_frac = 0.55;  // target dot-distance law
  int dot_radius = 2;
  double d_exact = -1.0;  // >0: pin the dot distance to this value (+-1 px)
};

// One grouping stimulus: two gray dots inside the fill masks — same mask
// (label 1) or different masks (label 0) — with the realized dot distance
// rejection-matched to a class-independent target (or to d_exact when set,
// which is how no-twins are distance-matched to their yes-twin).
Stimulus gen_grouping(std::mt19937_64& rng, const GroupingCondition& cond);

// Dot pairs at 14, 28, ... px separation along the principal axis of
// outline.masks[0], both dots centered in the shape; stops at the boundary
// inset. Throws if fewer than 2 separations fit.
std::vector<Stimulus> gen_distance_series(const OutlineSet& outline, int n_steps,
                                          int dot_radius = 2);

}  // namespace crnn
