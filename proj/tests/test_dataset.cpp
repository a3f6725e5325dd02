#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "crnnrt/dataset.hpp"
#include "crnnrt/image.hpp"
#include "crnnrt/stats.hpp"

using namespace crnn;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
}

std::vector<Stimulus> small_maze_set() {
  return gen_maze_dataset(MazeSpec::desk(), 6, 11);
}

DatasetManifest maze_manifest() {
  DatasetManifest m;
  m.task = "mazes";
  m.spec_json = R"({"grid_rows":12,"grid_cols":12,"cell_px":4,"wall_px":1})";
  m.seed = 11;
  return m;
}

}  // namespace

TEST_CASE("dataset roundtrip preserves images and every metadata field") {
  const auto dir = fresh_dir("crnn_ds_roundtrip");
  const auto items = small_maze_set();
  write_dataset(dir.string(), maze_manifest(), items);

  const auto ds = read_dataset(dir.string());
  CHECK(ds.manifest.schema_version == 1);
  CHECK(ds.manifest.task == "mazes");
  CHECK(ds.manifest.seed == 11);
  CHECK(ds.manifest.count == 6);
  REQUIRE(ds.items.size() == items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    const auto& a = items[i];
    const auto& b = ds.items[i];
    CHECK(a.image.px == b.image.px);
    CHECK(a.label == b.label);
    CHECK(a.cues == b.cues);
    CHECK(a.seed == b.seed);
    CHECK(a.euclidean_dist == b.euclidean_dist);
    CHECK(a.path_len == b.path_len);
    CHECK(a.segment_lens == b.segment_lens);
    CHECK(a.t_junctions_on_path == b.t_junctions_on_path);
    CHECK(a.t_junctions_on_segment == b.t_junctions_on_segment);
    CHECK(a.condition == b.condition);
    CHECK(a.grid_rows == b.grid_rows);
    CHECK(a.grid_cols == b.grid_cols);
    CHECK(a.cell_px == b.cell_px);
    CHECK(a.wall_px == b.wall_px);
    CHECK(a.geodesic == b.geodesic);
  }
  fs::remove_all(dir);
}

TEST_CASE("paired maze generation: twin structure and replay") {
  const auto items = small_maze_set();
  REQUIRE(items.size() == 6);
  for (size_t p = 0; p < 3; ++p) {
    const auto& yes = items[2 * p];
    const auto& no = items[2 * p + 1];
    CHECK(yes.label == 1);
    CHECK(no.label == 0);
    CHECK(yes.seed == no.seed);
    CHECK(yes.cues == no.cues);
    CHECK(yes.euclidean_dist == no.euclidean_dist);
  }
  const auto replay = small_maze_set();
  for (size_t i = 0; i < items.size(); ++i) {
    CHECK(items[i].image.px == replay[i].image.px);
    CHECK(items[i].seed == replay[i].seed);
  }
}

TEST_CASE("paired grouping generation: labels alternate, distances match in bulk") {
  GroupingCondition cond;
  const auto items = gen_grouping_dataset(cond, 120, 5);
  REQUIRE(items.size() == 120);
  std::vector<double> yes_d, no_d;
  for (size_t i = 0; i < items.size(); ++i) {
    CHECK(items[i].label == (i % 2 == 0 ? 1 : 0));
    (items[i].label == 1 ? yes_d : no_d).push_back(items[i].euclidean_dist);
  }
  for (size_t p = 0; p < items.size() / 2; ++p)
    CHECK(std::fabs(items[2 * p].euclidean_dist - items[2 * p + 1].euclidean_dist) <= 1.0 + 1e-9);
  CHECK(ks_2sample(yes_d, no_d) < 0.15);

  const auto replay = gen_grouping_dataset(cond, 120, 5);
  for (size_t i = 0; i < items.size(); ++i) CHECK(items[i].image.px == replay[i].image.px);

  GroupingCondition narrow;
  narrow.preset = ShapePreset::Narrow;
  CHECK_THROWS_AS(gen_grouping_dataset(narrow, 4, 1), TensorError);
}

TEST_CASE("corrupted metadata line reports its line number") {
  const auto dir = fresh_dir("crnn_ds_corrupt");
  write_dataset(dir.string(), maze_manifest(), small_maze_set());

  auto lines = read_lines(dir / "meta.jsonl");
  REQUIRE(lines.size() == 6);
  lines[2] = "{broken";
  write_lines(dir / "meta.jsonl", lines);

  bool threw = false;
  try {
    read_dataset(dir.string());
  } catch (const TensorError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(threw);

  // A structurally valid JSON object missing a field also names the line.
  lines[2] = R"({"label":"yes"})";
  write_lines(dir / "meta.jsonl", lines);
  threw = false;
  try {
    read_dataset(dir.string());
  } catch (const TensorError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(threw);
  fs::remove_all(dir);
}

TEST_CASE("pixel edits are caught by the manifest checksum") {
  const auto dir = fresh_dir("crnn_ds_checksum");
  write_dataset(dir.string(), maze_manifest(), small_maze_set());

  const auto img_path = (dir / "images" / "000001.png").string();
  auto img = read_png_gray(img_path);
  img.px[img.px.size() / 2] = uint8_t(img.px[img.px.size() / 2] ^ 0xFF);
  write_png_gray(img_path, img);

  CHECK_THROWS_WITH_AS(read_dataset(dir.string()),
                       doctest::Contains("checksum mismatch"), TensorError);
  fs::remove_all(dir);
}

TEST_CASE("schema and count mismatches are rejected") {
  const auto dir = fresh_dir("crnn_ds_schema");
  write_dataset(dir.string(), maze_manifest(), small_maze_set());

  // Unsupported schema version.
  auto manifest_lines = read_lines(dir / "manifest.json");
  std::string joined;
  for (auto& l : manifest_lines) joined += l + "\n";
  const auto pos = joined.find("\"schema_version\": 1");
  REQUIRE(pos != std::string::npos);
  std::string bumped = joined;
  bumped.replace(pos, std::string("\"schema_version\": 1").size(), "\"schema_version\": 2");
  {
    std::ofstream out(dir / "manifest.json");
    out << bumped;
  }
  CHECK_THROWS_WITH_AS(read_dataset(dir.string()), doctest::Contains("schema"), TensorError);

  // Count mismatch: drop the final metadata line.
  {
    std::ofstream out(dir / "manifest.json");
    out << joined;
  }
  auto lines = read_lines(dir / "meta.jsonl");
  lines.pop_back();
  write_lines(dir / "meta.jsonl", lines);
  CHECK_THROWS_AS(read_dataset(dir.string()), TensorError);

  CHECK_THROWS_AS(read_dataset((dir / "missing").string()), TensorError);
  fs::remove_all(dir);
}
