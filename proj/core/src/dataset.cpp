#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "crnnrt/dataset.hpp"
#include "crnnrt/image.hpp"

namespace crnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

uint64_t fnv1a64(const void* data, size_t n, uint64_t h) {
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}
constexpr uint64_t kFnvBasis = 14695981039346656037ULL;

std::string image_name(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d.png", id);
  return buf;
}

uint64_t hash_image(const GrayImage& img, uint64_t h) {
  const std::string dims = std::to_string(img.width) + "," + std::to_string(img.height) + ";";
  h = fnv1a64(dims.data(), dims.size(), h);
  return fnv1a64(img.px.data(), img.px.size(), h);
}

std::string meta_line(const Stimulus& s) {
  json j;
  j["label"] = s.label == 1 ? "yes" : "no";
  j["cues"] = {{s.cues[0].first, s.cues[0].second}, {s.cues[1].first, s.cues[1].second}};
  j["seed"] = s.seed;
  j["euclidean_dist"] = s.euclidean_dist;
  j["path_len"] = s.path_len;
  j["segment_lens"] = {s.segment_lens[0], s.segment_lens[1]};
  j["t_junctions_on_path"] = s.t_junctions_on_path;
  j["t_junctions_on_segment"] = s.t_junctions_on_segment;
  j["condition"] = s.condition;
  j["grid_rows"] = s.grid_rows;
  j["grid_cols"] = s.grid_cols;
  j["cell_px"] = s.cell_px;
  j["wall_px"] = s.wall_px;
  j["geodesic"] = s.geodesic;
  return j.dump();
}

Stimulus parse_meta_line(const std::string& line, int lineno) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw TensorError("meta.jsonl line " + std::to_string(lineno) + ": parse error: " + e.what());
  }
  try {
    Stimulus s;
    const std::string label = j.at("label").get<std::string>();
    if (label == "yes")
      s.label = 1;
    else if (label == "no")
      s.label = 0;
    else
      throw TensorError("label must be yes or no");
    s.cues[0] = {j.at("cues").at(0).at(0).get<int>(), j.at("cues").at(0).at(1).get<int>()};
    s.cues[1] = {j.at("cues").at(1).at(0).get<int>(), j.at("cues").at(1).at(1).get<int>()};
    s.seed = j.at("seed").get<uint64_t>();
    s.euclidean_dist = j.at("euclidean_dist").get<double>();
    s.path_len = j.at("path_len").get<double>();
    s.segment_lens[0] = j.at("segment_lens").at(0).get<double>();
    s.segment_lens[1] = j.at("segment_lens").at(1).get<double>();
    s.t_junctions_on_path = j.at("t_junctions_on_path").get<int>();
    s.t_junctions_on_segment = j.at("t_junctions_on_segment").get<int>();
    s.condition = j.at("condition").get<std::string>();
    s.grid_rows = j.at("grid_rows").get<int>();
    s.grid_cols = j.at("grid_cols").get<int>();
    s.cell_px = j.at("cell_px").get<int>();
    s.wall_px = j.at("wall_px").get<int>();
    s.geodesic = j.at("geodesic").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw TensorError("meta.jsonl line " + std::to_string(lineno) +
                      ": missing or malformed field: " + e.what());
  }
}

}  // namespace

void write_dataset(const std::string& root, const DatasetManifest& manifest,
                   const std::vector<Stimulus>& items) {
  if (manifest.schema_version != 1) throw TensorError("write_dataset: unsupported schema version");
  fs::create_directories(fs::path(root) / "images");

  uint64_t h = kFnvBasis;
  std::ofstream meta(fs::path(root) / "meta.jsonl");
  if (!meta) throw TensorError("write_dataset: cannot open meta.jsonl for writing");
  for (size_t i = 0; i < items.size(); ++i) {
    write_png_gray((fs::path(root) / "images" / image_name(int(i))).string(), items[i].image);
    const std::string line = meta_line(items[i]);
    meta << line << "\n";
    h = hash_image(items[i].image, h);
    h = fnv1a64(line.data(), line.size(), h);
  }
  meta.close();

  json m;
  m["schema_version"] = manifest.schema_version;
  m["task"] = manifest.task;
  m["spec"] = manifest.spec_json.empty() ? json::object() : json::parse(manifest.spec_json);
  m["seed"] = manifest.seed;
  m["count"] = int(items.size());
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    m["checksum"] = buf;
  }
  std::ofstream mf(fs::path(root) / "manifest.json");
  if (!mf) throw TensorError("write_dataset: cannot open manifest.json for writing");
  mf << m.dump(2) << "\n";
}

Dataset read_dataset(const std::string& root) {
  std::ifstream mf(fs::path(root) / "manifest.json");
  if (!mf) throw TensorError("read_dataset: missing manifest.json under " + root);
  json m;
  try {
    mf >> m;
  } catch (const json::exception& e) {
    throw TensorError(std::string("read_dataset: manifest.json parse error: ") + e.what());
  }

  Dataset ds;
  try {
    ds.manifest.schema_version = m.at("schema_version").get<int>();
    if (ds.manifest.schema_version != 1)
      throw TensorError("read_dataset: unsupported schema version " +
                        std::to_string(ds.manifest.schema_version));
    ds.manifest.task = m.at("task").get<std::string>();
    ds.manifest.spec_json = m.at("spec").dump();
    ds.manifest.seed = m.at("seed").get<uint64_t>();
    ds.manifest.count = m.at("count").get<int>();
    const std::string ck = m.at("checksum").get<std::string>();
    if (ck.rfind("fnv1a64:", 0) != 0) throw TensorError("read_dataset: unknown checksum kind");
    ds.manifest.checksum = std::stoull(ck.substr(8), nullptr, 16);
  } catch (const json::exception& e) {
    throw TensorError(std::string("read_dataset: manifest.json malformed: ") + e.what());
  }

  std::ifstream meta(fs::path(root) / "meta.jsonl");
  if (!meta) throw TensorError("read_dataset: missing meta.jsonl under " + root);
  uint64_t h = kFnvBasis;
  std::string line;
  int lineno = 0;
  while (std::getline(meta, line)) {
    if (line.empty() && meta.eof()) break;
    ++lineno;
    Stimulus s = parse_meta_line(line, lineno);
    s.image = read_png_gray((fs::path(root) / "images" / image_name(lineno - 1)).string());
    h = hash_image(s.image, h);
    h = fnv1a64(line.data(), line.size(), h);
    ds.items.push_back(std::move(s));
  }
  if (int(ds.items.size()) != ds.manifest.count)
    throw TensorError("read_dataset: manifest count " + std::to_string(ds.manifest.count) +
                      " != metadata lines " + std::to_string(ds.items.size()));
  if (h != ds.manifest.checksum)
    throw TensorError("read_dataset: checksum mismatch (dataset corrupted or edited)");
  return ds;
}

uint64_t pair_stream_seed(uint64_t seed, int pair_index) {
  uint64_t z = seed + uint64_t(pair_index) * 0x9e3779b97f4a7c15ULL + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<Stimulus> gen_maze_dataset(const MazeSpec& spec, int count, uint64_t seed) {
  if (count <= 0) throw TensorError("gen_maze_dataset: count must be positive");
  std::vector<Stimulus> out;
  out.reserve(size_t(count));
  for (int p = 0; int(out.size()) < count; ++p) {
    const uint64_t s = pair_stream_seed(seed, p);
    std::mt19937_64 rng_yes(s);
    Stimulus yes = gen_maze(spec, 1, rng_yes);
    yes.seed = s;
    out.push_back(std::move(yes));
    if (int(out.size()) >= count) break;
    std::mt19937_64 rng_no(s);
    Stimulus no = gen_maze(spec, 0, rng_no);
    no.seed = s;
    out.push_back(std::move(no));
  }
  return out;
}

std::vector<Stimulus> gen_grouping_dataset(const GroupingCondition& cond, int count,
                                           uint64_t seed) {
  if (count <= 0) throw TensorError("gen_grouping_dataset: count must be positive");
  if (cond.preset != ShapePreset::Standard && cond.preset != ShapePreset::Convex)
    throw TensorError("gen_grouping_dataset: paired generation needs a two-shape preset");
  std::vector<Stimulus> out;
  out.reserve(size_t(count));
  GroupingCondition yes_cond = cond, no_cond = cond;
  yes_cond.label = 1;
  no_cond.label = 0;
  for (int p = 0; int(out.size()) < count; ++p) {
    const uint64_t s = pair_stream_seed(seed, p);
    std::mt19937_64 rng_yes(s);
    Stimulus yes = gen_grouping(rng_yes, yes_cond);
    yes.seed = s;
    const double d_yes = yes.euclidean_dist;
    out.push_back(std::move(yes));
    if (int(out.size()) >= count) break;
    std::mt19937_64 rng_no(s);
    no_cond.d_exact = d_yes;  // distance-match the no-twin to its yes-twin
    Stimulus no = gen_grouping(rng_no, no_cond);
    no.seed = s;
    out.push_back(std::move(no));
  }
  return out;
}

}  // namespace crnn
