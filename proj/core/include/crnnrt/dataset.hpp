#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crnnrt/stimuli.hpp"

namespace crnn {

// On-disk layout under a dataset root:
//   manifest.json   task, generator parameters, seed, count, checksum
//   images/NNNNNN.png
//   meta.jsonl      one JSON record per stimulus, in id order
struct DatasetManifest {
  int schema_version = 1;
  std::string task;       // "mazes" | "grouping"
  std::string spec_json;  // generator parameters, serialized JSON object
  uint64_t seed = 0;
  int count = 0;
  uint64_t checksum = 0;  // FNV-1a over image bytes + metadata lines
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Stimulus> items;
};

void write_dataset(const std::string& root, const DatasetManifest& manifest,
                   const std::vector<Stimulus>& items);

// Validates schema version, per-line metadata, and the manifest checksum.
Dataset read_dataset(const std::string& root);

// Deterministic per-pair stream derivation used by the paired generators.
uint64_t pair_stream_seed(uint64_t seed, int pair_index);

// Generate `count` stimuli as yes/no twins: items 2p and 2p+1 are built from
// identically seeded streams, so each "no" twin shares the topology of its
// "yes" twin and the pooled distance distributions match across labels.
std::vector<Stimulus> gen_maze_dataset(const MazeSpec& spec, int count, uint64_t seed);
std::vector<Stimulus> gen_grouping_dataset(const GroupingCondition& cond, int count,
                                           uint64_t seed);

}  // namespace crnn
