#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crnnrt/hgru.hpp"

namespace crnn {

// JSON checkpoint with raw little-endian tensor bytes in base64. Save/load
// round-trips are bit-identical, including batch-norm running statistics.
template <typename T>
void save_checkpoint(const std::string& path, const HGRUParams<T>& p,
                     const std::string& meta_json = "{}");

// `meta_json`, when non-null, receives the stored metadata object verbatim.
template <typename T>
HGRUParams<T> load_checkpoint(const std::string& path, std::string* meta_json = nullptr);

// Generic named-buffer container in the same JSON+base64 format; used for
// optimizer state alongside a model checkpoint. Round-trips bit-identically
// and preserves entry order.
template <typename T>
void save_tensor_map(const std::string& path,
                     const std::vector<std::pair<std::string, std::vector<T>>>& entries,
                     const std::string& meta_json = "{}");

template <typename T>
std::vector<std::pair<std::string, std::vector<T>>> load_tensor_map(
    const std::string& path, std::string* meta_json = nullptr);

}  // namespace crnn
