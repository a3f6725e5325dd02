#include "crnnrt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

using nlohmann::json;

namespace crnn {

namespace {

const char* B64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const unsigned char* data, size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (size_t i = 0; i < n; i += 3) {
    unsigned v = data[i] << 16;
    if (i + 1 < n) v |= data[i + 1] << 8;
    if (i + 2 < n) v |= data[i + 2];
    out.push_back(B64[(v >> 18) & 63]);
    out.push_back(B64[(v >> 12) & 63]);
    out.push_back(i + 1 < n ? B64[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < n ? B64[v & 63] : '=');
  }
  return out;
}

std::vector<unsigned char> b64_decode(const std::string& s) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<unsigned char> out;
  out.reserve(s.size() / 4 * 3);
  unsigned acc = 0;
  int bits = 0;
  for (char c : s) {
    if (c == '=') break;
    int v = val(c);
    if (v < 0) throw TensorError("checkpoint: invalid base64 payload");
    acc = (acc << 6) | unsigned(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
    }
  }
  return out;
}

template <typename T>
std::string encode_values(const std::vector<T>& v) {
  return b64_encode(reinterpret_cast<const unsigned char*>(v.data()), v.size() * sizeof(T));
}

template <typename T>
std::vector<T> decode_values(const std::string& s, size_t expect) {
  auto bytes = b64_decode(s);
  if (bytes.size() != expect * sizeof(T))
    throw TensorError("checkpoint: payload has " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(expect * sizeof(T)));
  std::vector<T> v(expect);
  std::memcpy(v.data(), bytes.data(), bytes.size());
  return v;
}

template <typename T>
const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

template <typename T>
json tensor_json(const Tensor<T>& t) {
  return json{{"shape", t.shape()}, {"data", encode_values(t.value())}};
}

template <typename T>
json bn_json(const BNStats<T>& s) {
  return json{{"mean", encode_values(s.running_mean)},
              {"var", encode_values(s.running_var)},
              {"updates", s.updates}};
}

template <typename T>
void load_tensor(const json& j, Tensor<T>& dst, const std::string& name) {
  Shape sh = j.at("shape").get<Shape>();
  if (sh != dst.shape())
    throw TensorError("checkpoint: tensor '" + name + "' has shape " + shape_str(sh) +
                      ", model expects " + shape_str(dst.shape()));
  dst.mutable_value() = decode_values<T>(j.at("data").get<std::string>(), numel(sh));
}

template <typename T>
void load_bn(const json& j, BNStats<T>& dst, const std::string& name) {
  dst.running_mean =
      decode_values<T>(j.at("mean").get<std::string>(), dst.running_mean.size());
  dst.running_var = decode_values<T>(j.at("var").get<std::string>(), dst.running_var.size());
  dst.updates = j.at("updates").get<int64_t>();
  (void)name;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, const HGRUParams<T>& p,
                     const std::string& meta_json) {
  json j;
  j["format"] = "crnn-rt-checkpoint-v1";
  j["dtype"] = dtype_name<T>();
  j["arch"] = {{"channels", p.cfg.channels},
               {"kernel", p.cfg.kernel},
               {"input_kernel", p.cfg.input_kernel},
               {"classes", p.cfg.classes},
               {"init_seed", p.cfg.init_seed}};
  auto names = HGRUParams<T>::parameter_names();
  auto tensors = p.parameters();
  json jt;
  for (size_t i = 0; i < names.size(); ++i) jt[names[i]] = tensor_json(tensors[i]);
  j["tensors"] = std::move(jt);
  j["bn"] = {{"bn_in", bn_json(p.bn_in)}, {"bn_s", bn_json(p.bn_s)}, {"bn_f", bn_json(p.bn_f)}};
  j["meta"] = json::parse(meta_json);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw TensorError("checkpoint: cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
}

template <typename T>
HGRUParams<T> load_checkpoint(const std::string& path, std::string* meta_json) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TensorError("checkpoint: cannot open '" + path + "'");
  json j = json::parse(f);
  if (j.value("format", "") != "crnn-rt-checkpoint-v1")
    throw TensorError("checkpoint: unrecognized format in '" + path + "'");
  if (j.value("dtype", "") != dtype_name<T>())
    throw TensorError("checkpoint: dtype is " + j.value("dtype", "?") + ", loader expects " +
                      dtype_name<T>());
  HGRUConfig cfg;
  cfg.channels = j["arch"].at("channels").get<int>();
  cfg.kernel = j["arch"].at("kernel").get<int>();
  cfg.input_kernel = j["arch"].at("input_kernel").get<int>();
  cfg.classes = j["arch"].at("classes").get<int>();
  cfg.init_seed = j["arch"].value("init_seed", uint64_t(0));
  auto p = HGRUParams<T>::init(cfg);

  auto names = HGRUParams<T>::parameter_names();
  auto tensors = p.parameters();
  for (size_t i = 0; i < names.size(); ++i)
    load_tensor(j["tensors"].at(names[i]), tensors[i], names[i]);
  load_bn(j["bn"].at("bn_in"), p.bn_in, "bn_in");
  load_bn(j["bn"].at("bn_s"), p.bn_s, "bn_s");
  load_bn(j["bn"].at("bn_f"), p.bn_f, "bn_f");
  if (meta_json) *meta_json = j.value("meta", json::object()).dump();
  return p;
}

template <typename T>
void save_tensor_map(const std::string& path,
                     const std::vector<std::pair<std::string, std::vector<T>>>& entries,
                     const std::string& meta_json) {
  json j;
  j["format"] = "crnn-rt-tensor-map-v1";
  j["dtype"] = dtype_name<T>();
  json order = json::array();
  json data = json::object();
  for (const auto& [name, buf] : entries) {
    order.push_back(name);
    data[name] = json{{"size", buf.size()}, {"data", encode_values(buf)}};
  }
  j["order"] = std::move(order);
  j["entries"] = std::move(data);
  j["meta"] = json::parse(meta_json);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw TensorError("tensor map: cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
}

template <typename T>
std::vector<std::pair<std::string, std::vector<T>>> load_tensor_map(const std::string& path,
                                                                    std::string* meta_json) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TensorError("tensor map: cannot open '" + path + "'");
  json j = json::parse(f);
  if (j.value("format", "") != "crnn-rt-tensor-map-v1")
    throw TensorError("tensor map: unrecognized format in '" + path + "'");
  if (j.value("dtype", "") != dtype_name<T>())
    throw TensorError("tensor map: dtype is " + j.value("dtype", "?") + ", loader expects " +
                      dtype_name<T>());
  std::vector<std::pair<std::string, std::vector<T>>> out;
  for (const auto& name_j : j.at("order")) {
    const std::string name = name_j.get<std::string>();
    const json& e = j.at("entries").at(name);
    out.emplace_back(name, decode_values<T>(e.at("data").get<std::string>(),
                                            e.at("size").get<size_t>()));
  }
  if (meta_json) *meta_json = j.value("meta", json::object()).dump();
  return out;
}

template void save_checkpoint(const std::string&, const HGRUParams<float>&, const std::string&);
template void save_checkpoint(const std::string&, const HGRUParams<double>&, const std::string&);
template HGRUParams<float> load_checkpoint(const std::string&, std::string*);
template HGRUParams<double> load_checkpoint(const std::string&, std::string*);
template void save_tensor_map(const std::string&,
                              const std::vector<std::pair<std::string, std::vector<float>>>&,
                              const std::string&);
template void save_tensor_map(const std::string&,
                              const std::vector<std::pair<std::string, std::vector<double>>>&,
                              const std::string&);
template std::vector<std::pair<std::string, std::vector<float>>> load_tensor_map(
    const std::string&, std::string*);
template std::vector<std::pair<std::string, std::vector<double>>> load_tensor_map(
    const std::string&, std::string*);

}  // namespace crnn
