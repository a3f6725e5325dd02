#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace crnn {

// Dimensions of a dense row-major tensor. Feature maps are NCHW.
using Shape = std::vector<int>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// Shape mismatches, invalid modes, ill-formed inputs.
class TensorError : public std::runtime_error {
 public:
  explicit TensorError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values detected where the caller demanded finite math.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when the Neumann series for the implicit gradient grows instead of
// decaying: the state map is not a contraction at the evaluation point.
class NonContractiveError : public std::runtime_error {
 public:
  NonContractiveError(const std::string& what, int term_index, double term_norm)
      : std::runtime_error(what), term_index(term_index), term_norm(term_norm) {}
  int term_index;
  double term_norm;
};

// Worker count for parallel regions: min(hardware, CRNN_RT_THREADS, items).
// Kernels are written with disjoint writes and fixed-order reductions, so the
// result is identical for any worker count.
int worker_count(int64_t items);

}  // namespace crnn
