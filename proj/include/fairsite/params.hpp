#pragma once

#include <string>
#include <vector>

#include "fairsite/ad.hpp"
#include "fairsite/rng.hpp"
#include "fairsite/types.hpp"

namespace fairsite {

// Owns every learnable tensor of a model in a stable, named order.
// Modules hold integer handles into the store; a TapeBinding maps handles
// to leaf nodes of the tape used for one forward/backward pass.
class ParamStore {
 public:
  int add(std::string name, Mat value) {
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
    return static_cast<int>(values_.size()) - 1;
  }

  Mat& operator[](int handle) { return values_[static_cast<std::size_t>(handle)]; }
  const Mat& operator[](int handle) const {
    return values_[static_cast<std::size_t>(handle)];
  }
  const std::string& name(int handle) const {
    return names_[static_cast<std::size_t>(handle)];
  }
  int count() const { return static_cast<int>(values_.size()); }

 private:
  std::vector<std::string> names_;
  std::vector<Mat> values_;
};

// Leaf nodes for every parameter on one tape.
struct TapeBinding {
  ad::Tape* tape = nullptr;
  std::vector<int> node_of;

  static TapeBinding bind(ad::Tape& tape, const ParamStore& store) {
    TapeBinding b;
    b.tape = &tape;
    b.node_of.reserve(static_cast<std::size_t>(store.count()));
    for (int h = 0; h < store.count(); ++h) b.node_of.push_back(tape.leaf(store[h]));
    return b;
  }

  int operator()(int handle) const {
    return node_of[static_cast<std::size_t>(handle)];
  }
};

// Uniform fan-in initialization, seeded.
inline Mat init_matrix(int rows, int cols, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace fairsite
