// SPDX-License-Identifier: Apache-2.0
#include "hybridct/core/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "hybridct/core/error.hpp"

namespace hybridct {

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    HYBRIDCT_REQUIRE(d >= 0, "negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  return shape.empty() ? 0 : n;
}

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

void Tensor::reshape(std::vector<int> shape) {
  if (shape_numel(shape) != data_.size()) {
    Tensor probe;
    probe.shape_ = shape;
    throw ValidationError("cannot reshape " + shape_string() + " to " + probe.shape_string());
  }
  shape_ = std::move(shape);
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << ']';
  return os.str();
}

}  // namespace hybridct
