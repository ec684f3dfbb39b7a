#include "oreos/nn/tensor.hpp"

#include "oreos/binary_io.hpp"

#include <fstream>
#include <iterator>
#include <stdexcept>

namespace oreos {

namespace io {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace io

namespace nn {

Eigen::Index shape_size(const Shape& shape) {
  Eigen::Index n = 1;
  for (Eigen::Index e : shape) {
    if (e < 1) throw std::invalid_argument("tensor extents must be positive, got " + shape_to_string(shape));
    n *= e;
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  values_ = Eigen::VectorXd::Zero(shape_size(shape_));
}

Tensor::Tensor(Shape shape, Eigen::VectorXd values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw std::invalid_argument("Tensor: " + std::to_string(values_.size()) +
                                " values for shape " + shape_to_string(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), values_);
}

}  // namespace nn
}  // namespace oreos
