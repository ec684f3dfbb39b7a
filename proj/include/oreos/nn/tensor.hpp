#ifndef OREOS_NN_TENSOR_HPP
#define OREOS_NN_TENSOR_HPP

#include <Eigen/Core>

#include <string>
#include <vector>

namespace oreos::nn {

using Shape = std::vector<Eigen::Index>;

Eigen::Index shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/**
 * Dense row-major tensor of 64-bit reals with an optional gradient buffer.
 *
 * Image-like activations use the shape [channels, rows, cols]; vectors use
 * [n]. The gradient buffer, when enabled, always matches the value shape.
 */
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, Eigen::VectorXd values);

  const Shape& shape() const { return shape_; }
  Eigen::Index size() const { return values_.size(); }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(shape_.size()); }
  Eigen::Index dim(std::size_t i) const { return shape_.at(i); }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  double& operator[](Eigen::Index i) { return values_[i]; }
  double operator[](Eigen::Index i) const { return values_[i]; }

  bool has_grad() const { return grad_.size() == values_.size() && values_.size() > 0; }
  void enable_grad() { grad_ = Eigen::VectorXd::Zero(values_.size()); }
  void zero_grad() { grad_.setZero(values_.size()); }
  Eigen::VectorXd& grad() { return grad_; }
  const Eigen::VectorXd& grad() const { return grad_; }

  /// Same values, new shape of equal size.
  Tensor reshaped(Shape shape) const;

 private:
  Shape shape_;
  Eigen::VectorXd values_;
  Eigen::VectorXd grad_;
};

}  // namespace oreos::nn

#endif  // OREOS_NN_TENSOR_HPP
