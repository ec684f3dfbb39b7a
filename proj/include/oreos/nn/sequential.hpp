#ifndef OREOS_NN_SEQUENTIAL_HPP
#define OREOS_NN_SEQUENTIAL_HPP

#include "oreos/nn/layers.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace oreos::nn {

/// Recorded forward pass of a Sequential: one cache per layer.
struct Tape {
  std::vector<LayerCache> caches;
  bool empty() const { return caches.empty(); }
};

/**
 * Chain of layers with shape inference at construction.
 *
 * forward() is const and only touches the caller's Tape, so a frozen
 * network can be shared between threads. backward() accumulates into the
 * parameter gradient buffers and must be confined to one thread.
 */
class Sequential {
 public:
  Sequential() = default;
  Sequential(Shape input_shape, const std::vector<LayerSpec>& specs);

  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const;
  std::vector<LayerSpec> specs() const;
  std::size_t layer_count() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  Tensor forward(const Tensor& input, Tape* tape = nullptr) const;
  /// Throws std::logic_error when `tape` holds no recorded forward pass.
  Tensor backward(const Tensor& grad_output, const Tape& tape);

  /// Parameters in declaration order.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  Eigen::Index parameter_count() const;

  void initialize(std::mt19937_64& rng);
  void zero_grad();

 private:
  Shape input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace oreos::nn

#endif  // OREOS_NN_SEQUENTIAL_HPP
