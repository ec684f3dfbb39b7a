#ifndef OREOS_NN_LAYERS_HPP
#define OREOS_NN_LAYERS_HPP

#include "oreos/nn/tensor.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace oreos::nn {

enum class LayerKind : std::uint32_t {
  kConv2d = 1,
  kMaxPool2d = 2,
  kFullyConnected = 3,
  kPRelu = 4,
  kFlatten = 5,
};

std::string to_string(LayerKind kind);

/**
 * Shape-independent description of a layer. Parameter shapes follow from
 * this description plus the input shape seen at build time.
 *
 *   conv2d          kernel_h x kernel_w, stride, `units` output channels
 *   maxpool2d       window kernel_h x kernel_w, stride (defaults to window)
 *   fully_connected `units` outputs, rank-1 input
 *   prelu           one learned slope per channel (dim 0 of the input)
 *   flatten         any input to rank 1
 */
struct LayerSpec {
  LayerKind kind = LayerKind::kFlatten;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  int units = 0;

  static LayerSpec conv2d(int out_channels, int kh, int kw, int sh = 1, int sw = 1);
  static LayerSpec maxpool2d(int ph, int pw);
  static LayerSpec maxpool2d(int ph, int pw, int sh, int sw);
  static LayerSpec fully_connected(int units);
  static LayerSpec prelu();
  static LayerSpec flatten();

  void validate() const;
  bool operator==(const LayerSpec&) const = default;
};

/// Values a layer keeps from its forward pass for the backward pass.
struct LayerCache {
  Tensor input;
  std::vector<Eigen::Index> argmax;
};

class Layer {
 public:
  Layer(LayerSpec spec, Shape input_shape);
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }

  std::vector<Tensor>& parameters() { return params_; }
  const std::vector<Tensor>& parameters() const { return params_; }

  /// `cache` may be null for inference-only calls.
  Tensor forward(const Tensor& input, LayerCache* cache) const;
  /// Accumulates parameter gradients and returns the input gradient.
  Tensor backward(const Tensor& grad_output, const LayerCache& cache);

  virtual void initialize(std::mt19937_64& rng);
  virtual std::unique_ptr<Layer> clone() const = 0;

 protected:
  virtual Tensor do_forward(const Tensor& input, LayerCache* cache) const = 0;
  virtual Tensor do_backward(const Tensor& grad_output, const LayerCache& cache) = 0;

  LayerSpec spec_;
  Shape input_shape_;
  Shape output_shape_;
  std::vector<Tensor> params_;
};

/// Cross-correlation with zero padding along rows (zenith) and circular
/// padding along columns (azimuth). Parameters: weight [out, in, kh, kw], bias [out].
class Conv2d final : public Layer {
 public:
  Conv2d(LayerSpec spec, Shape input_shape);
  void initialize(std::mt19937_64& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

 protected:
  Tensor do_forward(const Tensor& input, LayerCache* cache) const override;
  Tensor do_backward(const Tensor& grad_output, const LayerCache& cache) override;
};

class MaxPool2d final : public Layer {
 public:
  MaxPool2d(LayerSpec spec, Shape input_shape);
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2d>(*this); }

 protected:
  Tensor do_forward(const Tensor& input, LayerCache* cache) const override;
  Tensor do_backward(const Tensor& grad_output, const LayerCache& cache) override;
};

/// y = W x + b. Parameters: weight [units, in] row-major, bias [units].
class FullyConnected final : public Layer {
 public:
  FullyConnected(LayerSpec spec, Shape input_shape);
  void initialize(std::mt19937_64& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<FullyConnected>(*this); }

 protected:
  Tensor do_forward(const Tensor& input, LayerCache* cache) const override;
  Tensor do_backward(const Tensor& grad_output, const LayerCache& cache) override;
};

/// prelu(x) = x for x > 0, a_c * x otherwise; slopes start at 0.25.
class PRelu final : public Layer {
 public:
  PRelu(LayerSpec spec, Shape input_shape);
  void initialize(std::mt19937_64& rng) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<PRelu>(*this); }

 protected:
  Tensor do_forward(const Tensor& input, LayerCache* cache) const override;
  Tensor do_backward(const Tensor& grad_output, const LayerCache& cache) override;
};

class Flatten final : public Layer {
 public:
  Flatten(LayerSpec spec, Shape input_shape);
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }

 protected:
  Tensor do_forward(const Tensor& input, LayerCache* cache) const override;
  Tensor do_backward(const Tensor& grad_output, const LayerCache& cache) override;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input_shape);

}  // namespace oreos::nn

#endif  // OREOS_NN_LAYERS_HPP
