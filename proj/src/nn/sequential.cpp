#include "oreos/nn/sequential.hpp"

#include <stdexcept>

namespace oreos::nn {

Sequential::Sequential(Shape input_shape, const std::vector<LayerSpec>& specs)
    : input_shape_(std::move(input_shape)) {
  Shape shape = input_shape_;
  for (const LayerSpec& spec : specs) {
    layers_.push_back(make_layer(spec, shape));
    shape = layers_.back()->output_shape();
  }
}

Sequential::Sequential(const Sequential& other) : input_shape_(other.input_shape_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

const Shape& Sequential::output_shape() const {
  return layers_.empty() ? input_shape_ : layers_.back()->output_shape();
}

std::vector<LayerSpec> Sequential::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l->spec());
  return out;
}

Tensor Sequential::forward(const Tensor& input, Tape* tape) const {
  if (input.shape() != input_shape_) {
    throw std::invalid_argument("Sequential: shape mismatch, expected " +
                                shape_to_string(input_shape_) + " but got " +
                                shape_to_string(input.shape()));
  }
  if (tape) tape->caches.assign(layers_.size(), LayerCache{});
  Tensor x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i]->forward(x, tape ? &tape->caches[i] : nullptr);
  }
  return x;
}

Tensor Sequential::backward(const Tensor& grad_output, const Tape& tape) {
  if (tape.caches.size() != layers_.size() || (layers_.size() > 0 && tape.empty())) {
    throw std::logic_error("Sequential: backward called before forward");
  }
  if (layers_.empty()) return grad_output;
  Tensor g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, tape.caches[i]);
  return g;
}

std::vector<Tensor*> Sequential::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    for (Tensor& p : l->parameters()) out.push_back(&p);
  }
  return out;
}

std::vector<const Tensor*> Sequential::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers_) {
    for (const Tensor& p : l->parameters()) out.push_back(&p);
  }
  return out;
}

Eigen::Index Sequential::parameter_count() const {
  Eigen::Index n = 0;
  for (const Tensor* p : parameters()) n += p->size();
  return n;
}

void Sequential::initialize(std::mt19937_64& rng) {
  for (auto& l : layers_) l->initialize(rng);
}

void Sequential::zero_grad() {
  for (Tensor* p : parameters()) p->zero_grad();
}

}  // namespace oreos::nn
