#include "oreos/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace oreos::nn {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

int wrap(int i, int n) { return ((i % n) + n) % n; }

// dst[x] += a * src[(x + offset) mod n] for x in [0, n). Always accumulates
// in increasing x, one tap at a time, so every output column sees the same
// summation order.
void circular_axpy(double a, const double* src, double* dst, int n, int offset) {
  const int s = wrap(offset, n);
  Eigen::Map<Eigen::VectorXd> d(dst, n);
  Eigen::Map<const Eigen::VectorXd> v(src, n);
  d.head(n - s) += a * v.tail(n - s);
  if (s > 0) d.tail(s) += a * v.head(s);
}

// sum_x g[x] * src[(x + offset) mod n]
double circular_dot(const double* g, const double* src, int n, int offset) {
  const int s = wrap(offset, n);
  Eigen::Map<const Eigen::VectorXd> gv(g, n);
  Eigen::Map<const Eigen::VectorXd> v(src, n);
  double acc = gv.head(n - s).dot(v.tail(n - s));
  if (s > 0) acc += gv.tail(s).dot(v.head(s));
  return acc;
}

void he_normal(Eigen::VectorXd& values, Eigen::Index fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (Eigen::Index i = 0; i < values.size(); ++i) values[i] = normal(rng);
}

void require_rank(const LayerSpec& spec, const Shape& shape, std::size_t rank) {
  if (shape.size() != rank) {
    throw std::invalid_argument(to_string(spec.kind) + ": expected rank-" + std::to_string(rank) +
                                " input, got " + shape_to_string(shape));
  }
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kMaxPool2d: return "maxpool2d";
    case LayerKind::kFullyConnected: return "fully_connected";
    case LayerKind::kPRelu: return "prelu";
    case LayerKind::kFlatten: return "flatten";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv2d(int out_channels, int kh, int kw, int sh, int sw) {
  return {LayerKind::kConv2d, kh, kw, sh, sw, out_channels};
}

LayerSpec LayerSpec::maxpool2d(int ph, int pw) { return {LayerKind::kMaxPool2d, ph, pw, ph, pw, 0}; }

LayerSpec LayerSpec::maxpool2d(int ph, int pw, int sh, int sw) {
  return {LayerKind::kMaxPool2d, ph, pw, sh, sw, 0};
}

LayerSpec LayerSpec::fully_connected(int units) {
  return {LayerKind::kFullyConnected, 1, 1, 1, 1, units};
}

LayerSpec LayerSpec::prelu() { return {LayerKind::kPRelu, 1, 1, 1, 1, 0}; }

LayerSpec LayerSpec::flatten() { return {LayerKind::kFlatten, 1, 1, 1, 1, 0}; }

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::kConv2d:
    case LayerKind::kMaxPool2d:
      if (kernel_h < 1 || kernel_w < 1 || stride_h < 1 || stride_w < 1) {
        throw std::invalid_argument(to_string(kind) + ": kernel and stride extents must be >= 1");
      }
      if (kind == LayerKind::kConv2d && units < 1) {
        throw std::invalid_argument("conv2d: output channels must be >= 1");
      }
      break;
    case LayerKind::kFullyConnected:
      if (units < 1) throw std::invalid_argument("fully_connected: units must be >= 1");
      break;
    case LayerKind::kPRelu:
    case LayerKind::kFlatten:
      break;
    default:
      throw std::invalid_argument("unknown layer kind " +
                                  std::to_string(static_cast<std::uint32_t>(kind)));
  }
}

Layer::Layer(LayerSpec spec, Shape input_shape)
    : spec_(spec), input_shape_(std::move(input_shape)) {
  spec_.validate();
  shape_size(input_shape_);
}

Tensor Layer::forward(const Tensor& input, LayerCache* cache) const {
  if (input.shape() != input_shape_) {
    throw std::invalid_argument(to_string(spec_.kind) + ": shape mismatch, expected " +
                                shape_to_string(input_shape_) + " but got " +
                                shape_to_string(input.shape()));
  }
  if (cache) cache->input = input;
  return do_forward(input, cache);
}

Tensor Layer::backward(const Tensor& grad_output, const LayerCache& cache) {
  if (cache.input.shape() != input_shape_) {
    throw std::logic_error(to_string(spec_.kind) + ": backward called without a recorded forward pass");
  }
  if (grad_output.shape() != output_shape_) {
    throw std::invalid_argument(to_string(spec_.kind) + ": gradient shape mismatch, expected " +
                                shape_to_string(output_shape_) + " but got " +
                                shape_to_string(grad_output.shape()));
  }
  for (Tensor& p : params_) {
    if (!p.has_grad()) p.enable_grad();
  }
  return do_backward(grad_output, cache);
}

void Layer::initialize(std::mt19937_64&) {}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(LayerSpec spec, Shape input_shape) : Layer(spec, std::move(input_shape)) {
  require_rank(spec_, input_shape_, 3);
  const Eigen::Index cin = input_shape_[0];
  const Eigen::Index h = input_shape_[1];
  const Eigen::Index w = input_shape_[2];
  const int pad_h = spec_.kernel_h / 2;
  const Eigen::Index h_out = (h + 2 * pad_h - spec_.kernel_h) / spec_.stride_h + 1;
  if (h + 2 * pad_h < spec_.kernel_h || h_out < 1) {
    throw std::invalid_argument("conv2d: kernel taller than padded input " + shape_to_string(input_shape_));
  }
  if (w % spec_.stride_w != 0) {
    throw std::invalid_argument("conv2d: input width " + std::to_string(w) +
                                " not divisible by column stride " + std::to_string(spec_.stride_w));
  }
  output_shape_ = {spec_.units, h_out, w / spec_.stride_w};
  params_.emplace_back(Shape{spec_.units, cin, spec_.kernel_h, spec_.kernel_w});
  params_.emplace_back(Shape{spec_.units});
}

void Conv2d::initialize(std::mt19937_64& rng) {
  he_normal(params_[0].values(), input_shape_[0] * spec_.kernel_h * spec_.kernel_w, rng);
  params_[1].values().setZero();
}

Tensor Conv2d::do_forward(const Tensor& input, LayerCache*) const {
  const int cin = static_cast<int>(input_shape_[0]);
  const int h = static_cast<int>(input_shape_[1]);
  const int w = static_cast<int>(input_shape_[2]);
  const int cout = static_cast<int>(output_shape_[0]);
  const int h_out = static_cast<int>(output_shape_[1]);
  const int w_out = static_cast<int>(output_shape_[2]);
  const int kh = spec_.kernel_h, kw = spec_.kernel_w;
  const int pad_h = kh / 2, pad_w = kw / 2;
  const int sh = spec_.stride_h, sw = spec_.stride_w;

  Tensor out(output_shape_);
  const double* in = input.values().data();
  const double* weight = params_[0].values().data();
  const double* bias = params_[1].values().data();
  double* o = out.values().data();

  for (int co = 0; co < cout; ++co) {
    double* plane = o + static_cast<std::ptrdiff_t>(co) * h_out * w_out;
    std::fill(plane, plane + h_out * w_out, bias[co]);
    for (int ci = 0; ci < cin; ++ci) {
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const double wv = weight[((co * cin + ci) * kh + ky) * kw + kx];
          for (int oy = 0; oy < h_out; ++oy) {
            const int iy = oy * sh + ky - pad_h;
            if (iy < 0 || iy >= h) continue;
            const double* src = in + (static_cast<std::ptrdiff_t>(ci) * h + iy) * w;
            double* dst = plane + static_cast<std::ptrdiff_t>(oy) * w_out;
            if (sw == 1) {
              circular_axpy(wv, src, dst, w, kx - pad_w);
            } else {
              for (int ox = 0; ox < w_out; ++ox) dst[ox] += wv * src[wrap(ox * sw + kx - pad_w, w)];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor Conv2d::do_backward(const Tensor& grad_output, const LayerCache& cache) {
  const int cin = static_cast<int>(input_shape_[0]);
  const int h = static_cast<int>(input_shape_[1]);
  const int w = static_cast<int>(input_shape_[2]);
  const int cout = static_cast<int>(output_shape_[0]);
  const int h_out = static_cast<int>(output_shape_[1]);
  const int w_out = static_cast<int>(output_shape_[2]);
  const int kh = spec_.kernel_h, kw = spec_.kernel_w;
  const int pad_h = kh / 2, pad_w = kw / 2;
  const int sh = spec_.stride_h, sw = spec_.stride_w;

  Tensor grad_in(input_shape_);
  const double* in = cache.input.values().data();
  const double* g = grad_output.values().data();
  const double* weight = params_[0].values().data();
  double* gw = params_[0].grad().data();
  double* gb = params_[1].grad().data();
  double* gi = grad_in.values().data();

  for (int co = 0; co < cout; ++co) {
    const double* gplane = g + static_cast<std::ptrdiff_t>(co) * h_out * w_out;
    gb[co] += Eigen::Map<const Eigen::VectorXd>(gplane, h_out * w_out).sum();
    for (int ci = 0; ci < cin; ++ci) {
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const std::ptrdiff_t widx = ((co * cin + ci) * kh + ky) * kw + kx;
          const double wv = weight[widx];
          double acc = 0.0;
          for (int oy = 0; oy < h_out; ++oy) {
            const int iy = oy * sh + ky - pad_h;
            if (iy < 0 || iy >= h) continue;
            const double* src = in + (static_cast<std::ptrdiff_t>(ci) * h + iy) * w;
            double* dsrc = gi + (static_cast<std::ptrdiff_t>(ci) * h + iy) * w;
            const double* grow = gplane + static_cast<std::ptrdiff_t>(oy) * w_out;
            if (sw == 1) {
              acc += circular_dot(grow, src, w, kx - pad_w);
              circular_axpy(wv, grow, dsrc, w, -(kx - pad_w));
            } else {
              for (int ox = 0; ox < w_out; ++ox) {
                const int ix = wrap(ox * sw + kx - pad_w, w);
                acc += grow[ox] * src[ix];
                dsrc[ix] += wv * grow[ox];
              }
            }
          }
          gw[widx] += acc;
        }
      }
    }
  }
  return grad_in;
}

// ------------------------------------------------------------- MaxPool2d

MaxPool2d::MaxPool2d(LayerSpec spec, Shape input_shape) : Layer(spec, std::move(input_shape)) {
  require_rank(spec_, input_shape_, 3);
  const Eigen::Index h = input_shape_[1];
  const Eigen::Index w = input_shape_[2];
  if (spec_.kernel_h > h || spec_.kernel_w > w) {
    throw std::invalid_argument("maxpool2d: window " + std::to_string(spec_.kernel_h) + "x" +
                                std::to_string(spec_.kernel_w) + " larger than input " +
                                shape_to_string(input_shape_));
  }
  output_shape_ = {input_shape_[0], (h - spec_.kernel_h) / spec_.stride_h + 1,
                   (w - spec_.kernel_w) / spec_.stride_w + 1};
}

Tensor MaxPool2d::do_forward(const Tensor& input, LayerCache* cache) const {
  const Eigen::Index c = input_shape_[0], h = input_shape_[1], w = input_shape_[2];
  const Eigen::Index h_out = output_shape_[1], w_out = output_shape_[2];
  Tensor out(output_shape_);
  if (cache) cache->argmax.assign(static_cast<std::size_t>(out.size()), 0);
  const double* in = input.values().data();
  Eigen::Index k = 0;
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    for (Eigen::Index oy = 0; oy < h_out; ++oy) {
      for (Eigen::Index ox = 0; ox < w_out; ++ox, ++k) {
        Eigen::Index best = (ch * h + oy * spec_.stride_h) * w + ox * spec_.stride_w;
        for (int py = 0; py < spec_.kernel_h; ++py) {
          for (int px = 0; px < spec_.kernel_w; ++px) {
            const Eigen::Index idx = (ch * h + oy * spec_.stride_h + py) * w + ox * spec_.stride_w + px;
            if (in[idx] > in[best]) best = idx;
          }
        }
        out[k] = in[best];
        if (cache) cache->argmax[static_cast<std::size_t>(k)] = best;
      }
    }
  }
  return out;
}

Tensor MaxPool2d::do_backward(const Tensor& grad_output, const LayerCache& cache) {
  if (cache.argmax.size() != static_cast<std::size_t>(grad_output.size())) {
    throw std::logic_error("maxpool2d: backward called without a recorded forward pass");
  }
  Tensor grad_in(input_shape_);
  for (Eigen::Index k = 0; k < grad_output.size(); ++k) {
    grad_in[cache.argmax[static_cast<std::size_t>(k)]] += grad_output[k];
  }
  return grad_in;
}

// -------------------------------------------------------- FullyConnected

FullyConnected::FullyConnected(LayerSpec spec, Shape input_shape)
    : Layer(spec, std::move(input_shape)) {
  require_rank(spec_, input_shape_, 1);
  output_shape_ = {spec_.units};
  params_.emplace_back(Shape{spec_.units, input_shape_[0]});
  params_.emplace_back(Shape{spec_.units});
}

void FullyConnected::initialize(std::mt19937_64& rng) {
  he_normal(params_[0].values(), input_shape_[0], rng);
  params_[1].values().setZero();
}

Tensor FullyConnected::do_forward(const Tensor& input, LayerCache*) const {
  const Eigen::Index n_in = input_shape_[0];
  const Eigen::Index n_out = output_shape_[0];
  Eigen::Map<const RowMajorMatrix> weight(params_[0].values().data(), n_out, n_in);
  Eigen::VectorXd y = params_[1].values();
  y.noalias() += weight * input.values();
  return Tensor(output_shape_, std::move(y));
}

Tensor FullyConnected::do_backward(const Tensor& grad_output, const LayerCache& cache) {
  const Eigen::Index n_in = input_shape_[0];
  const Eigen::Index n_out = output_shape_[0];
  Eigen::Map<const RowMajorMatrix> weight(params_[0].values().data(), n_out, n_in);
  Eigen::Map<RowMajorMatrix> grad_weight(params_[0].grad().data(), n_out, n_in);
  grad_weight.noalias() += grad_output.values() * cache.input.values().transpose();
  params_[1].grad() += grad_output.values();
  Eigen::VectorXd gx = weight.transpose() * grad_output.values();
  return Tensor(input_shape_, std::move(gx));
}

// ----------------------------------------------------------------- PRelu

PRelu::PRelu(LayerSpec spec, Shape input_shape) : Layer(spec, std::move(input_shape)) {
  if (input_shape_.empty()) throw std::invalid_argument("prelu: input must have rank >= 1");
  output_shape_ = input_shape_;
  params_.emplace_back(Shape{input_shape_[0]});
  params_[0].values().setConstant(0.25);
}

void PRelu::initialize(std::mt19937_64&) { params_[0].values().setConstant(0.25); }

Tensor PRelu::do_forward(const Tensor& input, LayerCache*) const {
  const Eigen::Index channels = input_shape_[0];
  const Eigen::Index per = input.size() / channels;
  Tensor out(output_shape_);
  const Eigen::VectorXd& slope = params_[0].values();
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (Eigen::Index i = c * per; i < (c + 1) * per; ++i) {
      const double x = input[i];
      out[i] = x > 0.0 ? x : slope[c] * x;
    }
  }
  return out;
}

Tensor PRelu::do_backward(const Tensor& grad_output, const LayerCache& cache) {
  const Eigen::Index channels = input_shape_[0];
  const Eigen::Index per = grad_output.size() / channels;
  Tensor grad_in(input_shape_);
  const Eigen::VectorXd& slope = params_[0].values();
  Eigen::VectorXd& grad_slope = params_[0].grad();
  for (Eigen::Index c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (Eigen::Index i = c * per; i < (c + 1) * per; ++i) {
      const double x = cache.input[i];
      if (x > 0.0) {
        grad_in[i] = grad_output[i];
      } else {
        grad_in[i] = slope[c] * grad_output[i];
        acc += grad_output[i] * x;
      }
    }
    grad_slope[c] += acc;
  }
  return grad_in;
}

// --------------------------------------------------------------- Flatten

Flatten::Flatten(LayerSpec spec, Shape input_shape) : Layer(spec, std::move(input_shape)) {
  output_shape_ = {shape_size(input_shape_)};
}

Tensor Flatten::do_forward(const Tensor& input, LayerCache*) const {
  return input.reshaped(output_shape_);
}

Tensor Flatten::do_backward(const Tensor& grad_output, const LayerCache&) {
  return grad_output.reshaped(input_shape_);
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input_shape) {
  switch (spec.kind) {
    case LayerKind::kConv2d: return std::make_unique<Conv2d>(spec, input_shape);
    case LayerKind::kMaxPool2d: return std::make_unique<MaxPool2d>(spec, input_shape);
    case LayerKind::kFullyConnected: return std::make_unique<FullyConnected>(spec, input_shape);
    case LayerKind::kPRelu: return std::make_unique<PRelu>(spec, input_shape);
    case LayerKind::kFlatten: return std::make_unique<Flatten>(spec, input_shape);
  }
  throw std::invalid_argument("make_layer: unknown layer kind");
}

}  // namespace oreos::nn
