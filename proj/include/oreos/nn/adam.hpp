#ifndef OREOS_NN_ADAM_HPP
#define OREOS_NN_ADAM_HPP

#include "oreos/nn/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace oreos::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Step count plus first/second moment accumulators, one per parameter.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Eigen::VectorXd> first_moment;
  std::vector<Eigen::VectorXd> second_moment;
};

/**
 * One bias-corrected ADAM update using each parameter's gradient buffer:
 *
 *   m <- b1 m + (1 - b1) g,   v <- b2 v + (1 - b2) g^2
 *   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
 *
 * Accumulators are created on the first call. Throws before touching any
 * parameter if a gradient is non-finite or shapes disagree with the state.
 */
void adam_step(AdamState& state, std::span<Tensor* const> params);

}  // namespace oreos::nn

#endif  // OREOS_NN_ADAM_HPP
