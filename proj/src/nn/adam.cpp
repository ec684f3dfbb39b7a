#include "oreos/nn/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace oreos::nn {

void adam_step(AdamState& state, std::span<Tensor* const> params) {
  if (state.first_moment.empty() && state.step == 0) {
    for (const Tensor* p : params) {
      state.first_moment.push_back(Eigen::VectorXd::Zero(p->size()));
      state.second_moment.push_back(Eigen::VectorXd::Zero(p->size()));
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                                " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = *params[i];
    if (state.first_moment[i].size() != p.size()) {
      throw std::invalid_argument("adam_step: accumulator shape mismatch for parameter " + std::to_string(i));
    }
    if (!p.has_grad()) continue;
    if (!p.grad().allFinite()) {
      throw std::domain_error("adam_step: non-finite gradient in parameter " + std::to_string(i));
    }
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    if (!p.has_grad()) continue;
    const Eigen::ArrayXd g = p.grad().array();
    Eigen::VectorXd& m = state.first_moment[i];
    Eigen::VectorXd& v = state.second_moment[i];
    m.array() = c.beta1 * m.array() + (1.0 - c.beta1) * g;
    v.array() = c.beta2 * v.array() + (1.0 - c.beta2) * g.square();
    p.values().array() -=
        c.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + c.epsilon);
  }
}

}  // namespace oreos::nn
