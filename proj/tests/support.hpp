// Shared helpers for the unit and acceptance tests.
#ifndef OREOS_TESTS_SUPPORT_HPP
#define OREOS_TESTS_SUPPORT_HPP

#include "oreos/geometry.hpp"
#include "oreos/net.hpp"
#include "oreos/nn/sequential.hpp"
#include "oreos/synthworld.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>

namespace oreos::testing {

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline nn::Tensor random_tensor(std::mt19937_64& rng, const nn::Shape& shape) {
  return nn::Tensor(shape, random_vector(rng, nn::shape_size(shape)));
}

/// Points uniformly distributed in a ball, away from the origin.
inline PointCloud random_cloud(std::mt19937_64& rng, Eigen::Index n, double radius) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Points3 pts(3, n);
  for (Eigen::Index i = 0; i < n;) {
    const Eigen::Vector3d p(u(rng), u(rng), u(rng));
    if (p.norm() > 1.0 || p.norm() < 0.02) continue;
    pts.col(i++) = radius * p;
  }
  return PointCloud(std::move(pts));
}

/// |a - n| / max(|a|, |n|, floor): relative error with an absolute floor for
/// gradients that are essentially zero.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of `loss` with respect to every entry of `values`,
/// compared against `analytic`. Returns the worst relative error.
inline double max_fd_error(Eigen::VectorXd& values, const Eigen::VectorXd& analytic,
                           const std::function<double()>& loss, double h = 1e-5) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = loss();
    values[i] = saved - h;
    const double down = loss();
    values[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

/**
 * Finite-difference check of a Sequential under loss = <r, output> for a
 * random r. Checks the input gradient and every parameter gradient.
 */
inline double sequential_fd_error(nn::Sequential& net, std::mt19937_64& rng) {
  nn::Tensor input = random_tensor(rng, net.input_shape());
  const Eigen::VectorXd r = random_vector(rng, nn::shape_size(net.output_shape()));
  const auto loss = [&]() { return r.dot(net.forward(input).values()); };

  net.zero_grad();
  nn::Tape tape;
  net.forward(input, &tape);
  const nn::Tensor grad_in = net.backward(nn::Tensor(net.output_shape(), r), tape);

  double worst = max_fd_error(input.values(), grad_in.values(), loss);
  for (nn::Tensor* p : net.parameters()) {
    const Eigen::VectorXd analytic = p->grad();
    worst = std::max(worst, max_fd_error(p->values(), analytic, loss));
  }
  return worst;
}

/// 8 x 32 image geometry and a matching small network for gradient checks.
inline ProjectionParams tiny_projection() {
  ProjectionParams p;
  p.height = 8;
  p.width = 32;
  p.zenith_min = -std::numbers::pi / 4;
  p.zenith_max = std::numbers::pi / 4;
  p.max_range = 40.0;
  return p;
}

inline ArchitectureOptions tiny_options() {
  ArchitectureOptions o;
  o.conv1_channels = 3;
  o.conv2_channels = 4;
  o.conv3_channels = 4;
  o.place_hidden = 6;
  o.orientation_hidden = 6;
  o.yaw_hidden = 5;
  return o;
}

inline OreosNet tiny_net(std::uint64_t seed) {
  return OreosNet(OreosArchitecture::standard(tiny_projection(), tiny_options()), tiny_projection(), seed);
}

/// Range image of a dense random cloud: nearly every cell is filled.
inline RangeImage dense_image(std::mt19937_64& rng) {
  return project_scan(random_cloud(rng, 4000, 35.0), tiny_projection());
}

/// A compact scene used across tests: extent 80 m, 60 primitives.
inline const synth::Scene& small_scene() {
  static const synth::Scene scene = synth::generate_scene(11, 80.0, 60);
  return scene;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("oreos_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oreos::testing

#endif  // OREOS_TESTS_SUPPORT_HPP
