#ifndef OREOS_NET_HPP
#define OREOS_NET_HPP

#include "oreos/geometry.hpp"
#include "oreos/nn/checkpoint.hpp"
#include "oreos/nn/sequential.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>

namespace oreos {

inline constexpr int kDescriptorDim = 64;
using Descriptor = Eigen::Matrix<double, kDescriptorDim, 1>;

/// Place descriptor v (rotation invariant) and orientation descriptor w.
struct DescriptorPair {
  Descriptor v;
  Descriptor w;
  bool operator==(const DescriptorPair& o) const { return v == o.v && w == o.w; }
};

/// Layer sizes for the standard architecture; every extent is a knob.
struct ArchitectureOptions {
  int input_pool_h = 2;
  int input_pool_w = 4;
  int conv1_channels = 16;
  int conv2_channels = 32;
  int conv3_channels = 64;
  int kernel = 3;
  int place_hidden = 128;
  int orientation_hidden = 128;
  int yaw_hidden = 64;
};

/**
 * Descriptor network layout: a shared convolutional trunk feeding two
 * fully connected heads (place -> v, orientation -> w), plus the yaw head
 * mapping concat(w_a, w_s) to a (cos, sin) pair.
 *
 * The place head starts with a max-pool spanning the whole trunk output,
 * so v only sees azimuth-pooled features; the orientation head keeps the
 * azimuth axis and therefore stays rotation variant.
 */
struct OreosArchitecture {
  nn::Shape input;
  std::vector<nn::LayerSpec> trunk;
  std::vector<nn::LayerSpec> place_head;
  std::vector<nn::LayerSpec> orientation_head;
  std::vector<nn::LayerSpec> yaw_head;

  static OreosArchitecture standard(const ProjectionParams& projection,
                                    const ArchitectureOptions& options = {});
};

class OreosNet {
 public:
  OreosNet(const OreosArchitecture& arch, const ProjectionParams& projection, std::uint64_t seed);

  static OreosNet from_checkpoint(const nn::Checkpoint& ckpt);
  static OreosNet load(const std::filesystem::path& path);
  nn::Checkpoint to_checkpoint() const;
  void save(const std::filesystem::path& path) const;

  const ProjectionParams& projection() const { return projection_; }
  OreosArchitecture architecture() const;

  /// [1, H, W] network input; throws on a geometry mismatch.
  nn::Tensor image_tensor(const RangeImage& img) const;

  DescriptorPair extract_descriptors(const RangeImage& img) const;
  DescriptorPair extract_descriptors(const PointCloud& cloud) const;

  /// Raw yaw head output y_yaw for the ordered pair (w_a, w_s).
  Eigen::Vector2d yaw_vector(const Descriptor& w_a, const Descriptor& w_s) const;
  /// atan2(y1, y0) in [-pi, pi): yaw discrepancy from a to s.
  double estimate_yaw(const Descriptor& w_a, const Descriptor& w_s) const;

  nn::Sequential& trunk() { return trunk_; }
  nn::Sequential& place_head() { return place_head_; }
  nn::Sequential& orientation_head() { return orientation_head_; }
  nn::Sequential& yaw_head() { return yaw_head_; }
  const nn::Sequential& trunk() const { return trunk_; }
  const nn::Sequential& place_head() const { return place_head_; }
  const nn::Sequential& orientation_head() const { return orientation_head_; }
  const nn::Sequential& yaw_head() const { return yaw_head_; }

  std::vector<nn::Tensor*> parameters();
  void zero_grad();

 private:
  OreosNet(ProjectionParams projection, nn::Sequential trunk, nn::Sequential place,
           nn::Sequential orientation, nn::Sequential yaw);
  void check_dimensions() const;

  ProjectionParams projection_;
  nn::Sequential trunk_;
  nn::Sequential place_head_;
  nn::Sequential orientation_head_;
  nn::Sequential yaw_head_;
};

/// Hinged triplet loss over squared Euclidean distances:
/// max(0, |a - s|^2 - |a - d|^2 + margin).
template <typename DA, typename DS, typename DD>
double triplet_loss(const Eigen::MatrixBase<DA>& v_a, const Eigen::MatrixBase<DS>& v_s,
                    const Eigen::MatrixBase<DD>& v_d, double margin) {
  const double pos = (v_a - v_s).squaredNorm();
  const double neg = (v_a - v_d).squaredNorm();
  return std::max(0.0, pos - neg + margin);
}

/// The unhinged form D_p^2 - D_n^2 + margin with D = squared distance; can
/// go negative. Kept for comparison runs only.
template <typename DA, typename DS, typename DD>
double triplet_loss_literal(const Eigen::MatrixBase<DA>& v_a, const Eigen::MatrixBase<DS>& v_s,
                            const Eigen::MatrixBase<DD>& v_d, double margin) {
  const double pos = (v_a - v_s).squaredNorm();
  const double neg = (v_a - v_d).squaredNorm();
  return pos * pos - neg * neg + margin;
}

// 0.5 * |y - u|^2 with u = (cos d, sin d). Dividing by |u|^2, which is 1 up
// to rounding, makes both reference values exact in floating point: the loss
// is 0 at y == u and 0.5 at y == 0 for every d.
template <typename Derived>
double orientation_loss(const Eigen::MatrixBase<Derived>& y_yaw, double delta_theta) {
  const double c = std::cos(delta_theta), s = std::sin(delta_theta);
  const double e0 = y_yaw[0] - c;
  const double e1 = y_yaw[1] - s;
  return 0.5 * ((e0 * e0 + e1 * e1) / (c * c + s * s));
}

/// d orientation_loss / d y.
template <typename Derived>
Eigen::Vector2d orientation_loss_gradient(const Eigen::MatrixBase<Derived>& y_yaw, double delta_theta) {
  const double c = std::cos(delta_theta), s = std::sin(delta_theta);
  return Eigen::Vector2d(y_yaw[0] - c, y_yaw[1] - s) / (c * c + s * s);
}

struct TripletLossGradient {
  double loss;
  Descriptor d_anchor;
  Descriptor d_similar;
  Descriptor d_dissimilar;
};

TripletLossGradient triplet_loss_gradient(const Descriptor& v_a, const Descriptor& v_s,
                                          const Descriptor& v_d, double margin, bool literal);

}  // namespace oreos

#endif  // OREOS_NET_HPP
