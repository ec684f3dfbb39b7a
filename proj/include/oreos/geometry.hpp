#ifndef OREOS_GEOMETRY_HPP
#define OREOS_GEOMETRY_HPP

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>

namespace oreos {

/// 3xN matrix of sensor-frame coordinates in meters.
using Points3 = Eigen::Matrix<double, 3, Eigen::Dynamic>;

/// Wraps an angle into [-pi, pi). Idempotent on its own output.
template <typename Scalar>
Scalar normalize_angle(Scalar angle) {
  constexpr Scalar kPi = std::numbers::pi_v<Scalar>;
  constexpr Scalar kTwoPi = 2 * kPi;
  Scalar r = angle - kTwoPi * std::floor((angle + kPi) / kTwoPi);
  // floor() can land one period off when angle + pi rounds onto a multiple of 2pi.
  if (r < -kPi) r += kTwoPi;
  if (r >= kPi) r -= kTwoPi;
  if (r < -kPi) r = -kPi;
  return r;
}

template <typename Scalar>
constexpr Scalar deg2rad(Scalar deg) {
  return deg * std::numbers::pi_v<Scalar> / Scalar(180);
}

template <typename Scalar>
constexpr Scalar rad2deg(Scalar rad) {
  return rad * Scalar(180) / std::numbers::pi_v<Scalar>;
}

/**
 * A single LiDAR scan: N points in the sensor frame with optional
 * per-point intensity in [0, 1].
 *
 * Construction validates finiteness and intensity count. An empty cloud is
 * representable (a ray-cast scan can miss everything) but every consumer
 * that needs points rejects it.
 */
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(Points3 points);
  PointCloud(Points3 points, Eigen::VectorXd intensity);

  Eigen::Index size() const { return points_.cols(); }
  bool empty() const { return points_.cols() == 0; }

  const Points3& points() const { return points_; }
  const std::optional<Eigen::VectorXd>& intensity() const { return intensity_; }

  Eigen::Vector3d point(Eigen::Index i) const { return points_.col(i); }

  bool operator==(const PointCloud& other) const;

 private:
  Points3 points_;
  std::optional<Eigen::VectorXd> intensity_;
};

/// Planar pose (x, y in meters; theta in radians, kept in [-pi, pi)).
struct PlanarPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  PlanarPose() = default;
  PlanarPose(double x_, double y_, double theta_)
      : x(x_), y(y_), theta(normalize_angle(theta_)) {}

  Eigen::Matrix2d rotation() const;
  Eigen::Vector2d translation() const { return {x, y}; }

  /// Maps a sensor-frame point into the parent frame.
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const;

  PlanarPose inverse() const;

  bool operator==(const PlanarPose&) const = default;
};

/// this * rhs: apply rhs first, then lhs.
PlanarPose compose(const PlanarPose& lhs, const PlanarPose& rhs);

double planar_distance(const PlanarPose& a, const PlanarPose& b);

/// Geometry of the spherical projection. Rows index zenith (row 0 is the
/// highest elevation), columns index azimuth counter-clockwise from +x.
struct ProjectionParams {
  int height = 16;
  int width = 360;
  double zenith_min = deg2rad(-26.0);
  double zenith_max = deg2rad(6.0);
  double max_range = 80.0;

  void validate() const;
  bool operator==(const ProjectionParams&) const = default;

  static ProjectionParams synthetic_default();
  static ProjectionParams kitti_default();
};

/// Number of quantization levels used for the normalized range channel.
inline constexpr int kRangeLevels = 65535;

using ImageMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/**
 * H x W normalized range image. Each cell holds a 16-bit quantized range
 * divided by 65535, so values lie in [0, 1] with 0 meaning "no return".
 */
class RangeImage {
 public:
  RangeImage(ProjectionParams params, ImageMatrix cells);
  explicit RangeImage(ProjectionParams params);

  int height() const { return params_.height; }
  int width() const { return params_.width; }
  const ProjectionParams& params() const { return params_; }
  double azimuth_resolution() const;

  const ImageMatrix& cells() const { return cells_; }
  double operator()(int row, int col) const { return cells_(row, col); }

  /// Cell value converted back to meters (0 for empty cells).
  double range_at(int row, int col) const;

  Eigen::Index non_empty_count() const;

  bool operator==(const RangeImage& other) const;

 private:
  ProjectionParams params_;
  ImageMatrix cells_;
};

/// Pixel a point bins to, or nullopt if it falls outside the zenith span
/// (or has zero range).
struct PixelIndex {
  int row;
  int col;
};
std::optional<PixelIndex> project_point(const Eigen::Vector3d& p, const ProjectionParams& params);

/// Quantizes a range in meters to the normalized [1/65535, 1] cell scale.
double quantize_range(double range, double max_range);

RangeImage project_scan(const PointCloud& cloud, const ProjectionParams& params);

PointCloud rotate_yaw(const PointCloud& cloud, double delta);

/// Circular column shift: out(r, c) = in(r, (c - k) mod W).
RangeImage shift_columns(const RangeImage& img, int k);

/// Rotate by pose.theta about z, then translate by (pose.x, pose.y, 0).
PointCloud transform_planar(const PointCloud& cloud, const PlanarPose& pose);

/// Same frame change applied to an expression of 3xN points.
template <typename Derived>
Points3 transform_points(const Eigen::MatrixBase<Derived>& points, const PlanarPose& pose) {
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  rot.topLeftCorner<2, 2>() = pose.rotation();
  Points3 out = rot * points;
  out.row(0).array() += pose.x;
  out.row(1).array() += pose.y;
  return out;
}

}  // namespace oreos

#endif  // OREOS_GEOMETRY_HPP
