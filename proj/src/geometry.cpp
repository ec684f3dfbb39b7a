#include "oreos/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace oreos {

namespace {

void require_finite(const Points3& points) {
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    if (!points.col(i).allFinite()) {
      throw std::invalid_argument("PointCloud: non-finite coordinate at point " +
                                  std::to_string(i));
    }
  }
}

}  // namespace

PointCloud::PointCloud(Points3 points) : points_(std::move(points)) {
  require_finite(points_);
}

PointCloud::PointCloud(Points3 points, Eigen::VectorXd intensity)
    : points_(std::move(points)), intensity_(std::move(intensity)) {
  require_finite(points_);
  if (intensity_->size() != points_.cols()) {
    throw std::invalid_argument("PointCloud: " + std::to_string(intensity_->size()) +
                                " intensities for " + std::to_string(points_.cols()) +
                                " points");
  }
  if (!intensity_->allFinite()) {
    throw std::invalid_argument("PointCloud: non-finite intensity");
  }
}

bool PointCloud::operator==(const PointCloud& other) const {
  if (points_.cols() != other.points_.cols()) return false;
  if (points_ != other.points_) return false;
  if (intensity_.has_value() != other.intensity_.has_value()) return false;
  return !intensity_ || *intensity_ == *other.intensity_;
}

Eigen::Matrix2d PlanarPose::rotation() const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

Eigen::Vector3d PlanarPose::apply(const Eigen::Vector3d& p) const {
  const Eigen::Vector2d xy = rotation() * p.head<2>() + translation();
  return {xy.x(), xy.y(), p.z()};
}

PlanarPose PlanarPose::inverse() const {
  const Eigen::Vector2d t = -(rotation().transpose() * translation());
  return {t.x(), t.y(), -theta};
}

PlanarPose compose(const PlanarPose& lhs, const PlanarPose& rhs) {
  const Eigen::Vector2d t = lhs.rotation() * rhs.translation() + lhs.translation();
  return {t.x(), t.y(), lhs.theta + rhs.theta};
}

double planar_distance(const PlanarPose& a, const PlanarPose& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

void ProjectionParams::validate() const {
  if (width < 8) throw std::invalid_argument("ProjectionParams: width must be >= 8");
  if (height < 2) throw std::invalid_argument("ProjectionParams: height must be >= 2");
  if (!(max_range > 0.0)) throw std::invalid_argument("ProjectionParams: max_range must be > 0");
  if (!(zenith_min < zenith_max)) {
    throw std::invalid_argument("ProjectionParams: zenith_min must be < zenith_max");
  }
}

ProjectionParams ProjectionParams::synthetic_default() { return {}; }

ProjectionParams ProjectionParams::kitti_default() {
  ProjectionParams p;
  p.height = 64;
  p.width = 720;
  p.zenith_min = deg2rad(-25.0);
  p.zenith_max = deg2rad(3.0);
  p.max_range = 120.0;
  return p;
}

RangeImage::RangeImage(ProjectionParams params, ImageMatrix cells)
    : params_(params), cells_(std::move(cells)) {
  params_.validate();
  if (cells_.rows() != params_.height || cells_.cols() != params_.width) {
    throw std::invalid_argument("RangeImage: cell matrix does not match projection shape");
  }
  if ((cells_.array() < 0.0).any() || (cells_.array() > 1.0).any()) {
    throw std::invalid_argument("RangeImage: cells must lie in [0, 1]");
  }
}

RangeImage::RangeImage(ProjectionParams params)
    : params_(params), cells_(ImageMatrix::Zero(params.height, params.width)) {
  params_.validate();
}

double RangeImage::azimuth_resolution() const {
  return 2.0 * std::numbers::pi / params_.width;
}

double RangeImage::range_at(int row, int col) const {
  return cells_(row, col) * params_.max_range;
}

Eigen::Index RangeImage::non_empty_count() const {
  return (cells_.array() > 0.0).count();
}

bool RangeImage::operator==(const RangeImage& other) const {
  return params_ == other.params_ && cells_ == other.cells_;
}

std::optional<PixelIndex> project_point(const Eigen::Vector3d& p, const ProjectionParams& params) {
  const double range = p.norm();
  if (!(range > 0.0)) return std::nullopt;

  const double zenith = std::asin(std::clamp(p.z() / range, -1.0, 1.0));
  if (zenith < params.zenith_min || zenith > params.zenith_max) return std::nullopt;

  const double span = params.zenith_max - params.zenith_min;
  int row = static_cast<int>(std::floor((params.zenith_max - zenith) / span * params.height));
  row = std::clamp(row, 0, params.height - 1);

  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double azimuth = std::atan2(p.y(), p.x());
  if (azimuth < 0.0) azimuth += kTwoPi;
  int col = static_cast<int>(std::floor(azimuth / kTwoPi * params.width));
  if (col >= params.width) col -= params.width;
  col = std::clamp(col, 0, params.width - 1);
  return PixelIndex{row, col};
}

double quantize_range(double range, double max_range) {
  const double clipped = std::min(range, max_range);
  const double level = std::round(clipped / max_range * kRangeLevels);
  return std::clamp(level, 1.0, static_cast<double>(kRangeLevels)) / kRangeLevels;
}

RangeImage project_scan(const PointCloud& cloud, const ProjectionParams& params) {
  params.validate();
  if (cloud.empty()) throw std::invalid_argument("project_scan: empty cloud");

  ImageMatrix nearest =
      ImageMatrix::Constant(params.height, params.width, std::numeric_limits<double>::infinity());
  const Points3& pts = cloud.points();
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const Eigen::Vector3d p = pts.col(i);
    if (!p.allFinite()) {
      throw std::invalid_argument("project_scan: non-finite point " + std::to_string(i));
    }
    const auto pix = project_point(p, params);
    if (!pix) continue;
    double& cell = nearest(pix->row, pix->col);
    cell = std::min(cell, p.norm());
  }

  ImageMatrix cells = ImageMatrix::Zero(params.height, params.width);
  for (Eigen::Index r = 0; r < cells.rows(); ++r) {
    for (Eigen::Index c = 0; c < cells.cols(); ++c) {
      if (std::isfinite(nearest(r, c))) cells(r, c) = quantize_range(nearest(r, c), params.max_range);
    }
  }
  return RangeImage(params, std::move(cells));
}

PointCloud rotate_yaw(const PointCloud& cloud, double delta) {
  return transform_planar(cloud, PlanarPose{0.0, 0.0, delta});
}

RangeImage shift_columns(const RangeImage& img, int k) {
  const int w = img.width();
  const int shift = ((k % w) + w) % w;
  if (shift == 0) return img;
  ImageMatrix out(img.height(), w);
  out.rightCols(w - shift) = img.cells().leftCols(w - shift);
  out.leftCols(shift) = img.cells().rightCols(shift);
  return RangeImage(img.params(), std::move(out));
}

PointCloud transform_planar(const PointCloud& cloud, const PlanarPose& pose) {
  // theta is already normalized; an exact zero rotation must stay bit-exact.
  if (pose.theta == 0.0 && pose.x == 0.0 && pose.y == 0.0) return cloud;
  Points3 moved = transform_points(cloud.points(), pose);
  if (cloud.intensity()) return PointCloud(std::move(moved), *cloud.intensity());
  return PointCloud(std::move(moved));
}

}  // namespace oreos
