#include "oreos/registration.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oreos {

namespace {

// Second-largest over largest covariance eigenvalue below which a
// neighborhood counts as a line. The closed-form 3x3 eigensolver is only
// accurate to roughly 1e-8 relative, so the bound sits well above that.
constexpr double kLineRatio = 1e-6;

}  // namespace

void IcpConfig::validate() const {
  if (max_iterations < 1) throw std::invalid_argument("icp: max_iterations must be >= 1");
  if (!(max_correspondence_distance > 0.0)) {
    throw std::invalid_argument("icp: correspondence distance must be > 0");
  }
  if (!(cap_decay > 0.0 && cap_decay < 1.0)) throw std::invalid_argument("icp: cap_decay must be in (0, 1)");
  if (!(translation_threshold > 0.0) || !(rotation_threshold > 0.0)) {
    throw std::invalid_argument("icp: convergence thresholds must be > 0");
  }
  if (normal_neighbors < 3) throw std::invalid_argument("icp: normal_neighbors must be >= 3");
  if (!(max_surface_variation > 0.0)) throw std::invalid_argument("icp: max_surface_variation must be > 0");
  if (min_correspondences < 3) throw std::invalid_argument("icp: min_correspondences must be >= 3");
}

double IcpConfig::correspondence_cap(int it) const {
  if (initial_correspondence_distance <= max_correspondence_distance) return max_correspondence_distance;
  return std::max(max_correspondence_distance, initial_correspondence_distance * std::pow(cap_decay, it));
}

std::size_t SurfaceNormals::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
}

SurfaceNormals estimate_normals(const PointCloud& cloud, int neighbors, const Eigen::Vector3d& viewpoint,
                                double max_surface_variation) {
  if (neighbors < 3) throw std::invalid_argument("estimate_normals: need at least 3 neighbors");
  if (cloud.size() < neighbors) {
    throw std::invalid_argument("estimate_normals: cloud has " + std::to_string(cloud.size()) +
                                " points, fewer than the neighborhood size " + std::to_string(neighbors));
  }
  const KdTree3d tree(cloud.points());
  SurfaceNormals out;
  out.normals = Points3::Zero(3, cloud.size());
  out.valid.assign(static_cast<std::size_t>(cloud.size()), false);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d p = cloud.point(i);
    const auto nbrs = tree.knn(p, neighbors);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& nb : nbrs) mean += cloud.point(nb.index);
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& nb : nbrs) {
      const Eigen::Vector3d d = cloud.point(nb.index) - mean;
      cov.noalias() += d * d.transpose();
    }
    solver.computeDirect(cov);
    const Eigen::Vector3d ev = solver.eigenvalues();  // ascending
    if (!(ev[2] > 0.0) || ev[1] <= kLineRatio * ev[2]) continue;
    if (ev[0] > max_surface_variation * ev.sum()) continue;
    Eigen::Vector3d n = solver.eigenvectors().col(0).normalized();
    if (n.dot(viewpoint - p) < 0.0) n = -n;
    out.normals.col(i) = n;
    out.valid[static_cast<std::size_t>(i)] = true;
  }
  return out;
}

PlaneTarget::PlaneTarget(const PointCloud& cloud, const IcpConfig& config, const PlanarPose& frame) {
  config.validate();
  const SurfaceNormals sn =
      estimate_normals(cloud, config.normal_neighbors, Eigen::Vector3d::Zero(), config.max_surface_variation);
  const Eigen::Index n = static_cast<Eigen::Index>(sn.valid_count());
  if (n == 0) throw std::invalid_argument("PlaneTarget: no valid normals in target cloud");
  Points3 pts(3, n);
  normals_.resize(3, n);
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  rot.topLeftCorner<2, 2>() = frame.rotation();
  const Eigen::Vector3d t(frame.x, frame.y, 0.0);
  Eigen::Index j = 0;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    if (!sn.valid[static_cast<std::size_t>(i)]) continue;
    pts.col(j) = rot * cloud.point(i) + t;
    normals_.col(j) = rot * sn.normals.col(i);
    ++j;
  }
  tree_ = KdTree3d(std::move(pts));
}

double point_to_plane_cost(const std::vector<PlaneCorrespondence>& pairs) {
  double cost = 0.0;
  for (const auto& c : pairs) {
    const double r = c.n.dot(c.p - c.q);
    cost += r * r;
  }
  return cost;
}

Eigen::Vector3d solve_point_to_plane(const std::vector<PlaneCorrespondence>& pairs) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  for (const auto& c : pairs) {
    const double r = c.n.dot(c.p - c.q);
    const Eigen::Vector3d j(c.n.x(), c.n.y(), c.n.y() * c.p.x() - c.n.x() * c.p.y());
    a.noalias() += j * j.transpose();
    b -= j * r;
  }
  // Least-norm solution keeps unobservable directions (e.g. a lone plane) at zero.
  Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix3d> cod;
  cod.setThreshold(1e-10);
  cod.compute(a);
  return cod.solve(b);
}

PlanarPose apply_step(const PlanarPose& pose, const Eigen::Vector3d& step) {
  const double c = std::cos(step[2]);
  const double s = std::sin(step[2]);
  return PlanarPose{c * pose.x - s * pose.y + step[0], s * pose.x + c * pose.y + step[1],
                    pose.theta + step[2]};
}

IcpResult icp_point_to_plane(const PointCloud& query, const PlaneTarget& target,
                             const PlanarPose& initial, const IcpConfig& config) {
  config.validate();
  if (query.size() == 0) throw std::invalid_argument("icp: empty query cloud");

  IcpResult result;
  result.pose = initial;
  std::vector<PlaneCorrespondence> pairs;
  pairs.reserve(static_cast<std::size_t>(query.size()));

  const auto gather = [&](const PlanarPose& pose, double cap) {
    pairs.clear();
    const Points3 moved = transform_points(query.points(), pose);
    const double cap2 = cap * cap;
    for (Eigen::Index i = 0; i < moved.cols(); ++i) {
      const auto nb = target.tree().nearest(moved.col(i));
      if (nb.squared_distance > cap2) continue;
      pairs.push_back({moved.col(i), target.points().col(nb.index), target.normals().col(nb.index)});
    }
  };
  const auto finish = [&](const PlanarPose& pose) {
    gather(pose, config.max_correspondence_distance);
    result.correspondences = pairs.size();
    double sum = 0.0;
    for (const auto& c : pairs) sum += std::abs(c.n.dot(c.p - c.q));
    result.mean_residual = pairs.empty() ? 0.0 : sum / static_cast<double>(pairs.size());
  };

  for (int it = 0; it < config.max_iterations; ++it) {
    const double cap = config.correspondence_cap(it);
    gather(result.pose, cap);
    result.iterations = it + 1;
    if (pairs.size() < static_cast<std::size_t>(config.min_correspondences)) {
      result.converged = false;
      result.correspondences = pairs.size();
      return result;
    }
    const Eigen::Vector3d step = solve_point_to_plane(pairs);
    if (!step.allFinite()) break;
    result.pose = apply_step(result.pose, step);
    const bool small = step.head<2>().norm() < config.translation_threshold &&
                       std::abs(step[2]) < config.rotation_threshold;
    if (small && cap <= config.max_correspondence_distance) {
      result.converged = true;
      break;
    }
  }
  result.pose.theta = normalize_angle(result.pose.theta);
  finish(result.pose);
  return result;
}

IcpResult icp_point_to_plane(const PointCloud& query, const PointCloud& target,
                             const PlanarPose& initial, const IcpConfig& config) {
  config.validate();
  return icp_point_to_plane(query, PlaneTarget(target, config), initial, config);
}

}  // namespace oreos
