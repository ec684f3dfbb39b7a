#ifndef OREOS_REGISTRATION_HPP
#define OREOS_REGISTRATION_HPP

#include "oreos/geometry.hpp"
#include "oreos/kdtree.hpp"

#include <Eigen/Core>

#include <vector>

namespace oreos {

struct IcpConfig {
  int max_iterations = 50;
  /// Final correspondence distance cap in meters.
  double max_correspondence_distance = 0.2;
  /// Cap used in the first iteration; it shrinks geometrically towards the
  /// final cap. Values at or below the final cap disable the schedule.
  double initial_correspondence_distance = 5.0;
  double cap_decay = 0.7;
  double translation_threshold = 1e-4;
  double rotation_threshold = 1e-4;
  int normal_neighbors = 10;
  /// Target normals whose neighborhood has smallest-eigenvalue share
  /// lambda0 / (lambda0 + lambda1 + lambda2) above this are dropped.
  double max_surface_variation = 0.02;
  int min_correspondences = 10;

  void validate() const;
  /// Correspondence cap in effect at 0-based iteration `it`.
  double correspondence_cap(int it) const;
};

struct IcpResult {
  PlanarPose pose;
  bool converged = false;
  int iterations = 0;
  double mean_residual = 0.0;
  std::size_t correspondences = 0;
};

struct SurfaceNormals {
  Points3 normals;
  /// False where the neighborhood is line-like or a single point.
  std::vector<bool> valid;

  std::size_t valid_count() const;
};

/// Per-point normals from the smallest principal direction of the k nearest
/// neighbors (the point included), flipped to face `viewpoint`. Line-like
/// neighborhoods are invalid, and so are ones whose surface variation
/// exceeds `max_surface_variation` (1/3 accepts every non-degenerate one).
SurfaceNormals estimate_normals(const PointCloud& cloud, int neighbors,
                                const Eigen::Vector3d& viewpoint = Eigen::Vector3d::Zero(),
                                double max_surface_variation = 1.0 / 3.0);

/**
 * Registration target: points with valid normals, their normals, and a
 * kd-tree over them. Normals are estimated in the cloud's own frame (sensor
 * at the origin), then everything is mapped through `frame`.
 */
class PlaneTarget {
 public:
  PlaneTarget(const PointCloud& cloud, const IcpConfig& config, const PlanarPose& frame = {});

  const Points3& points() const { return tree_.points(); }
  const Points3& normals() const { return normals_; }
  const KdTree3d& tree() const { return tree_; }
  Eigen::Index size() const { return tree_.size(); }

 private:
  KdTree3d tree_;
  Points3 normals_;
};

/// One matched pair: transformed source point p, target point q, target normal n.
struct PlaneCorrespondence {
  Eigen::Vector3d p;
  Eigen::Vector3d q;
  Eigen::Vector3d n;
};

/// Sum of squared point-to-plane residuals n . (p - q).
double point_to_plane_cost(const std::vector<PlaneCorrespondence>& pairs);

/// Gauss-Newton step (dx, dy, dtheta) for fixed correspondences, with the
/// rotation taken about the target-frame origin.
Eigen::Vector3d solve_point_to_plane(const std::vector<PlaneCorrespondence>& pairs);

/// Applies a step: rotate the current pose by dtheta about the origin, then translate.
PlanarPose apply_step(const PlanarPose& pose, const Eigen::Vector3d& step);

/// Point-to-plane ICP over (x, y, theta): finds the pose mapping `query`
/// (sensor frame) into the target frame.
IcpResult icp_point_to_plane(const PointCloud& query, const PlaneTarget& target,
                             const PlanarPose& initial, const IcpConfig& config = {});
IcpResult icp_point_to_plane(const PointCloud& query, const PointCloud& target,
                             const PlanarPose& initial, const IcpConfig& config = {});

}  // namespace oreos

#endif  // OREOS_REGISTRATION_HPP
