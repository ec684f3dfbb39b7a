#ifndef OREOS_SYNTHWORLD_HPP
#define OREOS_SYNTHWORLD_HPP

#include "oreos/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace oreos::synth {

struct Box {
  Eigen::Vector3d min_corner;
  Eigen::Vector3d max_corner;
  bool operator==(const Box&) const = default;
};

/// Vertical cylinder standing on the ground plane.
struct Cylinder {
  Eigen::Vector2d center;
  double radius;
  double height;
  bool operator==(const Cylinder&) const = default;
};

/**
 * Deterministic desk-scale world: a ground plane z = 0, axis-aligned boxes
 * and vertical cylinders inside the square [-extent/2, extent/2]^2.
 *
 * Primitives keep clear of the closed driving loop returned by
 * `loop_point`, so every trajectory that follows the loop (within
 * `road_half_width`) stays in free space.
 */
struct Scene {
  std::uint64_t seed = 0;
  double extent = 0.0;
  double road_half_width = 0.0;
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;

  std::size_t primitive_count() const { return boxes.size() + cylinders.size(); }
  bool contains(double x, double y) const;
  /// True if (x, y) lies inside any primitive footprint.
  bool occupied(double x, double y) const;
  bool operator==(const Scene&) const = default;
};

/// Rounded-rectangle loop used for every trajectory. `s` is arc length in
/// meters (taken modulo the perimeter). Returns position and heading.
PlanarPose loop_point(double extent, double s);
double loop_length(double extent);

Scene generate_scene(std::uint64_t seed, double extent, int n_primitives);

struct SensorParams {
  int beams_horizontal = 360;
  int beams_vertical = 16;
  double zenith_min = deg2rad(-25.0);
  double zenith_max = deg2rad(5.0);
  double max_range = 80.0;
  double mount_height = 1.5;
  double range_noise_sigma = 0.0;

  /// Projection whose rows and columns center on the beam directions.
  ProjectionParams matching_projection() const;
};

/// Closest hit along a ray from `origin` with unit direction `dir`, or
/// nullopt when nothing is hit within max_range.
std::optional<double> cast_ray(const Scene& scene, const Eigen::Vector3d& origin,
                               const Eigen::Vector3d& dir, double max_range);

/// One ray per (azimuth, zenith) bin from the sensor at `pose`; points are
/// returned in the sensor frame (origin at the sensor). `noise_seed` only
/// matters when range_noise_sigma > 0.
PointCloud simulate_scan(const Scene& scene, const PlanarPose& pose, const SensorParams& sensor,
                         std::uint64_t noise_seed = 0);

struct TimedPose {
  double stamp;
  PlanarPose pose;
};

struct Trajectory {
  std::vector<TimedPose> poses;
  /// (query index, map index) pairs closer than the place radius.
  std::vector<std::pair<std::size_t, std::size_t>> revisits;
};

/// Lap layout for `make_trajectory`: each lap follows the loop with a
/// lateral offset (meters, left positive) and a start arc-length offset.
struct LapSpec {
  double lateral_offset = 0.0;
  double start_offset = 0.0;
};

struct TrajectoryParams {
  std::vector<LapSpec> laps;
  double spacing = 1.0;         // arc length between consecutive poses
  double heading_jitter = 0.0;  // radians, uniform +/-
  double lateral_jitter = 0.0;  // meters, uniform +/-
  double place_radius = 1.5;
  std::uint64_t seed = 0;
};

Trajectory make_trajectory(const Scene& scene, const TrajectoryParams& params);

struct ScanSample {
  PointCloud cloud;
  PlanarPose pose;
};

std::vector<ScanSample> generate_dataset(const Scene& scene, const Trajectory& trajectory,
                                         const SensorParams& sensor);

/// Distance from a world point to the nearest primitive surface or the ground.
double surface_distance(const Scene& scene, const Eigen::Vector3d& p);

}  // namespace oreos::synth

#endif  // OREOS_SYNTHWORLD_HPP
