#include "oreos/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace oreos::synth {

namespace {

constexpr double kPi = std::numbers::pi;

// Loop geometry as fractions of the scene extent.
constexpr double kLoopHalfSize = 0.35;
constexpr double kLoopCornerRadius = 0.1;

struct LoopShape {
  double half_size;
  double corner;
  double straight;
  double side_length;
};

LoopShape loop_shape(double extent) {
  LoopShape s{};
  s.half_size = kLoopHalfSize * extent;
  s.corner = kLoopCornerRadius * extent;
  s.straight = 2.0 * (s.half_size - s.corner);
  s.side_length = s.straight + 0.5 * kPi * s.corner;
  return s;
}

double footprint_distance(const Box& b, const Eigen::Vector2d& p) {
  const double dx = std::max({b.min_corner.x() - p.x(), 0.0, p.x() - b.max_corner.x()});
  const double dy = std::max({b.min_corner.y() - p.y(), 0.0, p.y() - b.max_corner.y()});
  return std::hypot(dx, dy);
}

double footprint_distance(const Cylinder& c, const Eigen::Vector2d& p) {
  return std::max(0.0, (p - c.center).norm() - c.radius);
}

template <typename Primitive>
double loop_clearance(double extent, const Primitive& prim) {
  const double length = loop_length(extent);
  double best = std::numeric_limits<double>::infinity();
  for (double s = 0.0; s < length; s += 0.25) {
    const PlanarPose p = loop_point(extent, s);
    best = std::min(best, footprint_distance(prim, p.translation()));
  }
  return best;
}

bool inside_extent(double extent, double x0, double y0, double x1, double y1) {
  const double h = 0.5 * extent;
  return x0 >= -h && y0 >= -h && x1 <= h && y1 <= h;
}

std::optional<double> intersect_box(const Box& b, const Eigen::Vector3d& o,
                                    const Eigen::Vector3d& d) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(d[axis]) < 1e-300) {
      if (o[axis] < b.min_corner[axis] || o[axis] > b.max_corner[axis]) return std::nullopt;
      continue;
    }
    double t0 = (b.min_corner[axis] - o[axis]) / d[axis];
    double t1 = (b.max_corner[axis] - o[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_near <= 0.0) return std::nullopt;  // origin inside or box behind
  return t_near;
}

std::optional<double> intersect_cylinder(const Cylinder& c, const Eigen::Vector3d& o,
                                         const Eigen::Vector3d& d) {
  std::optional<double> best;
  const Eigen::Vector2d oc = o.head<2>() - c.center;
  const Eigen::Vector2d dxy = d.head<2>();
  const double a = dxy.squaredNorm();
  if (a > 0.0) {
    const double b = oc.dot(dxy);
    const double cc = oc.squaredNorm() - c.radius * c.radius;
    const double disc = b * b - a * cc;
    if (disc >= 0.0) {
      const double t = (-b - std::sqrt(disc)) / a;
      if (t > 0.0) {
        const double z = o.z() + t * d.z();
        if (z >= 0.0 && z <= c.height) best = t;
      }
    }
  }
  if (std::abs(d.z()) > 0.0) {
    const double t = (c.height - o.z()) / d.z();
    if (t > 0.0 && (!best || t < *best)) {
      const Eigen::Vector2d hit = oc + t * dxy;
      if (hit.squaredNorm() <= c.radius * c.radius) best = t;
    }
  }
  return best;
}

double box_surface_distance(const Box& b, const Eigen::Vector3d& p) {
  const Eigen::Vector3d below = (b.min_corner - p).cwiseMax(0.0);
  const Eigen::Vector3d above = (p - b.max_corner).cwiseMax(0.0);
  const double outside = (below + above).norm();
  if (outside > 0.0) return outside;
  return std::min((p - b.min_corner).minCoeff(), (b.max_corner - p).minCoeff());
}

double cylinder_surface_distance(const Cylinder& c, const Eigen::Vector3d& p) {
  const double rho = (p.head<2>() - c.center).norm();
  const double dz_out = std::max({-p.z(), p.z() - c.height, 0.0});
  const double dr_out = std::max(rho - c.radius, 0.0);
  if (dz_out > 0.0 || dr_out > 0.0) return std::hypot(dr_out, dz_out);
  return std::min({c.radius - rho, p.z(), c.height - p.z()});
}

}  // namespace

bool Scene::contains(double x, double y) const {
  const double h = 0.5 * extent;
  return x >= -h && x <= h && y >= -h && y <= h;
}

bool Scene::occupied(double x, double y) const {
  const Eigen::Vector2d p(x, y);
  for (const Box& b : boxes) {
    if (footprint_distance(b, p) == 0.0) return true;
  }
  for (const Cylinder& c : cylinders) {
    if (footprint_distance(c, p) == 0.0) return true;
  }
  return false;
}

double loop_length(double extent) { return 4.0 * loop_shape(extent).side_length; }

PlanarPose loop_point(double extent, double s) {
  const LoopShape shape = loop_shape(extent);
  const double perimeter = 4.0 * shape.side_length;
  s = std::fmod(s, perimeter);
  if (s < 0.0) s += perimeter;
  const int side = std::min(3, static_cast<int>(s / shape.side_length));
  const double u = s - side * shape.side_length;

  // Position on side 0 (bottom edge, driving towards +x), then rotate.
  Eigen::Vector2d local;
  double heading;
  if (u < shape.straight) {
    local = {-shape.half_size + shape.corner + u, -shape.half_size};
    heading = 0.0;
  } else {
    const double phi = (u - shape.straight) / shape.corner;
    const Eigen::Vector2d center(shape.half_size - shape.corner, -shape.half_size + shape.corner);
    local = center + shape.corner * Eigen::Vector2d(std::sin(phi), -std::cos(phi));
    heading = phi;
  }
  const PlanarPose side_rotation(0.0, 0.0, side * 0.5 * kPi);
  const Eigen::Vector2d p = side_rotation.rotation() * local;
  return {p.x(), p.y(), heading + side * 0.5 * kPi};
}

Scene generate_scene(std::uint64_t seed, double extent, int n_primitives) {
  if (!(extent > 0.0)) throw std::invalid_argument("generate_scene: extent must be > 0");
  if (n_primitives < 1) throw std::invalid_argument("generate_scene: n_primitives must be >= 1");

  Scene scene;
  scene.seed = seed;
  scene.extent = extent;
  scene.road_half_width = 4.0;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double length = loop_length(extent);
  const double max_offset = 0.25 * extent;
  for (int placed = 0, attempts = 0; placed < n_primitives; ++attempts) {
    if (attempts > 200 * n_primitives) {
      throw std::runtime_error("generate_scene: could not place " + std::to_string(n_primitives) +
                               " primitives in extent " + std::to_string(extent));
    }
    const PlanarPose anchor = loop_point(extent, uniform(0.0, length));
    const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
    const double offset = side * uniform(scene.road_half_width + 0.5, max_offset);
    const Eigen::Vector2d normal(-std::sin(anchor.theta), std::cos(anchor.theta));
    const Eigen::Vector2d center = anchor.translation() + offset * normal;

    if (unit(rng) < 0.6) {
      const double sx = uniform(0.8, 7.0);
      const double sy = uniform(0.8, 7.0);
      const Box box{{center.x() - 0.5 * sx, center.y() - 0.5 * sy, 0.0},
                    {center.x() + 0.5 * sx, center.y() + 0.5 * sy, uniform(0.8, 9.0)}};
      if (!inside_extent(extent, box.min_corner.x(), box.min_corner.y(), box.max_corner.x(),
                         box.max_corner.y())) {
        continue;
      }
      if (loop_clearance(extent, box) < scene.road_half_width) continue;
      scene.boxes.push_back(box);
    } else {
      const Cylinder cyl{center, uniform(0.15, 1.2), uniform(1.0, 10.0)};
      if (!inside_extent(extent, center.x() - cyl.radius, center.y() - cyl.radius,
                         center.x() + cyl.radius, center.y() + cyl.radius)) {
        continue;
      }
      if (loop_clearance(extent, cyl) < scene.road_half_width) continue;
      scene.cylinders.push_back(cyl);
    }
    ++placed;
  }
  return scene;
}

ProjectionParams SensorParams::matching_projection() const {
  ProjectionParams p;
  p.height = beams_vertical;
  p.width = beams_horizontal;
  const double step = beams_vertical > 1 ? (zenith_max - zenith_min) / (beams_vertical - 1) : 0.01;
  p.zenith_min = zenith_min - 0.5 * step;
  p.zenith_max = zenith_max + 0.5 * step;
  p.max_range = max_range;
  return p;
}

std::optional<double> cast_ray(const Scene& scene, const Eigen::Vector3d& origin,
                               const Eigen::Vector3d& dir, double max_range) {
  std::optional<double> best;
  auto consider = [&](std::optional<double> t) {
    if (t && *t <= max_range && (!best || *t < *best)) best = t;
  };
  if (dir.z() < 0.0) consider(-origin.z() / dir.z());
  for (const Box& b : scene.boxes) consider(intersect_box(b, origin, dir));
  for (const Cylinder& c : scene.cylinders) consider(intersect_cylinder(c, origin, dir));
  return best;
}

PointCloud simulate_scan(const Scene& scene, const PlanarPose& pose, const SensorParams& sensor,
                         std::uint64_t noise_seed) {
  if (!scene.contains(pose.x, pose.y)) {
    throw std::out_of_range("simulate_scan: pose (" + std::to_string(pose.x) + ", " +
                            std::to_string(pose.y) + ") outside scene extent");
  }
  if (sensor.beams_horizontal < 1 || sensor.beams_vertical < 1 || !(sensor.max_range > 0.0)) {
    throw std::invalid_argument("simulate_scan: invalid sensor parameters");
  }

  std::mt19937_64 rng(noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  const Eigen::Vector3d origin(pose.x, pose.y, sensor.mount_height);
  const double az_step = 2.0 * kPi / sensor.beams_horizontal;
  const double zen_step =
      sensor.beams_vertical > 1
          ? (sensor.zenith_max - sensor.zenith_min) / (sensor.beams_vertical - 1)
          : 0.0;

  std::vector<Eigen::Vector3d> hits;
  hits.reserve(static_cast<std::size_t>(sensor.beams_horizontal * sensor.beams_vertical));
  for (int v = sensor.beams_vertical - 1; v >= 0; --v) {
    const double zenith = sensor.zenith_min + v * zen_step;
    const double cz = std::cos(zenith);
    const double sz = std::sin(zenith);
    for (int h = 0; h < sensor.beams_horizontal; ++h) {
      // Half-bin offset keeps every beam strictly inside one image column.
      const double az = (h + 0.5) * az_step;
      const Eigen::Vector3d dir_sensor(cz * std::cos(az), cz * std::sin(az), sz);
      const double world_az = az + pose.theta;
      const Eigen::Vector3d dir_world(cz * std::cos(world_az), cz * std::sin(world_az), sz);
      const auto t = cast_ray(scene, origin, dir_world, sensor.max_range);
      if (!t) continue;
      double range = *t;
      if (sensor.range_noise_sigma > 0.0) range += sensor.range_noise_sigma * noise(rng);
      if (range <= 0.0) continue;
      hits.push_back(range * dir_sensor);
    }
  }
  Points3 pts(3, static_cast<Eigen::Index>(hits.size()));
  for (std::size_t i = 0; i < hits.size(); ++i) pts.col(static_cast<Eigen::Index>(i)) = hits[i];
  return PointCloud(std::move(pts));
}

Trajectory make_trajectory(const Scene& scene, const TrajectoryParams& params) {
  if (params.laps.empty()) throw std::invalid_argument("make_trajectory: no laps");
  if (!(params.spacing > 0.0) || params.spacing > 2.0) {
    throw std::invalid_argument("make_trajectory: spacing must be in (0, 2] m");
  }
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  const double length = loop_length(scene.extent);
  const auto per_lap = static_cast<int>(std::floor(length / params.spacing));
  Trajectory traj;
  std::vector<int> lap_of;
  double stamp = 0.0;
  for (std::size_t lap = 0; lap < params.laps.size(); ++lap) {
    const LapSpec& spec = params.laps[lap];
    for (int i = 0; i < per_lap; ++i) {
      const PlanarPose center = loop_point(scene.extent, spec.start_offset + i * params.spacing);
      const double lateral = spec.lateral_offset + params.lateral_jitter * unit(rng);
      const Eigen::Vector2d normal(-std::sin(center.theta), std::cos(center.theta));
      const Eigen::Vector2d xy = center.translation() + lateral * normal;
      const PlanarPose pose(xy.x(), xy.y(), center.theta + params.heading_jitter * unit(rng));
      if (!scene.contains(pose.x, pose.y) || scene.occupied(pose.x, pose.y)) {
        throw std::runtime_error("make_trajectory: pose leaves free space (lap " +
                                 std::to_string(lap) + ", step " + std::to_string(i) + ")");
      }
      if (i > 0 && planar_distance(traj.poses.back().pose, pose) > 2.0) {
        throw std::runtime_error("make_trajectory: consecutive poses more than 2 m apart at lap " +
                                 std::to_string(lap) + " step " + std::to_string(i));
      }
      traj.poses.push_back({stamp, pose});
      lap_of.push_back(static_cast<int>(lap));
      stamp += 0.1;
    }
  }
  for (std::size_t q = 0; q < traj.poses.size(); ++q) {
    for (std::size_t m = 0; m < q; ++m) {
      if (lap_of[m] < lap_of[q] &&
          planar_distance(traj.poses[q].pose, traj.poses[m].pose) < params.place_radius) {
        traj.revisits.emplace_back(q, m);
      }
    }
  }
  return traj;
}

std::vector<ScanSample> generate_dataset(const Scene& scene, const Trajectory& trajectory,
                                         const SensorParams& sensor) {
  std::vector<ScanSample> out;
  out.reserve(trajectory.poses.size());
  for (std::size_t i = 0; i < trajectory.poses.size(); ++i) {
    const PlanarPose& pose = trajectory.poses[i].pose;
    const std::uint64_t noise_seed = scene.seed * 0x9E3779B97F4A7C15ULL + i;
    out.push_back({simulate_scan(scene, pose, sensor, noise_seed), pose});
  }
  return out;
}

double surface_distance(const Scene& scene, const Eigen::Vector3d& p) {
  double best = std::abs(p.z());
  for (const Box& b : scene.boxes) best = std::min(best, box_surface_distance(b, p));
  for (const Cylinder& c : scene.cylinders) best = std::min(best, cylinder_surface_distance(c, p));
  return best;
}

}  // namespace oreos::synth
