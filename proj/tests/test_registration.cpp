#include "oreos/registration.hpp"

#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace oreos;

namespace {

constexpr double kPi = std::numbers::pi;

PointCloud scan_at(double arc, const synth::SensorParams& sensor = {}) {
  const synth::Scene& s = testing::small_scene();
  return synth::simulate_scan(s, synth::loop_point(s.extent, arc), sensor);
}

double yaw_error(const PlanarPose& a, const PlanarPose& b) { return std::abs(normalize_angle(a.theta - b.theta)); }

}  // namespace

TEST_SUITE("registration") {
  TEST_CASE("plane normals face the viewpoint") {
    Points3 pts(3, 400);
    for (int i = 0; i < 400; ++i) pts.col(i) = Eigen::Vector3d(i % 20 * 0.3 - 3.0, i / 20 * 0.3 - 3.0, 0.0);
    const SurfaceNormals below = estimate_normals(PointCloud(pts), 10, Eigen::Vector3d(0, 0, -2));
    const SurfaceNormals above = estimate_normals(PointCloud(pts), 10, Eigen::Vector3d(0, 0, 2));
    CHECK(below.valid_count() == 400);
    for (int i = 0; i < 400; ++i) {
      CHECK(below.normals.col(i).isApprox(Eigen::Vector3d(0, 0, -1), 1e-9));
      CHECK(above.normals.col(i).isApprox(Eigen::Vector3d(0, 0, 1), 1e-9));
    }
  }

  TEST_CASE("sphere normals are radial") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    Points3 pts(3, 3000);
    for (int i = 0; i < 3000; ++i) pts.col(i) = 50.0 * Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
    const SurfaceNormals n = estimate_normals(PointCloud(pts), 12);
    CHECK(n.valid_count() == 3000);
    double worst = 0.0;
    for (int i = 0; i < 3000; ++i) {
      const double c = std::abs(n.normals.col(i).dot(pts.col(i).normalized()));
      worst = std::max(worst, std::acos(std::min(1.0, c)));
    }
    CHECK(rad2deg(worst) < 5.0);
    // The viewpoint is the center, so every normal points inwards.
    for (int i = 0; i < 3000; ++i) CHECK(n.normals.col(i).dot(pts.col(i)) < 0.0);
  }

  TEST_CASE("collinear neighborhoods have no normal") {
    Points3 pts(3, 3);
    pts << 0, 1, 2, 0, 1, 2, 0, 0, 0;
    const SurfaceNormals n = estimate_normals(PointCloud(pts), 3);
    CHECK(n.valid_count() == 0);
  }

  TEST_CASE("registering a scan to itself") {
    const PointCloud c = scan_at(12.0);
    IcpConfig flat;
    flat.initial_correspondence_distance = flat.max_correspondence_distance;
    const IcpResult r = icp_point_to_plane(c, c, PlanarPose{}, flat);
    // Points without a usable normal of their own match a neighbor, so the
    // answer is identity up to the convergence threshold rather than exactly.
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK(std::abs(r.pose.x) < flat.translation_threshold);
    CHECK(std::abs(r.pose.y) < flat.translation_threshold);
    CHECK(std::abs(r.pose.theta) < flat.rotation_threshold);
    CHECK(r.mean_residual < 1e-3);

    const IcpResult scheduled = icp_point_to_plane(c, c, PlanarPose{});
    CHECK(scheduled.converged);
    CHECK(planar_distance(scheduled.pose, PlanarPose{}) < 1e-3);
    CHECK(std::abs(scheduled.pose.theta) < 1e-4);
  }

  TEST_CASE("perturbed scans are recovered") {
    const PlanarPose truth(0.3, 0.2, deg2rad(5.0));
    int recovered = 0;
    for (int i = 0; i < 10; ++i) {
      const PointCloud target = scan_at(8.0 + 23.0 * i);
      // Query points expressed in a frame displaced by `truth`.
      const PointCloud query = transform_planar(target, truth.inverse());
      const IcpResult r = icp_point_to_plane(query, target, PlanarPose{});
      recovered += r.converged && planar_distance(r.pose, truth) < 0.02 && yaw_error(r.pose, truth) < deg2rad(0.2);
    }
    CHECK(recovered == 10);
  }

  TEST_CASE("the linear solve decreases the point-to-plane cost") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<PlaneCorrespondence> pairs;
      for (int i = 0; i < 50; ++i) {
        const Eigen::Vector3d q(10 * u(rng), 10 * u(rng), u(rng));
        const Eigen::Vector3d n = Eigen::Vector3d(u(rng), u(rng), 0.3 * u(rng)).normalized();
        pairs.push_back({q + 0.3 * Eigen::Vector3d(u(rng), u(rng), u(rng)), q, n});
      }
      const double before = point_to_plane_cost(pairs);
      const Eigen::Vector3d step = solve_point_to_plane(pairs);

      // Quadratic model: residual_i + J_i step with J_i = [n_x, n_y, n_y p_x - n_x p_y].
      double model = 0.0;
      for (const auto& c : pairs) {
        const double r = c.n.dot(c.p - c.q) + c.n.x() * step[0] + c.n.y() * step[1] +
                         (c.n.y() * c.p.x() - c.n.x() * c.p.y()) * step[2];
        model += r * r;
      }
      CHECK(model <= before + 1e-12);

      std::vector<PlaneCorrespondence> moved = pairs;
      const PlanarPose delta = apply_step(PlanarPose{}, step);
      for (auto& c : moved) c.p = delta.apply(c.p);
      CHECK(point_to_plane_cost(moved) < before);
    }
  }

  TEST_CASE("apply_step rotates about the origin then translates") {
    const PlanarPose p = apply_step(PlanarPose(1, 0, 0), Eigen::Vector3d(0.5, 0, kPi / 2));
    CHECK(p.x == doctest::Approx(0.5));
    CHECK(p.y == doctest::Approx(1.0));
    CHECK(p.theta == doctest::Approx(kPi / 2));
  }

  TEST_CASE("a 170 degree initial error is outside the basin") {
    const PointCloud target = scan_at(50.0);
    const PlanarPose truth(0.2, -0.1, deg2rad(3.0));
    const PointCloud query = transform_planar(target, truth.inverse());
    const IcpResult r = icp_point_to_plane(query, target, PlanarPose(0.2, -0.1, truth.theta + deg2rad(170.0)));
    const bool recovered = r.converged && planar_distance(r.pose, truth) < 0.1 && yaw_error(r.pose, truth) < deg2rad(2.0);
    CHECK_FALSE(recovered);
  }

  TEST_CASE("too few correspondences fail cleanly") {
    Points3 a(3, 4);
    a << 0, 1, 0, 1, 0, 0, 1, 1, 0, 0, 0, 0;
    const PointCloud target(a);
    const PointCloud far = transform_planar(target, PlanarPose(100, 100, 0));
    const IcpResult r = icp_point_to_plane(far, scan_at(5.0), PlanarPose{});
    CHECK_FALSE(r.converged);
    IcpConfig bad;
    bad.max_iterations = 0;
    CHECK_THROWS(bad.validate());
  }

  TEST_CASE("correspondence cap schedule") {
    const IcpConfig c;
    CHECK(c.correspondence_cap(0) == doctest::Approx(5.0));
    for (int i = 1; i < 40; ++i) CHECK(c.correspondence_cap(i) <= c.correspondence_cap(i - 1));
    CHECK(c.correspondence_cap(39) == c.max_correspondence_distance);
  }
}
