#include "oreos/dataset.hpp"

#include <Eigen/Geometry>

#include "support.hpp"

#include <doctest.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace oreos;
using namespace oreos::data;

namespace {

void append_float(std::vector<std::uint8_t>& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
}

std::string matrix_line(const Eigen::Matrix<double, 3, 4>& m) {
  std::ostringstream os;
  os.precision(17);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) os << m(r, c) << ' ';
  }
  return os.str();
}

std::vector<PlanarPose> line_poses(int n, double spacing) {
  std::vector<PlanarPose> poses;
  for (int i = 0; i < n; ++i) poses.emplace_back(i * spacing, 0.0, 0.1 * i);
  return poses;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("decoding a two-point buffer") {
    std::vector<std::uint8_t> bytes;
    for (float f : {1.0f, 0.0f, 0.0f, 0.5f, 0.0f, 1.0f, 0.0f, 0.1f}) append_float(bytes, f);
    REQUIRE(bytes.size() == 32);
    const PointCloud c = decode_kitti_scan(bytes);
    REQUIRE(c.size() == 2);
    CHECK(c.point(0) == Eigen::Vector3d(1, 0, 0));
    CHECK(c.point(1) == Eigen::Vector3d(0, 1, 0));
    REQUIRE(c.intensity());
    CHECK((*c.intensity())[0] == 0.5);
    CHECK((*c.intensity())[1] == static_cast<double>(0.1f));
  }

  TEST_CASE("empty, truncated and non-finite buffers are rejected") {
    CHECK_THROWS_WITH(decode_kitti_scan({}), doctest::Contains("empty"));
    std::vector<std::uint8_t> bytes;
    for (float f : {1.0f, 2.0f, 3.0f, 4.0f, 5.0f}) append_float(bytes, f);
    CHECK_THROWS_WITH(decode_kitti_scan(bytes), doctest::Contains("offset 16"));
    bytes.clear();
    for (float f : {1.0f, std::numeric_limits<float>::infinity(), 3.0f, 4.0f}) append_float(bytes, f);
    CHECK_THROWS_WITH(decode_kitti_scan(bytes), doctest::Contains("non-finite"));
  }

  TEST_CASE("scan files round trip bit-identically") {
    std::mt19937_64 rng(8);
    Points3 pts = testing::random_cloud(rng, 777, 60.0).points();
    // Values representable in float32 survive the round trip exactly.
    pts = pts.cast<float>().cast<double>();
    const Eigen::VectorXd inten = testing::random_vector(rng, pts.cols(), 0.0, 1.0).cast<float>().cast<double>();
    const PointCloud cloud(pts, inten);
    const auto dir = testing::temp_dir("scan_rt");
    write_kitti_scan(dir / "000000.bin", cloud);
    CHECK(std::filesystem::file_size(dir / "000000.bin") == 777u * 16u);
    CHECK(load_kitti_scan(dir / "000000.bin") == cloud);
  }

  TEST_CASE("pose extraction examples") {
    Eigen::Matrix<double, 3, 4> m = Eigen::Matrix<double, 3, 4>::Zero();
    m.leftCols<3>().setIdentity();
    const auto id = parse_poses(matrix_line(m));
    REQUIRE(id.size() == 1);
    CHECK(id[0] == PlanarPose(0, 0, 0));
    m(0, 3) = 5.0;
    const auto tr = parse_poses(matrix_line(m));
    CHECK(tr[0] == PlanarPose(5, 0, 0));
  }

  TEST_CASE("planar poses embedded in 3x4 transforms are recovered") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi);
    std::string text;
    std::vector<PlanarPose> truth;
    for (int i = 0; i < 200; ++i) {
      const PlanarPose p(u(rng), u(rng), a(rng));
      truth.push_back(p);
      // Independent embedding: yaw rotation about z, translation in the plane.
      Eigen::Matrix<double, 3, 4> m = Eigen::Matrix<double, 3, 4>::Zero();
      m.leftCols<3>() = Eigen::AngleAxisd(p.theta, Eigen::Vector3d::UnitZ()).toRotationMatrix();
      m(0, 3) = p.x;
      m(1, 3) = p.y;
      m(2, 3) = u(rng);
      text += matrix_line(m) + "\n";
    }
    const auto got = parse_poses(text);
    REQUIRE(got.size() == truth.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got[i].x - truth[i].x) < 1e-9);
      CHECK(std::abs(got[i].y - truth[i].y) < 1e-9);
      CHECK(std::abs(normalize_angle(got[i].theta - truth[i].theta)) < 1e-9);
    }
    const auto dir = testing::temp_dir("poses_rt");
    write_pose_file(dir / "poses.txt", truth);
    const auto back = load_pose_file(dir / "poses.txt");
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(planar_distance(back[i], truth[i]) < 1e-9);
  }

  TEST_CASE("camera convention maps forward z to planar x") {
    Eigen::Matrix<double, 3, 4> m = Eigen::Matrix<double, 3, 4>::Zero();
    m.leftCols<3>().setIdentity();
    m(2, 3) = 4.0;
    m(0, 3) = 1.0;
    const PlanarPose p = planar_from_matrix(m, PoseConvention::kCamera);
    CHECK(p.x == doctest::Approx(4.0));
    CHECK(p.y == doctest::Approx(-1.0));
    CHECK(p.theta == doctest::Approx(0.0));
  }

  TEST_CASE("malformed pose lines report their line number") {
    const std::string ok = "1 0 0 0 0 1 0 0 0 0 1 0\n";
    CHECK_THROWS_WITH(parse_poses(ok + ok + "1 0 0\n"), doctest::Contains(":3"));
    CHECK_THROWS_WITH(parse_poses(ok + "1 0 0 0 0 1 0 x 0 0 1 0\n"), doctest::Contains(":2"));
  }

  TEST_CASE("neighbors on a 1 m line pair only with adjacent poses") {
    const auto poses = line_poses(11, 1.0);
    const auto t = sample_triplets(std::span<const PlanarPose>(poses), SamplingConfig{},
                                   MiningStage::kRandom, 500, 3);
    REQUIRE(t.size() == 500);
    for (const TripletSample& s : t) {
      CHECK(std::abs(static_cast<long>(s.anchor) - static_cast<long>(s.similar)) == 1);
      CHECK(s.delta_theta_gt == doctest::Approx(normalize_angle(poses[s.similar].theta - poses[s.anchor].theta)));
    }
  }

  TEST_CASE("sampled triplets survive an exhaustive distance check") {
    std::mt19937_64 rng(30);
    std::uniform_real_distribution<double> u(0.0, 12.0);
    std::uniform_real_distribution<double> a(-3.0, 3.0);
    std::vector<PlanarPose> poses;
    for (int i = 0; i < 150; ++i) poses.emplace_back(u(rng), u(rng), a(rng));
    const SamplingConfig cfg;
    for (MiningStage stage : {MiningStage::kRandom, MiningStage::kHard}) {
      const auto t = sample_triplets(std::span<const PlanarPose>(poses), cfg, stage, 1000, 77);
      int violations = 0;
      for (const TripletSample& s : t) {
        const auto dist = [&](std::size_t i, std::size_t j) {
          return std::hypot(poses[i].x - poses[j].x, poses[i].y - poses[j].y);
        };
        violations += !(dist(s.anchor, s.similar) < 1.5);
        const double dd = dist(s.anchor, s.dissimilar);
        violations += stage == MiningStage::kRandom ? !(dd >= 1.5) : !(dd >= 2.0 && dd <= 5.0);
        violations += !(s.delta_theta_gt >= -std::numbers::pi && s.delta_theta_gt < std::numbers::pi);
        const double back = std::atan2(std::sin(s.delta_theta_gt), std::cos(s.delta_theta_gt));
        violations += std::abs(back - s.delta_theta_gt) > 1e-12;
      }
      CHECK(violations == 0);
      const auto again = sample_triplets(std::span<const PlanarPose>(poses), cfg, stage, 1000, 77);
      bool same = true;
      for (std::size_t i = 0; i < t.size(); ++i) {
        same = same && t[i].anchor == again[i].anchor && t[i].similar == again[i].similar &&
               t[i].dissimilar == again[i].dissimilar;
      }
      CHECK(same);
    }
  }

  TEST_CASE("sampling errors name the missing constraint") {
    const auto far = line_poses(5, 10.0);
    CHECK_THROWS_WITH(sample_triplets(std::span<const PlanarPose>(far), SamplingConfig{},
                                      MiningStage::kRandom, 1, 0),
                      doctest::Contains("similar"));
    const auto tight = line_poses(4, 0.3);
    CHECK_THROWS_WITH(sample_triplets(std::span<const PlanarPose>(tight), SamplingConfig{},
                                      MiningStage::kHard, 1, 0),
                      doctest::Contains("hard-negative"));
    SamplingConfig bad;
    bad.similar_radius = 3.0;
    CHECK_THROWS(bad.validate());
  }

  TEST_CASE("two-lap split puts lap one in the map and lap two in the queries") {
    const synth::Scene& scene = testing::small_scene();
    synth::TrajectoryParams tp;
    tp.laps = {{0.0, 0.0}, {0.4, 0.5}};
    tp.seed = 2;
    const synth::Trajectory traj = synth::make_trajectory(scene, tp);
    std::vector<PlanarPose> poses;
    for (const auto& tpose : traj.poses) poses.push_back(tpose.pose);
    const std::size_t per_lap = poses.size() / 2;

    const MapQuerySplit split = split_map_query(std::span<const PlanarPose>(poses), SamplingConfig{});
    REQUIRE(split.map.size() >= 50);
    REQUIRE(!split.query.empty());
    // The loop closes on itself, so the last poses of lap one already
    // revisit its start and may serve as queries; lap two never enters the map.
    for (std::size_t m : split.map) CHECK(m < per_lap);
    for (std::size_t q : split.query) CHECK(q + 3 >= per_lap);
    std::size_t in_lap_two = 0;
    for (std::size_t q : split.query) in_lap_two += q >= per_lap;
    CHECK(in_lap_two + 1 >= split.query.size());
    for (std::size_t q : split.query) {
      int within = 0;
      for (std::size_t m : split.map) within += planar_distance(poses[q], poses[m]) < 1.5;
      CHECK(within == 1);
    }
    for (std::size_t i = 0; i < split.query.size(); ++i) {
      for (std::size_t j = i + 1; j < split.query.size(); ++j) {
        CHECK(planar_distance(poses[split.query[i]], poses[split.query[j]]) >= 3.0);
      }
    }
    const auto line = line_poses(20, 1.0);
    CHECK_THROWS(split_map_query(std::span<const PlanarPose>(line), SamplingConfig{}));
  }

  TEST_CASE("datasets round trip through disk") {
    const synth::Scene& scene = testing::small_scene();
    synth::TrajectoryParams tp;
    tp.laps = {{0.0, 0.0}};
    const synth::Trajectory full = synth::make_trajectory(scene, tp);
    synth::Trajectory few;
    few.poses.assign(full.poses.begin(), full.poses.begin() + 6);
    synth::SensorParams sensor;
    sensor.beams_horizontal = 60;
    sensor.beams_vertical = 4;
    const auto samples = synth::generate_dataset(scene, few, sensor);
    const auto dir = testing::temp_dir("dataset_rt");
    SamplingConfig sc;
    sc.query_spacing = 4.0;
    write_dataset(dir, samples, sc);
    CHECK(std::filesystem::exists(dir / "scans" / scan_file_name(5)));
    const Dataset ds = load_dataset(dir);
    CHECK(ds.manifest.sampling == sc);
    REQUIRE(ds.records.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(ds.records[i].id == i);
      CHECK(planar_distance(ds.records[i].gt_pose, samples[i].pose) < 1e-9);
      CHECK(ds.records[i].cloud.size() == samples[i].cloud.size());
      const double err = (ds.records[i].cloud.points() - samples[i].cloud.points()).cwiseAbs().maxCoeff();
      CHECK(err < 1e-4);
    }
    CHECK(scan_file_name(42) == "000042.bin");
  }
}
