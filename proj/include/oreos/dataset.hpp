#ifndef OREOS_DATASET_HPP
#define OREOS_DATASET_HPP

#include "oreos/geometry.hpp"
#include "oreos/synthworld.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace oreos::data {

struct ScanRecord {
  std::size_t id = 0;
  PointCloud cloud;
  PlanarPose gt_pose;
};

/// Distance thresholds for triplet mining and map/query downsampling.
struct SamplingConfig {
  double similar_radius = 1.5;
  double hard_negative_min = 2.0;
  double hard_negative_max = 5.0;
  double query_spacing = 3.0;

  void validate() const;
  bool operator==(const SamplingConfig&) const = default;
};

enum class MiningStage { kRandom = 1, kHard = 2 };

struct TripletSample {
  std::size_t anchor;
  std::size_t similar;
  std::size_t dissimilar;
  double delta_theta_gt;  // normalize(theta_similar - theta_anchor)
};

/// Axis convention of the 3x4 ground-truth poses.
enum class PoseConvention {
  kZUp,    // x forward, z up: planar pose is (t_x, t_y, heading about z)
  kCamera  // KITTI camera frame, y down / z forward: planar pose is (t_z, -t_x, heading about -y)
};

// --- scan files: packed little-endian float32 (x, y, z, reflectance) ---

PointCloud load_kitti_scan(const std::filesystem::path& path);
/// Decodes an in-memory buffer with the same layout as a scan file.
PointCloud decode_kitti_scan(std::span<const std::uint8_t> bytes);
void write_kitti_scan(const std::filesystem::path& path, const PointCloud& cloud);

// --- pose files: one row-major 3x4 transform per line ---

PlanarPose planar_from_matrix(const Eigen::Matrix<double, 3, 4>& transform,
                              PoseConvention convention = PoseConvention::kZUp);
Eigen::Matrix<double, 3, 4> matrix_from_planar(const PlanarPose& pose);

std::vector<PlanarPose> load_pose_file(const std::filesystem::path& path,
                                       PoseConvention convention = PoseConvention::kZUp);
std::vector<PlanarPose> parse_poses(const std::string& text,
                                    PoseConvention convention = PoseConvention::kZUp,
                                    const std::string& origin = "<poses>");
void write_pose_file(const std::filesystem::path& path, std::span<const PlanarPose> poses);

// --- triplet mining ---

std::vector<TripletSample> sample_triplets(std::span<const PlanarPose> poses,
                                           const SamplingConfig& config, MiningStage stage,
                                           std::size_t count, std::uint64_t seed);
std::vector<TripletSample> sample_triplets(std::span<const ScanRecord> records,
                                           const SamplingConfig& config, MiningStage stage,
                                           std::size_t count, std::uint64_t seed);

/// Indices into the record sequence.
struct MapQuerySplit {
  std::vector<std::size_t> map;
  std::vector<std::size_t> query;
};

/**
 * Splits a time-ordered sequence at the first revisit: everything before is
 * map material, everything after is query material. The map is thinned so
 * map places are more than 2 * similar_radius apart; queries are kept when
 * they have exactly one map place within similar_radius and lie at least
 * query_spacing from every earlier accepted query.
 */
MapQuerySplit split_map_query(std::span<const PlanarPose> poses, const SamplingConfig& config);
MapQuerySplit split_map_query(std::span<const ScanRecord> records, const SamplingConfig& config);

// --- on-disk dataset (manifest.txt + scans/ + poses.txt) ---

struct DatasetManifest {
  std::string scan_dir = "scans";
  std::string pose_file = "poses.txt";
  PoseConvention convention = PoseConvention::kZUp;
  SamplingConfig sampling;
};

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);
void write_manifest(const std::filesystem::path& dataset_dir, const DatasetManifest& manifest);

struct Dataset {
  DatasetManifest manifest;
  std::vector<ScanRecord> records;

  std::vector<PlanarPose> poses() const;
};

Dataset load_dataset(const std::filesystem::path& dataset_dir);
void write_dataset(const std::filesystem::path& dataset_dir,
                   std::span<const synth::ScanSample> samples, const SamplingConfig& sampling);

std::string scan_file_name(std::size_t id);

}  // namespace oreos::data

#endif  // OREOS_DATASET_HPP
