#include "oreos/dataset.hpp"

#include "oreos/keyvalue.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <stdexcept>

namespace oreos::data {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kRecordBytes = 16;

float read_f32_le(const std::uint8_t* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) |
                       (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

void write_f32_le(std::uint8_t* p, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  p[0] = static_cast<std::uint8_t>(bits);
  p[1] = static_cast<std::uint8_t>(bits >> 8);
  p[2] = static_cast<std::uint8_t>(bits >> 16);
  p[3] = static_cast<std::uint8_t>(bits >> 24);
}

const char* convention_name(PoseConvention c) {
  return c == PoseConvention::kCamera ? "camera" : "z_up";
}

PoseConvention parse_convention(const std::string& s) {
  if (s == "z_up") return PoseConvention::kZUp;
  if (s == "camera") return PoseConvention::kCamera;
  throw std::runtime_error("unknown pose_convention '" + s + "' (expected z_up or camera)");
}

}  // namespace

void SamplingConfig::validate() const {
  if (!(similar_radius > 0.0)) throw std::invalid_argument("SamplingConfig: similar_radius must be > 0");
  if (!(similar_radius < hard_negative_min)) {
    throw std::invalid_argument("SamplingConfig: similar_radius must be below hard_negative_min");
  }
  if (!(hard_negative_min <= hard_negative_max)) {
    throw std::invalid_argument("SamplingConfig: hard-negative band is empty");
  }
  if (!(query_spacing > 0.0)) throw std::invalid_argument("SamplingConfig: query_spacing must be > 0");
}

PointCloud decode_kitti_scan(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw std::runtime_error("scan file is empty: no points");
  if (bytes.size() % kRecordBytes != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % kRecordBytes;
    throw std::runtime_error("truncated scan record at byte offset " + std::to_string(offset) +
                             " (file size " + std::to_string(bytes.size()) +
                             " is not a multiple of 16)");
  }
  const auto n = static_cast<Eigen::Index>(bytes.size() / kRecordBytes);
  Points3 pts(3, n);
  Eigen::VectorXd intensity(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::uint8_t* rec = bytes.data() + static_cast<std::size_t>(i) * kRecordBytes;
    for (int k = 0; k < 4; ++k) {
      const float v = read_f32_le(rec + 4 * k);
      if (!std::isfinite(v)) {
        throw std::runtime_error("non-finite value at byte offset " +
                                 std::to_string(static_cast<std::size_t>(i) * kRecordBytes + 4 * k));
      }
      if (k < 3) {
        pts(k, i) = v;
      } else {
        intensity[i] = v;
      }
    }
  }
  return PointCloud(std::move(pts), std::move(intensity));
}

PointCloud load_kitti_scan(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scan " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  try {
    return decode_kitti_scan(bytes);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_kitti_scan(const fs::path& path, const PointCloud& cloud) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(cloud.size()) * kRecordBytes);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    std::uint8_t* rec = bytes.data() + static_cast<std::size_t>(i) * kRecordBytes;
    for (int k = 0; k < 3; ++k) write_f32_le(rec + 4 * k, static_cast<float>(cloud.points()(k, i)));
    const float refl = cloud.intensity() ? static_cast<float>((*cloud.intensity())[i]) : 0.0f;
    write_f32_le(rec + 12, refl);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scan " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PlanarPose planar_from_matrix(const Eigen::Matrix<double, 3, 4>& t, PoseConvention convention) {
  if (convention == PoseConvention::kCamera) {
    return {t(2, 3), -t(0, 3), std::atan2(-t(0, 2), t(2, 2))};
  }
  // Heading of the rotated forward axis projected onto the ground plane.
  return {t(0, 3), t(1, 3), std::atan2(t(1, 0), t(0, 0))};
}

Eigen::Matrix<double, 3, 4> matrix_from_planar(const PlanarPose& pose) {
  Eigen::Matrix<double, 3, 4> t = Eigen::Matrix<double, 3, 4>::Zero();
  t.topLeftCorner<2, 2>() = pose.rotation();
  t(2, 2) = 1.0;
  t(0, 3) = pose.x;
  t(1, 3) = pose.y;
  return t;
}

std::vector<PlanarPose> parse_poses(const std::string& text, PoseConvention convention,
                                    const std::string& origin) {
  std::vector<PlanarPose> poses;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Eigen::Matrix<double, 3, 4> t;
    for (int i = 0; i < 12; ++i) {
      if (!(ls >> t(i / 4, i % 4))) {
        throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                                 ": expected 12 reals, got " + std::to_string(i));
      }
    }
    std::string extra;
    if (ls >> extra) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": trailing token '" + extra + "'");
    }
    if (!t.allFinite()) {
      throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": non-finite value");
    }
    poses.push_back(planar_from_matrix(t, convention));
  }
  return poses;
}

std::vector<PlanarPose> load_pose_file(const fs::path& path, PoseConvention convention) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pose file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_poses(ss.str(), convention, path.string());
}

void write_pose_file(const fs::path& path, std::span<const PlanarPose> poses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write pose file " + path.string());
  for (const PlanarPose& p : poses) {
    const auto t = matrix_from_planar(p);
    for (int i = 0; i < 12; ++i) {
      out << format_double(t(i / 4, i % 4)) << (i == 11 ? '\n' : ' ');
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<TripletSample> sample_triplets(std::span<const PlanarPose> poses,
                                           const SamplingConfig& config, MiningStage stage,
                                           std::size_t count, std::uint64_t seed) {
  config.validate();
  if (poses.size() < 3) throw std::invalid_argument("sample_triplets: need at least 3 records");

  const std::size_t n = poses.size();
  std::vector<std::vector<std::size_t>> similar(n);
  std::vector<std::vector<std::size_t>> dissimilar(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double d = planar_distance(poses[a], poses[b]);
      if (d < config.similar_radius) similar[a].push_back(b);
      const bool negative = stage == MiningStage::kRandom
                                ? d >= config.similar_radius
                                : (d >= config.hard_negative_min && d <= config.hard_negative_max);
      if (negative) dissimilar[a].push_back(b);
    }
  }

  std::vector<std::size_t> anchors;
  bool any_similar = false;
  for (std::size_t a = 0; a < n; ++a) {
    any_similar = any_similar || !similar[a].empty();
    if (!similar[a].empty() && !dissimilar[a].empty()) anchors.push_back(a);
  }
  if (anchors.empty()) {
    if (!any_similar) {
      throw std::runtime_error("sample_triplets: no record has a similar partner within " +
                               format_double(config.similar_radius) + " m");
    }
    throw std::runtime_error(
        stage == MiningStage::kRandom
            ? "sample_triplets: no anchor has a dissimilar record beyond the similar radius"
            : "sample_triplets: no anchor has a dissimilar record within the " +
                  format_double(config.hard_negative_min) + "-" +
                  format_double(config.hard_negative_max) + " m hard-negative band");
  }

  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t size) {
    return std::uniform_int_distribution<std::size_t>(0, size - 1)(rng);
  };
  std::vector<TripletSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t a = anchors[pick(anchors.size())];
    const std::size_t s = similar[a][pick(similar[a].size())];
    const std::size_t d = dissimilar[a][pick(dissimilar[a].size())];
    out.push_back({a, s, d, normalize_angle(poses[s].theta - poses[a].theta)});
  }
  return out;
}

std::vector<TripletSample> sample_triplets(std::span<const ScanRecord> records,
                                           const SamplingConfig& config, MiningStage stage,
                                           std::size_t count, std::uint64_t seed) {
  std::vector<PlanarPose> poses;
  poses.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].id != i) throw std::invalid_argument("sample_triplets: record ids must be dense");
    poses.push_back(records[i].gt_pose);
  }
  return sample_triplets(std::span<const PlanarPose>(poses), config, stage, count, seed);
}

MapQuerySplit split_map_query(std::span<const PlanarPose> poses, const SamplingConfig& config) {
  config.validate();
  const std::size_t n = poses.size();

  // A revisit needs a stretch of driving in between, otherwise consecutive
  // poses would count as revisits of each other.
  const double min_travel = 10.0 * config.similar_radius;
  std::vector<double> travelled(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    travelled[i] = travelled[i - 1] + planar_distance(poses[i - 1], poses[i]);
  }
  std::size_t split = n;
  for (std::size_t i = 0; i < n && split == n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (travelled[i] - travelled[j] > min_travel &&
          planar_distance(poses[i], poses[j]) < config.similar_radius) {
        split = i;
        break;
      }
    }
  }
  if (split == n) throw std::runtime_error("split_map_query: trajectory never revisits a place");

  MapQuerySplit out;
  for (std::size_t i = 0; i < split; ++i) {
    bool far = true;
    for (std::size_t m : out.map) {
      if (planar_distance(poses[i], poses[m]) <= 2.0 * config.similar_radius) {
        far = false;
        break;
      }
    }
    if (far) out.map.push_back(i);
  }
  for (std::size_t i = split; i < n; ++i) {
    int matches = 0;
    for (std::size_t m : out.map) {
      if (planar_distance(poses[i], poses[m]) < config.similar_radius) ++matches;
    }
    if (matches != 1) continue;
    bool spaced = true;
    for (std::size_t q : out.query) {
      if (planar_distance(poses[i], poses[q]) < config.query_spacing) {
        spaced = false;
        break;
      }
    }
    if (spaced) out.query.push_back(i);
  }
  if (out.query.empty()) {
    throw std::runtime_error("split_map_query: insufficient revisits, no query has exactly one map place");
  }
  return out;
}

MapQuerySplit split_map_query(std::span<const ScanRecord> records, const SamplingConfig& config) {
  std::vector<PlanarPose> poses;
  poses.reserve(records.size());
  for (const auto& r : records) poses.push_back(r.gt_pose);
  return split_map_query(std::span<const PlanarPose>(poses), config);
}

std::string scan_file_name(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu.bin", id);
  return buf;
}

DatasetManifest read_manifest(const fs::path& dataset_dir) {
  const KeyValueFile kv = KeyValueFile::load(dataset_dir / "manifest.txt");
  DatasetManifest m;
  m.scan_dir = kv.get_string("scan_dir", m.scan_dir);
  m.pose_file = kv.get_string("pose_file", m.pose_file);
  m.convention = parse_convention(kv.get_string("pose_convention", "z_up"));
  m.sampling.similar_radius = kv.get_double("similar_radius", m.sampling.similar_radius);
  m.sampling.hard_negative_min = kv.get_double("hard_negative_min", m.sampling.hard_negative_min);
  m.sampling.hard_negative_max = kv.get_double("hard_negative_max", m.sampling.hard_negative_max);
  m.sampling.query_spacing = kv.get_double("query_spacing", m.sampling.query_spacing);
  m.sampling.validate();
  return m;
}

void write_manifest(const fs::path& dataset_dir, const DatasetManifest& m) {
  KeyValueFile kv;
  kv.set("scan_dir", m.scan_dir);
  kv.set("pose_file", m.pose_file);
  kv.set("pose_convention", convention_name(m.convention));
  kv.set("similar_radius", format_double(m.sampling.similar_radius));
  kv.set("hard_negative_min", format_double(m.sampling.hard_negative_min));
  kv.set("hard_negative_max", format_double(m.sampling.hard_negative_max));
  kv.set("query_spacing", format_double(m.sampling.query_spacing));
  kv.save(dataset_dir / "manifest.txt");
}

std::vector<PlanarPose> Dataset::poses() const {
  std::vector<PlanarPose> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.gt_pose);
  return out;
}

Dataset load_dataset(const fs::path& dataset_dir) {
  Dataset ds;
  ds.manifest = read_manifest(dataset_dir);
  const auto poses = load_pose_file(dataset_dir / ds.manifest.pose_file, ds.manifest.convention);
  ds.records.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    ds.records.push_back(
        {i, load_kitti_scan(dataset_dir / ds.manifest.scan_dir / scan_file_name(i)), poses[i]});
  }
  return ds;
}

void write_dataset(const fs::path& dataset_dir, std::span<const synth::ScanSample> samples,
                   const SamplingConfig& sampling) {
  DatasetManifest m;
  m.sampling = sampling;
  fs::create_directories(dataset_dir / m.scan_dir);
  std::vector<PlanarPose> poses;
  poses.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    write_kitti_scan(dataset_dir / m.scan_dir / scan_file_name(i), samples[i].cloud);
    poses.push_back(samples[i].pose);
  }
  write_pose_file(dataset_dir / m.pose_file, poses);
  write_manifest(dataset_dir, m);
}

}  // namespace oreos::data
