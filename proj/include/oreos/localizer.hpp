#ifndef OREOS_LOCALIZER_HPP
#define OREOS_LOCALIZER_HPP

#include "oreos/dataset.hpp"
#include "oreos/kdtree.hpp"
#include "oreos/net.hpp"
#include "oreos/registration.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace oreos {

struct MapEntry {
  std::uint64_t id = 0;
  double x = 0.0;
  double y = 0.0;
  Descriptor v;
  Descriptor w;

  bool operator==(const MapEntry& o) const {
    return id == o.id && x == o.x && y == o.y && v == o.v && w == o.w;
  }
};

struct MapHit {
  std::size_t index;  // position in DescriptorMap::entries()
  std::uint64_t id;
  double distance;    // Euclidean, over v
};

inline constexpr char kMapMagic[8] = {'O', 'R', 'E', 'O', 'S', 'M', 'A', 'P'};
inline constexpr std::uint32_t kMapVersion = 1;

/**
 * Immutable place database: entries sorted by id with an exact kd-tree over
 * the place descriptors v. Equal distances resolve to the lower id.
 */
class DescriptorMap {
 public:
  DescriptorMap() = default;
  explicit DescriptorMap(std::vector<MapEntry> entries);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<MapEntry>& entries() const { return entries_; }
  const MapEntry& entry(std::size_t i) const { return entries_.at(i); }
  /// Index of the entry with the given id, or nullopt.
  std::optional<std::size_t> find(std::uint64_t id) const;

  /// Exact k nearest entries in ascending distance; 1 <= k <= size().
  std::vector<MapHit> query_knn(const Descriptor& v, int k) const;

  std::vector<std::uint8_t> encode() const;
  static DescriptorMap decode(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  static DescriptorMap load(const std::filesystem::path& path);

  bool operator==(const DescriptorMap& o) const { return entries_ == o.entries_; }

 private:
  std::vector<MapEntry> entries_;
  KdTree<double, kDescriptorDim> tree_;
};

/// One entry per record: project, extract (v, w), store with the record pose.
DescriptorMap build_map(const OreosNet& net, std::span<const data::ScanRecord> records);

struct StageTimings {
  double projection_ms = 0.0;
  double cnn_ms = 0.0;
  double nn_ms = 0.0;
  double yaw_ms = 0.0;
  double icp_ms = 0.0;

  double total_ms() const { return projection_ms + cnn_ms + nn_ms + yaw_ms + icp_ms; }
};

struct LocalizationResult {
  std::vector<MapHit> candidates;
  std::uint64_t chosen_id = 0;
  double x_nn = 0.0;
  double y_nn = 0.0;
  /// Estimated heading of the chosen map place minus that of the query.
  double delta_theta = 0.0;
  PlanarPose initial_guess;
  std::optional<PlanarPose> refined;
  bool icp_converged = false;
  IcpResult icp;
  StageTimings timings;

  /// Refined pose when ICP converged, otherwise the initial guess.
  PlanarPose pose() const { return refined.value_or(initial_guess); }
};

/**
 * Full pipeline over a built map. Map scans are needed as registration
 * targets and for the map headings; they are matched to entries by id.
 * Const after construction, so concurrent localize() calls are safe.
 */
class Localizer {
 public:
  Localizer(const OreosNet& net, DescriptorMap map, std::span<const data::ScanRecord> map_scans,
            IcpConfig icp = {});

  const DescriptorMap& map() const { return map_; }
  const OreosNet& net() const { return net_; }

  LocalizationResult localize(const PointCloud& query, int k = 1) const;

 private:
  const OreosNet& net_;
  DescriptorMap map_;
  IcpConfig icp_;
  std::vector<double> headings_;
  std::vector<PlaneTarget> targets_;
};

}  // namespace oreos

#endif  // OREOS_LOCALIZER_HPP
