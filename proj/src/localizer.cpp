#include "oreos/localizer.hpp"

#include "oreos/binary_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace oreos {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

DescriptorMap::DescriptorMap(std::vector<MapEntry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const MapEntry& a, const MapEntry& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i > 0 && entries_[i].id == entries_[i - 1].id) {
      throw std::invalid_argument("DescriptorMap: duplicate id " + std::to_string(entries_[i].id));
    }
    if (!entries_[i].v.allFinite() || !entries_[i].w.allFinite() || !std::isfinite(entries_[i].x) ||
        !std::isfinite(entries_[i].y)) {
      throw std::invalid_argument("DescriptorMap: non-finite entry " + std::to_string(entries_[i].id));
    }
  }
  Eigen::Matrix<double, kDescriptorDim, Eigen::Dynamic> vs(kDescriptorDim,
                                                           static_cast<Eigen::Index>(entries_.size()));
  for (std::size_t i = 0; i < entries_.size(); ++i) vs.col(static_cast<Eigen::Index>(i)) = entries_[i].v;
  tree_ = KdTree<double, kDescriptorDim>(std::move(vs));
}

std::optional<std::size_t> DescriptorMap::find(std::uint64_t id) const {
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                                   [](const MapEntry& e, std::uint64_t v) { return e.id < v; });
  if (it == entries_.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - entries_.begin());
}

std::vector<MapHit> DescriptorMap::query_knn(const Descriptor& v, int k) const {
  if (k < 1 || static_cast<std::size_t>(k) > entries_.size()) {
    throw std::out_of_range("query_knn: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(entries_.size()) + "]");
  }
  std::vector<MapHit> hits;
  for (const auto& nb : tree_.knn(v, k)) {
    const auto i = static_cast<std::size_t>(nb.index);
    hits.push_back({i, entries_[i].id, std::sqrt(nb.squared_distance)});
  }
  return hits;
}

std::vector<std::uint8_t> DescriptorMap::encode() const {
  io::ByteWriter w;
  w.raw(std::string(kMapMagic, sizeof(kMapMagic)));
  w.u32(kMapVersion);
  w.u64(entries_.size());
  for (const MapEntry& e : entries_) {
    w.u64(e.id);
    w.f64(e.x);
    w.f64(e.y);
    for (int i = 0; i < kDescriptorDim; ++i) w.f64(e.v[i]);
    for (int i = 0; i < kDescriptorDim; ++i) w.f64(e.w[i]);
  }
  return w.take();
}

DescriptorMap DescriptorMap::decode(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "map");
  if (r.raw(sizeof(kMapMagic)) != std::string(kMapMagic, sizeof(kMapMagic))) {
    throw std::runtime_error("map: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kMapVersion) throw std::runtime_error("map: unsupported version " + std::to_string(version));
  const std::uint64_t n = r.u64();
  constexpr std::uint64_t kEntryBytes = 8 * (3 + 2 * kDescriptorDim);
  if (n > r.remaining() / kEntryBytes) {
    throw std::runtime_error("map: entry count " + std::to_string(n) + " exceeds file size");
  }
  std::vector<MapEntry> entries(n);
  for (MapEntry& e : entries) {
    e.id = r.u64();
    e.x = r.f64();
    e.y = r.f64();
    for (int i = 0; i < kDescriptorDim; ++i) e.v[i] = r.f64();
    for (int i = 0; i < kDescriptorDim; ++i) e.w[i] = r.f64();
  }
  if (r.remaining() != 0) throw std::runtime_error("map: trailing bytes");
  return DescriptorMap(std::move(entries));
}

void DescriptorMap::save(const std::filesystem::path& path) const { io::write_file(path.string(), encode()); }

DescriptorMap DescriptorMap::load(const std::filesystem::path& path) {
  return decode(io::read_file(path.string()));
}

DescriptorMap build_map(const OreosNet& net, std::span<const data::ScanRecord> records) {
  if (records.empty()) throw std::invalid_argument("build_map: empty map set");
  std::vector<MapEntry> entries;
  entries.reserve(records.size());
  for (const data::ScanRecord& r : records) {
    const DescriptorPair d = net.extract_descriptors(r.cloud);
    entries.push_back({r.id, r.gt_pose.x, r.gt_pose.y, d.v, d.w});
  }
  return DescriptorMap(std::move(entries));
}

Localizer::Localizer(const OreosNet& net, DescriptorMap map, std::span<const data::ScanRecord> map_scans,
                     IcpConfig icp)
    : net_(net), map_(std::move(map)), icp_(icp) {
  icp_.validate();
  if (map_.empty()) throw std::invalid_argument("Localizer: empty map");
  headings_.assign(map_.size(), 0.0);
  std::vector<const data::ScanRecord*> by_entry(map_.size(), nullptr);
  for (const data::ScanRecord& r : map_scans) {
    if (const auto i = map_.find(r.id)) by_entry[*i] = &r;
  }
  targets_.reserve(map_.size());
  for (std::size_t i = 0; i < map_.size(); ++i) {
    if (!by_entry[i]) {
      throw std::invalid_argument("Localizer: no scan for map entry " + std::to_string(map_.entry(i).id));
    }
    const data::ScanRecord& r = *by_entry[i];
    headings_[i] = r.gt_pose.theta;
    targets_.emplace_back(r.cloud, icp_, r.gt_pose);
  }
}

LocalizationResult Localizer::localize(const PointCloud& query, int k) const {
  LocalizationResult res;
  auto t0 = Clock::now();
  const RangeImage img = project_scan(query, net_.projection());
  res.timings.projection_ms = elapsed_ms(t0);

  t0 = Clock::now();
  const DescriptorPair d = net_.extract_descriptors(img);
  res.timings.cnn_ms = elapsed_ms(t0);

  t0 = Clock::now();
  res.candidates = map_.query_knn(d.v, k);
  res.timings.nn_ms = elapsed_ms(t0);

  const MapHit& best = res.candidates.front();
  const MapEntry& e = map_.entry(best.index);
  res.chosen_id = e.id;
  res.x_nn = e.x;
  res.y_nn = e.y;

  t0 = Clock::now();
  res.delta_theta = net_.estimate_yaw(d.w, e.w);
  res.timings.yaw_ms = elapsed_ms(t0);
  res.initial_guess = PlanarPose(e.x, e.y, headings_[best.index] - res.delta_theta);

  t0 = Clock::now();
  res.icp = icp_point_to_plane(query, targets_[best.index], res.initial_guess, icp_);
  res.timings.icp_ms = elapsed_ms(t0);
  res.icp_converged = res.icp.converged;
  if (res.icp_converged) res.refined = res.icp.pose;
  return res;
}

}  // namespace oreos
