#include "oreos/config.hpp"

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace oreos {

namespace {

struct Degrees {
  double& radians;
};

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

std::vector<double> split_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used == 0 || used != item.size()) {
      throw std::invalid_argument("config: " + key + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

// Calls f(key, field) for every persisted field, in a fixed order.
template <typename Config, typename F>
void visit_fields(Config& c, F&& f) {
  f("seed", c.seed);
  f("path.train_data", c.train_data);
  f("path.eval_data", c.eval_data);
  f("path.model_dir", c.model_dir);
  f("path.checkpoint", c.checkpoint);
  f("path.map", c.map_file);
  f("path.report_dir", c.report_dir);

  f("world.extent", c.world.extent);
  f("world.primitives", c.world.primitives);
  f("world.spacing", c.world.spacing);
  f("world.train_offsets", c.world.train_offsets);
  f("world.eval_offsets", c.world.eval_offsets);
  f("world.heading_jitter_deg", Degrees{c.world.heading_jitter});
  f("world.lateral_jitter", c.world.lateral_jitter);
  f("world.range_noise", c.world.range_noise);

  f("projection.height", c.projection.height);
  f("projection.width", c.projection.width);
  f("projection.zenith_min_deg", Degrees{c.projection.zenith_min});
  f("projection.zenith_max_deg", Degrees{c.projection.zenith_max});
  f("projection.max_range", c.projection.max_range);

  f("net.input_pool_h", c.net.input_pool_h);
  f("net.input_pool_w", c.net.input_pool_w);
  f("net.conv1_channels", c.net.conv1_channels);
  f("net.conv2_channels", c.net.conv2_channels);
  f("net.conv3_channels", c.net.conv3_channels);
  f("net.kernel", c.net.kernel);
  f("net.place_hidden", c.net.place_hidden);
  f("net.orientation_hidden", c.net.orientation_hidden);
  f("net.yaw_hidden", c.net.yaw_hidden);

  f("train.margin", c.train.margin);
  f("train.epochs", c.train.epochs);
  f("train.batch_size", c.train.batch_size);
  f("train.batches_per_epoch", c.train.batches_per_epoch);
  f("train.stage_switch_epoch", c.train.stage_switch_epoch);
  f("train.learning_rate", c.train.learning_rate);
  f("train.literal_loss", c.train.literal_loss);
  f("train.augment", c.train.augment);

  f("sampling.similar_radius", c.sampling.similar_radius);
  f("sampling.hard_negative_min", c.sampling.hard_negative_min);
  f("sampling.hard_negative_max", c.sampling.hard_negative_max);
  f("sampling.query_spacing", c.sampling.query_spacing);

  f("icp.max_iterations", c.icp.max_iterations);
  f("icp.max_correspondence_distance", c.icp.max_correspondence_distance);
  f("icp.initial_correspondence_distance", c.icp.initial_correspondence_distance);
  f("icp.cap_decay", c.icp.cap_decay);
  f("icp.translation_threshold", c.icp.translation_threshold);
  f("icp.rotation_threshold", c.icp.rotation_threshold);
  f("icp.normal_neighbors", c.icp.normal_neighbors);
  f("icp.max_surface_variation", c.icp.max_surface_variation);
  f("icp.min_correspondences", c.icp.min_correspondences);

  f("eval.k_max", c.eval.k_max);
  f("eval.yaw_step_deg", Degrees{c.eval.yaw_step});
  f("eval.max_queries", c.eval.max_queries);
  f("eval.success_distance", c.eval.success_distance);
  f("eval.success_yaw_deg", Degrees{c.eval.success_yaw});
}

struct Writer {
  KeyValueFile& kv;
  void operator()(const char* k, const std::string& v) { kv.set(k, v); }
  void operator()(const char* k, double v) { kv.set(k, format_double(v)); }
  void operator()(const char* k, int v) { kv.set(k, std::to_string(v)); }
  void operator()(const char* k, std::uint64_t v) { kv.set(k, std::to_string(v)); }
  void operator()(const char* k, bool v) { kv.set(k, v ? "true" : "false"); }
  void operator()(const char* k, const std::vector<double>& v) { kv.set(k, join(v)); }
  void operator()(const char* k, const Degrees& d) { kv.set(k, format_double(rad2deg(d.radians))); }
};

struct Reader {
  const KeyValueFile& kv;
  std::set<std::string>& seen;

  void operator()(const char* k, std::string& v) {
    seen.insert(k);
    v = kv.get_string(k, v);
  }
  void operator()(const char* k, double& v) {
    seen.insert(k);
    v = kv.get_double(k, v);
  }
  void operator()(const char* k, int& v) {
    seen.insert(k);
    const long long x = kv.get_int(k, v);
    if (x < INT32_MIN || x > INT32_MAX) throw std::invalid_argument(std::string("config: ") + k + " out of range");
    v = static_cast<int>(x);
  }
  void operator()(const char* k, std::uint64_t& v) {
    seen.insert(k);
    const long long x = kv.get_int(k, static_cast<long long>(v));
    if (x < 0) throw std::invalid_argument(std::string("config: ") + k + " must be non-negative");
    v = static_cast<std::uint64_t>(x);
  }
  void operator()(const char* k, bool& v) {
    seen.insert(k);
    v = kv.get_bool(k, v);
  }
  void operator()(const char* k, std::vector<double>& v) {
    seen.insert(k);
    if (const auto s = kv.get(k)) v = split_doubles(k, *s);
  }
  void operator()(const char* k, Degrees d) {
    seen.insert(k);
    d.radians = deg2rad(kv.get_double(k, rad2deg(d.radians)));
  }
};

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: " + key + " " + what);
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : out_dir / path;
}

void RunConfig::validate() const {
  require(world.extent > 20.0, "world.extent", "must be > 20");
  require(world.primitives >= 1, "world.primitives", "must be >= 1");
  require(world.spacing > 0.0, "world.spacing", "must be > 0");
  require(!world.train_offsets.empty(), "world.train_offsets", "needs at least one lap");
  require(world.eval_offsets.size() == 2, "world.eval_offsets", "needs exactly two laps (map, query)");
  require(world.range_noise >= 0.0, "world.range_noise", "must be >= 0");
  require(eval.k_max >= 1, "eval.k_max", "must be >= 1");
  require(eval.yaw_step > 0.0, "eval.yaw_step_deg", "must be > 0");
  require(eval.max_queries >= 0, "eval.max_queries", "must be >= 0");
  require(eval.success_distance > 0.0, "eval.success_distance", "must be > 0");
  require(eval.success_yaw > 0.0, "eval.success_yaw_deg", "must be > 0");
  projection.validate();
  train.validate();
  sampling.validate();
  icp.validate();
}

KeyValueFile RunConfig::to_keyvalue() const {
  KeyValueFile kv;
  RunConfig copy = *this;
  visit_fields(copy, Writer{kv});
  return kv;
}

RunConfig RunConfig::from_keyvalue(const KeyValueFile& kv) {
  RunConfig c;
  std::set<std::string> seen;
  visit_fields(c, Reader{kv, seen});
  for (const auto& [key, value] : kv.entries()) {
    if (!seen.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return from_keyvalue(KeyValueFile::load(path));
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_keyvalue().to_string())));
  return buf;
}

}  // namespace oreos
