#ifndef OREOS_CONFIG_HPP
#define OREOS_CONFIG_HPP

#include "oreos/dataset.hpp"
#include "oreos/keyvalue.hpp"
#include "oreos/net.hpp"
#include "oreos/registration.hpp"
#include "oreos/train.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace oreos {

/// Synthetic world and trajectory layout used by `generate`.
struct WorldConfig {
  double extent = 120.0;
  int primitives = 140;
  double spacing = 1.0;
  /// Lateral offsets (m) of the training laps.
  std::vector<double> train_offsets{-1.2, -0.4, 0.4, 1.2};
  /// Map lap then query lap of the evaluation sequence.
  std::vector<double> eval_offsets{0.0, 0.6};
  double heading_jitter = deg2rad(4.0);
  double lateral_jitter = 0.2;
  double range_noise = 0.0;
};

struct EvalConfig {
  int k_max = 10;
  double yaw_step = deg2rad(10.0);
  /// Evaluate at most this many queries (0 = all).
  int max_queries = 0;
  double success_distance = 1.5;
  double success_yaw = deg2rad(2.5);
};

/**
 * Everything a pipeline run depends on. Paths are relative to `out_dir`
 * unless absolute. Text form: `key = value` lines; angles are in degrees.
 */
struct RunConfig {
  std::uint64_t seed = 7;
  std::filesystem::path out_dir = "out";

  std::string train_data = "train";
  std::string eval_data = "eval";
  std::string model_dir = "model";
  std::string checkpoint = "model/model.ckpt";
  std::string map_file = "map.bin";
  std::string report_dir = "report";

  WorldConfig world;
  ProjectionParams projection = ProjectionParams::synthetic_default();
  ArchitectureOptions net;
  TrainConfig train;
  data::SamplingConfig sampling;
  IcpConfig icp;
  EvalConfig eval;

  std::filesystem::path resolve(const std::string& p) const;

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;

  /// Canonical sorted text form (excludes out_dir).
  KeyValueFile to_keyvalue() const;
  /// Starts from defaults; unknown keys are an error.
  static RunConfig from_keyvalue(const KeyValueFile& kv);
  static RunConfig load(const std::filesystem::path& path);

  /// FNV-1a 64 of the canonical text, as 16 hex digits.
  std::string hash() const;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace oreos

#endif  // OREOS_CONFIG_HPP
