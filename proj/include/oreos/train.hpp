#ifndef OREOS_TRAIN_HPP
#define OREOS_TRAIN_HPP

#include "oreos/dataset.hpp"
#include "oreos/net.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace oreos {

struct TrainConfig {
  double margin = 0.5;
  int epochs = 20;
  int batch_size = 16;
  int batches_per_epoch = 60;
  std::uint64_t seed = 1;
  /// First epoch (0-based) that uses hard-negative mining; -1 means epochs / 2.
  int stage_switch_epoch = -1;
  double learning_rate = 1e-3;
  /// Use the unhinged D_p^2 - D_n^2 + m form instead of the hinged loss.
  bool literal_loss = false;
  /// Rotate every training scan by a fresh uniform random yaw.
  bool augment = true;

  void validate() const;
  int effective_stage_switch() const { return stage_switch_epoch < 0 ? epochs / 2 : stage_switch_epoch; }
};

/// Range images of one training triplet plus the yaw target for (anchor, similar).
struct TripletImages {
  RangeImage anchor;
  RangeImage similar;
  RangeImage dissimilar;
  double delta_theta = 0.0;
};

struct JointLoss {
  double place = 0.0;
  double orientation = 0.0;
  double total() const { return place + orientation; }
};

/// Forward-only evaluation of L_pr + L_theta for one triplet.
JointLoss joint_loss(const OreosNet& net, const TripletImages& t, double margin, bool literal);

/// Forward and backward pass for one triplet; adds weight * dL/dparam into
/// every parameter gradient buffer and returns the unweighted losses.
JointLoss accumulate_joint_gradient(OreosNet& net, const TripletImages& t, double margin,
                                    bool literal, double weight);

/// Yaw target after rotating the anchor cloud by delta_anchor and the
/// similar cloud by delta_similar (counter-clockwise, sensor frame).
double augmented_yaw_target(double delta_theta_gt, double delta_anchor, double delta_similar);

struct LossRecord {
  std::uint64_t step = 0;
  JointLoss loss;
};

struct TrainResult {
  std::vector<LossRecord> trace;
  std::filesystem::path final_checkpoint;
};

/// Thrown when a batch loss turns non-finite. The last good parameters
/// have already been written to `checkpoint` when this is raised.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::filesystem::path checkpoint)
      : std::runtime_error(what), checkpoint_(std::move(checkpoint)) {}
  const std::filesystem::path& checkpoint() const { return checkpoint_; }

 private:
  std::filesystem::path checkpoint_;
};

/**
 * Joint training with ADAM. Writes `loss.log` (one "step L_pr L_theta L"
 * line per batch), `epoch_NNN.ckpt` after every epoch and `model.ckpt` at
 * the end into `out_dir`. An empty `out_dir` disables all file output.
 * `progress`, when non-null, receives one summary line per epoch.
 */
TrainResult train(OreosNet& net, std::span<const data::ScanRecord> records,
                  const TrainConfig& config, const data::SamplingConfig& sampling,
                  const std::filesystem::path& out_dir, std::ostream* progress = nullptr);

}  // namespace oreos

#endif  // OREOS_TRAIN_HPP
