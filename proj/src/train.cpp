#include "oreos/train.hpp"

#include "oreos/nn/adam.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>

namespace oreos {

namespace {

nn::Tensor vector_tensor(const Eigen::VectorXd& values) {
  return nn::Tensor({values.size()}, values);
}

struct ImageForward {
  nn::Tape trunk;
  nn::Tensor features;
};

ImageForward forward_trunk(const OreosNet& net, const RangeImage& img) {
  ImageForward f;
  f.features = net.trunk().forward(net.image_tensor(img), &f.trunk);
  return f;
}

std::string loss_line(const LossRecord& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%llu %.9g %.9g %.9g", static_cast<unsigned long long>(r.step),
                r.loss.place, r.loss.orientation, r.loss.total());
  return buf;
}

std::filesystem::path epoch_checkpoint(const std::filesystem::path& dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch + 1);
  return dir / name;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(margin > 0.0)) throw std::invalid_argument("train: margin must be > 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (batches_per_epoch < 1) throw std::invalid_argument("train: batches per epoch must be >= 1");
}

double augmented_yaw_target(double delta_theta_gt, double delta_anchor, double delta_similar) {
  // Rotating a cloud by +d turns the sensor's apparent heading into theta - d.
  return normalize_angle(delta_theta_gt - delta_similar + delta_anchor);
}

JointLoss joint_loss(const OreosNet& net, const TripletImages& t, double margin, bool literal) {
  const DescriptorPair a = net.extract_descriptors(t.anchor);
  const DescriptorPair s = net.extract_descriptors(t.similar);
  const DescriptorPair d = net.extract_descriptors(t.dissimilar);
  JointLoss l;
  l.place = literal ? triplet_loss_literal(a.v, s.v, d.v, margin) : triplet_loss(a.v, s.v, d.v, margin);
  l.orientation = orientation_loss(net.yaw_vector(a.w, s.w), t.delta_theta);
  return l;
}

JointLoss accumulate_joint_gradient(OreosNet& net, const TripletImages& t, double margin,
                                    bool literal, double weight) {
  ImageForward fa = forward_trunk(net, t.anchor);
  ImageForward fs = forward_trunk(net, t.similar);
  ImageForward fd = forward_trunk(net, t.dissimilar);

  nn::Tape pa, ps, pd, oa, os, yt;
  const Descriptor v_a = net.place_head().forward(fa.features, &pa).values();
  const Descriptor v_s = net.place_head().forward(fs.features, &ps).values();
  const Descriptor v_d = net.place_head().forward(fd.features, &pd).values();
  const Descriptor w_a = net.orientation_head().forward(fa.features, &oa).values();
  const Descriptor w_s = net.orientation_head().forward(fs.features, &os).values();

  Eigen::VectorXd joint(2 * kDescriptorDim);
  joint << w_a, w_s;
  const nn::Tensor y = net.yaw_head().forward(vector_tensor(joint), &yt);

  const TripletLossGradient pr = triplet_loss_gradient(v_a, v_s, v_d, margin, literal);
  JointLoss l;
  l.place = pr.loss;
  l.orientation = orientation_loss(y.values(), t.delta_theta);

  const Eigen::VectorXd dy = orientation_loss_gradient(y.values(), t.delta_theta);
  const nn::Tensor djoint = net.yaw_head().backward(vector_tensor(weight * dy), yt);

  nn::Tensor da = net.orientation_head().backward(
      vector_tensor(djoint.values().head(kDescriptorDim)), oa);
  nn::Tensor ds = net.orientation_head().backward(
      vector_tensor(djoint.values().tail(kDescriptorDim)), os);
  nn::Tensor dd(fd.features.shape());

  const bool place_active = pr.d_anchor.any() || pr.d_similar.any() || pr.d_dissimilar.any();
  if (place_active) {
    da.values() += net.place_head().backward(vector_tensor(weight * pr.d_anchor), pa).values();
    ds.values() += net.place_head().backward(vector_tensor(weight * pr.d_similar), ps).values();
    dd.values() = net.place_head().backward(vector_tensor(weight * pr.d_dissimilar), pd).values();
    net.trunk().backward(dd, fd.trunk);
  }
  net.trunk().backward(da, fa.trunk);
  net.trunk().backward(ds, fs.trunk);
  return l;
}

TrainResult train(OreosNet& net, std::span<const data::ScanRecord> records,
                  const TrainConfig& config, const data::SamplingConfig& sampling,
                  const std::filesystem::path& out_dir, std::ostream* progress) {
  config.validate();
  sampling.validate();
  const bool write_files = !out_dir.empty();
  std::ofstream log;
  if (write_files) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir / "loss.log", std::ios::binary | std::ios::trunc);
    if (!log) throw std::runtime_error("train: cannot write " + (out_dir / "loss.log").string());
  }

  const ProjectionParams& projection = net.projection();
  std::mt19937_64 augment_rng(config.seed ^ 0x5DEECE66DULL);
  std::uniform_real_distribution<double> yaw_dist(-std::numbers::pi, std::numbers::pi);
  const auto project = [&](const data::ScanRecord& r, double delta) {
    return project_scan(delta == 0.0 ? r.cloud : rotate_yaw(r.cloud, delta), projection);
  };

  nn::AdamState adam;
  adam.config.learning_rate = config.learning_rate;
  const std::vector<nn::Tensor*> params = net.parameters();
  const std::size_t per_epoch =
      static_cast<std::size_t>(config.batch_size) * static_cast<std::size_t>(config.batches_per_epoch);
  const double weight = 1.0 / config.batch_size;

  TrainResult result;
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const data::MiningStage stage = epoch < config.effective_stage_switch() ? data::MiningStage::kRandom
                                                                            : data::MiningStage::kHard;
    const std::vector<data::TripletSample> triplets = data::sample_triplets(
        records, sampling, stage, per_epoch, config.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));

    JointLoss epoch_sum;
    for (int b = 0; b < config.batches_per_epoch; ++b) {
      net.zero_grad();
      JointLoss batch;
      for (int i = 0; i < config.batch_size; ++i) {
        const data::TripletSample& s = triplets[static_cast<std::size_t>(b * config.batch_size + i)];
        double d_a = 0.0, d_s = 0.0, d_d = 0.0;
        if (config.augment) {
          d_a = yaw_dist(augment_rng);
          d_s = yaw_dist(augment_rng);
          d_d = yaw_dist(augment_rng);
        }
        const TripletImages t{project(records[s.anchor], d_a), project(records[s.similar], d_s),
                              project(records[s.dissimilar], d_d),
                              augmented_yaw_target(s.delta_theta_gt, d_a, d_s)};
        const JointLoss l = accumulate_joint_gradient(net, t, config.margin, config.literal_loss, weight);
        batch.place += weight * l.place;
        batch.orientation += weight * l.orientation;
      }

      bool finite = std::isfinite(batch.total());
      for (const nn::Tensor* p : params) finite = finite && (!p->has_grad() || p->grad().allFinite());
      if (!finite) {
        // Parameters are untouched since the last successful step.
        std::filesystem::path saved;
        if (write_files) {
          saved = out_dir / "last_good.ckpt";
          net.save(saved);
        }
        throw TrainingDiverged("training diverged at step " + std::to_string(step + 1) +
                                   " (non-finite loss)",
                               saved);
      }
      nn::adam_step(adam, params);
      ++step;
      const LossRecord rec{step, batch};
      result.trace.push_back(rec);
      if (write_files) log << loss_line(rec) << '\n';
      epoch_sum.place += batch.place / config.batches_per_epoch;
      epoch_sum.orientation += batch.orientation / config.batches_per_epoch;
    }
    if (write_files) {
      log.flush();
      net.save(epoch_checkpoint(out_dir, epoch));
    }
    if (progress) {
      *progress << "epoch " << epoch + 1 << "/" << config.epochs
                << (stage == data::MiningStage::kHard ? " hard" : " random") << " L_pr "
                << epoch_sum.place << " L_theta " << epoch_sum.orientation << std::endl;
    }
  }
  if (write_files) {
    result.final_checkpoint = out_dir / "model.ckpt";
    net.save(result.final_checkpoint);
  }
  return result;
}

}  // namespace oreos
