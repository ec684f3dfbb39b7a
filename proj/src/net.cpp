#include "oreos/net.hpp"

#include "oreos/keyvalue.hpp"

#include <random>
#include <stdexcept>

namespace oreos {

namespace {

using nn::LayerSpec;

constexpr const char* kTrunk = "trunk";
constexpr const char* kPlace = "place_head";
constexpr const char* kOrientation = "orientation_head";
constexpr const char* kYaw = "yaw_head";

Descriptor to_descriptor(const nn::Tensor& t) {
  if (t.size() != kDescriptorDim) {
    throw std::logic_error("descriptor head produced " + std::to_string(t.size()) + " values");
  }
  return t.values();
}

std::string projection_attributes(const ProjectionParams& p) {
  KeyValueFile kv;
  kv.set("projection.height", std::to_string(p.height));
  kv.set("projection.width", std::to_string(p.width));
  kv.set("projection.zenith_min", format_double(p.zenith_min));
  kv.set("projection.zenith_max", format_double(p.zenith_max));
  kv.set("projection.max_range", format_double(p.max_range));
  return kv.to_string();
}

ProjectionParams projection_from_attributes(const std::string& text) {
  const KeyValueFile kv = KeyValueFile::parse(text, "checkpoint attributes");
  ProjectionParams p;
  p.height = static_cast<int>(kv.get_int("projection.height", p.height));
  p.width = static_cast<int>(kv.get_int("projection.width", p.width));
  p.zenith_min = kv.get_double("projection.zenith_min", p.zenith_min);
  p.zenith_max = kv.get_double("projection.zenith_max", p.zenith_max);
  p.max_range = kv.get_double("projection.max_range", p.max_range);
  p.validate();
  return p;
}

}  // namespace

OreosArchitecture OreosArchitecture::standard(const ProjectionParams& projection,
                                              const ArchitectureOptions& o) {
  projection.validate();
  OreosArchitecture arch;
  arch.input = {1, projection.height, projection.width};
  arch.trunk = {
      LayerSpec::maxpool2d(o.input_pool_h, o.input_pool_w),
      LayerSpec::conv2d(o.conv1_channels, o.kernel, o.kernel),
      LayerSpec::prelu(),
      LayerSpec::maxpool2d(2, 2),
      LayerSpec::conv2d(o.conv2_channels, o.kernel, o.kernel),
      LayerSpec::prelu(),
      LayerSpec::maxpool2d(2, 1),
      LayerSpec::conv2d(o.conv3_channels, o.kernel, o.kernel),
      LayerSpec::prelu(),
  };
  const nn::Shape features = nn::Sequential(arch.input, arch.trunk).output_shape();
  const int rows = static_cast<int>(features[1]);
  const int cols = static_cast<int>(features[2]);
  arch.place_head = {
      LayerSpec::maxpool2d(rows, cols),
      LayerSpec::flatten(),
      LayerSpec::fully_connected(o.place_hidden),
      LayerSpec::prelu(),
      LayerSpec::fully_connected(kDescriptorDim),
  };
  arch.orientation_head = {
      LayerSpec::maxpool2d(rows, 1),
      LayerSpec::flatten(),
      LayerSpec::fully_connected(o.orientation_hidden),
      LayerSpec::prelu(),
      LayerSpec::fully_connected(kDescriptorDim),
  };
  arch.yaw_head = {
      LayerSpec::fully_connected(o.yaw_hidden),
      LayerSpec::prelu(),
      LayerSpec::fully_connected(2),
  };
  return arch;
}

OreosNet::OreosNet(const OreosArchitecture& arch, const ProjectionParams& projection,
                   std::uint64_t seed)
    : projection_(projection),
      trunk_(arch.input, arch.trunk),
      place_head_(trunk_.output_shape(), arch.place_head),
      orientation_head_(trunk_.output_shape(), arch.orientation_head),
      yaw_head_({2 * kDescriptorDim}, arch.yaw_head) {
  projection_.validate();
  if (arch.input != nn::Shape{1, projection.height, projection.width}) {
    throw std::invalid_argument("OreosNet: input shape " + nn::shape_to_string(arch.input) +
                                " does not match the projection geometry");
  }
  check_dimensions();
  std::mt19937_64 rng(seed);
  trunk_.initialize(rng);
  place_head_.initialize(rng);
  orientation_head_.initialize(rng);
  yaw_head_.initialize(rng);
}

OreosNet::OreosNet(ProjectionParams projection, nn::Sequential trunk, nn::Sequential place,
                   nn::Sequential orientation, nn::Sequential yaw)
    : projection_(projection),
      trunk_(std::move(trunk)),
      place_head_(std::move(place)),
      orientation_head_(std::move(orientation)),
      yaw_head_(std::move(yaw)) {
  check_dimensions();
}

void OreosNet::check_dimensions() const {
  if (place_head_.input_shape() != trunk_.output_shape() ||
      orientation_head_.input_shape() != trunk_.output_shape()) {
    throw std::invalid_argument("OreosNet: heads do not consume the trunk output shape");
  }
  if (place_head_.output_shape() != nn::Shape{kDescriptorDim} ||
      orientation_head_.output_shape() != nn::Shape{kDescriptorDim}) {
    throw std::invalid_argument("OreosNet: descriptor heads must output 64 values each");
  }
  if (yaw_head_.input_shape() != nn::Shape{2 * kDescriptorDim} ||
      yaw_head_.output_shape() != nn::Shape{2}) {
    throw std::invalid_argument("OreosNet: yaw head must map 128 inputs to 2 outputs");
  }
}

OreosNet OreosNet::from_checkpoint(const nn::Checkpoint& ckpt) {
  const ProjectionParams projection = projection_from_attributes(ckpt.attributes);
  OreosNet net(projection, ckpt.stack(kTrunk), ckpt.stack(kPlace), ckpt.stack(kOrientation),
               ckpt.stack(kYaw));
  if (net.trunk_.input_shape() != nn::Shape{1, projection.height, projection.width}) {
    throw std::runtime_error("checkpoint: trunk input does not match stored projection");
  }
  return net;
}

OreosNet OreosNet::load(const std::filesystem::path& path) {
  return from_checkpoint(nn::load_checkpoint(path));
}

nn::Checkpoint OreosNet::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.attributes = projection_attributes(projection_);
  ckpt.stacks = {{kTrunk, trunk_}, {kPlace, place_head_}, {kOrientation, orientation_head_},
                 {kYaw, yaw_head_}};
  return ckpt;
}

void OreosNet::save(const std::filesystem::path& path) const {
  nn::save_checkpoint(path, to_checkpoint());
}

OreosArchitecture OreosNet::architecture() const {
  return {trunk_.input_shape(), trunk_.specs(), place_head_.specs(), orientation_head_.specs(),
          yaw_head_.specs()};
}

nn::Tensor OreosNet::image_tensor(const RangeImage& img) const {
  if (img.height() != projection_.height || img.width() != projection_.width) {
    throw std::invalid_argument("OreosNet: range image " + std::to_string(img.height()) + "x" +
                                std::to_string(img.width()) + " does not match network input " +
                                std::to_string(projection_.height) + "x" +
                                std::to_string(projection_.width));
  }
  Eigen::VectorXd values =
      Eigen::Map<const Eigen::VectorXd>(img.cells().data(), img.cells().size());
  return nn::Tensor({1, img.height(), img.width()}, std::move(values));
}

DescriptorPair OreosNet::extract_descriptors(const RangeImage& img) const {
  const nn::Tensor features = trunk_.forward(image_tensor(img));
  return {to_descriptor(place_head_.forward(features)),
          to_descriptor(orientation_head_.forward(features))};
}

DescriptorPair OreosNet::extract_descriptors(const PointCloud& cloud) const {
  return extract_descriptors(project_scan(cloud, projection_));
}

Eigen::Vector2d OreosNet::yaw_vector(const Descriptor& w_a, const Descriptor& w_s) const {
  Eigen::VectorXd joint(2 * kDescriptorDim);
  joint << w_a, w_s;
  const nn::Tensor y = yaw_head_.forward(nn::Tensor({2 * kDescriptorDim}, std::move(joint)));
  return {y[0], y[1]};
}

double OreosNet::estimate_yaw(const Descriptor& w_a, const Descriptor& w_s) const {
  const Eigen::Vector2d y = yaw_vector(w_a, w_s);
  return normalize_angle(std::atan2(y[1], y[0]));
}

std::vector<nn::Tensor*> OreosNet::parameters() {
  std::vector<nn::Tensor*> out;
  for (nn::Sequential* s : {&trunk_, &place_head_, &orientation_head_, &yaw_head_}) {
    for (nn::Tensor* p : s->parameters()) out.push_back(p);
  }
  return out;
}

void OreosNet::zero_grad() {
  for (nn::Tensor* p : parameters()) p->zero_grad();
}

TripletLossGradient triplet_loss_gradient(const Descriptor& v_a, const Descriptor& v_s,
                                          const Descriptor& v_d, double margin, bool literal) {
  const Descriptor pos_diff = v_a - v_s;
  const Descriptor neg_diff = v_a - v_d;
  const double pos = pos_diff.squaredNorm();
  const double neg = neg_diff.squaredNorm();
  TripletLossGradient g;
  if (literal) {
    g.loss = pos * pos - neg * neg + margin;
    // d(pos^2)/dv_a = 2 pos * 2 (a - s)
    g.d_similar = -4.0 * pos * pos_diff;
    g.d_dissimilar = 4.0 * neg * neg_diff;
    g.d_anchor = -g.d_similar - g.d_dissimilar;
    return g;
  }
  g.loss = std::max(0.0, pos - neg + margin);
  if (pos - neg + margin > 0.0) {
    g.d_similar = -2.0 * pos_diff;
    g.d_dissimilar = 2.0 * neg_diff;
    g.d_anchor = -g.d_similar - g.d_dissimilar;
  } else {
    g.d_anchor.setZero();
    g.d_similar.setZero();
    g.d_dissimilar.setZero();
  }
  return g;
}

}  // namespace oreos
