#include "oreos/nn/checkpoint.hpp"

#include "oreos/binary_io.hpp"

#include <stdexcept>

namespace oreos::nn {

namespace {

constexpr std::uint32_t kLayerRecordBytes = 24;

}  // namespace

const Sequential& Checkpoint::stack(const std::string& name) const {
  for (const auto& s : stacks) {
    if (s.name == name) return s.net;
  }
  throw std::out_of_range("checkpoint has no stack named '" + name + "'");
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  io::ByteWriter w;
  w.raw(std::string(kCheckpointMagic, sizeof(kCheckpointMagic)));
  w.u32(kCheckpointVersion);
  w.string(ckpt.attributes);
  w.u32(static_cast<std::uint32_t>(ckpt.stacks.size()));
  for (const NamedStack& s : ckpt.stacks) {
    w.string(s.name);
    w.u32(static_cast<std::uint32_t>(s.net.input_shape().size()));
    for (Eigen::Index e : s.net.input_shape()) w.u64(static_cast<std::uint64_t>(e));
    const auto specs = s.net.specs();
    w.u32(static_cast<std::uint32_t>(specs.size()));
    for (const LayerSpec& spec : specs) {
      w.u32(kLayerRecordBytes);
      w.u32(static_cast<std::uint32_t>(spec.kind));
      w.i32(spec.kernel_h);
      w.i32(spec.kernel_w);
      w.i32(spec.stride_h);
      w.i32(spec.stride_w);
      w.i32(spec.units);
    }
  }
  for (const NamedStack& s : ckpt.stacks) {
    for (const Tensor* p : s.net.parameters()) {
      w.u64(static_cast<std::uint64_t>(p->size()));
      for (Eigen::Index i = 0; i < p->size(); ++i) w.f64((*p)[i]);
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (r.raw(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.attributes = r.string();
  const std::uint32_t n_stacks = r.u32();
  for (std::uint32_t s = 0; s < n_stacks; ++s) {
    std::string name = r.string();
    Shape input(r.u32());
    for (auto& e : input) e = static_cast<Eigen::Index>(r.u64());
    std::vector<LayerSpec> specs(r.u32());
    for (LayerSpec& spec : specs) {
      const std::uint32_t len = r.u32();
      if (len < kLayerRecordBytes) throw std::runtime_error("checkpoint: short layer record");
      spec.kind = static_cast<LayerKind>(r.u32());
      spec.kernel_h = r.i32();
      spec.kernel_w = r.i32();
      spec.stride_h = r.i32();
      spec.stride_w = r.i32();
      spec.units = r.i32();
      r.skip(len - kLayerRecordBytes);
    }
    ckpt.stacks.push_back({std::move(name), Sequential(std::move(input), specs)});
  }
  for (NamedStack& s : ckpt.stacks) {
    for (Tensor* p : s.net.parameters()) {
      const std::uint64_t n = r.u64();
      if (n != static_cast<std::uint64_t>(p->size())) {
        throw std::runtime_error("checkpoint: parameter count mismatch in stack '" + s.name + "'");
      }
      for (Eigen::Index i = 0; i < p->size(); ++i) (*p)[i] = r.f64();
    }
  }
  if (r.remaining() != 0) throw std::runtime_error("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_file(path.string(), encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path.string()));
}

}  // namespace oreos::nn
