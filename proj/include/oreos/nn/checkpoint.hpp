#ifndef OREOS_NN_CHECKPOINT_HPP
#define OREOS_NN_CHECKPOINT_HPP

#include "oreos/nn/sequential.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace oreos::nn {

inline constexpr char kCheckpointMagic[8] = {'O', 'R', 'E', 'O', 'S', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedStack {
  std::string name;
  Sequential net;
};

/// A set of named layer stacks plus free-form `key = value` attributes.
/// The byte layout is documented in docs/FORMATS.md.
struct Checkpoint {
  std::string attributes;
  std::vector<NamedStack> stacks;

  const Sequential& stack(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace oreos::nn

#endif  // OREOS_NN_CHECKPOINT_HPP
