#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>

#include "dcc/autoencoder.hpp"
#include "dcc/clustering.hpp"
#include "dcc/optim.hpp"

namespace dcc {

/// Everything needed to resume or reuse a model.
struct Checkpoint {
  AutoencoderModel autoencoder;
  std::optional<ClusterModel> clusters;
  std::optional<AdamState> optimizer;
  std::size_t epoch = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian binary dump; doubles are stored as their IEEE bit patterns so
/// a reload is bit-exact. Written to a temporary name and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dcc
