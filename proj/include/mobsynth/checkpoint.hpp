#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mobsynth/nn.hpp"

namespace mobsynth::nn {

struct TrainingMetadata {
  int epochs_run = 0;
  double final_loss = 0.0;
  std::vector<double> epoch_losses;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  int batch_size = 0;
  /// Body length T of the training trajectories (sequence length minus the
  /// two label tokens).
  int trajectory_length = 0;
};

struct ModelCheckpoint {
  ModelConfig config;
  Parameters<float> params;
  TrainingMetadata meta;
};

/// Container layout:
///   magic "MSYNCKPT" | u32 version | u64 header length | header JSON |
///   parameter data as little-endian IEEE-754 float32, blocks in header order.
/// The header carries the model config, training metadata and every block's
/// name and shape.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const ModelCheckpoint& checkpoint);
ModelCheckpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mobsynth::nn
