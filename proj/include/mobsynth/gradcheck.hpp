#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mobsynth/nn.hpp"

namespace mobsynth::nn {

struct GradCheckOptions {
  std::uint64_t seed = 7;
  int batch_size = 4;
  int min_window = 3;
  int max_window = 6;
  double epsilon = 1e-4;
  /// Magnitude of the random parameter initialization. Larger than the
  /// training default so that gradients are well above finite-difference noise.
  double init_scale = 0.5;
  /// Train mode replays identical dropout masks for every evaluation.
  Mode mode = Mode::kEval;
  /// Denominator floor of the relative error.
  double denominator_floor = 1e-6;
};

struct BlockError {
  std::string name;
  double max_relative_error = 0.0;
  double max_abs_gradient = 0.0;
  std::size_t entries = 0;
};

struct GradCheckReport {
  double loss = 0.0;
  std::vector<BlockError> blocks;
  double max_relative_error() const;
};

/// Compares analytic gradients with central differences
/// (L(p + eps) - L(p - eps)) / (2 eps) for every parameter entry of a
/// randomized model in double precision. Relative error per entry is
/// |a - n| / max(|a|, |n|, floor).
GradCheckReport gradient_check(const ModelConfig& config, const GradCheckOptions& options = {});

}  // namespace mobsynth::nn
