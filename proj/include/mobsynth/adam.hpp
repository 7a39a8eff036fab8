#pragma once

#include <cstdint>

#include "mobsynth/nn.hpp"

namespace mobsynth::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moments. Moment tensors mirror the parameter
/// blocks.
template <typename Scalar>
class Adam {
 public:
  Adam(AdamConfig config, const Parameters<Scalar>& shape_like);

  /// Applies one update. Throws TrainingError, leaving params and state
  /// untouched, when any gradient is non-finite.
  void step(Parameters<Scalar>& params, const Parameters<Scalar>& gradients);

  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  Parameters<Scalar> m_;
  Parameters<Scalar> v_;
  std::int64_t steps_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace mobsynth::nn
