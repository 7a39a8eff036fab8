#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mobsynth/checkpoint.hpp"
#include "mobsynth/nn.hpp"
#include "mobsynth/trajectory.hpp"

namespace mobsynth {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 1024;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  /// Invoke on_checkpoint every this many epochs (0 = never).
  int checkpoint_every = 0;

  std::function<void(int epoch, double mean_loss)> on_epoch;
  std::function<void(int epoch, const nn::ModelCheckpoint&)> on_checkpoint;

  void validate() const;
};

/// Every (window, next-token) pair of every sequence: for each position
/// p >= 1 the window is the up-to-max_length tokens preceding p. Spans point
/// into `sequences`, which must outlive the result.
std::vector<nn::Example> make_examples(const std::vector<PrefixedSequence>& sequences, int max_length);

/// Untrained checkpoint with parameters drawn from model_config.seed.
nn::ModelCheckpoint initialize_checkpoint(const nn::ModelConfig& model_config, int trajectory_length);

/// Mini-batch Adam over all examples, reshuffled every epoch from
/// train_config.seed. Throws TrainingError on a non-finite loss.
nn::ModelCheckpoint train(const std::vector<PrefixedSequence>& sequences, const nn::ModelConfig& model_config,
                          const TrainConfig& train_config);

/// Mean eval-mode cross-entropy over every example of the sequences.
double evaluate_loss(const nn::ModelCheckpoint& checkpoint, const std::vector<PrefixedSequence>& sequences);

/// Temperature 0 selects greedy argmax decoding.
inline constexpr double kGreedy = 0.0;

/// Draws one token from softmax(logits / temperature), or the argmax when
/// temperature is kGreedy.
Token sample_token(const nn::VectorX<float>& logits, double temperature, Rng& rng);

/// Autoregressive completion of [home, work] into `length` tokens (the
/// checkpoint's trajectory length when 0). The context is truncated to the
/// trailing max_length tokens before each step.
std::vector<Token> generate_trajectory(const nn::ModelCheckpoint& checkpoint, Token home, Token work,
                                       double temperature, Rng& rng, int length = 0);

struct GenerationRequest {
  std::vector<HomeWorkLabel> labels;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  /// Trajectories generated together in one batched forward pass.
  int batch_size = 256;
};

/// One trajectory per requested label, in order. Trajectory i samples from
/// its own RNG stream derived from (seed, i), and synthetic ids are
/// "syn000000", "syn000001", ...
Sample generate_sample(const nn::ModelCheckpoint& checkpoint, const GenerationRequest& request, int length = 0);

}  // namespace mobsynth
