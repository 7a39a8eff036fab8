#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mobsynth/rng.hpp"
#include "mobsynth/trajectory.hpp"

namespace mobsynth::nn {

struct ModelConfig {
  int vocab_size = 0;
  int embedding_size = 128;
  int layer_size = 128;
  int n_layers = 6;
  double dropout_rate = 0.1;
  int max_length = 60;
  std::uint64_t seed = 0;

  void validate() const;
  /// Width of the attention input: embedding plus every LSTM layer output.
  int feature_size() const { return embedding_size + n_layers * layer_size; }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  bool operator==(const ModelConfig&) const = default;
};

enum class Mode { kTrain, kEval };

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// All learned tensors. Vectors are stored as one-column matrices so every
/// block can be visited uniformly.
///
/// LSTM gate rows are ordered input, forget, cell, output; layer l takes
/// [input; h_prev] where input is the embedding for l = 0 and the previous
/// layer's output otherwise.
template <typename Scalar>
struct Parameters {
  using Matrix = MatrixX<Scalar>;

  Matrix embedding;                  // E x V, one column per token
  std::vector<Matrix> lstm_weights;  // 4H x (in + H)
  std::vector<Matrix> lstm_biases;   // 4H x 1
  Matrix attention;                  // C x 1, per-timestep score projection
  Matrix output_weights;             // V x C
  Matrix output_bias;                // V x 1

  struct Block {
    std::string name;
    Matrix* value;
  };
  struct ConstBlock {
    std::string name;
    const Matrix* value;
  };

  /// Zero tensors with the shapes implied by the config.
  static Parameters zeros(const ModelConfig& config);
  /// uniform(-scale, scale) weights and embeddings, zero biases, forget-gate
  /// bias +1.
  static Parameters initialize(const ModelConfig& config, Rng& rng, double scale = 0.05);

  std::vector<Block> blocks();
  std::vector<ConstBlock> blocks() const;

  void set_zero();
  bool all_finite() const;
  std::size_t parameter_count() const;

  template <typename Other>
  Parameters<Other> cast() const {
    Parameters<Other> out;
    out.embedding = embedding.template cast<Other>();
    for (const auto& w : lstm_weights) out.lstm_weights.push_back(w.template cast<Other>());
    for (const auto& b : lstm_biases) out.lstm_biases.push_back(b.template cast<Other>());
    out.attention = attention.template cast<Other>();
    out.output_weights = output_weights.template cast<Other>();
    out.output_bias = output_bias.template cast<Other>();
    return out;
  }
};

/// One training pair: the up-to-max_length tokens preceding a position and
/// the token at that position.
struct Example {
  std::span<const Token> context;
  Token target = kNullToken;
};

/// Embedding -> stacked LSTM -> attention-weighted average over the
/// concatenated [embedding, layer 1 .. layer L] states -> softmax output.
///
/// A batch is evaluated column-wise with columns sorted by window length, so
/// at timestep t only the leading k_t columns are still active and every
/// matrix product runs over a contiguous block. Holds scratch buffers, so one
/// instance must not be shared between threads.
template <typename Scalar>
class Network {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  explicit Network(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  /// Next-token logits for every window (columns in input order). Windows
  /// longer than max_length keep their trailing max_length tokens. `rng` is
  /// required in train mode (dropout masks) and ignored in eval mode.
  Matrix logits(const Parameters<Scalar>& params, std::span<const std::span<const Token>> windows,
                Mode mode = Mode::kEval, Rng* rng = nullptr);

  /// Next-token distribution for a single window.
  Vector forward(const Parameters<Scalar>& params, std::span<const Token> window,
                 Mode mode = Mode::kEval, Rng* rng = nullptr);

  /// Mean cross-entropy of the batch; gradients (overwritten) by
  /// backpropagation through time.
  Scalar loss_and_gradients(const Parameters<Scalar>& params, std::span<const Example> batch,
                            Parameters<Scalar>& gradients, Mode mode = Mode::kTrain,
                            Rng* rng = nullptr);

  /// Mean cross-entropy without gradients.
  Scalar loss(const Parameters<Scalar>& params, std::span<const Example> batch,
              Mode mode = Mode::kEval, Rng* rng = nullptr);

 private:
  // Per-layer state of the last batch. Column offset_[t] + j holds sorted
  // window j at timestep t.
  struct LayerState {
    Matrix gates;  // activated i, f, g, o
    Matrix h_prev;
    Matrix cell;
    Matrix cell_tanh;
    Matrix hidden;
    Matrix out;  // hidden after dropout
    Matrix mask;
  };
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  void run_forward(const Parameters<Scalar>& params, std::span<const std::span<const Token>> windows,
                   Mode mode, Rng* rng);
  void check_tokens(std::span<const Token> window) const;

  ModelConfig config_;
  // Forward state of the last batch, in sorted column order.
  std::vector<std::size_t> order_;  // sorted position -> input index
  std::vector<std::span<const Token>> sorted_windows_;
  std::vector<int> active_;         // active column count per timestep
  std::vector<int> offset_;         // first column of each timestep, T + 1 entries
  Matrix embed_;                    // E x columns, after dropout
  Matrix embed_mask_;
  std::vector<LayerState> layers_;
  Matrix scores_;                   // T x n attention scores, softmaxed in place
  Matrix context_;                  // C x n
  Matrix logits_;                   // V x n
  Matrix d_embed_;
  std::vector<Matrix> d_out_;
};

extern template struct Parameters<float>;
extern template struct Parameters<double>;
extern template class Network<float>;
extern template class Network<double>;

/// Softmax of logits / temperature with max subtraction.
template <typename Scalar>
VectorX<Scalar> softmax(const VectorX<Scalar>& logits, double temperature = 1.0);

}  // namespace mobsynth::nn
