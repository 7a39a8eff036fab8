#include "mobsynth/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mobsynth/errors.hpp"

namespace mobsynth::nn {

void ModelConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
  if (embedding_size < 1 || layer_size < 1 || n_layers < 1)
    throw ConfigError("embedding_size, layer_size and n_layers must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
  if (max_length < 1) throw ConfigError("max_length must be at least 1");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"vocab_size", vocab_size},       {"embedding_size", embedding_size},
          {"layer_size", layer_size},       {"n_layers", n_layers},
          {"dropout_rate", dropout_rate},   {"max_length", max_length},
          {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embedding_size = j.value("embedding_size", c.embedding_size);
  c.layer_size = j.value("layer_size", c.layer_size);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.max_length = j.value("max_length", c.max_length);
  c.seed = j.value("seed", c.seed);
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

template <typename Scalar>
Parameters<Scalar> Parameters<Scalar>::zeros(const ModelConfig& config) {
  config.validate();
  const int E = config.embedding_size;
  const int H = config.layer_size;
  const int V = config.vocab_size;
  Parameters p;
  p.embedding = Matrix::Zero(E, V);
  for (int l = 0; l < config.n_layers; ++l) {
    const int in = l == 0 ? E : H;
    p.lstm_weights.push_back(Matrix::Zero(4 * H, in + H));
    p.lstm_biases.push_back(Matrix::Zero(4 * H, 1));
  }
  p.attention = Matrix::Zero(config.feature_size(), 1);
  p.output_weights = Matrix::Zero(V, config.feature_size());
  p.output_bias = Matrix::Zero(V, 1);
  return p;
}

template <typename Scalar>
Parameters<Scalar> Parameters<Scalar>::initialize(const ModelConfig& config, Rng& rng, double scale) {
  Parameters p = zeros(config);
  auto fill = [&](Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * scale);
  };
  fill(p.embedding);
  for (auto& w : p.lstm_weights) fill(w);
  const int H = config.layer_size;
  for (auto& b : p.lstm_biases) b.block(H, 0, H, 1).setConstant(Scalar(1));
  fill(p.attention);
  fill(p.output_weights);
  return p;
}

template <typename Scalar>
std::vector<typename Parameters<Scalar>::Block> Parameters<Scalar>::blocks() {
  std::vector<Block> out;
  out.push_back({"embedding", &embedding});
  for (std::size_t l = 0; l < lstm_weights.size(); ++l) {
    out.push_back({"lstm" + std::to_string(l) + ".weights", &lstm_weights[l]});
    out.push_back({"lstm" + std::to_string(l) + ".bias", &lstm_biases[l]});
  }
  out.push_back({"attention", &attention});
  out.push_back({"output.weights", &output_weights});
  out.push_back({"output.bias", &output_bias});
  return out;
}

template <typename Scalar>
std::vector<typename Parameters<Scalar>::ConstBlock> Parameters<Scalar>::blocks() const {
  std::vector<ConstBlock> out;
  for (auto& b : const_cast<Parameters*>(this)->blocks()) out.push_back({b.name, b.value});
  return out;
}

template <typename Scalar>
void Parameters<Scalar>::set_zero() {
  for (auto& b : blocks()) b.value->setZero();
}

template <typename Scalar>
bool Parameters<Scalar>::all_finite() const {
  for (const auto& b : blocks())
    if (!b.value->allFinite()) return false;
  return true;
}

template <typename Scalar>
std::size_t Parameters<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += static_cast<std::size_t>(b.value->size());
  return n;
}

template <typename Scalar>
VectorX<Scalar> softmax(const VectorX<Scalar>& logits, double temperature) {
  VectorX<Scalar> scaled = logits / static_cast<Scalar>(temperature);
  const Scalar m = scaled.maxCoeff();
  VectorX<Scalar> e = (scaled.array() - m).exp().matrix();
  return e / e.sum();
}

// ---------------------------------------------------------------------------
// Network

template <typename Scalar>
Network<Scalar>::Network(ModelConfig config) : config_(config) {
  config_.validate();
}

template <typename Scalar>
void Network<Scalar>::check_tokens(std::span<const Token> window) const {
  if (window.empty()) throw DomainError("empty token window");
  for (Token t : window)
    if (t >= config_.vocab_size)
      throw DomainError("token " + std::to_string(t) + " outside vocabulary of size " +
                        std::to_string(config_.vocab_size));
}

namespace {

// One seed from `rng` expanded with SplitMix64, two 32-bit keep/drop
// decisions per output.
template <typename Derived>
void fill_dropout_mask(Eigen::MatrixBase<Derived>& mask, double rate, Rng& rng) {
  using Scalar = typename Derived::Scalar;
  const double keep = 1.0 - rate;
  const Scalar scale = static_cast<Scalar>(1.0 / keep);
  const auto threshold = static_cast<std::uint64_t>(keep * 4294967296.0);
  std::uint64_t state = rng();
  Scalar* data = mask.derived().data();
  const Eigen::Index n = mask.size();
  for (Eigen::Index i = 0; i < n; i += 2) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    data[i] = (z & 0xffffffffULL) < threshold ? scale : Scalar(0);
    if (i + 1 < n) data[i + 1] = (z >> 32) < threshold ? scale : Scalar(0);
  }
}

}  // namespace

template <typename Scalar>
void Network<Scalar>::run_forward(const Parameters<Scalar>& params,
                                  std::span<const std::span<const Token>> windows, Mode mode,
                                  Rng* rng) {
  const int E = config_.embedding_size;
  const int H = config_.layer_size;
  const int L = config_.n_layers;
  const int n = static_cast<int>(windows.size());
  if (n == 0) throw DomainError("empty batch");

  const bool dropout = mode == Mode::kTrain && config_.dropout_rate > 0.0;
  if (dropout && rng == nullptr) throw DomainError("train mode with dropout requires an rng");

  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    return std::min<std::size_t>(windows[a].size(), config_.max_length) >
           std::min<std::size_t>(windows[b].size(), config_.max_length);
  });
  sorted_windows_.resize(n);
  for (int j = 0; j < n; ++j) {
    auto w = windows[order_[j]];
    check_tokens(w);
    if (w.size() > static_cast<std::size_t>(config_.max_length)) w = w.last(config_.max_length);
    sorted_windows_[j] = w;
  }

  const int T = static_cast<int>(sorted_windows_[0].size());
  active_.assign(T, 0);
  for (int j = 0; j < n; ++j)
    for (int t = 0; t < static_cast<int>(sorted_windows_[j].size()); ++t) ++active_[t];
  offset_.assign(T + 1, 0);
  for (int t = 0; t < T; ++t) offset_[t + 1] = offset_[t] + active_[t];
  const int C = offset_[T];

  embed_.resize(E, C);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < active_[t]; ++j) embed_.col(offset_[t] + j) = params.embedding.col(sorted_windows_[j][t]);
  if (dropout) {
    embed_mask_.resize(E, C);
    fill_dropout_mask(embed_mask_, config_.dropout_rate, *rng);
    embed_.array() *= embed_mask_.array();
  }

  // Layer by layer: the input projection covers every timestep in one
  // product, only the recurrent term runs per step.
  layers_.resize(L);
  const Matrix* input = &embed_;
  for (int l = 0; l < L; ++l) {
    LayerState& ls = layers_[l];
    const int in = l == 0 ? E : H;
    const auto& W = params.lstm_weights[l];
    ls.gates = params.lstm_biases[l].col(0).replicate(1, C);
    ls.gates.noalias() += W.leftCols(in) * *input;
    ls.h_prev.resize(H, C);
    ls.cell.resize(H, C);
    ls.cell_tanh.resize(H, C);
    ls.hidden.resize(H, C);
    for (int t = 0; t < T; ++t) {
      const int k = active_[t];
      const int o = offset_[t];
      auto g = ls.gates.middleCols(o, k);
      if (t > 0) {
        ls.h_prev.middleCols(o, k) = ls.hidden.middleCols(offset_[t - 1], k);
        g.noalias() += W.rightCols(H) * ls.h_prev.middleCols(o, k);
      } else {
        ls.h_prev.middleCols(o, k).setZero();
      }
      g.topRows(2 * H) = g.topRows(2 * H).array().logistic();
      g.middleRows(2 * H, H) = g.middleRows(2 * H, H).array().tanh();
      g.bottomRows(H) = g.bottomRows(H).array().logistic();

      auto c = ls.cell.middleCols(o, k);
      c = g.topRows(H).cwiseProduct(g.middleRows(2 * H, H));
      if (t > 0) c += g.middleRows(H, H).cwiseProduct(ls.cell.middleCols(offset_[t - 1], k));
      ls.cell_tanh.middleCols(o, k) = c.array().tanh();
      ls.hidden.middleCols(o, k) = g.bottomRows(H).cwiseProduct(ls.cell_tanh.middleCols(o, k));
    }
    if (dropout) {
      ls.mask.resize(H, C);
      fill_dropout_mask(ls.mask, config_.dropout_rate, *rng);
      ls.out = ls.hidden.cwiseProduct(ls.mask);
    } else {
      ls.out = ls.hidden;
    }
    input = &ls.out;
  }

  // Attention: score = w . f per column, softmax over each window's timesteps.
  const auto& w = params.attention;
  RowVector s(C);
  s.noalias() = w.topRows(E).transpose() * embed_;
  for (int l = 0; l < L; ++l) s.noalias() += w.middleRows(E + l * H, H).transpose() * layers_[l].out;
  scores_.setZero(T, n);
  for (int t = 0; t < T; ++t) scores_.row(t).head(active_[t]) = s.segment(offset_[t], active_[t]);
  for (int j = 0; j < n; ++j) {
    const int len = static_cast<int>(sorted_windows_[j].size());
    auto col = scores_.col(j).head(len);
    const Scalar m = col.maxCoeff();
    col = (col.array() - m).exp();
    col /= col.sum();
  }

  context_.setZero(config_.feature_size(), n);
  for (int t = 0; t < T; ++t) {
    const int k = active_[t];
    const int o = offset_[t];
    const auto alpha = scores_.row(t).head(k).transpose().asDiagonal();
    context_.topLeftCorner(E, k).noalias() += embed_.middleCols(o, k) * alpha;
    for (int l = 0; l < L; ++l)
      context_.block(E + l * H, 0, H, k).noalias() += layers_[l].out.middleCols(o, k) * alpha;
  }

  logits_.noalias() = params.output_weights * context_;
  logits_.colwise() += params.output_bias.col(0);
}
template <typename Scalar>
typename Network<Scalar>::Matrix Network<Scalar>::logits(
    const Parameters<Scalar>& params, std::span<const std::span<const Token>> windows, Mode mode,
    Rng* rng) {
  run_forward(params, windows, mode, rng);
  Matrix out(logits_.rows(), logits_.cols());
  for (std::size_t j = 0; j < order_.size(); ++j) out.col(order_[j]) = logits_.col(j);
  return out;
}

template <typename Scalar>
typename Network<Scalar>::Vector Network<Scalar>::forward(const Parameters<Scalar>& params,
                                                          std::span<const Token> window, Mode mode,
                                                          Rng* rng) {
  const std::span<const Token> one[] = {window};
  run_forward(params, one, mode, rng);
  return softmax<Scalar>(logits_.col(0));
}

template <typename Scalar>
Scalar Network<Scalar>::loss(const Parameters<Scalar>& params, std::span<const Example> batch,
                             Mode mode, Rng* rng) {
  std::vector<std::span<const Token>> windows;
  windows.reserve(batch.size());
  for (const auto& ex : batch) windows.push_back(ex.context);
  run_forward(params, windows, mode, rng);
  Scalar total = 0;
  for (std::size_t j = 0; j < order_.size(); ++j) {
    const Token target = batch[order_[j]].target;
    if (target >= config_.vocab_size) throw DomainError("target token outside vocabulary");
    const auto col = logits_.col(j);
    const Scalar m = col.maxCoeff();
    const Scalar lse = m + std::log((col.array() - m).exp().sum());
    total += lse - col(target);
  }
  return total / static_cast<Scalar>(batch.size());
}

template <typename Scalar>
Scalar Network<Scalar>::loss_and_gradients(const Parameters<Scalar>& params,
                                           std::span<const Example> batch,
                                           Parameters<Scalar>& grads, Mode mode, Rng* rng) {
  const int E = config_.embedding_size;
  const int H = config_.layer_size;
  const int L = config_.n_layers;

  std::vector<std::span<const Token>> windows;
  windows.reserve(batch.size());
  for (const auto& ex : batch) windows.push_back(ex.context);
  run_forward(params, windows, mode, rng);

  const int n = static_cast<int>(batch.size());
  const int T = static_cast<int>(active_.size());
  const int C = offset_[T];
  const bool dropout = mode == Mode::kTrain && config_.dropout_rate > 0.0;

  if (grads.lstm_weights.size() != static_cast<std::size_t>(L) ||
      grads.embedding.rows() != params.embedding.rows() ||
      grads.embedding.cols() != params.embedding.cols())
    grads = Parameters<Scalar>::zeros(config_);
  else
    grads.set_zero();

  // Output layer and loss.
  Matrix dlogits = logits_;
  Scalar total = 0;
  for (int j = 0; j < n; ++j) {
    const Token target = batch[order_[j]].target;
    if (target >= config_.vocab_size) throw DomainError("target token outside vocabulary");
    auto col = dlogits.col(j);
    const Scalar m = col.maxCoeff();
    col = (col.array() - m).exp();
    const Scalar sum = col.sum();
    col /= sum;
    total += -std::log(col(target));
    col(target) -= Scalar(1);
  }
  dlogits /= static_cast<Scalar>(n);

  grads.output_weights.noalias() = dlogits * context_.transpose();
  grads.output_bias = dlogits.rowwise().sum();
  const Matrix dcontext = params.output_weights.transpose() * dlogits;

  // Attention backward.
  const auto& w = params.attention;
  Matrix dalpha = Matrix::Zero(T, n);
  for (int t = 0; t < T; ++t) {
    const int k = active_[t];
    const int o = offset_[t];
    auto row = dalpha.row(t).head(k);
    row = dcontext.topLeftCorner(E, k).cwiseProduct(embed_.middleCols(o, k)).colwise().sum();
    for (int l = 0; l < L; ++l)
      row += dcontext.block(E + l * H, 0, H, k).cwiseProduct(layers_[l].out.middleCols(o, k)).colwise().sum();
  }
  RowVector ds(C);
  for (int j = 0; j < n; ++j) {
    const int len = static_cast<int>(sorted_windows_[j].size());
    const auto a = scores_.col(j).head(len);
    const auto da = dalpha.col(j).head(len);
    const Scalar dot = a.dot(da);
    for (int t = 0; t < len; ++t) ds(offset_[t] + j) = a(t) * (da(t) - dot);
  }

  d_embed_.resize(E, C);
  d_out_.resize(L);
  for (int l = 0; l < L; ++l) d_out_[l].resize(H, C);
  for (int t = 0; t < T; ++t) {
    const int k = active_[t];
    const int o = offset_[t];
    const auto alpha = scores_.row(t).head(k).transpose().asDiagonal();
    d_embed_.middleCols(o, k).noalias() = dcontext.topLeftCorner(E, k) * alpha;
    for (int l = 0; l < L; ++l) d_out_[l].middleCols(o, k).noalias() = dcontext.block(E + l * H, 0, H, k) * alpha;
  }
  d_embed_.noalias() += w.topRows(E) * ds;
  grads.attention.topRows(E).noalias() += embed_ * ds.transpose();
  for (int l = 0; l < L; ++l) {
    d_out_[l].noalias() += w.middleRows(E + l * H, H) * ds;
    grads.attention.middleRows(E + l * H, H).noalias() += layers_[l].out * ds.transpose();
  }

  // LSTM backward, top layer first so each layer's output gradient is
  // complete before the layer is processed.
  Matrix dpre(4 * H, C), dh, dc, dh_rec, dc_rec;
  for (int l = L - 1; l >= 0; --l) {
    const LayerState& ls = layers_[l];
    const int in = l == 0 ? E : H;
    const auto& W = params.lstm_weights[l];
    if (dropout) d_out_[l].array() *= ls.mask.array();
    int k_rec = 0;
    for (int t = T - 1; t >= 0; --t) {
      const int k = active_[t];
      const int o = offset_[t];
      const auto g = ls.gates.middleCols(o, k);
      const auto i_g = g.topRows(H);
      const auto f_g = g.middleRows(H, H);
      const auto g_g = g.middleRows(2 * H, H);
      const auto o_g = g.bottomRows(H);
      const auto c_tanh = ls.cell_tanh.middleCols(o, k);

      dh = d_out_[l].middleCols(o, k);
      if (k_rec > 0) dh.leftCols(k_rec) += dh_rec.leftCols(k_rec);
      dc = (dh.array() * o_g.array() * (Scalar(1) - c_tanh.array().square())).matrix();
      if (k_rec > 0) dc.leftCols(k_rec) += dc_rec.leftCols(k_rec);

      auto dp = dpre.middleCols(o, k);
      dp.topRows(H) = dc.array() * g_g.array() * i_g.array() * (Scalar(1) - i_g.array());
      if (t > 0)
        dp.middleRows(H, H) = dc.array() * ls.cell.middleCols(offset_[t - 1], k).array() * f_g.array() *
                              (Scalar(1) - f_g.array());
      else
        dp.middleRows(H, H).setZero();
      dp.middleRows(2 * H, H) = dc.array() * i_g.array() * (Scalar(1) - g_g.array().square());
      dp.bottomRows(H) = dh.array() * c_tanh.array() * o_g.array() * (Scalar(1) - o_g.array());

      if (t > 0) {
        dh_rec.noalias() = W.rightCols(H).transpose() * dp;
        dc_rec = dc.cwiseProduct(f_g);
        k_rec = k;
      }
    }
    const Matrix& input = l == 0 ? embed_ : layers_[l - 1].out;
    auto& gW = grads.lstm_weights[l];
    gW.leftCols(in).noalias() += dpre * input.transpose();
    gW.rightCols(H).noalias() += dpre * ls.h_prev.transpose();
    grads.lstm_biases[l].col(0) += dpre.rowwise().sum();
    if (l > 0)
      d_out_[l - 1].noalias() += W.leftCols(in).transpose() * dpre;
    else
      d_embed_.noalias() += W.leftCols(in).transpose() * dpre;
  }

  if (dropout) d_embed_.array() *= embed_mask_.array();
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < active_[t]; ++j)
      grads.embedding.col(sorted_windows_[j][t]) += d_embed_.col(offset_[t] + j);

  return total / static_cast<Scalar>(n);
}

template struct Parameters<float>;
template struct Parameters<double>;
template class Network<float>;
template class Network<double>;
template VectorX<float> softmax<float>(const VectorX<float>&, double);
template VectorX<double> softmax<double>(const VectorX<double>&, double);

}  // namespace mobsynth::nn
