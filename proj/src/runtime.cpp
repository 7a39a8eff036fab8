#include "mobsynth/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mobsynth/adam.hpp"
#include "mobsynth/errors.hpp"

namespace mobsynth {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
}

std::vector<nn::Example> make_examples(const std::vector<PrefixedSequence>& sequences, int max_length) {
  std::vector<nn::Example> out;
  for (const auto& seq : sequences) {
    const std::span<const Token> all(seq);
    for (std::size_t p = 1; p < seq.size(); ++p) {
      const std::size_t start = p > static_cast<std::size_t>(max_length) ? p - max_length : 0;
      out.push_back({all.subspan(start, p - start), seq[p]});
    }
  }
  return out;
}

nn::ModelCheckpoint initialize_checkpoint(const nn::ModelConfig& model_config, int trajectory_length) {
  Rng rng = make_rng(model_config.seed);
  nn::ModelCheckpoint ck;
  ck.config = model_config;
  ck.params = nn::Parameters<float>::initialize(model_config, rng);
  ck.meta.seed = model_config.seed;
  ck.meta.trajectory_length = trajectory_length;
  return ck;
}

nn::ModelCheckpoint train(const std::vector<PrefixedSequence>& sequences, const nn::ModelConfig& model_config,
                          const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  if (sequences.empty()) throw ConfigError("training requires at least one sequence");
  const std::size_t len = sequences.front().size();
  if (len < 3) throw ConfigError("training sequences need the two label tokens and at least one step");
  for (const auto& s : sequences) {
    if (s.size() != len) throw ConfigError("training sequences must have uniform length");
    for (Token t : s)
      if (t >= model_config.vocab_size) throw DomainError("training token outside the model vocabulary");
  }

  nn::ModelCheckpoint ck = initialize_checkpoint(model_config, static_cast<int>(len) - 2);
  ck.meta.seed = train_config.seed;
  ck.meta.learning_rate = train_config.learning_rate;
  ck.meta.batch_size = train_config.batch_size;

  const auto examples = make_examples(sequences, model_config.max_length);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  nn::Network<float> net(model_config);
  nn::Adam<float> adam({.learning_rate = train_config.learning_rate}, ck.params);
  nn::Parameters<float> grads = nn::Parameters<float>::zeros(model_config);
  Rng shuffle_rng = make_rng(train_config.seed, 1);
  std::vector<nn::Example> batch;
  batch.reserve(train_config.batch_size);

  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    Rng dropout_rng = make_rng(train_config.seed, 1000 + static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += train_config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + train_config.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(examples[order[i]]);
      const float loss = net.loss_and_gradients(ck.params, batch, grads, nn::Mode::kTrain, &dropout_rng);
      if (!std::isfinite(loss)) {
        char msg[128];
        std::snprintf(msg, sizeof msg, "non-finite loss in epoch %d at example %zu", epoch, begin);
        throw TrainingError(msg);
      }
      adam.step(ck.params, grads);
      loss_sum += static_cast<double>(loss) * static_cast<double>(end - begin);
    }
    const double mean = loss_sum / static_cast<double>(order.size());
    ck.meta.epoch_losses.push_back(mean);
    ck.meta.epochs_run = epoch;
    ck.meta.final_loss = mean;
    if (train_config.on_epoch) train_config.on_epoch(epoch, mean);
    if (train_config.checkpoint_every > 0 && epoch % train_config.checkpoint_every == 0 &&
        train_config.on_checkpoint)
      train_config.on_checkpoint(epoch, ck);
  }
  return ck;
}

double evaluate_loss(const nn::ModelCheckpoint& checkpoint, const std::vector<PrefixedSequence>& sequences) {
  const auto examples = make_examples(sequences, checkpoint.config.max_length);
  if (examples.empty()) throw DomainError("no examples to evaluate");
  nn::Network<float> net(checkpoint.config);
  double total = 0.0;
  constexpr std::size_t kChunk = 512;
  for (std::size_t begin = 0; begin < examples.size(); begin += kChunk) {
    const std::size_t end = std::min(examples.size(), begin + kChunk);
    const std::span<const nn::Example> chunk(examples.data() + begin, end - begin);
    total += static_cast<double>(net.loss(checkpoint.params, chunk)) * static_cast<double>(end - begin);
  }
  return total / static_cast<double>(examples.size());
}

Token sample_token(const nn::VectorX<float>& logits, double temperature, Rng& rng) {
  if (temperature < 0) throw ConfigError("temperature must be non-negative");
  if (temperature == kGreedy) {
    Eigen::Index best = 0;
    logits.maxCoeff(&best);  // first maximum, i.e. smallest token on ties
    return static_cast<Token>(best);
  }
  const Eigen::VectorXd p = nn::softmax<double>(logits.cast<double>(), temperature);
  double u = uniform01(rng);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    u -= p(i);
    if (u < 0) return static_cast<Token>(i);
  }
  // Rounding left a sliver of mass: fall back to the last non-zero entry.
  for (Eigen::Index i = p.size() - 1; i > 0; --i)
    if (p(i) > 0) return static_cast<Token>(i);
  return 0;
}

namespace {

void check_label(const nn::ModelCheckpoint& ck, Token home, Token work) {
  const auto V = ck.config.vocab_size;
  if (home == kNullToken || work == kNullToken) throw DomainError("generation labels must not be null");
  if (home >= V || work >= V) throw DomainError("generation label outside the model vocabulary");
}

int resolve_length(const nn::ModelCheckpoint& ck, int length) {
  const int T = length > 0 ? length : ck.meta.trajectory_length;
  if (T < 1) throw ConfigError("trajectory length unknown: checkpoint has none and none was given");
  return T;
}

}  // namespace

std::vector<Token> generate_trajectory(const nn::ModelCheckpoint& checkpoint, Token home, Token work,
                                       double temperature, Rng& rng, int length) {
  check_label(checkpoint, home, work);
  const int T = resolve_length(checkpoint, length);
  nn::Network<float> net(checkpoint.config);
  std::vector<Token> context{home, work};
  for (int step = 0; step < T; ++step) {
    const std::span<const Token> window[] = {context};
    const auto logits = net.logits(checkpoint.params, window);
    context.push_back(sample_token(logits.col(0), temperature, rng));
  }
  return {context.begin() + 2, context.end()};
}

Sample generate_sample(const nn::ModelCheckpoint& checkpoint, const GenerationRequest& request, int length) {
  if (request.temperature < 0) throw ConfigError("temperature must be non-negative");
  if (request.batch_size < 1) throw ConfigError("generation batch_size must be positive");
  for (const auto& l : request.labels) check_label(checkpoint, l.home, l.work);
  const int T = resolve_length(checkpoint, length);
  const std::size_t n = request.labels.size();

  Sample out(n);
  nn::Network<float> net(checkpoint.config);
  std::vector<std::vector<Token>> contexts;
  std::vector<Rng> rngs;
  std::vector<std::span<const Token>> windows;
  for (std::size_t begin = 0; begin < n; begin += request.batch_size) {
    const std::size_t end = std::min(n, begin + static_cast<std::size_t>(request.batch_size));
    contexts.clear();
    rngs.clear();
    for (std::size_t i = begin; i < end; ++i) {
      contexts.push_back({request.labels[i].home, request.labels[i].work});
      contexts.back().reserve(T + 2);
      rngs.push_back(make_rng(request.seed, i));
    }
    for (int step = 0; step < T; ++step) {
      windows.clear();
      for (const auto& c : contexts) windows.emplace_back(c);
      const auto logits = net.logits(checkpoint.params, windows);
      for (std::size_t j = 0; j < contexts.size(); ++j)
        contexts[j].push_back(sample_token(logits.col(static_cast<Eigen::Index>(j)), request.temperature, rngs[j]));
    }
    for (std::size_t i = begin; i < end; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "syn%06zu", i);
      out[i].trajectory.device_id = id;
      out[i].trajectory.tokens.assign(contexts[i - begin].begin() + 2, contexts[i - begin].end());
      out[i].label = request.labels[i];
    }
  }
  return out;
}

}  // namespace mobsynth
