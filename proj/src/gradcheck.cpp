#include "mobsynth/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace mobsynth::nn {

double GradCheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, b.max_relative_error);
  return worst;
}

GradCheckReport gradient_check(const ModelConfig& config, const GradCheckOptions& options) {
  config.validate();
  Rng rng = make_rng(options.seed);
  auto params = Parameters<double>::initialize(config, rng, options.init_scale);
  // Non-zero biases so their gradients are exercised away from the init point.
  for (auto& b : params.lstm_biases)
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) += (2.0 * uniform01(rng) - 1.0) * options.init_scale;
  for (Eigen::Index i = 0; i < params.output_bias.size(); ++i)
    params.output_bias(i) = (2.0 * uniform01(rng) - 1.0) * options.init_scale;

  std::vector<std::vector<Token>> windows;
  std::vector<Example> batch;
  for (int b = 0; b < options.batch_size; ++b) {
    const int span = options.max_window - options.min_window + 1;
    const int len = options.min_window + static_cast<int>(uniform_index(rng, span));
    std::vector<Token> w(len);
    for (auto& t : w) t = static_cast<Token>(uniform_index(rng, config.vocab_size));
    windows.push_back(std::move(w));
  }
  for (const auto& w : windows)
    batch.push_back({w, static_cast<Token>(uniform_index(rng, config.vocab_size))});

  const std::uint64_t mask_seed = mix_seed(options.seed, 99);
  Network<double> net(config);
  auto eval_loss = [&](const Parameters<double>& p) {
    Rng masks = make_rng(mask_seed);
    return net.loss(p, batch, options.mode, &masks);
  };

  Parameters<double> grads = Parameters<double>::zeros(config);
  GradCheckReport report;
  {
    Rng masks = make_rng(mask_seed);
    report.loss = net.loss_and_gradients(params, batch, grads, options.mode, &masks);
  }

  auto p_blocks = params.blocks();
  auto g_blocks = grads.blocks();
  for (std::size_t bi = 0; bi < p_blocks.size(); ++bi) {
    BlockError err{p_blocks[bi].name, 0.0, 0.0, 0};
    auto& p = *p_blocks[bi].value;
    const auto& g = *g_blocks[bi].value;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double saved = p.data()[i];
      p.data()[i] = saved + options.epsilon;
      const double up = eval_loss(params);
      p.data()[i] = saved - options.epsilon;
      const double down = eval_loss(params);
      p.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double analytic = g.data()[i];
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), options.denominator_floor});
      err.max_relative_error = std::max(err.max_relative_error, std::abs(analytic - numeric) / denom);
      err.max_abs_gradient = std::max(err.max_abs_gradient, std::abs(analytic));
      ++err.entries;
    }
    report.blocks.push_back(err);
  }
  return report;
}

}  // namespace mobsynth::nn
