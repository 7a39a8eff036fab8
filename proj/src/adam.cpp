#include "mobsynth/adam.hpp"

#include <cmath>

#include "mobsynth/errors.hpp"

namespace mobsynth::nn {

template <typename Scalar>
Adam<Scalar>::Adam(AdamConfig config, const Parameters<Scalar>& shape_like)
    : config_(config), m_(shape_like), v_(shape_like) {
  m_.set_zero();
  v_.set_zero();
}

template <typename Scalar>
void Adam<Scalar>::step(Parameters<Scalar>& params, const Parameters<Scalar>& gradients) {
  if (!gradients.all_finite()) throw TrainingError("non-finite gradient; optimizer step aborted");

  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const Scalar step_size = static_cast<Scalar>(config_.learning_rate / correction1);
  const Scalar sqrt_c2 = static_cast<Scalar>(std::sqrt(correction2));
  const Scalar eps = static_cast<Scalar>(config_.epsilon);

  auto p_blocks = params.blocks();
  auto g_blocks = gradients.blocks();
  auto m_blocks = m_.blocks();
  auto v_blocks = v_.blocks();
  for (std::size_t i = 0; i < p_blocks.size(); ++i) {
    auto& p = *p_blocks[i].value;
    const auto& g = *g_blocks[i].value;
    auto& m = *m_blocks[i].value;
    auto& v = *v_blocks[i].value;
    m = static_cast<Scalar>(b1) * m + static_cast<Scalar>(1.0 - b1) * g;
    v = static_cast<Scalar>(b2) * v + static_cast<Scalar>(1.0 - b2) * g.cwiseAbs2();
    p.array() -= step_size * m.array() / (v.array().sqrt() / sqrt_c2 + eps);
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace mobsynth::nn
