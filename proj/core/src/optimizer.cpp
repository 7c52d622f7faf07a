#include "wi/optimizer.hpp"

#include <cmath>
#include <string>

#include "wi/error.hpp"

namespace wi {

void OptimizerParams::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
}

void optimizer_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                    const OptimizerParams& p) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw ConfigError("optimizer_step: shape mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw NumericError("non-finite gradient at step " + std::to_string(state.step + 1) + ", index " +
                         std::to_string(i));

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(p.beta1, t);
  const double c2 = 1.0 - std::pow(p.beta2, t);
  const double decay = p.learning_rate * p.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= decay * params[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = p.beta1 * m + (1.0 - p.beta1) * grads[i];
    v = p.beta2 * v + (1.0 - p.beta2) * grads[i] * grads[i];
    params[i] -= p.learning_rate * (m / c1) / (std::sqrt(v / c2) + p.epsilon);
  }
}

}  // namespace wi
