#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace wi {

/// Adam with decoupled weight decay.
struct OptimizerParams {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  explicit OptimizerState(std::size_t n = 0) : first_moment(n, 0.0), second_moment(n, 0.0) {}
  bool operator==(const OptimizerState&) const = default;
};

/// One bias-corrected update. The decay term lr * wd * param is subtracted
/// before, and independently of, the moment-based step.
void optimizer_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                    const OptimizerParams& p);

}  // namespace wi
