#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gblend/tensor.hpp"

namespace gblend {

enum class OptimizerKind { sgd_momentum, adagrad, adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::sgd_momentum;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

// A parameter tensor paired with its gradient. `name` identifies the tensor in
// error messages.
struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
  const Tensor* grad = nullptr;
};

/// Optimizer hyperparameters plus per-parameter accumulators. Accumulators are
/// created on the first step and must keep mirroring the parameter shapes.
///
/// sgd_momentum: v <- mu v + g,            theta <- theta - lr v
/// adagrad:      s <- s + g^2,             theta <- theta - lr g / (sqrt(s) + eps)
/// adam:         m <- b1 m + (1 - b1) g,   v <- b2 v + (1 - b2) g^2,
///               theta <- theta - lr mhat / (sqrt(vhat) + eps) with bias correction
struct OptimizerState {
  OptimizerSpec spec;
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  long steps = 0;

  explicit OptimizerState(OptimizerSpec s = {});
};

// Throws NumericError naming the offending tensor if any gradient is non-finite;
// in that case no parameter is modified.
void step(OptimizerState& state, std::span<const ParamRef> params);

}  // namespace gblend
