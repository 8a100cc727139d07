#include "gblend/optim.hpp"

#include <cmath>

#include "gblend/errors.hpp"

namespace gblend {

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd_momentum: return "sgd_momentum";
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::adam: return "adam";
  }
  return "?";
}

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd_momentum" || s == "sgd") return OptimizerKind::sgd_momentum;
  if (s == "adagrad") return OptimizerKind::adagrad;
  if (s == "adam") return OptimizerKind::adam;
  throw ArgumentError("unknown optimizer '" + s + "'");
}

void OptimizerSpec::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ArgumentError("learning rate must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("momentum must be in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ArgumentError("adam betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ArgumentError("epsilon must be positive");
}

OptimizerState::OptimizerState(OptimizerSpec s) : spec(s) { spec.validate(); }

void step(OptimizerState& state, std::span<const ParamRef> params) {
  for (const ParamRef& p : params) {
    if (!p.value || !p.grad) throw ContractError("step: null parameter reference");
    if (!p.value->same_shape(*p.grad)) {
      throw DimensionError("step: gradient shape mismatch for '" + p.name + "'");
    }
    if (!p.grad->all_finite()) throw NumericError("non-finite gradient in '" + p.name + "'");
  }
  if (state.first.empty()) {
    for (const ParamRef& p : params) {
      state.first.emplace_back(p.value->shape());
      if (state.spec.kind == OptimizerKind::adam) state.second.emplace_back(p.value->shape());
    }
  } else if (state.first.size() != params.size()) {
    throw DimensionError("step: parameter list changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!state.first[i].same_shape(*params[i].value)) {
      throw DimensionError("step: accumulator shape mismatch for '" + params[i].name + "'");
    }
  }

  ++state.steps;
  const OptimizerSpec& s = state.spec;
  const double lr = s.learning_rate;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.steps));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.steps));

  for (std::size_t i = 0; i < params.size(); ++i) {
    double* theta = params[i].value->data();
    const double* g = params[i].grad->data();
    double* a = state.first[i].data();
    const std::size_t n = params[i].value->size();
    switch (s.kind) {
      case OptimizerKind::sgd_momentum:
        for (std::size_t j = 0; j < n; ++j) {
          a[j] = s.momentum * a[j] + g[j];
          theta[j] -= lr * a[j];
        }
        break;
      case OptimizerKind::adagrad:
        for (std::size_t j = 0; j < n; ++j) {
          a[j] += g[j] * g[j];
          theta[j] -= lr * g[j] / (std::sqrt(a[j]) + s.epsilon);
        }
        break;
      case OptimizerKind::adam: {
        double* v = state.second[i].data();
        for (std::size_t j = 0; j < n; ++j) {
          a[j] = s.beta1 * a[j] + (1.0 - s.beta1) * g[j];
          v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g[j] * g[j];
          theta[j] -= lr * (a[j] / bc1) / (std::sqrt(v[j] / bc2) + s.epsilon);
        }
        break;
      }
    }
  }
}

}  // namespace gblend
