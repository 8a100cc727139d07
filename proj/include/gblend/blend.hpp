#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gblend/fusion.hpp"

namespace gblend {

inline constexpr double kOverfitFloor = 1e-6;
inline constexpr double kMaxSigmaCondition = 1e12;

/// O and G of one head over the estimation window, recorded as measured.
struct HeadMeasurement {
  std::size_t head_id = 0;
  double generalization = 0.0;
  double overfitting = 0.0;
};

/// Practical weights with the intermediate raw scores, for logging.
struct PracticalWeights {
  BlendWeights weights;
  std::vector<double> raw;
};

// w_i proportional to max(G_i, 0) / max(O_i, 1e-6)^2. Throws NumericError
// ("no generalizing head") when every raw score is zero.
PracticalWeights estimate_weights_practical(std::span<const HeadMeasurement> measurements);

/// Per-estimator statistics of the gradient-blending problem.
///   inner[k]    = <grad L*, v_k>
///   sigma2[k]   = E[<grad L^T - grad L*, v_k>^2]
///   Sigma(k, j) = E[<grad L^T - grad L*, v_k><grad L^T - grad L*, v_j>]
struct GradientStats {
  Eigen::VectorXd inner;
  Eigen::VectorXd sigma2;
  Eigen::MatrixXd Sigma;
};

// w_k proportional to inner_k / sigma2_k.
BlendWeights optimal_weights_uncorrelated(const GradientStats& stats);

// Unnormalized minimizer Sigma^{-1} inner; may contain negative entries.
Eigen::VectorXd correlated_direction(const Eigen::MatrixXd& Sigma, const Eigen::VectorXd& inner);

// Sigma^{-1} inner projected onto the simplex by rescaling. Throws NumericError
// when Sigma is singular or cond(Sigma) > 1e12, and when the minimizer has a
// negative component (the optimum then lies outside the nonnegative simplex).
BlendWeights optimal_weights_correlated(const GradientStats& stats);

// Rescales a nonnegative vector to sum to one.
BlendWeights normalize(std::span<const double> raw);

nlohmann::json weight_record_json(int epoch, std::span<const HeadMeasurement> measurements,
                                  const PracticalWeights& w);

}  // namespace gblend
