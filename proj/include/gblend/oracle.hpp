#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gblend/blend.hpp"
#include "gblend/rng.hpp"

namespace gblend {

/// Gradient-space testbed with a known true gradient.
///
/// Estimators v_k (columns of `estimators`) are fixed. Each trial draws the
/// overfitting remainder eps = grad L^T - grad L* so that the projections
/// <eps, v_k> have second-moment matrix `target_sigma`; `orthogonal_noise`
/// adds remainder mass orthogonal to every v_k, which no blend can see.
struct GradientScenario {
  Eigen::VectorXd true_grad;
  Eigen::MatrixXd estimators;    // d x K
  Eigen::MatrixXd target_sigma;  // K x K, symmetric PSD
  double orthogonal_noise = 0.0;
  std::size_t trials = 100000;
  RngSeed seed{};

  std::size_t dimension() const { return static_cast<std::size_t>(true_grad.size()); }
  std::size_t estimator_count() const { return static_cast<std::size_t>(estimators.cols()); }
  bool uncorrelated() const;  // off-diagonal target entries are all zero
  GradientStats stats() const;
  void validate() const;
};

GradientScenario random_uncorrelated_scenario(std::size_t k, std::size_t d, std::size_t trials,
                                              RngSeed seed);
// Strongly correlated remainder; resampled until Sigma^{-1} inner is positive.
GradientScenario random_correlated_scenario(std::size_t k, std::size_t d, std::size_t trials,
                                            RngSeed seed);

/// Realized trials: projections[t, k] = <eps_t, v_k> and the (fixed) inner
/// products <grad L*, v_k>.
struct TrialSet {
  Eigen::MatrixXd projections;
  Eigen::VectorXd inner;

  std::size_t trials() const { return static_cast<std::size_t>(projections.rows()); }
  Eigen::MatrixXd second_moment() const;
};

// Trial t uses its own stream derived from (seed, t), so the set does not
// depend on evaluation order.
TrialSet sample_trials(const GradientScenario& scenario);

struct Ogr2Estimate {
  std::vector<double> weights;
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t trials = 0;
  std::size_t rejected = 0;
  bool degenerate = false;  // more than 1% of trials rejected
};

inline constexpr double kDenominatorFloor = 1e-12;

// Mean over trials of (<eps, g>/<grad L*, g>)^2 with g = sum_k w_k v_k.
Ogr2Estimate empirical_ogr2(const TrialSet& trials, std::span<const double> weights);

struct GridResult {
  std::vector<double> weights;
  double ogr2 = 0.0;
  std::size_t points = 0;
};

// Exhaustive search over {w : w_k = j_k * step, sum w = 1}. k <= 4 and step in
// {0.05, 0.02, 0.01}; ties go to the lexicographically smallest vector.
GridResult grid_search_simplex(const TrialSet& trials, double step);

struct Proposition1Report {
  bool assumption_satisfied = false;
  std::vector<double> uncorrelated_weights;
  std::optional<std::vector<double>> correlated_weights;
  GridResult grid;
  Ogr2Estimate uncorrelated;
  std::optional<Ogr2Estimate> correlated;
  Ogr2Estimate equal;
  double weight_linf = 0.0;  // closed form vs grid argmin
  bool degenerate = false;
  bool pass = false;
  std::vector<std::string> failures;

  nlohmann::json to_json() const;
};

inline constexpr double kOptimalityTolerance = 1e-3;
inline constexpr double kWeightTolerance = 0.02;

// With `injected` set, those weights stand in for the closed form (negative control).
Proposition1Report verify_proposition1(const GradientScenario& scenario, double grid_step = 0.01,
                                       std::optional<std::vector<double>> injected = {});

/// L*(theta) = 1/2 (theta - theta*)^T A (theta - theta*), L^T = L* + c^T theta.
struct QuadraticLandscape {
  Eigen::MatrixXd A;
  Eigen::VectorXd optimum;
  Eigen::VectorXd c;

  double true_loss(const Eigen::VectorXd& theta) const;
  double train_loss(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd true_grad(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd train_grad(const Eigen::VectorXd& theta) const;
};

// A = M^T M / d + I with Gaussian M; optimum and c Gaussian (c scaled by 0.3).
QuadraticLandscape random_quadratic_landscape(std::size_t dim, RngSeed seed);

struct TaylorStep {
  double eta = 0.0;
  double delta_g = 0.0;      // L*(theta) - L*(theta - eta g)
  double delta_o = 0.0;
  double predicted_g = 0.0;  // eta <grad L*, g>
  double predicted_o = 0.0;  // eta <grad L^T - grad L*, g>
  double residual_g = 0.0;
  double residual_o = 0.0;
};

TaylorStep taylor_step(const QuadraticLandscape& q, const Eigen::VectorXd& theta,
                       const Eigen::VectorXd& direction, double eta);

struct TaylorReport {
  TaylorStep full;
  TaylorStep half;
  std::optional<double> residual_ratio;  // residual_g(eta) / residual_g(eta / 2)
  double aggregated_ogr = 0.0;           // diagnostic over a short descent run
  bool pass = false;

  nlohmann::json to_json() const;
};

inline constexpr double kTaylorRatioLow = 3.5;
inline constexpr double kTaylorRatioHigh = 4.5;

TaylorReport taylor_step_check(const QuadraticLandscape& q, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& direction, double eta);

// |sum_i eta_i <eps_i, g_i>| / |sum_i eta_i <grad L*_i, g_i>| over a trajectory.
struct StepContribution {
  double eta = 0.0;
  double overfit_inner = 0.0;
  double generalize_inner = 0.0;
};
std::optional<double> aggregated_ogr(std::span<const StepContribution> steps);

}  // namespace gblend
