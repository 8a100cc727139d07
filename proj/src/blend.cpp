#include "gblend/blend.hpp"

#include <algorithm>
#include <cmath>

#include "gblend/errors.hpp"
#include "gblend/serialize.hpp"

namespace gblend {

BlendWeights normalize(std::span<const double> raw) {
  if (raw.empty()) throw ArgumentError("normalize: empty vector");
  double sum = 0.0;
  for (double v : raw) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("normalize: entries must be >= 0");
    sum += v;
  }
  if (!(sum > 0.0)) throw ArgumentError("normalize: all-zero vector");
  std::vector<double> w(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) w[i] = raw[i] / sum;
  return BlendWeights(std::move(w));
}

PracticalWeights estimate_weights_practical(std::span<const HeadMeasurement> measurements) {
  if (measurements.empty()) throw ArgumentError("estimate_weights_practical: no measurements");
  std::vector<double> raw;
  raw.reserve(measurements.size());
  for (const auto& m : measurements) {
    if (!std::isfinite(m.generalization) || !std::isfinite(m.overfitting)) {
      throw NumericError("head " + std::to_string(m.head_id) + " has a non-finite measurement");
    }
    const double o = std::max(m.overfitting, kOverfitFloor);
    raw.push_back(std::max(m.generalization, 0.0) / (o * o));
  }
  if (std::all_of(raw.begin(), raw.end(), [](double v) { return v == 0.0; })) {
    throw NumericError("no generalizing head: every head has G <= 0");
  }
  return {normalize(raw), std::move(raw)};
}

BlendWeights optimal_weights_uncorrelated(const GradientStats& stats) {
  const auto k = stats.inner.size();
  if (k == 0 || stats.sigma2.size() != k) {
    throw DimensionError("optimal_weights_uncorrelated: inner/sigma2 size mismatch");
  }
  std::vector<double> raw(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(stats.sigma2(i) > 0.0)) throw ArgumentError("sigma^2 must be positive");
    raw[static_cast<std::size_t>(i)] = stats.inner(i) / stats.sigma2(i);
  }
  return normalize(raw);
}

Eigen::VectorXd correlated_direction(const Eigen::MatrixXd& Sigma, const Eigen::VectorXd& inner) {
  if (Sigma.rows() != Sigma.cols() || Sigma.rows() != inner.size() || inner.size() == 0) {
    throw DimensionError("correlated weights: Sigma must be k x k with k inner products");
  }
  if (!Sigma.isApprox(Sigma.transpose(), 1e-12)) throw ArgumentError("Sigma must be symmetric");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Sigma);
  const auto& s = svd.singularValues();
  if (!(s(s.size() - 1) > 0.0) || s(0) / s(s.size() - 1) > kMaxSigmaCondition) {
    throw NumericError("Sigma is singular or ill-conditioned");
  }
  return Sigma.ldlt().solve(inner);
}

BlendWeights optimal_weights_correlated(const GradientStats& stats) {
  const Eigen::VectorXd d = correlated_direction(stats.Sigma, stats.inner);
  std::vector<double> raw(d.data(), d.data() + d.size());
  double sum = 0.0;
  for (double v : raw) sum += v;
  // An overall negative sign is the same minimizer (the objective is scale invariant).
  if (sum < 0.0) {
    for (double& v : raw) v = -v;
  }
  for (double v : raw) {
    if (v < 0.0) {
      throw NumericError("correlated optimum has a negative weight; it lies off the simplex");
    }
  }
  return normalize(raw);
}

nlohmann::json weight_record_json(int epoch, std::span<const HeadMeasurement> measurements,
                                  const PracticalWeights& w) {
  nlohmann::json heads = nlohmann::json::array();
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    heads.push_back({{"id", measurements[i].head_id},
                     {"G", measurements[i].generalization},
                     {"O", measurements[i].overfitting},
                     {"raw", w.raw[i]},
                     {"weight", w.weights[i]}});
  }
  return {{"epoch", epoch}, {"heads", std::move(heads)}};
}

}  // namespace gblend
