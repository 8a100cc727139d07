#include "gblend/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gblend/errors.hpp"
#include "gblend/ogr.hpp"

namespace gblend {

bool GradientScenario::uncorrelated() const {
  for (Eigen::Index i = 0; i < target_sigma.rows(); ++i) {
    for (Eigen::Index j = 0; j < target_sigma.cols(); ++j) {
      if (i != j && target_sigma(i, j) != 0.0) return false;
    }
  }
  return true;
}

GradientStats GradientScenario::stats() const {
  GradientStats s;
  s.inner = estimators.transpose() * true_grad;
  s.sigma2 = target_sigma.diagonal();
  s.Sigma = target_sigma;
  return s;
}

void GradientScenario::validate() const {
  const auto d = true_grad.size();
  const auto k = estimators.cols();
  if (d == 0 || estimators.rows() != d) throw DimensionError("scenario: estimators must be d x K");
  if (k == 0 || k > d) throw ArgumentError("scenario: need 1 <= K <= d estimators");
  if (target_sigma.rows() != k || target_sigma.cols() != k) {
    throw DimensionError("scenario: target Sigma must be K x K");
  }
  if (!target_sigma.isApprox(target_sigma.transpose(), 1e-12)) {
    throw ArgumentError("scenario: target Sigma must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(target_sigma);
  if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
    throw ArgumentError("scenario: target Sigma must be positive semi-definite");
  }
  if (orthogonal_noise < 0.0) throw ArgumentError("scenario: orthogonal_noise must be >= 0");
  if (trials == 0) throw ArgumentError("scenario: trials must be positive");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(estimators);
  if (static_cast<Eigen::Index>(lu.rank()) != k) {
    throw ArgumentError("scenario: estimators must be linearly independent");
  }
}

namespace {

Eigen::VectorXd random_unit(std::size_t d, Rng& rng) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  return v.normalized();
}

// Estimators v_k = a_k g* + b_k u_k with u_k orthogonal to g*, so the inner
// products a_k |g*|^2 = a_k are positive and varied.
GradientScenario base_scenario(std::size_t k, std::size_t d, std::size_t trials, RngSeed seed,
                               Rng& rng) {
  GradientScenario s;
  s.trials = trials;
  s.seed = seed;
  s.true_grad = random_unit(d, rng);
  s.estimators.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    Eigen::VectorXd u = random_unit(d, rng);
    u -= u.dot(s.true_grad) * s.true_grad;
    u.normalize();
    const double a = rng.uniform(0.3, 1.5);
    const double b = rng.uniform(0.2, 1.0);
    s.estimators.col(static_cast<Eigen::Index>(i)) = a * s.true_grad + b * u;
  }
  s.orthogonal_noise = 0.5;
  return s;
}

}  // namespace

GradientScenario random_uncorrelated_scenario(std::size_t k, std::size_t d, std::size_t trials,
                                              RngSeed seed) {
  Rng rng(derive_seed(seed, "scenario"));
  GradientScenario s = base_scenario(k, d, trials, seed, rng);
  s.target_sigma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    s.target_sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
        rng.uniform(0.2, 2.0);
  }
  return s;
}

GradientScenario random_correlated_scenario(std::size_t k, std::size_t d, std::size_t trials,
                                            RngSeed seed) {
  Rng rng(derive_seed(seed, "scenario"));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    GradientScenario s = base_scenario(k, d, trials, seed, rng);
    // Correlation matrix from a shared factor plus idiosyncratic parts.
    const auto K = static_cast<Eigen::Index>(k);
    Eigen::VectorXd load(K);
    for (Eigen::Index i = 0; i < K; ++i) load(i) = rng.uniform(0.6, 0.95);
    Eigen::MatrixXd R = load * load.transpose();
    for (Eigen::Index i = 0; i < K; ++i) R(i, i) = 1.0;
    Eigen::VectorXd sd(K);
    for (Eigen::Index i = 0; i < K; ++i) sd(i) = std::sqrt(rng.uniform(0.2, 2.0));
    s.target_sigma = sd.asDiagonal() * R * sd.asDiagonal();
    s.target_sigma = 0.5 * (s.target_sigma + s.target_sigma.transpose());
    const Eigen::VectorXd dir = s.target_sigma.ldlt().solve(s.stats().inner);
    if ((dir.array() > 0.0).all()) return s;
  }
  throw NumericError("could not draw a correlated scenario with an interior optimum");
}

Eigen::MatrixXd TrialSet::second_moment() const {
  return (projections.transpose() * projections) / static_cast<double>(projections.rows());
}

TrialSet sample_trials(const GradientScenario& scenario) {
  scenario.validate();
  const Eigen::MatrixXd& V = scenario.estimators;
  const Eigen::Index d = V.rows(), k = V.cols();
  // Dual basis: V^T U = I, so <U L z, v_j> = (L z)_j.
  const Eigen::MatrixXd U = V * (V.transpose() * V).inverse();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scenario.target_sigma);
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd L = eig.eigenvectors() * lambda.asDiagonal();
  const Eigen::MatrixXd mix = U * L;

  TrialSet out;
  out.inner = V.transpose() * scenario.true_grad;
  out.projections.resize(static_cast<Eigen::Index>(scenario.trials), k);
  Eigen::VectorXd z(k), xi(d), eps(d);
  for (std::size_t t = 0; t < scenario.trials; ++t) {
    Rng rng(derive_seed(scenario.seed, "trial", t));
    for (Eigen::Index i = 0; i < k; ++i) z(i) = rng.normal();
    eps.noalias() = mix * z;
    if (scenario.orthogonal_noise > 0.0) {
      for (Eigen::Index i = 0; i < d; ++i) xi(i) = rng.normal();
      const Eigen::VectorXd coeff = V.transpose() * xi;
      eps += scenario.orthogonal_noise * (xi - U * coeff);
    }
    out.projections.row(static_cast<Eigen::Index>(t)) = (V.transpose() * eps).transpose();
  }
  return out;
}

Ogr2Estimate empirical_ogr2(const TrialSet& trials, std::span<const double> weights) {
  const auto k = trials.projections.cols();
  if (static_cast<Eigen::Index>(weights.size()) != k) {
    throw DimensionError("empirical_ogr2: weight count != estimator count");
  }
  Ogr2Estimate est;
  est.weights.assign(weights.begin(), weights.end());
  est.trials = trials.trials();
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), k);
  const double den = w.dot(trials.inner);

  double sum = 0.0, sum_sq = 0.0;
  std::size_t used = 0;
  for (Eigen::Index t = 0; t < trials.projections.rows(); ++t) {
    if (std::abs(den) < kDenominatorFloor) {
      ++est.rejected;
      continue;
    }
    const double r = trials.projections.row(t).dot(w) / den;
    const double v = r * r;
    sum += v;
    sum_sq += v * v;
    ++used;
  }
  est.degenerate = est.rejected * 100 > est.trials;
  if (used == 0) {
    est.mean = std::numeric_limits<double>::quiet_NaN();
    est.standard_error = std::numeric_limits<double>::quiet_NaN();
    return est;
  }
  const double n = static_cast<double>(used);
  est.mean = sum / n;
  const double var = used > 1 ? std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1.0)) : 0.0;
  est.standard_error = std::sqrt(var / n);
  return est;
}

GridResult grid_search_simplex(const TrialSet& trials, double step) {
  const auto k = static_cast<std::size_t>(trials.projections.cols());
  if (k == 0 || k > 4) throw ArgumentError("grid_search_simplex supports 1 <= k <= 4");
  const int units = static_cast<int>(std::lround(1.0 / step));
  if (!(step > 0.0) || std::abs(units * step - 1.0) > 1e-9) {
    throw ArgumentError("grid step must divide 1");
  }
  // Averaging (w.p_t)^2 over trials equals w^T S w with S the projection second
  // moment, so each lattice point costs O(k^2) instead of O(trials).
  const Eigen::MatrixXd S = trials.second_moment();
  GridResult best;
  best.ogr2 = std::numeric_limits<double>::infinity();
  std::vector<int> j(k, 0);
  Eigen::VectorXd w(static_cast<Eigen::Index>(k));

  auto evaluate = [&] {
    ++best.points;
    for (std::size_t i = 0; i < k; ++i) w(static_cast<Eigen::Index>(i)) = j[i] * step;
    const double den = w.dot(trials.inner);
    if (std::abs(den) < kDenominatorFloor) return;
    const double value = w.dot(S * w) / (den * den);
    if (value < best.ogr2) {
      best.ogr2 = value;
      best.weights.assign(w.data(), w.data() + w.size());
    }
  };
  // Lexicographic order with strict improvement keeps the smallest vector on ties.
  auto recurse = [&](auto&& self, std::size_t pos, int remaining) -> void {
    if (pos + 1 == k) {
      j[pos] = remaining;
      evaluate();
      return;
    }
    for (int v = 0; v <= remaining; ++v) {
      j[pos] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  recurse(recurse, 0, units);
  return best;
}

namespace {

nlohmann::json estimate_json(const Ogr2Estimate& e) {
  return {{"weights", e.weights},
          {"ogr2", e.mean},
          {"standard_error", e.standard_error},
          {"trials", e.trials},
          {"rejected", e.rejected}};
}

}  // namespace

nlohmann::json Proposition1Report::to_json() const {
  nlohmann::json j = {{"assumption_satisfied", assumption_satisfied},
                      {"closed_form_uncorrelated", estimate_json(uncorrelated)},
                      {"equal_weights", estimate_json(equal)},
                      {"grid", {{"weights", grid.weights}, {"ogr2", grid.ogr2}, {"points", grid.points}}},
                      {"weight_linf", weight_linf},
                      {"degenerate", degenerate},
                      {"pass", pass},
                      {"failures", failures}};
  if (correlated) j["closed_form_correlated"] = estimate_json(*correlated);
  return j;
}

Proposition1Report verify_proposition1(const GradientScenario& scenario, double grid_step,
                                       std::optional<std::vector<double>> injected) {
  Proposition1Report r;
  r.assumption_satisfied = scenario.uncorrelated();
  const GradientStats stats = scenario.stats();
  const TrialSet trials = sample_trials(scenario);

  r.uncorrelated_weights = injected ? *injected : optimal_weights_uncorrelated(stats).values();
  r.uncorrelated = empirical_ogr2(trials, r.uncorrelated_weights);
  try {
    r.correlated_weights = optimal_weights_correlated(stats).values();
    r.correlated = empirical_ogr2(trials, *r.correlated_weights);
  } catch (const NumericError&) {
    r.correlated_weights.reset();
  }
  const std::size_t k = scenario.estimator_count();
  const std::vector<double> equal(k, 1.0 / static_cast<double>(k));
  r.equal = empirical_ogr2(trials, equal);
  r.grid = grid_search_simplex(trials, grid_step);

  r.degenerate = r.uncorrelated.degenerate || r.equal.degenerate;
  if (r.degenerate) r.failures.push_back("degenerate scenario: too many rejected trials");

  const std::vector<double>& closed =
      (r.assumption_satisfied || !r.correlated_weights) ? r.uncorrelated_weights
                                                        : *r.correlated_weights;
  const double closed_ogr2 =
      (r.assumption_satisfied || !r.correlated) ? r.uncorrelated.mean : r.correlated->mean;
  for (std::size_t i = 0; i < k; ++i) {
    r.weight_linf = std::max(r.weight_linf, std::abs(closed[i] - r.grid.weights[i]));
  }

  if (!(closed_ogr2 <= r.grid.ogr2 + kOptimalityTolerance)) {
    r.failures.push_back("closed form OGR^2 exceeds the grid minimum by more than 1e-3");
  }
  if (r.assumption_satisfied) {
    if (!(r.weight_linf <= std::max(kWeightTolerance, 2.0 * grid_step))) {
      r.failures.push_back("closed form weights differ from the grid argmin");
    }
  } else {
    if (!r.correlated) {
      r.failures.push_back("correlated weights unavailable for a correlated scenario");
    } else if (!(r.correlated->mean <= r.uncorrelated.mean + r.uncorrelated.standard_error)) {
      r.failures.push_back("correlated formula does worse than the uncorrelated one");
    }
  }
  r.pass = r.failures.empty();
  return r;
}

double QuadraticLandscape::true_loss(const Eigen::VectorXd& theta) const {
  const Eigen::VectorXd e = theta - optimum;
  return 0.5 * e.dot(A * e);
}

double QuadraticLandscape::train_loss(const Eigen::VectorXd& theta) const {
  return true_loss(theta) + c.dot(theta);
}

Eigen::VectorXd QuadraticLandscape::true_grad(const Eigen::VectorXd& theta) const {
  return A * (theta - optimum);
}

Eigen::VectorXd QuadraticLandscape::train_grad(const Eigen::VectorXd& theta) const {
  return true_grad(theta) + c;
}

QuadraticLandscape random_quadratic_landscape(std::size_t dim, RngSeed seed) {
  if (dim == 0) throw ArgumentError("random_quadratic_landscape: dim must be positive");
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) M(i, j) = rng.normal();
  QuadraticLandscape q;
  q.A = M.transpose() * M / static_cast<double>(dim) + Eigen::MatrixXd::Identity(n, n);
  q.optimum.resize(n);
  q.c.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) q.optimum(i) = rng.normal();
  for (Eigen::Index i = 0; i < n; ++i) q.c(i) = 0.3 * rng.normal();
  return q;
}

TaylorStep taylor_step(const QuadraticLandscape& q, const Eigen::VectorXd& theta,
                       const Eigen::VectorXd& direction, double eta) {
  const Eigen::VectorXd next = theta - eta * direction;
  TaylorStep s;
  s.eta = eta;
  s.delta_g = q.true_loss(theta) - q.true_loss(next);
  s.delta_o = (q.train_loss(theta) - q.train_loss(next)) - s.delta_g;
  s.predicted_g = eta * q.true_grad(theta).dot(direction);
  s.predicted_o = eta * (q.train_grad(theta) - q.true_grad(theta)).dot(direction);
  s.residual_g = s.delta_g - s.predicted_g;
  s.residual_o = s.delta_o - s.predicted_o;
  return s;
}

std::optional<double> aggregated_ogr(std::span<const StepContribution> steps) {
  double num = 0.0, den = 0.0;
  for (const auto& s : steps) {
    num += s.eta * s.overfit_inner;
    den += s.eta * s.generalize_inner;
  }
  if (std::abs(den) < kGeneralizationEpsilon) return std::nullopt;
  return std::abs(num / den);
}

nlohmann::json TaylorReport::to_json() const {
  auto step_json = [](const TaylorStep& s) {
    return nlohmann::json{{"eta", s.eta},           {"delta_g", s.delta_g},
                          {"delta_o", s.delta_o},   {"predicted_g", s.predicted_g},
                          {"predicted_o", s.predicted_o}, {"residual_g", s.residual_g},
                          {"residual_o", s.residual_o}};
  };
  nlohmann::json j = {{"full", step_json(full)},
                      {"half", step_json(half)},
                      {"aggregated_ogr", aggregated_ogr},
                      {"pass", pass}};
  j["residual_ratio"] = residual_ratio ? nlohmann::json(*residual_ratio) : nlohmann::json(nullptr);
  return j;
}

TaylorReport taylor_step_check(const QuadraticLandscape& q, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& direction, double eta) {
  if (!(eta > 0.0)) throw ArgumentError("taylor_step_check: eta must be positive");
  TaylorReport r;
  r.full = taylor_step(q, theta, direction, eta);
  r.half = taylor_step(q, theta, direction, eta / 2.0);
  if (r.half.residual_g != 0.0) r.residual_ratio = r.full.residual_g / r.half.residual_g;

  // Aggregated OGR along a short train-gradient descent from theta.
  std::vector<StepContribution> steps;
  Eigen::VectorXd t = theta;
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd g = q.train_grad(t);
    const Eigen::VectorXd gs = q.true_grad(t);
    steps.push_back({eta, (g - gs).dot(g), gs.dot(g)});
    t -= eta * g;
  }
  r.aggregated_ogr = aggregated_ogr(steps).value_or(std::numeric_limits<double>::quiet_NaN());

  const double scale = std::max(1.0, std::abs(q.train_loss(theta)));
  const bool ratio_ok = r.residual_ratio && *r.residual_ratio >= kTaylorRatioLow &&
                        *r.residual_ratio <= kTaylorRatioHigh;
  const bool linear_ok = std::abs(r.full.residual_o) <= 1e-10 * scale &&
                         std::abs(r.half.residual_o) <= 1e-10 * scale;
  r.pass = ratio_ok && linear_ok;
  return r;
}

}  // namespace gblend
