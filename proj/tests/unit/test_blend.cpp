#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gblend/blend.hpp"
#include "gblend/errors.hpp"
#include "gblend/ogr.hpp"
#include "gblend/rng.hpp"

using namespace gblend;

namespace {

CheckpointRecord rec(int epoch, double tl, double vl, double ta = 0.5, double va = 0.5) {
  return {epoch, tl, vl, ta, va, "T'/V"};
}

std::vector<HeadMeasurement> measurements(std::vector<double> g, std::vector<double> o) {
  std::vector<HeadMeasurement> out;
  for (std::size_t i = 0; i < g.size(); ++i) out.push_back({i, g[i], o[i]});
  return out;
}

}  // namespace

TEST_SUITE("ogr") {

TEST_CASE("overfitting and generalization by direct substitution") {
  const auto r0 = rec(0, 2.0, 2.0);
  const auto rN = rec(5, 1.0, 1.2);
  CHECK(overfitting_at(r0, rN, MetricKind::loss) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(generalization_at(r0, rN, MetricKind::loss) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(overfitting_at(r0, rec(5, 1.5, 1.5), MetricKind::loss) == 0.0);
  CHECK(generalization_at(r0, rec(5, 1.5, 2.0), MetricKind::loss) == 0.0);
}

TEST_CASE("accuracy variant measures gains upward") {
  const auto r0 = rec(0, 2.0, 2.0, 0.1, 0.1);
  const auto rN = rec(4, 1.0, 1.0, 0.9, 0.6);
  CHECK(overfitting_at(r0, rN, MetricKind::accuracy) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(generalization_at(r0, rN, MetricKind::accuracy) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("record validation and ordering") {
  CHECK_THROWS_AS(overfitting_at(rec(3, 1, 1), rec(3, 1, 1), MetricKind::loss), ArgumentError);
  CHECK_THROWS_AS(overfitting_at(rec(0, -1, 1), rec(3, 1, 1), MetricKind::loss), ArgumentError);
  CHECK_THROWS_AS(generalization_at(rec(0, 1, 1, 1.5), rec(3, 1, 1), MetricKind::loss),
                  ArgumentError);
  auto other = rec(5, 1, 1);
  other.source = "T/test";
  CHECK_THROWS_AS(overfitting_at(rec(0, 1, 1), other, MetricKind::loss), ArgumentError);
}

TEST_CASE("ogr of simple windows") {
  const auto r0 = rec(0, 3.0, 3.0);
  const auto a = rec(2, 2.0, 2.0);
  // dO = 0.2, dG = 0.8
  const auto b = rec(4, 1.0, 1.2);
  const auto r = ogr_between(r0, a, b, MetricKind::loss);
  CHECK(r.delta_o == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(r.delta_g == doctest::Approx(0.8).epsilon(1e-12));
  REQUIRE(r.defined());
  CHECK(*r.ogr == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(!r.negative_g);

  const auto pure = ogr_between(a, rec(4, 1.5, 1.5), MetricKind::loss);
  REQUIRE(pure.defined());
  CHECK(*pure.ogr == 0.0);
}

TEST_CASE("flat validation leaves OGR undefined and never divides by zero") {
  const auto r = ogr_between(rec(0, 2.0, 1.0), rec(3, 1.0, 1.0), MetricKind::loss);
  CHECK(!r.defined());
  CHECK(r.delta_g == 0.0);
  const auto tiny = ogr_between(rec(0, 2.0, 1.0), rec(3, 1.0, 1.0 - 5e-9), MetricKind::loss);
  CHECK(!tiny.defined());
}

TEST_CASE("worsening validation is flagged as negative G") {
  const auto r = ogr_between(rec(0, 2.0, 1.0), rec(3, 1.0, 1.4), MetricKind::loss);
  CHECK(r.negative_g);
  CHECK(r.delta_g < 0.0);
  REQUIRE(r.defined());
  CHECK(*r.ogr >= 0.0);
}

TEST_CASE("O and G telescope over sub-intervals") {
  Rng rng(RngSeed{17});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CheckpointRecord> curve;
    double tl = 2.3, vl = 2.3, ta = 0.1, va = 0.1;
    for (int e = 0; e <= 12; ++e) {
      curve.push_back(rec(e, tl, vl, ta, va));
      tl = std::max(0.0, tl - 0.2 * rng.uniform());
      vl = std::max(0.0, vl - 0.2 * rng.uniform() + 0.05);
      ta = std::min(1.0, ta + 0.08 * rng.uniform());
      va = std::min(1.0, va + 0.05 * rng.uniform());
    }
    for (auto kind : {MetricKind::loss, MetricKind::accuracy}) {
      double sum_o = 0.0, sum_g = 0.0;
      const int cuts[] = {0, 3, 4, 9, 12};
      for (int i = 0; i + 1 < 5; ++i) {
        const auto r = ogr_between(curve[0], curve[cuts[i]], curve[cuts[i + 1]], kind);
        sum_o += r.delta_o;
        sum_g += r.delta_g;
      }
      CHECK(std::abs(sum_o - overfitting_at(curve[0], curve[12], kind)) <= 1e-12);
      CHECK(std::abs(sum_g - generalization_at(curve[0], curve[12], kind)) <= 1e-12);
    }
  }
}

}  // TEST_SUITE ogr

TEST_SUITE("blend") {

TEST_CASE("practical weights by direct substitution") {
  const auto m = measurements({0.8, 0.2, 0.5}, {0.2, 0.4, 0.3});
  const auto w = estimate_weights_practical(m);
  CHECK(w.raw[0] == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(w.raw[1] == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(w.raw[2] == doctest::Approx(5.5556).epsilon(1e-4));
  CHECK(w.weights[0] == doctest::Approx(0.7461).epsilon(1e-4));
  CHECK(w.weights[1] == doctest::Approx(0.0466).epsilon(1e-3));
  CHECK(w.weights[2] == doctest::Approx(0.2073).epsilon(1e-3));
}

TEST_CASE("single head and symmetric heads") {
  CHECK(estimate_weights_practical(measurements({0.3}, {0.1})).weights.values() ==
        std::vector<double>{1.0});
  const auto w = estimate_weights_practical(measurements({0.4, 0.4, 0.4}, {0.2, 0.2, 0.2}));
  for (double v : w.weights.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("clamping: negative G gets zero weight, tiny O is floored") {
  const auto w = estimate_weights_practical(measurements({-0.1, 0.5, 1e-7}, {0.1, 0.2, 0.0}));
  CHECK(w.raw[0] == 0.0);
  CHECK(w.weights[0] == 0.0);
  CHECK(w.raw[2] == doctest::Approx(1e-7 / (1e-6 * 1e-6)));
}

TEST_CASE("no generalizing head is an error") {
  CHECK_THROWS_AS(estimate_weights_practical(measurements({-0.1, 0.0}, {0.1, 0.2})), NumericError);
}

TEST_CASE("practical weights are invariant to a common scale of G or O") {
  Rng rng(RngSeed{23});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> g(4), o(4);
    for (auto& v : g) v = rng.uniform(-0.2, 1.0);
    for (auto& v : o) v = rng.uniform(0.01, 1.0);
    g[0] = std::abs(g[0]) + 0.01;
    const auto base = estimate_weights_practical(measurements(g, o)).weights;
    const double s = rng.uniform(0.1, 10.0);
    auto gs = g, os = o;
    for (auto& v : gs) v *= s;
    for (auto& v : os) v *= s;
    const auto wg = estimate_weights_practical(measurements(gs, o)).weights;
    const auto wo = estimate_weights_practical(measurements(g, os)).weights;
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(wg[i] - base[i]) <= 1e-12);
      CHECK(std::abs(wo[i] - base[i]) <= 1e-12);
    }
  }
}

TEST_CASE("normalize examples and argmax stability") {
  const std::vector<double> a{2, 2}, b{1, 0, 3};
  CHECK(normalize(a).values() == std::vector<double>{0.5, 0.5});
  CHECK(normalize(b).values() == std::vector<double>{0.25, 0.0, 0.75});
  CHECK_THROWS_AS(normalize(std::vector<double>{0.0, 0.0}), ArgumentError);
  CHECK_THROWS_AS(normalize(std::vector<double>{1.0, -0.5}), ArgumentError);
  Rng rng(RngSeed{5});
  for (int t = 0; t < 100; ++t) {
    std::vector<double> raw(5);
    for (auto& v : raw) v = rng.uniform(0.0, 100.0);
    const auto w = normalize(raw);
    double sum = 0.0;
    for (double v : w.values()) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK(std::max_element(raw.begin(), raw.end()) - raw.begin() ==
          std::max_element(w.values().begin(), w.values().end()) - w.values().begin());
  }
}

TEST_CASE("published weight vectors are already normalized") {
  const std::vector<std::vector<double>> published{
      {0.630, 0.014, 0.356}, {0.38, 0.24, 0.38}, {0.309, 0.495, 0.196}, {0.827, 0.011, 0.162},
      {0.33, 0.53, 0.01, 0.13}};
  for (const auto& p : published) {
    const auto w = normalize(p);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(w[i] - p[i]) < 1e-2);
  }
}

TEST_CASE("uncorrelated closed form is inverse-variance weighting") {
  GradientStats s;
  s.inner = Eigen::Vector2d(1.0, 1.0);
  s.sigma2 = Eigen::Vector2d(1.0, 4.0);
  const auto w = optimal_weights_uncorrelated(s);
  CHECK(w[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.2).epsilon(1e-15));

  GradientStats one;
  one.inner = Eigen::VectorXd::Constant(1, 0.3);
  one.sigma2 = Eigen::VectorXd::Constant(1, 2.0);
  CHECK(optimal_weights_uncorrelated(one).values() == std::vector<double>{1.0});

  s.sigma2(1) = 0.0;
  CHECK_THROWS_AS(optimal_weights_uncorrelated(s), ArgumentError);
}

TEST_CASE("correlated form reduces to the closed form for diagonal Sigma") {
  Rng rng(RngSeed{29});
  for (int t = 0; t < 50; ++t) {
    const int k = 2 + t % 3;
    GradientStats s;
    s.inner.resize(k);
    s.sigma2.resize(k);
    for (int i = 0; i < k; ++i) {
      s.inner(i) = rng.uniform(0.1, 2.0);
      s.sigma2(i) = rng.uniform(0.1, 3.0);
    }
    s.Sigma = s.sigma2.asDiagonal();
    const auto a = optimal_weights_correlated(s);
    const auto b = optimal_weights_uncorrelated(s);
    for (int i = 0; i < k; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-10);
  }
}

TEST_CASE("correlated form on a symmetric 2x2 system") {
  GradientStats s;
  s.inner = Eigen::Vector2d(1.0, 1.0);
  s.Sigma.resize(2, 2);
  s.Sigma << 1.0, 0.5, 0.5, 1.0;
  const Eigen::VectorXd d = correlated_direction(s.Sigma, s.inner);
  CHECK(d(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(d(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  const auto w = optimal_weights_correlated(s);
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("correlated form rejects singular Sigma and off-simplex optima") {
  GradientStats s;
  s.inner = Eigen::Vector2d(1.0, 1.0);
  s.Sigma.resize(2, 2);
  s.Sigma << 1.0, 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(optimal_weights_correlated(s), NumericError);
  s.Sigma << 1.0, 0.0, 0.0, 1e-13;
  CHECK_THROWS_AS(optimal_weights_correlated(s), NumericError);
  // Strong correlation with unequal inner products pushes one weight negative.
  s.inner = Eigen::Vector2d(1.0, 0.2);
  s.Sigma << 1.0, 0.9, 0.9, 1.0;
  CHECK_THROWS_AS(optimal_weights_correlated(s), NumericError);
}

TEST_CASE("weight record json") {
  const auto m = measurements({0.8, 0.2}, {0.2, 0.4});
  const auto w = estimate_weights_practical(m);
  const auto j = weight_record_json(7, m, w);
  CHECK(j["epoch"] == 7);
  CHECK(j["heads"].size() == 2);
  CHECK(j["heads"][1]["id"] == 1);
  CHECK(j["heads"][0]["G"].get<double>() == 0.8);
  CHECK(j["heads"][0]["weight"].get<double>() == w.weights[0]);
}

}  // TEST_SUITE blend
