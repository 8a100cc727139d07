// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
// usage: acceptance <experiment-config.json> [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "balance_reference.hpp"
#include "gblend/blend.hpp"
#include "gblend/experiment.hpp"
#include "gblend/oracle.hpp"
#include "gblend/trainers.hpp"
#include "helpers.hpp"

using namespace gblend;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kSeeds = 5;
constexpr int kComparisonSeeds = 3;
constexpr double kOptimalityTol = 1e-3;
constexpr double kWeightLinf = 0.02;
constexpr double kReductionTol = 1e-10;
constexpr double kFdTol = 1e-4;
constexpr double kLinearityTol = 1e-10;
constexpr double kOnlineSlack = 0.005;
constexpr double kDominanceShare = 0.8;
constexpr double kSubsetLinf = 0.1;
constexpr double kPublishedTol = 1e-2;

int failures = 0;

void verdict(int id, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

// ---------------------------------------------------------------- oracle

struct OracleRuns {
  double max_gap = 0.0;        // closed-form mean minus grid minimum
  double max_linf = 0.0;
  double max_reduction = 0.0;
  std::size_t scenarios = 0, passed = 0;
  double seconds = 0.0;
};

OracleRuns uncorrelated_sweep() {
  OracleRuns r;
  const auto t0 = Clock::now();
  const RngSeed root{1};
  for (std::size_t s = 0; s < 20; ++s) {
    const std::size_t k = s % 2 == 0 ? 2 : 3;
    const GradientScenario sc =
        random_uncorrelated_scenario(k, 32, 100000, derive_seed(root, "uncorrelated", s));
    const Proposition1Report rep = verify_proposition1(sc, 0.01);
    const double gap = rep.uncorrelated.mean - rep.grid.ogr2;
    r.max_gap = std::max(r.max_gap, gap);
    r.max_linf = std::max(r.max_linf, rep.weight_linf);
    ++r.scenarios;
    r.passed += gap <= kOptimalityTol && rep.weight_linf <= kWeightLinf && !rep.degenerate;

    GradientStats st = sc.stats();
    st.Sigma = st.sigma2.asDiagonal();
    const BlendWeights a = optimal_weights_correlated(st);
    const BlendWeights u = optimal_weights_uncorrelated(st);
    for (std::size_t i = 0; i < k; ++i) {
      r.max_reduction = std::max(r.max_reduction, std::abs(a[i] - u[i]));
    }
  }
  r.seconds = seconds_since(t0);
  return r;
}

void criteria_1_2() {
  const OracleRuns u = uncorrelated_sweep();
  verdict(1, u.passed == u.scenarios && u.scenarios >= 20 && u.seconds <= 120.0,
          fmt("%zu/%zu scenarios within tolerance; max E[OGR^2] gap %.3g (<= %.0e), max weight "
              "L_inf %.4f (<= %.2f); %.1f s (<= 120 s)",
              u.passed, u.scenarios, u.max_gap, kOptimalityTol, u.max_linf, kWeightLinf,
              u.seconds));

  std::size_t dominated = 0;
  const RngSeed root{1};
  for (std::size_t s = 0; s < 10; ++s) {
    const GradientScenario sc =
        random_correlated_scenario(3, 32, 100000, derive_seed(root, "correlated", s));
    const Proposition1Report rep = verify_proposition1(sc, 0.01);
    dominated += rep.correlated &&
                 rep.correlated->mean <= rep.uncorrelated.mean + rep.uncorrelated.standard_error;
  }
  verdict(2, u.max_reduction <= kReductionTol && dominated == 10,
          fmt("diagonal reduction max |diff| %.3g (<= 1e-10); correlated formula dominates on "
              "%zu/10 scenarios",
              u.max_reduction, dominated));
}

void criterion_3() {
  const QuadraticLandscape q = random_quadratic_landscape(4, RngSeed{3});
  Eigen::VectorXd theta = q.optimum;
  Rng rng(RngSeed{4});
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) += rng.normal();
  const TaylorReport t = taylor_step_check(q, theta, q.train_grad(theta), 1e-3);
  const double ratio = t.residual_ratio.value_or(NAN);
  verdict(3, t.residual_ratio && ratio >= 3.5 && ratio <= 4.5,
          fmt("residual ratio %.4f for eta 1e-3 vs 5e-4 (in [3.5, 4.5])", ratio));
}

// ---------------------------------------------------------------- gradients

Batch random_batch(const FusionArch& a, std::size_t rows, bool multilabel, Rng& rng) {
  Batch b;
  for (auto d : a.input_dims) b.inputs.push_back(test::random_matrix(rows, d, rng));
  if (multilabel) {
    Tensor hot = Tensor::matrix(rows, a.class_count);
    for (auto& v : hot.values()) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
    b.labels = Labels::multi(std::move(hot));
  } else {
    std::vector<std::size_t> y(rows);
    for (auto& v : y) v = rng.below(a.class_count);
    b.labels = Labels::single(std::move(y));
  }
  return b;
}

void criterion_4() {
  double worst_fd = 0.0, worst_linear = 0.0;
  int cases = 0;

  // Plain MLPs: depth 1-3, both activations.
  for (std::size_t depth = 1; depth <= 3; ++depth) {
    for (Activation act : {Activation::relu, Activation::identity}) {
      Rng rng(RngSeed{100 + depth});
      std::vector<std::size_t> dims{5};
      for (std::size_t l = 0; l < depth; ++l) dims.push_back(4 + l);
      Mlp m = make_mlp(dims, act, Activation::identity, rng);
      auto p = test::jitter(flatten(m), depth);
      unflatten(p, m);
      const Tensor x = test::random_matrix(7, 5, rng);
      const Labels y = Labels::single({0, 1, 2, 3, 0, 1, 2});
      const auto f = forward(m, x, false, nullptr);
      const auto g = backward(m, f.cache, softmax_cross_entropy(f.output, y).grad_logits);
      const auto fd = finite_diff_grad(
          [&](std::span<const double> q) {
            Mlp probe = m;
            unflatten(q, probe);
            return softmax_cross_entropy(forward(probe, x, false, nullptr).output, y).loss;
          },
          p, 1e-5);
      worst_fd = std::max(worst_fd, test::max_rel_error(flatten(g.grads), fd, 1e-7));
      ++cases;
    }
  }

  // Multi-head nets: k in 1..3, encoder and head depths, both label kinds.
  const std::vector<std::vector<std::size_t>> encoders{{}, {6}, {6, 5}};
  const std::vector<std::vector<std::size_t>> heads{{}, {4}};
  std::uint64_t seed = 200;
  for (std::size_t k = 1; k <= 3; ++k) {
    for (const auto& enc : encoders) {
      for (const auto& head : heads) {
        for (bool multi : {false, true}) {
          ++seed;
          FusionArch a;
          for (std::size_t m = 0; m < k; ++m) a.input_dims.push_back(3 + m);
          a.encoder_hidden = enc;
          a.feature_dim = 4;
          a.head_hidden = head;
          a.fusion_hidden = 5;
          a.class_count = 3;
          MultiHeadNet net = make_multihead(a, RngSeed{seed});
          unflatten(test::jitter(flatten(net), seed), net);
          Rng rng(RngSeed{seed});
          const Batch b = random_batch(a, 6, multi, rng);
          std::vector<double> raw(k + 1);
          double s = 0.0;
          for (auto& v : raw) s += v = 0.1 + rng.uniform();
          for (auto& v : raw) v /= s;
          const BlendWeights w(raw);

          const auto fwd = forward_all_heads(net, b, false, nullptr);
          const auto bl = blended_loss(fwd.logits, b.labels, w);
          const auto blended = flatten(backward_blended(net, fwd, bl.grad_logits, w));
          const auto fd = finite_diff_grad(
              [&](std::span<const double> q) {
                MultiHeadNet probe = net;
                unflatten(q, probe);
                const auto f = forward_all_heads(probe, b, false, nullptr);
                return blended_loss(f.logits, b.labels, w).total;
              },
              flatten(net), 1e-5);
          worst_fd = std::max(worst_fd, test::max_rel_error(blended, fd, 1e-7));

          NetGrads sum = NetGrads::zeros_like(net);
          for (std::size_t h = 0; h <= k; ++h) {
            const auto l = softmax_cross_entropy(fwd.logits[h], b.labels);
            sum.add_scaled(w[h], backward_head(net, fwd, h, l.grad_logits));
          }
          worst_linear = std::max(worst_linear, test::rel_error(blended, flatten(sum)));
          ++cases;
        }
      }
    }
  }
  verdict(4, worst_fd <= kFdTol && worst_linear <= kLinearityTol,
          fmt("%d architectures; worst finite-difference rel error %.3g (<= 1e-4); blended vs "
              "weighted per-head sum rel error %.3g (<= 1e-10)",
              cases, worst_fd, worst_linear));
}

// ---------------------------------------------------------------- training

struct SeedRuns {
  std::vector<double> uni;  // per modality
  std::vector<double> uni_train;
  double naive = 0.0, naive_train = 0.0;
  double offline = 0.0, online = 0.0;
  std::vector<SuperEpochComparison> comparisons;
  std::vector<double> offline_weights;
};

struct Experiment {
  ExperimentConfig cfg;
  Dataset data;
  FusionArch arch;

  explicit Experiment(const std::string& path) : cfg(load_experiment(path)), data(resolve_dataset(cfg)) {
    arch = cfg.arch;
    arch.input_dims = data.input_dims();
    arch.class_count = data.class_count;
  }

  TrainConfig train_for(std::uint64_t seed) const {
    TrainConfig t = cfg.train;
    t.seed = RngSeed{seed};
    return t;
  }
  MultiHeadNet net_for(std::uint64_t seed) const {
    return make_multihead(arch, derive_seed(RngSeed{seed}, "init"));
  }
};

// Evaluation metrics use the test split; the holdout is reserved for weight estimation.
double test_accuracy(const RunResult& r, const TrainingData& td, std::size_t head) {
  return evaluate_heads(r.state.net, *td.data, td.test)[head].accuracy;
}

double train_accuracy(const RunResult& r, const TrainingData& td, std::size_t head) {
  return evaluate_heads(r.state.net, *td.data, td.train)[head].accuracy;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void criteria_5_to_9(const Experiment& ex) {
  const std::size_t k = ex.data.modality_count();
  const std::size_t fused = k;
  std::vector<SeedRuns> runs(kSeeds);
  double baseline_seconds = 0.0;
  std::string naive_curves_seed1;
  std::vector<double> naive_params_seed1;

  for (int i = 0; i < kSeeds; ++i) {
    const auto seed = static_cast<std::uint64_t>(i + 1);
    const TrainConfig tc = ex.train_for(seed);
    const MultiHeadNet net0 = ex.net_for(seed);
    const TrainingData td = make_training_data(ex.data, tc);
    SeedRuns& s = runs[static_cast<std::size_t>(i)];

    const auto t0 = Clock::now();
    for (std::size_t m = 0; m < k; ++m) {
      const RunResult u = baseline({BaselineKind::uni_modal, m}, net0, td, tc);
      s.uni.push_back(test_accuracy(u, td, m));
      s.uni_train.push_back(train_accuracy(u, td, m));
    }
    const RunResult naive = baseline({BaselineKind::naive_joint}, net0, td, tc);
    baseline_seconds += seconds_since(t0);
    s.naive = test_accuracy(naive, td, fused);
    s.naive_train = train_accuracy(naive, td, fused);
    if (i == 0) {
      naive_curves_seed1 = curves_csv(naive.log, tc.metric);
      naive_params_seed1 = flatten(naive.state.net);
    }

    const RunResult off = offline_gblend(net0, td, tc);
    s.offline = test_accuracy(off, td, fused);
    s.offline_weights = off.log.schedule.front().weights.values();
    const RunResult on = online_gblend(net0, td, tc, i < kComparisonSeeds);
    s.online = test_accuracy(on, td, fused);
    s.comparisons = on.comparisons;

    std::printf("  seed %llu: uni", static_cast<unsigned long long>(seed));
    for (std::size_t m = 0; m < k; ++m) std::printf(" %.4f (train %.4f)", s.uni[m], s.uni_train[m]);
    std::printf(" | naive %.4f (train %.4f) | offline %.4f | online %.4f | offline weights",
                s.naive, s.naive_train, s.offline, s.online);
    for (double w : s.offline_weights) std::printf(" %.3f", w);
    std::printf("\n");
    std::fflush(stdout);
  }

  // Best uni-modal model: the modality with the highest mean accuracy.
  std::size_t best = 0;
  std::vector<double> uni_mean(k), uni_train_mean(k);
  for (std::size_t m = 0; m < k; ++m) {
    std::vector<double> a, t;
    for (const auto& s : runs) {
      a.push_back(s.uni[m]);
      t.push_back(s.uni_train[m]);
    }
    uni_mean[m] = mean(a);
    uni_train_mean[m] = mean(t);
    if (uni_mean[m] > uni_mean[best]) best = m;
  }
  std::vector<double> naive, naive_train, offline, online;
  int beats_naive = 0, beats_uni = 0;
  for (const auto& s : runs) {
    naive.push_back(s.naive);
    naive_train.push_back(s.naive_train);
    offline.push_back(s.offline);
    online.push_back(s.online);
    beats_naive += s.offline > s.naive;
    beats_uni += s.offline >= s.uni[best];
  }

  verdict(5,
          mean(naive) < uni_mean[best] && mean(naive_train) > uni_train_mean[best] &&
              baseline_seconds <= 600.0,
          fmt("naive val %.4f vs best uni (%s) %.4f; naive train %.4f vs best uni train %.4f; "
              "%d seeds in %.1f s (<= 600 s)",
              mean(naive), ex.data.modality_names[best].c_str(), uni_mean[best], mean(naive_train),
              uni_train_mean[best], kSeeds, baseline_seconds));

  verdict(6,
          mean(offline) > mean(naive) && mean(offline) >= uni_mean[best] && beats_naive >= 4 &&
              beats_uni >= 4 && mean(online) >= mean(offline) - kOnlineSlack,
          fmt("offline %.4f vs naive %.4f (wins %d/5) and best uni %.4f (wins %d/5); online %.4f "
              "(>= offline - 0.5pp)",
              mean(offline), mean(naive), beats_naive, uni_mean[best], beats_uni, mean(online)));

  int dominated = 0, total = 0;
  for (int i = 0; i < kComparisonSeeds; ++i) {
    for (const auto& c : runs[static_cast<std::size_t>(i)].comparisons) {
      ++total;
      dominated += c.gblend_val_acc >= c.naive_val_acc;
    }
  }
  verdict(7, total > 0 && dominated >= kDominanceShare * total,
          fmt("G-Blend super-epoch >= naive super-epoch in %d/%d cases across %d seeds (>= 80%%)",
              dominated, total, kComparisonSeeds));

  // Weight robustness to the estimation subset.
  double worst = 0.0;
  for (int i = 0; i < kComparisonSeeds; ++i) {
    const auto seed = static_cast<std::uint64_t>(i + 1);
    const std::vector<double>& full = runs[static_cast<std::size_t>(i)].offline_weights;
    for (double fraction : {0.5, 0.75}) {
      TrainConfig tc = ex.train_for(seed);
      tc.estimation_fraction = fraction;
      const TrainingData td = make_training_data(ex.data, tc);
      const TrainerState st = fresh_state(ex.net_for(seed), tc);
      const auto w = gb_estimate(st, td, tc.epochs, tc).weights.weights.values();
      std::printf("  seed %llu fraction %.2f weights", static_cast<unsigned long long>(seed),
                  fraction);
      for (std::size_t h = 0; h < w.size(); ++h) {
        std::printf(" %.3f", w[h]);
        worst = std::max(worst, std::abs(w[h] - full[h]));
      }
      std::printf("\n");
    }
  }
  verdict(8, worst <= kSubsetLinf,
          fmt("max L_inf between 50%%/75%% subset and full-T weights %.4f (<= 0.1), %d seeds",
              worst, kComparisonSeeds));

  // Reduction identities on the acceptance data, seed 1.
  {
    const TrainConfig tc = ex.train_for(1);
    const MultiHeadNet net0 = ex.net_for(1);
    const TrainingData td = make_training_data(ex.data, tc);
    TrainerState st = fresh_state(net0, tc);
    RunLog log;
    const BlendWeights hot = BlendWeights::one_hot(k + 1, fused);
    for (int len : super_epoch_lengths(tc.epochs, tc.warmup, tc.super_epoch)) {
      train_epochs(st, td, hot, len, tc, &log);
    }
    const bool gblend_same =
        curves_csv(log, tc.metric) == naive_curves_seed1 && flatten(st.net) == naive_params_seed1;
    const RunResult drop = baseline({BaselineKind::dropout, 0, 0.0}, net0, td, tc);
    const bool drop_same = curves_csv(drop.log, tc.metric) == naive_curves_seed1 &&
                           flatten(drop.state.net) == naive_params_seed1;
    verdict(9, gblend_same && drop_same,
            fmt("one-hot fused G-Blend trajectory %s naive; dropout 0 %s naive",
                gblend_same ? "bit-identical to" : "DIFFERS from",
                drop_same ? "bit-identical to" : "DIFFERS from"));
  }
}

// ---------------------------------------------------------------- data

void criterion_10() {
  const Dataset d =
      test::bernoulli_multilabel({0.3, 0.15, 0.08, 0.04, 0.02, 0.005, 0.2, 0.01}, 10000, 10);
  constexpr std::size_t M = 150, N = 400;
  const auto src = d.class_volumes();
  bool same = true, floor_ok = true, ceiling_ok = true;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const BalanceResult res = balance_multilabel(d, M, N, RngSeed{seed});
    same = same && res.accepted_rows == test::transcribed_balance(d, M, N, RngSeed{seed});
    const auto out = res.dataset.class_volumes();
    for (std::size_t c = 0; c < d.class_count; ++c) {
      if (src[c] < M && out[c] != 0) floor_ok = false;
      if (out[c] > src[c]) ceiling_ok = false;
    }
  }
  verdict(10, same && floor_ok && ceiling_ok,
          fmt("10000 rows, 3 seeds: accepted rows %s; classes below M removed: %s; no volume "
              "above source: %s",
              same ? "identical to transcription" : "DIFFER", floor_ok ? "yes" : "no",
              ceiling_ok ? "yes" : "no"));
}

void criterion_11() {
  double worst = 0.0;
  for (const std::vector<double>& p :
       {std::vector<double>{0.630, 0.014, 0.356}, std::vector<double>{0.38, 0.24, 0.38}}) {
    const BlendWeights w = normalize(p);
    for (std::size_t i = 0; i < p.size(); ++i) worst = std::max(worst, std::abs(w[i] - p[i]));
  }
  const std::vector<HeadMeasurement> base{{0, 0.12, 0.05}, {1, 0.03, 0.4}, {2, 0.2, 0.3}};
  const auto ref = estimate_weights_practical(base).weights.values();
  double drift = 0.0;
  for (double scale : {0.01, 3.0, 250.0}) {
    auto g = base, o = base;
    for (auto& m : g) m.generalization *= scale;
    for (auto& m : o) m.overfitting *= scale;
    for (const auto* v : {&g, &o}) {
      const auto w = estimate_weights_practical(*v).weights.values();
      for (std::size_t i = 0; i < w.size(); ++i) drift = std::max(drift, std::abs(w[i] - ref[i]));
    }
  }
  verdict(11, worst < kPublishedTol && drift <= 1e-12,
          fmt("published weights renormalize within %.3g (< 1e-2); max weight change under G/O "
              "scaling %.3g",
              worst, drift));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <experiment-config.json> [criterion ...]\n", argv[0]);
    return 2;
  }
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto want = [&](int id) { return only.empty() || only.count(id) > 0; };

  try {
    if (want(1) || want(2)) criteria_1_2();
    if (want(3)) criterion_3();
    if (want(4)) criterion_4();
    if (want(5) || want(6) || want(7) || want(8) || want(9)) criteria_5_to_9(Experiment(argv[1]));
    if (want(10)) criterion_10();
    if (want(11)) criterion_11();
  } catch (const std::exception& e) {
    std::printf("FAIL aborted: %s\n", e.what());
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
