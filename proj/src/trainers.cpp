#include "gblend/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <memory>
#include <numeric>

#include "gblend/errors.hpp"

namespace gblend {

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("train.epochs", "must be positive");
  if (super_epoch <= 0) throw ConfigError("train.super_epoch", "must be positive");
  if (super_epoch > epochs) throw ConfigError("train.super_epoch", "must not exceed epochs");
  if (warmup < 0) throw ConfigError("train.warmup", "must be >= 0");
  if (batch_size == 0) throw ConfigError("train.batch_size", "must be positive");
  if (!(train_subset_fraction > 0.0 && train_subset_fraction < 1.0)) {
    throw ConfigError("train.train_subset_fraction", "must be in (0, 1)");
  }
  if (!(estimation_fraction > 0.0 && estimation_fraction <= 1.0)) {
    throw ConfigError("train.estimation_fraction", "must be in (0, 1]");
  }
  try {
    optimizer.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError("train.optimizer", e.what());
  }
}

TrainingData make_training_data(const Dataset& data, const TrainConfig& config) {
  TrainingData td;
  td.data = &data;
  td.train = data.indices(Split::train);
  td.holdout = data.indices(Split::holdout);
  td.test = data.indices(Split::test);
  if (td.train.empty()) throw ArgumentError("dataset has no training rows");
  if (td.holdout.empty()) throw ArgumentError("dataset has no holdout rows");
  td.train_subset = subsample(td.train, config.train_subset_fraction, derive_seed(config.seed, "T'"));
  return td;
}

TrainerState fresh_state(const MultiHeadNet& net, const TrainConfig& config) {
  return {net, OptimizerState(config.optimizer), 0};
}

double mean_average_precision(const Tensor& scores, const Tensor& multi_hot) {
  if (!scores.same_shape(multi_hot)) throw DimensionError("mAP: scores vs labels shape");
  const std::size_t n = scores.rows(), C = scores.cols();
  double total = 0.0;
  std::size_t counted = 0;
  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t positives = 0;
    for (std::size_t r = 0; r < n; ++r) positives += multi_hot(r, c) != 0.0;
    if (positives == 0) continue;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores(a, c) > scores(b, c); });
    double hits = 0.0, ap = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (multi_hot(order[i], c) != 0.0) {
        hits += 1.0;
        ap += hits / static_cast<double>(i + 1);
      }
    }
    total += ap / static_cast<double>(positives);
    ++counted;
  }
  return counted ? total / static_cast<double>(counted) : 0.0;
}

std::vector<HeadMetrics> evaluate_heads(const MultiHeadNet& net, const Dataset& data,
                                        std::span<const std::size_t> rows) {
  const std::size_t heads = net.head_count();
  std::vector<HeadMetrics> out(heads);
  if (rows.empty()) throw ArgumentError("evaluate_heads: no rows");
  const bool multi = data.labels.is_multilabel();
  std::vector<Tensor> scores;
  if (multi) scores.assign(heads, Tensor::matrix(rows.size(), data.class_count));

  constexpr std::size_t kChunk = 1024;
  std::vector<double> correct(heads, 0.0);
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const auto chunk = rows.subspan(start, std::min(kChunk, rows.size() - start));
    const Batch b = data.batch(chunk);
    const MultiHeadForward f = forward_all_heads(net, b, false, nullptr);
    for (std::size_t h = 0; h < heads; ++h) {
      const Tensor& z = f.logits[h];
      out[h].loss += softmax_cross_entropy(z, b.labels).loss * static_cast<double>(chunk.size());
      if (multi) {
        const Tensor p = sigmoid(z);
        std::copy_n(p.data(), p.size(), scores[h].data() + start * data.class_count);
        continue;
      }
      for (std::size_t r = 0; r < chunk.size(); ++r) {
        const auto row = z.row(r);
        const auto best = static_cast<std::size_t>(
            std::max_element(row.begin(), row.end()) - row.begin());
        correct[h] += best == b.labels.index[r];
      }
    }
  }
  const double n = static_cast<double>(rows.size());
  Tensor truth;
  if (multi) truth = data.labels.multi_hot.gather_rows(rows);
  for (std::size_t h = 0; h < heads; ++h) {
    out[h].loss /= n;
    out[h].accuracy = multi ? mean_average_precision(scores[h], truth) : correct[h] / n;
  }
  return out;
}

void record_epoch(const TrainerState& state, const TrainingData& td, RunLog& log) {
  const auto train = evaluate_heads(state.net, *td.data, td.train_subset);
  const auto val = evaluate_heads(state.net, *td.data, td.holdout);
  if (log.heads.empty()) log.heads.resize(train.size());
  for (std::size_t h = 0; h < train.size(); ++h) {
    auto& curve = log.heads[h];
    if (!curve.empty() && curve.back().epoch >= state.epoch) {
      throw ContractError("record_epoch: epochs must strictly increase");
    }
    curve.push_back({state.epoch, train[h].loss, val[h].loss, train[h].accuracy, val[h].accuracy,
                     "T'/V"});
  }
}

void train_epochs(TrainerState& state, const TrainingData& td, const BlendWeights& w, int epochs,
                  const TrainConfig& config, RunLog* log) {
  const MultiHeadNet& net = state.net;
  if (w.size() != net.head_count()) {
    throw ArgumentError("train_epochs: " + std::to_string(w.size()) + " weights for " +
                        std::to_string(net.head_count()) + " heads");
  }
  if (epochs < 0) throw ArgumentError("train_epochs: negative epoch count");
  if (log && log->heads.empty()) record_epoch(state, td, *log);

  const std::size_t heads = net.head_count();
  auto active = std::make_unique<bool[]>(heads);
  for (std::size_t h = 0; h < heads; ++h) active[h] = w[h] != 0.0;
  const std::span<const bool> mask(active.get(), heads);

  std::vector<std::size_t> order;
  for (int e = 0; e < epochs; ++e) {
    order = td.train;
    Rng shuffle_rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(state.epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    Rng dropout_rng(derive_seed(config.seed, "dropout", static_cast<std::uint64_t>(state.epoch)));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> rows(order.data() + start,
                                              std::min(config.batch_size, order.size() - start));
      const Batch b = td.data->batch(rows);
      const MultiHeadForward f = forward_all_heads(state.net, b, true, &dropout_rng, mask);
      const BlendedLoss bl = blended_loss(f.logits, b.labels, w);
      const NetGrads g = backward_blended(state.net, f, bl.grad_logits, w);
      try {
        const auto refs = param_refs(state.net, g);
        step(state.optimizer, refs);
      } catch (const NumericError& err) {
        throw NumericError("epoch " + std::to_string(state.epoch) + ": " + err.what());
      }
    }
    ++state.epoch;
    if (log) record_epoch(state, td, *log);
  }
}

EstimateResult gb_estimate(const TrainerState& state, const TrainingData& td, int epochs,
                           const TrainConfig& config) {
  if (epochs < 1) throw ArgumentError("gb_estimate: need at least one epoch");
  TrainingData est = td;
  if (config.estimation_fraction < 1.0) {
    est.train = subsample(td.train, config.estimation_fraction,
                          derive_seed(config.seed, "estimation"));
    // Train-side metrics must come from rows the clones actually fit.
    std::vector<std::size_t> kept;
    std::set_intersection(td.train_subset.begin(), td.train_subset.end(), est.train.begin(),
                          est.train.end(), std::back_inserter(kept));
    if (!kept.empty()) est.train_subset = std::move(kept);
  }
  const std::size_t heads = state.net.head_count();
  EstimateResult result;
  for (std::size_t h = 0; h < heads; ++h) {
    TrainConfig clone_cfg = config;
    clone_cfg.seed = derive_seed(config.seed, "head", h);
    TrainerState clone{state.net, OptimizerState(config.optimizer), state.epoch};

    const std::span<const std::size_t> tprime(est.train_subset), hold(est.holdout);
    const HeadMetrics t0 = evaluate_heads(clone.net, *td.data, tprime)[h];
    const HeadMetrics v0 = evaluate_heads(clone.net, *td.data, hold)[h];
    train_epochs(clone, est, BlendWeights::one_hot(heads, h), epochs, clone_cfg);
    const HeadMetrics t1 = evaluate_heads(clone.net, *td.data, tprime)[h];
    const HeadMetrics v1 = evaluate_heads(clone.net, *td.data, hold)[h];

    const CheckpointRecord r0{state.epoch, t0.loss, v0.loss, t0.accuracy, v0.accuracy, "T'/V"};
    const CheckpointRecord r1{clone.epoch, t1.loss, v1.loss, t1.accuracy, v1.accuracy, "T'/V"};
    result.measurements.push_back({h, generalization_at(r0, r1, config.metric),
                                   overfitting_at(r0, r1, config.metric)});
  }
  result.weights = estimate_weights_practical(result.measurements);
  return result;
}

std::vector<int> super_epoch_lengths(int epochs, int warmup, int n) {
  if (epochs <= 0 || n <= 0 || warmup < 0) throw ArgumentError("super_epoch_lengths: bad sizes");
  std::vector<int> out;
  int first = std::min(warmup > 0 ? warmup : n, epochs);
  out.push_back(first);
  for (int rest = epochs - first; rest > 0; rest -= n) out.push_back(std::min(n, rest));
  return out;
}

namespace {

// Trains the fused head on frozen encoder features with a fresh optimizer. Both
// arms of a super-epoch comparison get the same finetune, so the comparison
// measures the quality of their encoders.
void finetune_fused_head(MultiHeadNet& net, const TrainingData& td, int epochs,
                         const TrainConfig& config) {
  const std::size_t heads = net.head_count();
  const BlendWeights w = BlendWeights::one_hot(heads, net.fused_index());
  auto active = std::make_unique<bool[]>(heads);
  for (std::size_t h = 0; h < heads; ++h) active[h] = w[h] != 0.0;
  const std::span<const bool> mask(active.get(), heads);
  OptimizerState opt(config.optimizer);
  std::vector<std::size_t> order;
  for (int e = 0; e < epochs; ++e) {
    order = td.train;
    Rng shuffle_rng(derive_seed(config.seed, "finetune", static_cast<std::uint64_t>(e)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> rows(order.data() + start,
                                              std::min(config.batch_size, order.size() - start));
      const Batch b = td.data->batch(rows);
      const MultiHeadForward f = forward_all_heads(net, b, false, nullptr, mask);
      const BlendedLoss bl = blended_loss(f.logits, b.labels, w);
      const NetGrads g = backward_blended(net, f, bl.grad_logits, w);
      std::vector<ParamRef> refs;
      for (auto& r : param_refs(net, g)) {
        if (r.name.rfind("fusion", 0) == 0) refs.push_back(std::move(r));
      }
      step(opt, refs);
    }
  }
}

std::span<const std::size_t> comparison_rows(const TrainingData& td) {
  return td.test.empty() ? std::span<const std::size_t>(td.holdout)
                         : std::span<const std::size_t>(td.test);
}

RunResult run_gblend(const MultiHeadNet& net0, const TrainingData& td, const TrainConfig& config,
                     const std::vector<int>& lengths, bool compare_naive) {
  config.validate();
  RunResult res{fresh_state(net0, config), {}, {}};
  record_epoch(res.state, td, res.log);
  const std::size_t fused = net0.fused_index();
  for (int len : lengths) {
    const EstimateResult est = gb_estimate(res.state, td, len, config);
    res.log.schedule.push_back({res.state.epoch, est.weights.weights});
    res.log.weight_records.push_back(
        weight_record_json(res.state.epoch, est.measurements, est.weights));

    std::optional<TrainerState> naive;
    if (compare_naive) {
      naive = res.state;
      train_epochs(*naive, td, BlendWeights::one_hot(net0.head_count(), fused), len, config);
    }
    const int start = res.state.epoch;
    train_epochs(res.state, td, est.weights.weights, len, config, &res.log);
    if (naive) {
      MultiHeadNet blended = res.state.net;
      finetune_fused_head(blended, td, len, config);
      finetune_fused_head(naive->net, td, len, config);
      const auto rows = comparison_rows(td);
      res.comparisons.push_back({start, len,
                                 evaluate_heads(blended, *td.data, rows)[fused].accuracy,
                                 evaluate_heads(naive->net, *td.data, rows)[fused].accuracy});
    }
  }
  return res;
}

}  // namespace

RunResult offline_gblend(const MultiHeadNet& net0, const TrainingData& td,
                         const TrainConfig& config) {
  return run_gblend(net0, td, config, {config.epochs}, false);
}

RunResult online_gblend(const MultiHeadNet& net0, const TrainingData& td, const TrainConfig& config,
                        bool compare_naive) {
  return run_gblend(net0, td, config,
                    super_epoch_lengths(config.epochs, config.warmup, config.super_epoch),
                    compare_naive);
}

std::size_t evaluation_head(const BaselineSpec& spec, const MultiHeadNet& net) {
  return spec.kind == BaselineKind::uni_modal ? spec.modality : net.fused_index();
}

RunResult baseline(const BaselineSpec& spec, const MultiHeadNet& net0, const TrainingData& td,
                   const TrainConfig& config) {
  config.validate();
  const std::size_t heads = net0.head_count();
  const std::size_t fused = net0.fused_index();
  RunResult res{fresh_state(net0, config), {}, {}};
  BlendWeights w = BlendWeights::one_hot(heads, fused);

  switch (spec.kind) {
    case BaselineKind::uni_modal:
      if (spec.modality >= net0.modality_count()) throw ArgumentError("uni_modal: bad modality");
      w = BlendWeights::one_hot(heads, spec.modality);
      break;
    case BaselineKind::naive_joint:
      break;
    case BaselineKind::equal_weights:
      w = BlendWeights::uniform(heads);
      break;
    case BaselineKind::dropout:
      if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate < 1.0)) {
        throw ArgumentError("dropout rate must be in [0, 1)");
      }
      res.state.net.fusion.dropout_rate = spec.dropout_rate;
      res.state.net.fusion.dropout_layer = 0;
      break;
    case BaselineKind::pretrain_finetune:
      for (std::size_t m = 0; m < net0.modality_count(); ++m) {
        TrainConfig pre = config;
        pre.seed = derive_seed(config.seed, "pretrain", m);
        TrainerState uni = fresh_state(net0, pre);
        train_epochs(uni, td, BlendWeights::one_hot(heads, m), config.epochs, pre);
        res.state.net.encoders[m] = uni.net.encoders[m];
        res.state.net.heads[m] = uni.net.heads[m];
      }
      break;
  }
  res.log.schedule.push_back({0, w});
  train_epochs(res.state, td, w, config.epochs, config, &res.log);
  return res;
}

}  // namespace gblend
