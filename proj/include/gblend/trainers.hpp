#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gblend/blend.hpp"
#include "gblend/datagen.hpp"
#include "gblend/fusion.hpp"
#include "gblend/ogr.hpp"
#include "gblend/optim.hpp"
#include "gblend/rng.hpp"

namespace gblend {

struct TrainConfig {
  int epochs = 30;
  int super_epoch = 5;          // n, online re-estimation period
  int warmup = 10;              // length of the first online super-epoch (0: use n)
  OptimizerSpec optimizer;
  std::size_t batch_size = 64;
  MetricKind metric = MetricKind::loss;
  double train_subset_fraction = 0.1;  // T', fixed for the whole run
  double estimation_fraction = 1.0;    // share of T used by the estimation clones
  RngSeed seed{};

  void validate() const;
};

/// Row index sets of a split dataset.
struct TrainingData {
  const Dataset* data = nullptr;
  std::vector<std::size_t> train;         // T
  std::vector<std::size_t> holdout;       // V
  std::vector<std::size_t> train_subset;  // T'
  std::vector<std::size_t> test;

  bool multilabel() const { return data->labels.is_multilabel(); }
};

TrainingData make_training_data(const Dataset& data, const TrainConfig& config);

/// Network plus the optimizer state and epoch counter of a run.
struct TrainerState {
  MultiHeadNet net;
  OptimizerState optimizer;
  int epoch = 0;
};

TrainerState fresh_state(const MultiHeadNet& net, const TrainConfig& config);

struct HeadMetrics {
  double loss = 0.0;
  double accuracy = 0.0;  // top-1, or mAP for multi-label data
};

// Eval-mode loss and accuracy of every head on `rows`.
std::vector<HeadMetrics> evaluate_heads(const MultiHeadNet& net, const Dataset& data,
                                        std::span<const std::size_t> rows);

double mean_average_precision(const Tensor& scores, const Tensor& multi_hot);

struct WeightScheduleEntry {
  int start_epoch = 0;
  BlendWeights weights;
};
using WeightSchedule = std::vector<WeightScheduleEntry>;

/// Per-head learning curves and weight history of a run.
struct RunLog {
  std::vector<std::vector<CheckpointRecord>> heads;
  WeightSchedule schedule;
  nlohmann::json weight_records = nlohmann::json::array();
};

// Appends one CheckpointRecord per head for the state's current epoch.
void record_epoch(const TrainerState& state, const TrainingData& td, RunLog& log);

// Minibatch training on sum_i w_i L_i. With `log`, every finished epoch
// appends one record per head (plus the starting record if the log is empty).
void train_epochs(TrainerState& state, const TrainingData& td, const BlendWeights& w, int epochs,
                  const TrainConfig& config, RunLog* log = nullptr);

struct EstimateResult {
  std::vector<HeadMeasurement> measurements;
  PracticalWeights weights;
};

// Trains a copy of each head's sub-network for `epochs` from the state's
// parameters (fresh optimizer, stream per head) and turns the measured O and
// G into weights. The input state is not modified.
EstimateResult gb_estimate(const TrainerState& state, const TrainingData& td, int epochs,
                           const TrainConfig& config);

struct SuperEpochComparison {
  int start_epoch = 0;
  int length = 0;
  double gblend_val_acc = 0.0;
  double naive_val_acc = 0.0;
};

struct RunResult {
  TrainerState state;
  RunLog log;
  std::vector<SuperEpochComparison> comparisons;
};

RunResult offline_gblend(const MultiHeadNet& net0, const TrainingData& td,
                         const TrainConfig& config);

// With `compare_naive`, every super-epoch is also replayed from the same
// checkpoint with naive (fused-only) weights. Both outcomes are scored after
// finetuning the fused head on frozen encoders for one super-epoch.
RunResult online_gblend(const MultiHeadNet& net0, const TrainingData& td, const TrainConfig& config,
                        bool compare_naive = false);

// Lengths of the online super-epochs: warmup first, then n, last one truncated.
std::vector<int> super_epoch_lengths(int epochs, int warmup, int n);

enum class BaselineKind { uni_modal, naive_joint, equal_weights, dropout, pretrain_finetune };

struct BaselineSpec {
  BaselineKind kind = BaselineKind::naive_joint;
  std::size_t modality = 0;    // uni_modal only
  double dropout_rate = 0.0;   // dropout only
};

RunResult baseline(const BaselineSpec& spec, const MultiHeadNet& net0, const TrainingData& td,
                   const TrainConfig& config);

// The head that serves predictions for a run kind: the modality head for
// uni-modal runs, the fused head otherwise.
std::size_t evaluation_head(const BaselineSpec& spec, const MultiHeadNet& net);

}  // namespace gblend
