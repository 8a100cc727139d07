#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gblend/datagen.hpp"
#include "gblend/fusion.hpp"
#include "gblend/oracle.hpp"
#include "gblend/trainers.hpp"

namespace gblend {

enum class TrainMode { uni, naive, equal, dropout, pretrain, offline_gblend, online_gblend };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct OracleConfig {
  std::vector<std::size_t> ks{2, 3};  // estimator counts, cycled over scenarios
  std::size_t dimension = 32;
  std::size_t trials = 100000;
  std::size_t scenarios = 20;
  std::size_t correlated_scenarios = 10;
  double grid_step = 0.01;
  double taylor_eta = 1e-3;
  std::size_t taylor_dimension = 4;
  std::optional<std::vector<double>> inject_weights;
};

/// One experiment, read from a single JSON document. Unknown keys are errors.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> dataset_path;
  std::optional<SyntheticSpec> synthetic;
  SplitFractions split;
  FusionArch arch;  // input_dims and class_count come from the dataset
  TrainConfig train;
  TrainMode mode = TrainMode::naive;
  std::size_t modality = 0;      // uni mode
  double dropout_rate = 0.2;     // dropout mode
  std::filesystem::path output_dir = "run";
  OracleConfig oracle;
};

ExperimentConfig parse_experiment(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& file);

// Relative output directories are placed under $GBLEND_OUTPUT_ROOT when set.
std::filesystem::path resolve_output(const std::filesystem::path& dir);

// Loads `dataset_path` or generates and splits the synthetic spec.
Dataset resolve_dataset(const ExperimentConfig& cfg);

// Writes the dataset directory; returns the manifest digest.
std::string cmd_gen_data(const ExperimentConfig& cfg);

struct TrainOutputs {
  std::filesystem::path run_dir;
  nlohmann::json summary;
};

TrainOutputs cmd_train(const ExperimentConfig& cfg);

// Runs GB_Estimate for `epochs` from a checkpoint; returns the weight record.
nlohmann::json cmd_estimate_weights(const ExperimentConfig& cfg,
                                    const std::filesystem::path& checkpoint, int epochs);

struct OracleOutputs {
  nlohmann::json report;
  bool pass = false;
};

OracleOutputs cmd_oracle(const OracleConfig& cfg, std::uint64_t seed);

struct ReportOutputs {
  std::string csv;
  std::string text;
};

// Throws std::runtime_error naming the directory when a summary is missing.
ReportOutputs cmd_report(const std::vector<std::filesystem::path>& run_dirs);

// Per-epoch learning curve rows: epoch,head,train_loss,val_loss,train_acc,val_acc,O,G
std::string curves_csv(const RunLog& log, MetricKind kind);

nlohmann::json summarize_run(const RunResult& run, const TrainingData& td,
                             std::size_t eval_head, const TrainConfig& config);

}  // namespace gblend
