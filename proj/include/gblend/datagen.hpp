#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gblend/fusion.hpp"
#include "gblend/nn.hpp"
#include "gblend/rng.hpp"

namespace gblend {

/// Generation profile of one modality. Row features are laid out as
/// [informative | bait | noise]:
///  - informative: class mean (norm `snr`) plus unit Gaussian noise; with
///    probability `label_noise` the mean of a different class is used;
///  - bait: per-row Gaussian of scale `bait_strength`, unrelated to the label;
///    lets a model memorize training rows;
///  - noise: unit Gaussian.
struct ModalitySpec {
  std::string name;
  std::size_t feature_dim = 16;
  std::size_t informative_dim = 8;
  double snr = 2.0;
  double label_noise = 0.0;
  std::size_t bait_dim = 0;
  double bait_strength = 1.0;

  void validate() const;
};

struct SyntheticSpec {
  std::size_t class_count = 10;
  std::size_t rows = 1000;
  std::vector<ModalitySpec> modalities;
  bool multilabel = false;
  std::vector<double> prevalence;  // per-class label probability, multi-label only
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const ModalitySpec& m);
nlohmann::json to_json(const SyntheticSpec& s);
// Rejects unknown keys; `path` prefixes field names in ConfigError messages.
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j, const std::string& path = "spec");

enum class Split : std::uint8_t { train = 0, holdout = 1, test = 2, unused = 3 };

struct Dataset {
  std::vector<std::string> modality_names;
  std::vector<Tensor> modalities;  // [rows x dim_m]
  Labels labels;
  std::vector<Split> split;
  std::size_t class_count = 0;

  std::size_t rows() const { return labels.size(); }
  std::size_t modality_count() const { return modalities.size(); }
  std::vector<std::size_t> input_dims() const;
  std::vector<std::size_t> indices(Split s) const;
  Batch batch(std::span<const std::size_t> rows) const;
  // Primary class of a row: its label, or the lowest active class for multi-hot rows.
  std::size_t primary_class(std::size_t row) const;
  std::vector<std::size_t> class_volumes() const;

  void validate() const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

Dataset gen_multimodal(const SyntheticSpec& spec);

struct SplitFractions {
  double train = 0.8;
  double holdout = 0.1;
  double test = 0.1;

  void validate() const;
};

// Stratified by primary class; rows left over when fractions sum below one are
// tagged `unused`.
Dataset split(const Dataset& data, const SplitFractions& fractions, RngSeed seed);

// Seeded fixed-size subsample, order preserved.
std::vector<std::size_t> subsample(std::span<const std::size_t> rows, double fraction,
                                   RngSeed seed);

struct BalanceResult {
  Dataset dataset;
  std::vector<std::size_t> accepted_rows;  // source row ids, ascending
  std::vector<std::size_t> kept_classes;
};

/// Multi-label sub-sampling and balancing.
///  1. drop labels whose source volume is below `min_volume`;
///  2. Fisher-Yates shuffle of the rows with rng.below();
///  3. for each row, take its kept class c with the smallest output volume V'_c
///     (lowest id on ties), draw r = rng.below(V_c - V'_c) and keep the row iff
///     r < target_volume - V'_c.
/// Rows with no kept label are skipped without a draw. Removed classes keep
/// their column but it is zeroed.
BalanceResult balance_multilabel(const Dataset& data, std::size_t min_volume,
                                 std::size_t target_volume, RngSeed seed);

/// On-disk dataset: manifest.json plus raw little-endian arrays.
inline constexpr int kDatasetFormatVersion = 1;
void save_dataset(const Dataset& data, const std::filesystem::path& dir,
                  const nlohmann::json& manifest_extra = {});
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace gblend
