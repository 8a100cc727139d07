#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "gblend/nn.hpp"
#include "gblend/optim.hpp"
#include "gblend/rng.hpp"
#include "gblend/tensor.hpp"

namespace gblend {

/// Layer widths of a late-fusion network.
struct FusionArch {
  std::vector<std::size_t> input_dims;      // one per modality
  std::vector<std::size_t> encoder_hidden;  // shared hidden widths for every encoder
  std::size_t feature_dim = 32;             // n_i, identical across modalities
  std::vector<std::size_t> head_hidden;     // per-modality classifier hidden widths
  std::size_t fusion_hidden = 32;           // n in (sum n_i) -> n -> n -> C
  std::size_t class_count = 10;
  double fusion_dropout = 0.0;              // dropout on the concatenated features

  std::size_t modality_count() const noexcept { return input_dims.size(); }
  void validate() const;
};

/// k encoders, k per-modality heads and one head over the concatenated features.
struct MultiHeadNet {
  std::vector<Mlp> encoders;
  std::vector<Mlp> heads;
  Mlp fusion;
  std::size_t class_count = 0;

  std::size_t modality_count() const noexcept { return encoders.size(); }
  std::size_t head_count() const noexcept { return encoders.size() + 1; }
  std::size_t fused_index() const noexcept { return encoders.size(); }
  std::size_t feature_offset(std::size_t modality) const;

  void validate() const;
  friend bool operator==(const MultiHeadNet&, const MultiHeadNet&) = default;
};

MultiHeadNet make_multihead(const FusionArch& arch, RngSeed seed);

/// Loss weights w_1..w_{k+1}; the last entry belongs to the fused head.
class BlendWeights {
 public:
  BlendWeights() = default;
  // Throws ArgumentError unless every entry is >= 0 and the sum is 1 within 1e-9.
  explicit BlendWeights(std::vector<double> w);

  static BlendWeights one_hot(std::size_t heads, std::size_t index);
  static BlendWeights uniform(std::size_t heads);

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t i) const noexcept { return w_[i]; }
  const std::vector<double>& values() const noexcept { return w_; }

  friend bool operator==(const BlendWeights&, const BlendWeights&) = default;

 private:
  std::vector<double> w_;
};

/// Row-aligned per-modality inputs and their labels.
struct Batch {
  std::vector<Tensor> inputs;
  Labels labels;

  std::size_t rows() const { return labels.size(); }
  void validate(std::size_t modalities) const;
};

struct MultiHeadForward {
  std::vector<Tensor> logits;  // k+1 entries; empty for heads that were not evaluated
  std::vector<std::optional<ForwardResult>> encoder;
  std::vector<std::optional<ForwardResult>> head;
  std::optional<ForwardResult> fusion;
};

// `active` selects which heads to evaluate (all when empty). Encoders run only
// when their own head or the fused head is active. Only the fusion head draws
// from `rng` (dropout).
MultiHeadForward forward_all_heads(const MultiHeadNet& net, const Batch& batch, bool train_mode,
                                   Rng* rng, std::span<const bool> active = {});

struct BlendedLoss {
  double total = 0.0;
  std::vector<double> per_head;      // NaN for heads that were not evaluated
  std::vector<Tensor> grad_logits;   // unweighted dL_i/dlogits_i
};

// L_blend = sum_i w_i L_i. Heads with w_i == 0 may be absent from `logits`.
BlendedLoss blended_loss(std::span<const Tensor> logits, const Labels& labels,
                         const BlendWeights& w);

struct NetGrads {
  std::vector<MlpGrads> encoders;
  std::vector<MlpGrads> heads;
  MlpGrads fusion;

  static NetGrads zeros_like(const MultiHeadNet& net);
  void add_scaled(double s, const NetGrads& other);
};

// Gradient of sum_i w_i L_i, accumulated at the feature level so each encoder
// is back-propagated once.
NetGrads backward_blended(const MultiHeadNet& net, const MultiHeadForward& fwd,
                          std::span<const Tensor> grad_logits, const BlendWeights& w);

// Gradient of a single head's loss through its own sub-network only.
NetGrads backward_head(const MultiHeadNet& net, const MultiHeadForward& fwd, std::size_t head,
                       const Tensor& grad_logits);

// Fused-head class scores (softmax, or per-class sigmoid for multi-label), eval mode.
Tensor predict(const MultiHeadNet& net, const Batch& batch, bool multilabel = false);

// Zeroes the fusion head's first-layer columns for every modality except `modality`.
MultiHeadNet mute_except(const MultiHeadNet& net, std::size_t modality);

std::vector<ParamRef> param_refs(MultiHeadNet& net, const NetGrads& grads);

std::vector<double> flatten(const MultiHeadNet& net);
void unflatten(std::span<const double> flat, MultiHeadNet& net);
std::vector<double> flatten(const NetGrads& grads);

nlohmann::json net_to_json(const MultiHeadNet& net);
MultiHeadNet net_from_json(const nlohmann::json& j);

}  // namespace gblend
