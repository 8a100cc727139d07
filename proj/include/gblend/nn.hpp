#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gblend/rng.hpp"
#include "gblend/tensor.hpp"

namespace gblend {

enum class Activation { identity, relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Fully connected layer computing act(x W^T + b) with W stored [out x in].
struct DenseLayer {
  Tensor weights;
  Tensor bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const noexcept { return weights.cols(); }
  std::size_t out_dim() const noexcept { return weights.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Feed-forward stack. When `dropout_rate` > 0, inverted dropout is applied to
/// the input of layer `dropout_layer` during training only.
struct Mlp {
  std::vector<DenseLayer> layers;
  double dropout_rate = 0.0;
  std::size_t dropout_layer = 0;

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
  std::size_t parameter_count() const;

  // Throws DimensionError/ArgumentError if the invariants do not hold.
  void validate() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

/// Builds an MLP over `dims` (input, hidden..., output). Hidden layers use
/// `hidden`, the last layer uses `output`. Weights are drawn uniformly in
/// +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
Mlp make_mlp(std::span<const std::size_t> dims, Activation hidden, Activation output, Rng& rng);

struct MlpCache {
  std::vector<Tensor> inputs;   // input seen by each layer (after dropout)
  std::vector<Tensor> outputs;  // post-activation output of each layer
  Tensor dropout_mask;          // scaled keep mask, empty when dropout was inactive
  std::vector<std::pair<std::size_t, std::size_t>> signature;
};

struct ForwardResult {
  Tensor output;
  MlpCache cache;
};

ForwardResult forward(const Mlp& model, const Tensor& input, bool train_mode, Rng* rng);

struct LayerGrad {
  Tensor weights;
  Tensor bias;
};

/// Gradients mirroring an Mlp's parameter shapes.
struct MlpGrads {
  std::vector<LayerGrad> layers;

  static MlpGrads zeros_like(const Mlp& model);
  void add_scaled(double s, const MlpGrads& other);
};

struct BackwardResult {
  MlpGrads grads;
  Tensor grad_input;  // empty unless requested
};

BackwardResult backward(const Mlp& model, const MlpCache& cache, const Tensor& grad_output,
                        bool need_input_grad = false);

/// Class labels for a batch: either one index per row or a multi-hot matrix.
struct Labels {
  std::vector<std::size_t> index;
  Tensor multi_hot;

  static Labels single(std::vector<std::size_t> idx) { return {std::move(idx), {}}; }
  static Labels multi(Tensor hot) { return {{}, std::move(hot)}; }

  bool is_multilabel() const noexcept { return !multi_hot.empty(); }
  std::size_t size() const noexcept { return is_multilabel() ? multi_hot.rows() : index.size(); }
  Labels subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const Labels&, const Labels&) = default;
};

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
};

/// Mean softmax cross-entropy for single-label rows; mean per-class sigmoid
/// cross-entropy for multi-hot rows. Gradient is w.r.t. the logits.
LossResult softmax_cross_entropy(const Tensor& logits, const Labels& labels);

Tensor softmax(const Tensor& logits);
Tensor sigmoid(const Tensor& logits);

// Central differences of `loss_fn` around `params`, one coordinate at a time.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss_fn,
                                     std::span<const double> params, double step);

// Flat views used by gradient checks and hashing: weights then bias, layer by layer.
std::vector<double> flatten(const Mlp& model);
void unflatten(std::span<const double> flat, Mlp& model);
std::vector<double> flatten(const MlpGrads& grads);

}  // namespace gblend
