#include "gblend/fusion.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "gblend/errors.hpp"
#include "gblend/serialize.hpp"

namespace gblend {

using nlohmann::json;

void FusionArch::validate() const {
  if (input_dims.empty()) throw ArgumentError("architecture needs at least one modality");
  for (std::size_t d : input_dims) {
    if (d == 0) throw ArgumentError("modality input dim must be positive");
  }
  if (feature_dim == 0 || fusion_hidden == 0) throw ArgumentError("zero-width layer");
  if (class_count < 2) throw ArgumentError("class_count must be at least 2");
  if (!(fusion_dropout >= 0.0 && fusion_dropout < 1.0)) {
    throw ArgumentError("fusion_dropout must be in [0, 1)");
  }
}

std::size_t MultiHeadNet::feature_offset(std::size_t modality) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < modality; ++i) off += encoders[i].out_dim();
  return off;
}

void MultiHeadNet::validate() const {
  if (encoders.empty() || encoders.size() != heads.size()) {
    throw DimensionError("multi-head net needs k encoders and k heads");
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < encoders.size(); ++i) {
    encoders[i].validate();
    heads[i].validate();
    if (heads[i].in_dim() != encoders[i].out_dim()) {
      throw DimensionError("head " + std::to_string(i) + " input != encoder feature dim");
    }
    if (heads[i].out_dim() != class_count) {
      throw DimensionError("head " + std::to_string(i) + " does not emit class_count logits");
    }
    total += encoders[i].out_dim();
  }
  fusion.validate();
  if (fusion.in_dim() != total) throw DimensionError("fusion head input != sum of feature dims");
  if (fusion.out_dim() != class_count) throw DimensionError("fusion head logits != class_count");
}

MultiHeadNet make_multihead(const FusionArch& arch, RngSeed seed) {
  arch.validate();
  MultiHeadNet net;
  net.class_count = arch.class_count;
  const std::size_t k = arch.modality_count();
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<std::size_t> dims{arch.input_dims[i]};
    dims.insert(dims.end(), arch.encoder_hidden.begin(), arch.encoder_hidden.end());
    dims.push_back(arch.feature_dim);
    Rng enc_rng(derive_seed(seed, "encoder", i));
    net.encoders.push_back(make_mlp(dims, Activation::relu, Activation::relu, enc_rng));

    std::vector<std::size_t> hdims{arch.feature_dim};
    hdims.insert(hdims.end(), arch.head_hidden.begin(), arch.head_hidden.end());
    hdims.push_back(arch.class_count);
    Rng head_rng(derive_seed(seed, "head", i));
    net.heads.push_back(make_mlp(hdims, Activation::relu, Activation::identity, head_rng));
  }
  const std::size_t fdims[] = {arch.feature_dim * k, arch.fusion_hidden, arch.fusion_hidden,
                               arch.class_count};
  Rng fusion_rng(derive_seed(seed, "fusion"));
  net.fusion = make_mlp(fdims, Activation::relu, Activation::identity, fusion_rng);
  net.fusion.dropout_rate = arch.fusion_dropout;
  net.fusion.dropout_layer = 0;
  return net;
}

BlendWeights::BlendWeights(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) throw ArgumentError("blend weights are empty");
  double sum = 0.0;
  for (double v : w_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("blend weights must be >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("blend weights must sum to 1");
}

BlendWeights BlendWeights::one_hot(std::size_t heads, std::size_t index) {
  if (index >= heads) throw ArgumentError("one_hot index out of range");
  std::vector<double> w(heads, 0.0);
  w[index] = 1.0;
  return BlendWeights(std::move(w));
}

BlendWeights BlendWeights::uniform(std::size_t heads) {
  return BlendWeights(std::vector<double>(heads, 1.0 / static_cast<double>(heads)));
}

void Batch::validate(std::size_t modalities) const {
  if (inputs.size() != modalities) {
    throw DimensionError("batch has " + std::to_string(inputs.size()) + " modalities, net has " +
                         std::to_string(modalities));
  }
  for (const Tensor& x : inputs) {
    if (x.rows() != labels.size()) throw DimensionError("modality row counts differ from labels");
  }
}

MultiHeadForward forward_all_heads(const MultiHeadNet& net, const Batch& batch, bool train_mode,
                                   Rng* rng, std::span<const bool> active) {
  const std::size_t k = net.modality_count();
  batch.validate(k);
  if (!active.empty() && active.size() != k + 1) {
    throw DimensionError("active mask must cover k+1 heads");
  }
  auto is_active = [&](std::size_t h) { return active.empty() || active[h]; };
  const bool fused = is_active(k);

  MultiHeadForward out;
  out.logits.resize(k + 1);
  out.encoder.resize(k);
  out.head.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (!fused && !is_active(i)) continue;
    out.encoder[i] = forward(net.encoders[i], batch.inputs[i], train_mode, nullptr);
    if (is_active(i)) {
      out.head[i] = forward(net.heads[i], out.encoder[i]->output, train_mode, nullptr);
      out.logits[i] = out.head[i]->output;
    }
  }
  if (fused) {
    std::vector<Tensor> feats;
    feats.reserve(k);
    for (std::size_t i = 0; i < k; ++i) feats.push_back(out.encoder[i]->output);
    out.fusion = forward(net.fusion, hconcat(feats), train_mode, rng);
    out.logits[k] = out.fusion->output;
  }
  return out;
}

BlendedLoss blended_loss(std::span<const Tensor> logits, const Labels& labels,
                         const BlendWeights& w) {
  if (logits.size() != w.size()) {
    throw ArgumentError("blended_loss: " + std::to_string(w.size()) + " weights for " +
                        std::to_string(logits.size()) + " heads");
  }
  BlendedLoss r;
  r.per_head.assign(logits.size(), std::numeric_limits<double>::quiet_NaN());
  r.grad_logits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i].empty()) {
      if (w[i] != 0.0) throw ArgumentError("blended_loss: weighted head was not evaluated");
      continue;
    }
    LossResult lr = softmax_cross_entropy(logits[i], labels);
    r.per_head[i] = lr.loss;
    r.grad_logits[i] = std::move(lr.grad_logits);
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (w[i] != 0.0) r.total += w[i] * r.per_head[i];
  }
  return r;
}

NetGrads NetGrads::zeros_like(const MultiHeadNet& net) {
  NetGrads g;
  for (const auto& e : net.encoders) g.encoders.push_back(MlpGrads::zeros_like(e));
  for (const auto& h : net.heads) g.heads.push_back(MlpGrads::zeros_like(h));
  g.fusion = MlpGrads::zeros_like(net.fusion);
  return g;
}

void NetGrads::add_scaled(double s, const NetGrads& other) {
  for (std::size_t i = 0; i < encoders.size(); ++i) encoders[i].add_scaled(s, other.encoders[i]);
  for (std::size_t i = 0; i < heads.size(); ++i) heads[i].add_scaled(s, other.heads[i]);
  fusion.add_scaled(s, other.fusion);
}

namespace {

void require_forward(const MultiHeadForward& fwd, std::size_t head, std::size_t k) {
  const bool ok = head == k ? fwd.fusion.has_value() : fwd.head[head].has_value();
  if (!ok) throw ContractError("head " + std::to_string(head) + " was not evaluated in forward");
}

// Splits the fusion head's input gradient into per-modality feature gradients.
void scatter_fused(const MultiHeadNet& net, const Tensor& grad_concat,
                   std::vector<Tensor>& feature_grads) {
  const std::size_t n = grad_concat.rows(), total = grad_concat.cols();
  std::size_t off = 0;
  for (std::size_t i = 0; i < net.modality_count(); ++i) {
    const std::size_t d = net.encoders[i].out_dim();
    if (feature_grads[i].empty()) feature_grads[i] = Tensor::matrix(n, d);
    for (std::size_t r = 0; r < n; ++r) {
      const double* src = grad_concat.data() + r * total + off;
      double* dst = feature_grads[i].data() + r * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
    off += d;
  }
}

}  // namespace

NetGrads backward_blended(const MultiHeadNet& net, const MultiHeadForward& fwd,
                          std::span<const Tensor> grad_logits, const BlendWeights& w) {
  const std::size_t k = net.modality_count();
  if (w.size() != k + 1 || grad_logits.size() != k + 1) {
    throw ArgumentError("backward_blended: expected k+1 weights and logit gradients");
  }
  NetGrads g = NetGrads::zeros_like(net);
  std::vector<Tensor> feature_grads(k);

  for (std::size_t i = 0; i < k; ++i) {
    if (w[i] == 0.0) continue;
    require_forward(fwd, i, k);
    Tensor scaled = grad_logits[i];
    scaled *= w[i];
    BackwardResult b = backward(net.heads[i], fwd.head[i]->cache, scaled, true);
    g.heads[i] = std::move(b.grads);
    feature_grads[i] = std::move(b.grad_input);
  }
  if (w[k] != 0.0) {
    require_forward(fwd, k, k);
    Tensor scaled = grad_logits[k];
    scaled *= w[k];
    BackwardResult b = backward(net.fusion, fwd.fusion->cache, scaled, true);
    g.fusion = std::move(b.grads);
    scatter_fused(net, b.grad_input, feature_grads);
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (feature_grads[i].empty()) continue;
    g.encoders[i] = backward(net.encoders[i], fwd.encoder[i]->cache, feature_grads[i]).grads;
  }
  return g;
}

NetGrads backward_head(const MultiHeadNet& net, const MultiHeadForward& fwd, std::size_t head,
                       const Tensor& grad_logits) {
  const std::size_t k = net.modality_count();
  if (head > k) throw ArgumentError("backward_head: head index out of range");
  require_forward(fwd, head, k);
  NetGrads g = NetGrads::zeros_like(net);
  if (head < k) {
    BackwardResult b = backward(net.heads[head], fwd.head[head]->cache, grad_logits, true);
    g.heads[head] = std::move(b.grads);
    g.encoders[head] = backward(net.encoders[head], fwd.encoder[head]->cache, b.grad_input).grads;
    return g;
  }
  BackwardResult b = backward(net.fusion, fwd.fusion->cache, grad_logits, true);
  g.fusion = std::move(b.grads);
  std::vector<Tensor> feature_grads(k);
  scatter_fused(net, b.grad_input, feature_grads);
  for (std::size_t i = 0; i < k; ++i) {
    g.encoders[i] = backward(net.encoders[i], fwd.encoder[i]->cache, feature_grads[i]).grads;
  }
  return g;
}

Tensor predict(const MultiHeadNet& net, const Batch& batch, bool multilabel) {
  const std::size_t k = net.modality_count();
  auto active = std::make_unique<bool[]>(k + 1);
  active[k] = true;
  MultiHeadForward f =
      forward_all_heads(net, batch, false, nullptr, std::span<const bool>(active.get(), k + 1));
  return multilabel ? sigmoid(f.logits[k]) : softmax(f.logits[k]);
}

MultiHeadNet mute_except(const MultiHeadNet& net, std::size_t modality) {
  if (modality >= net.modality_count()) throw ArgumentError("mute_except: invalid modality");
  MultiHeadNet out = net;
  Tensor& w = out.fusion.layers.front().weights;
  const std::size_t keep_lo = net.feature_offset(modality);
  const std::size_t keep_hi = keep_lo + net.encoders[modality].out_dim();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      if (c < keep_lo || c >= keep_hi) w(r, c) = 0.0;
    }
  }
  return out;
}

namespace {

void append_refs(std::vector<ParamRef>& refs, const std::string& prefix, Mlp& m,
                 const MlpGrads& g) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const std::string base = prefix + ".layer" + std::to_string(l);
    refs.push_back({base + ".weights", &m.layers[l].weights, &g.layers[l].weights});
    refs.push_back({base + ".bias", &m.layers[l].bias, &g.layers[l].bias});
  }
}

}  // namespace

std::vector<ParamRef> param_refs(MultiHeadNet& net, const NetGrads& grads) {
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < net.encoders.size(); ++i) {
    append_refs(refs, "encoder" + std::to_string(i), net.encoders[i], grads.encoders[i]);
  }
  for (std::size_t i = 0; i < net.heads.size(); ++i) {
    append_refs(refs, "head" + std::to_string(i), net.heads[i], grads.heads[i]);
  }
  append_refs(refs, "fusion", net.fusion, grads.fusion);
  return refs;
}

std::vector<double> flatten(const MultiHeadNet& net) {
  std::vector<double> out;
  auto add = [&](const Mlp& m) {
    auto f = flatten(m);
    out.insert(out.end(), f.begin(), f.end());
  };
  for (const auto& e : net.encoders) add(e);
  for (const auto& h : net.heads) add(h);
  add(net.fusion);
  return out;
}

void unflatten(std::span<const double> flat, MultiHeadNet& net) {
  std::size_t off = 0;
  auto take = [&](Mlp& m) {
    const std::size_t n = m.parameter_count();
    if (off + n > flat.size()) throw DimensionError("unflatten: too few values");
    unflatten(flat.subspan(off, n), m);
    off += n;
  };
  for (auto& e : net.encoders) take(e);
  for (auto& h : net.heads) take(h);
  take(net.fusion);
  if (off != flat.size()) throw DimensionError("unflatten: too many values");
}

std::vector<double> flatten(const NetGrads& grads) {
  std::vector<double> out;
  auto add = [&](const MlpGrads& m) {
    auto f = flatten(m);
    out.insert(out.end(), f.begin(), f.end());
  };
  for (const auto& e : grads.encoders) add(e);
  for (const auto& h : grads.heads) add(h);
  add(grads.fusion);
  return out;
}

json net_to_json(const MultiHeadNet& net) {
  json enc = json::array(), heads = json::array();
  for (const auto& e : net.encoders) enc.push_back(mlp_to_json(e));
  for (const auto& h : net.heads) heads.push_back(mlp_to_json(h));
  return {{"format", "gblend-checkpoint"},
          {"version", kCheckpointVersion},
          {"class_count", net.class_count},
          {"encoders", std::move(enc)},
          {"heads", std::move(heads)},
          {"fusion", mlp_to_json(net.fusion)}};
}

MultiHeadNet net_from_json(const json& j) {
  if (j.value("format", "") != "gblend-checkpoint") throw ArgumentError("not a checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw ArgumentError("unsupported checkpoint version");
  }
  MultiHeadNet net;
  net.class_count = j.at("class_count").get<std::size_t>();
  for (const auto& e : j.at("encoders")) net.encoders.push_back(mlp_from_json(e));
  for (const auto& h : j.at("heads")) net.heads.push_back(mlp_from_json(h));
  net.fusion = mlp_from_json(j.at("fusion"));
  net.validate();
  return net;
}

}  // namespace gblend
