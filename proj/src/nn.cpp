#include "gblend/nn.hpp"

#include <algorithm>
#include <cmath>

#include "gblend/errors.hpp"

namespace gblend {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw ArgumentError("unknown activation '" + s + "'");
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

void Mlp::validate() const {
  if (layers.empty()) throw ArgumentError("mlp has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weights.rank() != 2 || l.bias.rank() != 1 || l.bias.size() != l.out_dim()) {
      throw DimensionError("layer " + std::to_string(i) + ": weights " +
                           shape_string(l.weights.shape()) + " inconsistent with bias " +
                           shape_string(l.bias.shape()));
    }
    if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) {
      throw DimensionError("layer " + std::to_string(i) + " expects " +
                           std::to_string(l.in_dim()) + " inputs but layer " +
                           std::to_string(i - 1) + " emits " +
                           std::to_string(layers[i - 1].out_dim()));
    }
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ArgumentError("dropout rate must be in [0, 1)");
  }
  if (dropout_layer >= layers.size()) throw ArgumentError("dropout layer index out of range");
}

Mlp make_mlp(std::span<const std::size_t> dims, Activation hidden, Activation output, Rng& rng) {
  if (dims.size() < 2) throw ArgumentError("make_mlp needs at least input and output dims");
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t in = dims[i], out = dims[i + 1];
    if (in == 0 || out == 0) throw ArgumentError("make_mlp: zero-width layer");
    DenseLayer l;
    l.weights = Tensor::matrix(out, in);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : l.weights.values()) w = rng.uniform(-limit, limit);
    l.bias = Tensor({out});
    l.activation = (i + 2 == dims.size()) ? output : hidden;
    m.layers.push_back(std::move(l));
  }
  return m;
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> signature_of(const Mlp& m) {
  std::vector<std::pair<std::size_t, std::size_t>> sig;
  sig.reserve(m.layers.size());
  for (const auto& l : m.layers) sig.emplace_back(l.in_dim(), l.out_dim());
  return sig;
}

}  // namespace

ForwardResult forward(const Mlp& model, const Tensor& input, bool train_mode, Rng* rng) {
  if (model.layers.empty()) throw ArgumentError("forward: empty model");
  if (input.rank() != 2 || input.cols() != model.in_dim()) {
    throw DimensionError("forward: input " + shape_string(input.shape()) + " but model expects " +
                         std::to_string(model.in_dim()) + " features");
  }
  const bool dropout = train_mode && model.dropout_rate > 0.0;
  if (dropout && rng == nullptr) throw ContractError("forward: dropout requires an rng stream");

  ForwardResult r;
  r.cache.signature = signature_of(model);
  r.cache.inputs.reserve(model.layers.size());
  r.cache.outputs.reserve(model.layers.size());

  Tensor x = input;
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const DenseLayer& layer = model.layers[li];
    if (dropout && li == model.dropout_layer) {
      const double keep = 1.0 - model.dropout_rate;
      Tensor mask(x.shape());
      for (double& v : mask.values()) v = rng->uniform() < keep ? 1.0 / keep : 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
      r.cache.dropout_mask = std::move(mask);
    }
    Tensor z = matmul_nt(x, layer.weights);
    const std::size_t n = z.rows(), m = z.cols();
    for (std::size_t i = 0; i < n; ++i) {
      double* zi = z.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) {
        zi[j] += layer.bias[j];
        if (layer.activation == Activation::relu && zi[j] < 0.0) zi[j] = 0.0;
      }
    }
    r.cache.inputs.push_back(std::move(x));
    x = z;
    r.cache.outputs.push_back(std::move(z));
  }
  r.output = std::move(x);
  return r;
}

MlpGrads MlpGrads::zeros_like(const Mlp& model) {
  MlpGrads g;
  for (const auto& l : model.layers) {
    g.layers.push_back({Tensor(l.weights.shape()), Tensor(l.bias.shape())});
  }
  return g;
}

void MlpGrads::add_scaled(double s, const MlpGrads& other) {
  if (other.layers.size() != layers.size()) throw DimensionError("add_scaled: layer count");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    axpy(s, other.layers[i].weights, layers[i].weights);
    axpy(s, other.layers[i].bias, layers[i].bias);
  }
}

BackwardResult backward(const Mlp& model, const MlpCache& cache, const Tensor& grad_output,
                        bool need_input_grad) {
  if (cache.signature != signature_of(model) || cache.inputs.size() != model.layers.size()) {
    throw ContractError("backward: cache was produced by a different model");
  }
  if (!grad_output.same_shape(cache.outputs.back())) {
    throw DimensionError("backward: grad_output " + shape_string(grad_output.shape()) +
                         " vs output " + shape_string(cache.outputs.back().shape()));
  }
  BackwardResult r;
  r.grads.layers.resize(model.layers.size());
  Tensor g = grad_output;
  for (std::size_t li = model.layers.size(); li-- > 0;) {
    const DenseLayer& layer = model.layers[li];
    if (layer.activation == Activation::relu) {
      const Tensor& out = cache.outputs[li];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (out[i] <= 0.0) g[i] = 0.0;
      }
    }
    LayerGrad& lg = r.grads.layers[li];
    lg.weights = matmul_tn(g, cache.inputs[li]);
    lg.bias = Tensor({layer.out_dim()});
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double* gi = g.data() + i * g.cols();
      for (std::size_t j = 0; j < g.cols(); ++j) lg.bias[j] += gi[j];
    }
    if (li > 0 || need_input_grad) {
      g = matmul_nn(g, layer.weights);
      if (li == model.dropout_layer && !cache.dropout_mask.empty()) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= cache.dropout_mask[i];
      }
    }
  }
  if (need_input_grad) r.grad_input = std::move(g);
  return r;
}

Labels Labels::subset(std::span<const std::size_t> rows) const {
  if (is_multilabel()) return Labels::multi(multi_hot.gather_rows(rows));
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(index.at(r));
  return Labels::single(std::move(out));
}

Tensor softmax(const Tensor& logits) {
  Tensor p = logits;
  const std::size_t n = p.rows(), c = p.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = p.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) row[j] /= s;
  }
  return p;
}

Tensor sigmoid(const Tensor& logits) {
  Tensor p = logits;
  for (double& v : p.values()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return p;
}

LossResult softmax_cross_entropy(const Tensor& logits, const Labels& labels) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be a matrix");
  const std::size_t n = logits.rows(), c = logits.cols();
  if (n == 0) throw ArgumentError("cross_entropy: empty batch");
  if (labels.size() != n) throw DimensionError("cross_entropy: label count != batch size");

  LossResult r;
  if (labels.is_multilabel()) {
    if (labels.multi_hot.cols() != c) throw DimensionError("cross_entropy: multi-hot width");
    const double scale = 1.0 / static_cast<double>(n * c);
    r.grad_logits = sigmoid(logits);
    double total = 0.0;
    for (std::size_t i = 0; i < n * c; ++i) {
      const double z = logits[i], y = labels.multi_hot[i];
      total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      r.grad_logits[i] = (r.grad_logits[i] - y) * scale;
    }
    r.loss = total * scale;
    return r;
  }

  r.grad_logits = softmax(logits);
  const double scale = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = labels.index[i];
    if (y >= c) throw ArgumentError("cross_entropy: label " + std::to_string(y) + " >= classes");
    const double* z = logits.data() + i * c;
    const double mx = *std::max_element(z, z + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(z[j] - mx);
    total += mx + std::log(s) - z[y];
    double* g = r.grad_logits.data() + i * c;
    g[y] -= 1.0;
    for (std::size_t j = 0; j < c; ++j) g[j] *= scale;
  }
  r.loss = total * scale;
  return r;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& loss_fn,
                                     std::span<const double> params, double step) {
  if (!(step > 0.0)) throw ArgumentError("finite_diff_grad: step must be positive");
  std::vector<double> theta(params.begin(), params.end());
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double orig = theta[i];
    theta[i] = orig + step;
    const double up = loss_fn(theta);
    theta[i] = orig - step;
    const double down = loss_fn(theta);
    theta[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

std::vector<double> flatten(const Mlp& model) {
  std::vector<double> out;
  out.reserve(model.parameter_count());
  for (const auto& l : model.layers) {
    out.insert(out.end(), l.weights.values().begin(), l.weights.values().end());
    out.insert(out.end(), l.bias.values().begin(), l.bias.values().end());
  }
  return out;
}

void unflatten(std::span<const double> flat, Mlp& model) {
  if (flat.size() != model.parameter_count()) throw DimensionError("unflatten: size mismatch");
  std::size_t k = 0;
  for (auto& l : model.layers) {
    for (double& v : l.weights.values()) v = flat[k++];
    for (double& v : l.bias.values()) v = flat[k++];
  }
}

std::vector<double> flatten(const MlpGrads& grads) {
  std::vector<double> out;
  for (const auto& l : grads.layers) {
    out.insert(out.end(), l.weights.values().begin(), l.weights.values().end());
    out.insert(out.end(), l.bias.values().begin(), l.bias.values().end());
  }
  return out;
}

}  // namespace gblend
