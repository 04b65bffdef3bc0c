#pragma once

// The 1-D CNN arrhythmia classifier: layer stack description, length
// propagation, forward/backward passes, seeded training and the
// full-precision checkpoint format.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "alq/binary_io.hpp"
#include "alq/error.hpp"
#include "alq/parallel.hpp"
#include "alq/signal_data.hpp"

namespace alq {

enum class LayerKind : std::uint8_t { conv1d = 0, maxpool1d = 1, flatten = 2, dense = 3, softmax_dense = 4 };
enum class Activation : std::uint8_t { none = 0, relu = 1 };

struct LayerSpec {
  LayerKind kind = LayerKind::flatten;
  int kernel = 1;
  int units = 0;  // output channels (conv) or output width (dense)
  int stride = 1;
  int padding = 0;
  Activation activation = Activation::none;
  float dropout_rate = 0.0f;
  std::string name;

  bool parameterized() const noexcept {
    return kind == LayerKind::conv1d || kind == LayerKind::dense || kind == LayerKind::softmax_dense;
  }
  bool operator==(const LayerSpec&) const = default;
};

/// Activation shape between layers. Dense outputs are {width, 1}.
struct Shape {
  int channels = 0;
  int length = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(channels) * static_cast<std::size_t>(length); }
  bool operator==(const Shape&) const = default;
};

/// floor((L + 2p - k) / s) + 1; throws when the kernel exceeds the padded input.
inline int out_length(int length, int kernel, int stride, int padding) {
  if (kernel < 1 || stride < 1 || padding < 0) throw ShapeError("kernel and stride must be >= 1, padding >= 0");
  if (length + 2 * padding < kernel) {
    throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(length + 2 * padding));
  }
  return (length + 2 * padding - kernel) / stride + 1;
}

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  int input_length = kFragmentLength;
  int input_channels = 1;
  int class_count = kClassCount;

  /// shapes()[0] is the input; shapes()[l + 1] is the output of layer l.
  std::vector<Shape> shapes() const {
    std::vector<Shape> out{{input_channels, input_length}};
    for (const auto& l : layers) {
      const Shape in = out.back();
      Shape next;
      switch (l.kind) {
        case LayerKind::conv1d:
          if (l.units < 1) throw ShapeError(l.name + ": units must be >= 1");
          next = {l.units, out_length(in.length, l.kernel, l.stride, l.padding)};
          break;
        case LayerKind::maxpool1d:
          next = {in.channels, out_length(in.length, l.kernel, l.stride, 0)};
          break;
        case LayerKind::flatten:
          next = {static_cast<int>(in.size()), 1};
          break;
        case LayerKind::dense:
        case LayerKind::softmax_dense:
          if (l.units < 1) throw ShapeError(l.name + ": units must be >= 1");
          next = {l.units, 1};
          break;
      }
      if (next.length < 1 || next.channels < 1) throw ShapeError(l.name + ": empty output");
      out.push_back(next);
    }
    return out;
  }

  void validate() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    for (const auto& l : layers) {
      if (l.dropout_rate < 0.0 || l.dropout_rate >= 1.0) throw ShapeError(l.name + ": dropout rate must be in [0,1)");
    }
    auto s = shapes();
    if (s.back().size() != static_cast<std::size_t>(class_count)) {
      throw ShapeError("final layer yields " + std::to_string(s.back().size()) + " values, expected " +
                       std::to_string(class_count));
    }
  }

  std::vector<std::size_t> parameterized_layers() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].parameterized()) out.push_back(i);
    return out;
  }

  std::size_t layer_by_name(const std::string& name) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i].name == name) return i;
    throw ConfigError("unknown layer '" + name + "'");
  }

  bool operator==(const NetworkSpec&) const = default;
};

/// Seven conv/ReLU/max-pool blocks, flatten, a 216->64 ReLU dense layer with
/// dropout 0.1, and a 64->17 softmax classifier.
inline NetworkSpec default_ecgnet_spec() {
  struct Block {
    int kernel, units, stride, padding, pool, pool_stride;
  };
  constexpr Block blocks[] = {
      {16, 8, 2, 7, 8, 4}, {12, 12, 2, 5, 4, 2}, {9, 32, 1, 4, 5, 2}, {7, 64, 1, 3, 4, 2},
      {5, 64, 1, 2, 2, 2}, {3, 64, 1, 1, 2, 2},  {3, 72, 1, 1, 2, 2},
  };
  NetworkSpec spec;
  int i = 1;
  for (const auto& b : blocks) {
    spec.layers.push_back({LayerKind::conv1d, b.kernel, b.units, b.stride, b.padding, Activation::relu, 0.0f,
                           "Conv1D_" + std::to_string(i)});
    spec.layers.push_back({LayerKind::maxpool1d, b.pool, 0, b.pool_stride, 0, Activation::none, 0.0f,
                           "MaxPooling1D_" + std::to_string(i)});
    ++i;
  }
  spec.layers.push_back({LayerKind::flatten, 1, 0, 1, 0, Activation::none, 0.0f, "Flatten"});
  spec.layers.push_back({LayerKind::dense, 1, 64, 1, 0, Activation::relu, 0.1f, "Dense"});
  spec.layers.push_back({LayerKind::softmax_dense, 1, kClassCount, 1, 0, Activation::none, 0.0f, "Softmax"});
  return spec;
}

struct LayerParams {
  std::vector<float> weight;  // conv: units x in_channels x kernel, dense: out x in (row-major)
  std::vector<float> bias;

  bool operator==(const LayerParams&) const = default;
};

struct Network {
  NetworkSpec spec;
  std::vector<LayerParams> params;  // one entry per layer; empty for pool/flatten

  bool operator==(const Network&) const = default;
};

/// Weight element count of a parameterized layer (0 otherwise).
inline std::size_t weight_count(const NetworkSpec& spec, std::size_t layer) {
  const auto& l = spec.layers.at(layer);
  const Shape in = spec.shapes()[layer];
  switch (l.kind) {
    case LayerKind::conv1d:
      return static_cast<std::size_t>(l.units) * in.channels * l.kernel;
    case LayerKind::dense:
    case LayerKind::softmax_dense:
      return static_cast<std::size_t>(l.units) * in.size();
    default:
      return 0;
  }
}

inline std::size_t param_count(const NetworkSpec& spec, std::size_t layer) {
  const auto& l = spec.layers.at(layer);
  return l.parameterized() ? weight_count(spec, layer) + static_cast<std::size_t>(l.units) : 0;
}

struct LayerParamCount {
  std::size_t layer_index;
  std::string name;
  std::size_t count;
};

struct ParamCounts {
  std::vector<LayerParamCount> layers;  // parameterized layers only
  std::size_t total = 0;
};

inline ParamCounts param_count(const NetworkSpec& spec) {
  ParamCounts out;
  for (auto i : spec.parameterized_layers()) {
    out.layers.push_back({i, spec.layers[i].name, param_count(spec, i)});
    out.total += out.layers.back().count;
  }
  return out;
}

inline ParamCounts param_count(const Network& net) { return param_count(net.spec); }

/// Network with zero-valued parameters of the right shapes.
inline Network make_network(const NetworkSpec& spec) {
  spec.validate();
  Network net{spec, std::vector<LayerParams>(spec.layers.size())};
  for (auto i : spec.parameterized_layers()) {
    net.params[i].weight.assign(weight_count(spec, i), 0.0f);
    net.params[i].bias.assign(static_cast<std::size_t>(spec.layers[i].units), 0.0f);
  }
  return net;
}

/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
inline Network init_network(const NetworkSpec& spec, std::uint64_t seed) {
  Network net = make_network(spec);
  std::mt19937_64 rng(seed);
  for (auto i : spec.parameterized_layers()) {
    const double fan_in = static_cast<double>(weight_count(spec, i)) / spec.layers[i].units;
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : net.params[i].weight) w = static_cast<float>(dist(rng));
    for (auto& b : net.params[i].bias) b = static_cast<float>(dist(rng));
  }
  return net;
}

/// Weights in row-major order followed by biases.
inline std::vector<float> flatten_params(const Network& net, std::size_t layer) {
  if (layer >= net.spec.layers.size() || !net.spec.layers[layer].parameterized()) {
    throw ShapeError("layer " + std::to_string(layer) + " has no parameters");
  }
  const auto& p = net.params[layer];
  std::vector<float> out;
  out.reserve(p.weight.size() + p.bias.size());
  out.insert(out.end(), p.weight.begin(), p.weight.end());
  out.insert(out.end(), p.bias.begin(), p.bias.end());
  return out;
}

inline void unflatten_params(Network& net, std::size_t layer, std::span<const float> flat) {
  if (layer >= net.spec.layers.size() || !net.spec.layers[layer].parameterized()) {
    throw ShapeError("layer " + std::to_string(layer) + " has no parameters");
  }
  auto& p = net.params[layer];
  if (flat.size() != p.weight.size() + p.bias.size()) {
    throw ShapeError(net.spec.layers[layer].name + ": expected " + std::to_string(p.weight.size() + p.bias.size()) +
                     " parameters, got " + std::to_string(flat.size()));
  }
  std::copy_n(flat.begin(), p.weight.size(), p.weight.begin());
  std::copy(flat.begin() + static_cast<std::ptrdiff_t>(p.weight.size()), flat.end(), p.bias.begin());
}

// ---------------------------------------------------------------------------
// Layer kernels. Activations are double; parameters are read as float.

namespace kernels {

/// Pre-activation cross-correlation with zero padding.
inline void conv1d(std::span<const double> in, Shape in_shape, std::span<const float> weight,
                   std::span<const float> bias, const LayerSpec& l, Shape out_shape, std::span<double> out) {
  const int C = in_shape.channels, L = in_shape.length, K = l.kernel, S = l.stride, P = l.padding;
  const int T = out_shape.length;
  for (int u = 0; u < out_shape.channels; ++u) {
    double* o = out.data() + static_cast<std::size_t>(u) * T;
    std::fill(o, o + T, static_cast<double>(bias[u]));
    for (int c = 0; c < C; ++c) {
      const double* x = in.data() + static_cast<std::size_t>(c) * L;
      const float* w = weight.data() + (static_cast<std::size_t>(u) * C + c) * K;
      for (int k = 0; k < K; ++k) {
        const double wk = w[k];
        // valid t: 0 <= t*S + k - P < L
        int t_lo = 0;
        if (P - k > 0) t_lo = (P - k + S - 1) / S;
        int t_hi = (L - 1 + P - k) >= 0 ? (L - 1 + P - k) / S : -1;
        t_hi = std::min(t_hi, T - 1);
        for (int t = t_lo; t <= t_hi; ++t) o[t] += wk * x[t * S + k - P];
      }
    }
  }
}

/// Backward of conv1d given dL/d(pre-activation). Accumulates into grads.
inline void conv1d_backward(std::span<const double> in, Shape in_shape, std::span<const float> weight,
                            const LayerSpec& l, Shape out_shape, std::span<const double> dout,
                            std::span<double> dweight, std::span<double> dbias, std::span<double> din) {
  const int C = in_shape.channels, L = in_shape.length, K = l.kernel, S = l.stride, P = l.padding;
  const int T = out_shape.length;
  for (int u = 0; u < out_shape.channels; ++u) {
    const double* g = dout.data() + static_cast<std::size_t>(u) * T;
    double gb = 0.0;
    for (int t = 0; t < T; ++t) gb += g[t];
    dbias[u] += gb;
    for (int c = 0; c < C; ++c) {
      const double* x = in.data() + static_cast<std::size_t>(c) * L;
      double* dx = din.empty() ? nullptr : din.data() + static_cast<std::size_t>(c) * L;
      const std::size_t wbase = (static_cast<std::size_t>(u) * C + c) * K;
      for (int k = 0; k < K; ++k) {
        int t_lo = 0;
        if (P - k > 0) t_lo = (P - k + S - 1) / S;
        int t_hi = (L - 1 + P - k) >= 0 ? (L - 1 + P - k) / S : -1;
        t_hi = std::min(t_hi, T - 1);
        double acc = 0.0;
        const double wk = weight[wbase + k];
        for (int t = t_lo; t <= t_hi; ++t) {
          acc += g[t] * x[t * S + k - P];
          if (dx) dx[t * S + k - P] += wk * g[t];
        }
        dweight[wbase + k] += acc;
      }
    }
  }
}

/// Max over each window; records the winning input index (first max on ties).
inline void maxpool1d(std::span<const double> in, Shape in_shape, const LayerSpec& l, Shape out_shape,
                      std::span<double> out, std::vector<std::uint32_t>* argmax) {
  const int L = in_shape.length, T = out_shape.length;
  if (argmax) argmax->resize(out.size());
  for (int c = 0; c < in_shape.channels; ++c) {
    for (int t = 0; t < T; ++t) {
      const std::size_t base = static_cast<std::size_t>(c) * L + static_cast<std::size_t>(t) * l.stride;
      std::size_t best = base;
      for (int k = 1; k < l.kernel; ++k)
        if (in[base + k] > in[best]) best = base + k;
      const std::size_t o = static_cast<std::size_t>(c) * T + t;
      out[o] = in[best];
      if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best);
    }
  }
}

inline void dense(std::span<const double> in, std::span<const float> weight, std::span<const float> bias,
                  std::span<double> out) {
  const std::size_t n_in = in.size();
  for (std::size_t u = 0; u < out.size(); ++u) {
    const float* w = weight.data() + u * n_in;
    double acc = bias[u];
    for (std::size_t j = 0; j < n_in; ++j) acc += static_cast<double>(w[j]) * in[j];
    out[u] = acc;
  }
}

inline void dense_backward(std::span<const double> in, std::span<const float> weight, std::span<const double> dout,
                           std::span<double> dweight, std::span<double> dbias, std::span<double> din) {
  const std::size_t n_in = in.size();
  for (std::size_t u = 0; u < dout.size(); ++u) {
    const double g = dout[u];
    dbias[u] += g;
    double* dw = dweight.data() + u * n_in;
    const float* w = weight.data() + u * n_in;
    for (std::size_t j = 0; j < n_in; ++j) {
      dw[j] += g * in[j];
      if (!din.empty()) din[j] += static_cast<double>(w[j]) * g;
    }
  }
}

inline void relu(std::span<double> v) {
  for (auto& x : v) x = x > 0.0 ? x : 0.0;
}

/// Numerically stable softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += (p[i] = std::exp(logits[i] - m));
  for (auto& x : p) x /= sum;
  return p;
}

/// -log softmax(logits)[label], computed via log-sum-exp.
inline double cross_entropy(std::span<const double> logits, int label) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  return m + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

inline void check_finite(std::span<const double> v, const std::string& layer) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError("non-finite activation in layer " + layer);
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// Forward / backward.

struct ForwardResult {
  std::vector<double> logits;
  std::vector<double> probs;
};

/// Intermediate state of one forward pass, kept for backpropagation.
struct ForwardTrace {
  std::vector<Shape> shapes;
  std::vector<std::vector<double>> acts;  // acts[l] is the input to layer l; acts.back() are the logits
  std::vector<std::vector<std::uint32_t>> pool_argmax;
  std::vector<std::vector<double>> dropout_scale;  // per layer; empty when no dropout applied
};

inline std::vector<double> to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

/// `dropout_seed` enables training-mode dropout; pass nullptr for inference.
inline ForwardTrace forward_trace(const Network& net, std::span<const float> input,
                                  const std::uint64_t* dropout_seed = nullptr) {
  const auto& spec = net.spec;
  ForwardTrace tr;
  tr.shapes = spec.shapes();
  if (input.size() != tr.shapes[0].size()) {
    throw ShapeError("input has " + std::to_string(input.size()) + " samples, expected " +
                     std::to_string(tr.shapes[0].size()));
  }
  const std::size_t n_layers = spec.layers.size();
  tr.acts.resize(n_layers + 1);
  tr.pool_argmax.resize(n_layers);
  tr.dropout_scale.resize(n_layers);
  tr.acts[0] = to_double(input);

  std::mt19937_64 rng(dropout_seed ? *dropout_seed : 0);
  for (std::size_t li = 0; li < n_layers; ++li) {
    const auto& l = spec.layers[li];
    const auto& in = tr.acts[li];
    auto& out = tr.acts[li + 1];
    out.assign(tr.shapes[li + 1].size(), 0.0);
    switch (l.kind) {
      case LayerKind::conv1d:
        kernels::conv1d(in, tr.shapes[li], net.params[li].weight, net.params[li].bias, l, tr.shapes[li + 1], out);
        break;
      case LayerKind::maxpool1d:
        kernels::maxpool1d(in, tr.shapes[li], l, tr.shapes[li + 1], out, &tr.pool_argmax[li]);
        break;
      case LayerKind::flatten:
        out = in;
        break;
      case LayerKind::dense:
      case LayerKind::softmax_dense:
        kernels::dense(in, net.params[li].weight, net.params[li].bias, out);
        break;
    }
    if (l.activation == Activation::relu) kernels::relu(out);
    if (dropout_seed && l.dropout_rate > 0.0) {
      std::bernoulli_distribution keep(1.0 - l.dropout_rate);
      auto& scale = tr.dropout_scale[li];
      scale.resize(out.size());
      const double inv = 1.0 / (1.0 - l.dropout_rate);
      for (std::size_t j = 0; j < out.size(); ++j) {
        scale[j] = keep(rng) ? inv : 0.0;
        out[j] *= scale[j];
      }
    }
    kernels::check_finite(out, l.name);
  }
  return tr;
}

inline ForwardResult forward(const Network& net, std::span<const float> input, bool inference_mode = true,
                             std::uint64_t dropout_seed = 0) {
  auto tr = forward_trace(net, input, inference_mode ? nullptr : &dropout_seed);
  ForwardResult r;
  r.logits = std::move(tr.acts.back());
  r.probs = kernels::softmax(r.logits);
  return r;
}

inline ForwardResult forward(const Network& net, const EcgRecord& record, bool inference_mode = true,
                             std::uint64_t dropout_seed = 0) {
  return forward(net, record.samples, inference_mode, dropout_seed);
}

/// Parameter gradients, shaped like Network::params.
struct Gradients {
  std::vector<std::vector<double>> weight;
  std::vector<std::vector<double>> bias;

  static Gradients zeros_like(const Network& net) {
    Gradients g;
    g.weight.resize(net.params.size());
    g.bias.resize(net.params.size());
    for (std::size_t i = 0; i < net.params.size(); ++i) {
      g.weight[i].assign(net.params[i].weight.size(), 0.0);
      g.bias[i].assign(net.params[i].bias.size(), 0.0);
    }
    return g;
  }

  void set_zero() {
    for (auto& w : weight) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
  }

  void add(const Gradients& other) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      for (std::size_t j = 0; j < weight[i].size(); ++j) weight[i][j] += other.weight[i][j];
      for (std::size_t j = 0; j < bias[i].size(); ++j) bias[i][j] += other.bias[i][j];
    }
  }

  void scale(double s) {
    for (auto& w : weight)
      for (auto& x : w) x *= s;
    for (auto& b : bias)
      for (auto& x : b) x *= s;
  }

  /// Same layout as flatten_params: weights then biases.
  std::vector<double> flat(std::size_t layer) const {
    std::vector<double> out(weight[layer]);
    out.insert(out.end(), bias[layer].begin(), bias[layer].end());
    return out;
  }
};

/// Cross-entropy of one record; adds d(loss)/d(params) into `grad`.
inline double backward(const Network& net, const ForwardTrace& tr, int label, Gradients& grad) {
  const auto& spec = net.spec;
  const auto& logits = tr.acts.back();
  const double loss = kernels::cross_entropy(logits, label);

  std::vector<double> d = kernels::softmax(logits);
  d[static_cast<std::size_t>(label)] -= 1.0;

  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const auto& l = spec.layers[li];
    const auto& in = tr.acts[li];
    const auto& out = tr.acts[li + 1];
    if (!tr.dropout_scale[li].empty()) {
      for (std::size_t j = 0; j < d.size(); ++j) d[j] *= tr.dropout_scale[li][j];
    }
    if (l.activation == Activation::relu) {
      // A kept unit has out > 0 iff its pre-activation was positive; a
      // dropped unit already carries zero gradient.
      for (std::size_t j = 0; j < d.size(); ++j)
        if (!(out[j] > 0.0)) d[j] = 0.0;
    }
    std::vector<double> din(li == 0 ? 0 : in.size(), 0.0);
    switch (l.kind) {
      case LayerKind::conv1d:
        kernels::conv1d_backward(in, tr.shapes[li], net.params[li].weight, l, tr.shapes[li + 1], d, grad.weight[li],
                                 grad.bias[li], din);
        break;
      case LayerKind::maxpool1d:
        if (li != 0)
          for (std::size_t j = 0; j < d.size(); ++j) din[tr.pool_argmax[li][j]] += d[j];
        break;
      case LayerKind::flatten:
        if (li != 0) din = d;
        break;
      case LayerKind::dense:
      case LayerKind::softmax_dense:
        kernels::dense_backward(in, net.params[li].weight, d, grad.weight[li], grad.bias[li], din);
        break;
    }
    d = std::move(din);
  }
  return loss;
}

struct LossAndGradient {
  double loss = 0.0;
  Gradients grad;
};

/// Mean cross-entropy and its gradient over `records` (inference mode).
/// Per-record gradients are reduced in index order, so the result does not
/// depend on the worker count.
inline LossAndGradient mean_loss_and_gradient(const Network& net, std::span<const EcgRecord> records) {
  if (records.empty()) throw Error("empty batch");
  std::vector<Gradients> per(records.size(), Gradients::zeros_like(net));
  std::vector<double> losses(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    auto tr = forward_trace(net, records[i].samples);
    losses[i] = backward(net, tr, records[i].label, per[i]);
  });
  LossAndGradient out{0.0, Gradients::zeros_like(net)};
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.loss += losses[i];
    out.grad.add(per[i]);
  }
  const double inv = 1.0 / static_cast<double>(records.size());
  out.loss *= inv;
  out.grad.scale(inv);
  return out;
}

/// Mean cross-entropy in inference mode.
inline double mean_loss(const Network& net, std::span<const EcgRecord> records) {
  if (records.empty()) throw Error("empty batch");
  std::vector<double> losses(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    losses[i] = kernels::cross_entropy(forward(net, records[i]).logits, records[i].label);
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(records.size());
}

// ---------------------------------------------------------------------------
// Training.

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
  }
};

struct TrainResult {
  Network network;
  std::vector<double> epoch_loss;  // mean training cross-entropy per epoch
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

inline TrainResult train(Network network, const Dataset& train_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw Error("cannot train on an empty dataset");
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    const int label = train_set.records[i].label;
    if (label < 0 || label >= network.spec.class_count) {
      throw IngestError("record " + std::to_string(i) + ": label out of range");
    }
  }

  Gradients m = Gradients::zeros_like(network), v = Gradients::zeros_like(network);
  const std::size_t n = train_set.size();
  const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);
  std::vector<Gradients> per(bs, Gradients::zeros_like(network));
  Gradients batch_grad = Gradients::zeros_like(network);
  std::vector<double> losses(bs);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(config.seed);

  TrainResult result{std::move(network), {}};
  Network& net = result.network;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t count = std::min(bs, n - start);
      try {
        parallel_for(count, [&](std::size_t k) {
          per[k].set_zero();
          const std::size_t pos = start + k;
          const std::uint64_t dseed = detail::splitmix64(
              config.seed ^ detail::splitmix64(static_cast<std::uint64_t>(epoch) * 0x100000001ULL + pos));
          const auto& rec = train_set.records[order[pos]];
          auto tr = forward_trace(net, rec.samples, &dseed);
          losses[k] = backward(net, tr, rec.label, per[k]);
        });
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      batch_grad.set_zero();
      for (std::size_t k = 0; k < count; ++k) {
        batch_grad.add(per[k]);
        epoch_loss += losses[k];
      }
      batch_grad.scale(1.0 / static_cast<double>(count));

      ++step;
      const double lr = config.learning_rate;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto update = [&](std::vector<float>& p, std::vector<double>& g, std::vector<double>& mm, std::vector<double>& vv) {
        for (std::size_t j = 0; j < p.size(); ++j) {
          double delta;
          if (config.optimizer == OptimizerKind::adam) {
            mm[j] = config.beta1 * mm[j] + (1.0 - config.beta1) * g[j];
            vv[j] = config.beta2 * vv[j] + (1.0 - config.beta2) * g[j] * g[j];
            delta = lr * (mm[j] / bc1) / (std::sqrt(vv[j] / bc2) + config.epsilon);
          } else {
            delta = lr * g[j];
          }
          p[j] = static_cast<float>(static_cast<double>(p[j]) - delta);
        }
      };
      for (auto li : net.spec.parameterized_layers()) {
        update(net.params[li].weight, batch_grad.weight[li], m.weight[li], v.weight[li]);
        update(net.params[li].bias, batch_grad.bias[li], m.bias[li], v.bias[li]);
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
    result.epoch_loss.push_back(epoch_loss);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Spec descriptor (shared by checkpoint and quantized containers) and the
// full-precision checkpoint: "ALQF", u16 version, descriptor, then each
// parameterized layer's flattened parameters as LE f32.

inline constexpr std::uint16_t kCheckpointVersion = 1;

inline void write_spec(io::ByteWriter& w, const NetworkSpec& spec) {
  w.u32(static_cast<std::uint32_t>(spec.input_length));
  w.u16(static_cast<std::uint16_t>(spec.input_channels));
  w.u16(static_cast<std::uint16_t>(spec.class_count));
  w.u16(static_cast<std::uint16_t>(spec.layers.size()));
  for (const auto& l : spec.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u8(static_cast<std::uint8_t>(l.activation));
    w.u16(static_cast<std::uint16_t>(l.kernel));
    w.u16(static_cast<std::uint16_t>(l.units));
    w.u16(static_cast<std::uint16_t>(l.stride));
    w.u16(static_cast<std::uint16_t>(l.padding));
    w.f32(l.dropout_rate);
    w.u8(static_cast<std::uint8_t>(l.name.size()));
    w.raw({reinterpret_cast<const std::uint8_t*>(l.name.data()), l.name.size()});
  }
}

inline NetworkSpec read_spec(io::ByteReader& r) {
  NetworkSpec spec;
  spec.input_length = static_cast<int>(r.u32("spec descriptor"));
  spec.input_channels = r.u16("spec descriptor");
  spec.class_count = r.u16("spec descriptor");
  const std::uint16_t n = r.u16("spec descriptor");
  for (std::uint16_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    LayerSpec l;
    const auto kind = r.u8("layer descriptor");
    const auto act = r.u8("layer descriptor");
    if (kind > 4 || act > 1) throw FormatError("invalid layer descriptor", at);
    l.kind = static_cast<LayerKind>(kind);
    l.activation = static_cast<Activation>(act);
    l.kernel = r.u16("layer descriptor");
    l.units = r.u16("layer descriptor");
    l.stride = r.u16("layer descriptor");
    l.padding = r.u16("layer descriptor");
    l.dropout_rate = r.f32("layer descriptor");
    const auto len = r.u8("layer name");
    auto name = r.raw(len, "layer name");
    l.name.assign(name.begin(), name.end());
    spec.layers.push_back(std::move(l));
  }
  return spec;
}

inline std::vector<std::uint8_t> encode_checkpoint(const Network& net) {
  io::ByteWriter w;
  w.magic("ALQF");
  w.u16(kCheckpointVersion);
  write_spec(w, net.spec);
  for (auto li : net.spec.parameterized_layers()) {
    for (float x : flatten_params(net, li)) w.f32(x);
  }
  return w.bytes();
}

inline Network decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("ALQF");
  const std::size_t vat = r.offset();
  if (r.u16("version") != kCheckpointVersion) throw FormatError("unsupported checkpoint version", vat);
  const std::size_t spec_at = r.offset();
  NetworkSpec spec = read_spec(r);
  try {
    spec.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("invalid spec descriptor: ") + e.what(), spec_at);
  }
  Network net = make_network(spec);
  for (auto li : spec.parameterized_layers()) {
    const std::size_t count = param_count(spec, li);
    r.require(count * sizeof(float), "parameters of layer " + spec.layers[li].name);
    std::vector<float> flat(count);
    for (auto& x : flat) {
      const std::size_t at = r.offset();
      x = r.f32();
      if (!std::isfinite(x)) throw FormatError("non-finite parameter in layer " + spec.layers[li].name, at);
    }
    unflatten_params(net, li, flat);
  }
  if (!r.done()) throw FormatError("trailing bytes", r.offset());
  return net;
}

inline void save_checkpoint(const Network& net, const std::string& path) { io::write_file(path, encode_checkpoint(net)); }

inline Network load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace alq
