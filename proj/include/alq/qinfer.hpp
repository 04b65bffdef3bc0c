#pragma once

// Inference straight from packed binary bases. Each dot product against a
// weight group is evaluated as sum_i alpha_i * (beta_i . x), where beta_i . x
// is an add/subtract reduction steered by the sign bits.

#include <algorithm>
#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "alq/ecgnet.hpp"
#include "alq/error.hpp"
#include "alq/parallel.hpp"
#include "alq/quant_model.hpp"

namespace alq {

/// sum_i alpha_i * sum_j beta_i[first + j] * x[j], i.e. the dot product of
/// the group's positions [first, first + x.size()) with x.
inline double group_dot_partial(const QuantGroup& q, std::size_t first, std::span<const double> x) {
  if (first + x.size() > q.size) throw ShapeError("group_dot range exceeds group size");
  double total = 0.0;
  for (double v : x) total += v;
  double acc = 0.0;
  const std::size_t cb = QuantGroup::column_bytes(q.size);
  for (std::size_t i = 0; i < q.coords.size(); ++i) {
    const std::uint8_t* col = q.bits.data() + i * cb;
    double plus = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const std::size_t p = first + j;
      if ((col[p >> 3] >> (p & 7)) & 1u) plus += x[j];
    }
    // beta . x = (sum over +1 positions) - (sum over -1 positions)
    acc += q.coords[i] * (2.0 * plus - total);
  }
  return acc;
}

inline double group_dot(const QuantGroup& q, std::span<const double> x) {
  if (x.size() != q.size) {
    throw ShapeError("group_dot: expected " + std::to_string(q.size) + " values, got " + std::to_string(x.size()));
  }
  return group_dot_partial(q, 0, x);
}

namespace detail {

/// Dot product of flattened positions [begin, begin + x.size()) of a layer with x.
class PackedLayer {
public:
  explicit PackedLayer(const QuantLayer& layer) : layer_(&layer) {
    offsets_.reserve(layer.groups.size() + 1);
    std::size_t o = 0;
    for (const auto& g : layer.groups) {
      offsets_.push_back(o);
      o += g.size;
    }
    offsets_.push_back(o);
    if (o != layer.param_count) throw ShapeError("quantized layer does not cover its parameters");
  }

  double dot(std::size_t begin, std::span<const double> x) const {
    const std::size_t end = begin + x.size();
    // first group containing `begin`
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), begin);
    std::size_t g = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    double acc = 0.0;
    for (std::size_t pos = begin; pos < end; ++g) {
      const std::size_t g_end = offsets_[g + 1];
      const std::size_t stop = std::min(end, g_end);
      acc += group_dot_partial(layer_->groups[g], pos - offsets_[g], x.subspan(pos - begin, stop - pos));
      pos = stop;
    }
    return acc;
  }

private:
  const QuantLayer* layer_;
  std::vector<std::size_t> offsets_;
};

}  // namespace detail

/// Forward pass over the packed model. Layer semantics match forward().
inline ForwardResult qforward(const QuantModel& model, std::span<const float> input) {
  const auto& spec = model.spec;
  const auto shapes = spec.shapes();
  if (input.size() != shapes[0].size()) {
    throw ShapeError("input has " + std::to_string(input.size()) + " samples, expected " +
                     std::to_string(shapes[0].size()));
  }
  std::vector<double> act(input.begin(), input.end());
  std::size_t qi = 0;
  const std::vector<double> one{1.0};
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const auto& l = spec.layers[li];
    const Shape in = shapes[li], out_shape = shapes[li + 1];
    std::vector<double> out(out_shape.size(), 0.0);
    if (l.parameterized()) {
      const auto& ql = model.layers.at(qi++);
      if (ql.layer_index != li) throw ShapeError("quantized layer order does not match spec");
      const detail::PackedLayer packed(ql);
      const std::size_t n_weights = weight_count(spec, li);
      std::vector<double> bias(static_cast<std::size_t>(l.units));
      for (std::size_t u = 0; u < bias.size(); ++u) bias[u] = packed.dot(n_weights + u, one);

      if (l.kind == LayerKind::conv1d) {
        const int C = in.channels, L = in.length, K = l.kernel;
        const std::size_t row = static_cast<std::size_t>(C) * K;
        std::vector<double> window(row);
        for (int t = 0; t < out_shape.length; ++t) {
          for (int c = 0; c < C; ++c) {
            for (int k = 0; k < K; ++k) {
              const int src = t * l.stride + k - l.padding;
              window[static_cast<std::size_t>(c) * K + k] =
                  (src >= 0 && src < L) ? act[static_cast<std::size_t>(c) * L + src] : 0.0;
            }
          }
          for (int u = 0; u < l.units; ++u) {
            out[static_cast<std::size_t>(u) * out_shape.length + t] = bias[u] + packed.dot(u * row, window);
          }
        }
      } else {
        const std::size_t row = act.size();
        for (std::size_t u = 0; u < out.size(); ++u) out[u] = bias[u] + packed.dot(u * row, act);
      }
    } else if (l.kind == LayerKind::maxpool1d) {
      kernels::maxpool1d(act, in, l, out_shape, out, nullptr);
    } else {
      out = act;
    }
    if (l.activation == Activation::relu) kernels::relu(out);
    kernels::check_finite(out, l.name);
    act = std::move(out);
  }
  ForwardResult r;
  r.logits = std::move(act);
  r.probs = kernels::softmax(r.logits);
  return r;
}

inline ForwardResult qforward(const QuantModel& model, const EcgRecord& record) {
  return qforward(model, record.samples);
}

/// Index of the largest probability; ties go to the lowest class.
inline int argmax(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  return static_cast<int>(best);
}

struct Prediction {
  std::vector<double> probs;
  int label = 0;
};

/// Per-record predictions; each record is evaluated independently, so the
/// result is identical for any worker count.
template <class Model>
std::vector<Prediction> predict_batch(const Model& model, const Dataset& data) {
  std::vector<Prediction> out(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    ForwardResult r;
    if constexpr (std::is_same_v<Model, QuantModel>) {
      r = qforward(model, data.records[i]);
    } else {
      r = forward(model, data.records[i]);
    }
    out[i].label = argmax(r.probs);
    out[i].probs = std::move(r.probs);
  });
  return out;
}

}  // namespace alq
