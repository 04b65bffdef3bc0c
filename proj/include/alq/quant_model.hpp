#pragma once

// Multi-bit binary decomposition of weight groups: w_k ~= B_k * alpha_k with
// sign matrix B_k (n_k x I_k) and positive coordinates alpha_k (I_k).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "alq/ecgnet.hpp"
#include "alq/error.hpp"

namespace alq {

/// Coordinates at or below this magnitude are treated as zero and dropped.
inline constexpr double kZeroCoord = 1e-12;

/// One weight group's binary bases and coordinates.
///
/// Bases are stored column-major, one column per coordinate, each column
/// packed LSB-first into ceil(n_k / 8) bytes: bit b of byte j is the sign of
/// position 8j + b, set for +1. Padding bits are always zero.
///
/// Canonical form: coords strictly positive, sorted descending, and no two
/// columns equal or negated.
struct QuantGroup {
  std::uint32_t size = 0;
  std::vector<double> coords;
  std::vector<std::uint8_t> bits;

  static std::size_t column_bytes(std::uint32_t n) noexcept { return (static_cast<std::size_t>(n) + 7) / 8; }

  std::size_t bitwidth() const noexcept { return coords.size(); }

  std::span<const std::uint8_t> column(std::size_t i) const {
    return std::span<const std::uint8_t>(bits).subspan(i * column_bytes(size), column_bytes(size));
  }

  bool positive(std::size_t col, std::size_t pos) const noexcept {
    return (bits[col * column_bytes(size) + (pos >> 3)] >> (pos & 7)) & 1u;
  }

  int sign(std::size_t col, std::size_t pos) const noexcept { return positive(col, pos) ? 1 : -1; }

  void set_sign(std::size_t col, std::size_t pos, bool plus) noexcept {
    auto& byte = bits[col * column_bytes(size) + (pos >> 3)];
    const auto mask = static_cast<std::uint8_t>(1u << (pos & 7));
    byte = plus ? static_cast<std::uint8_t>(byte | mask) : static_cast<std::uint8_t>(byte & ~mask);
  }

  /// Appends a column from +/-1 signs.
  void push_column(double coord, std::span<const int> signs) {
    const std::size_t cb = column_bytes(size);
    bits.resize(bits.size() + cb, 0);
    coords.push_back(coord);
    const std::size_t col = coords.size() - 1;
    for (std::size_t j = 0; j < size; ++j) set_sign(col, j, signs[j] >= 0);
  }

  /// B * alpha.
  std::vector<double> reconstruct() const {
    std::vector<double> w(size, 0.0);
    for (std::size_t i = 0; i < coords.size(); ++i)
      for (std::size_t j = 0; j < size; ++j) w[j] += coords[i] * sign(i, j);
    return w;
  }

  bool operator==(const QuantGroup&) const = default;
};

/// Builds a group from an explicit sign matrix (columns) and coordinates.
inline QuantGroup make_group(std::uint32_t size, std::span<const std::vector<int>> columns, std::span<const double> coords) {
  QuantGroup q;
  q.size = size;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].size() != size) throw ShapeError("basis column length mismatch");
    q.push_column(coords[i], columns[i]);
  }
  return q;
}

namespace detail {

inline void flip_column(QuantGroup& q, std::size_t col) {
  for (std::size_t j = 0; j < q.size; ++j) q.set_sign(col, j, !q.positive(col, j));
}

inline void erase_column(QuantGroup& q, std::size_t col) {
  const std::size_t cb = QuantGroup::column_bytes(q.size);
  q.coords.erase(q.coords.begin() + static_cast<std::ptrdiff_t>(col));
  q.bits.erase(q.bits.begin() + static_cast<std::ptrdiff_t>(col * cb),
               q.bits.begin() + static_cast<std::ptrdiff_t>((col + 1) * cb));
}

inline bool columns_equal(const QuantGroup& q, std::size_t a, std::size_t b) {
  return std::ranges::equal(q.column(a), q.column(b));
}

inline bool columns_negated(const QuantGroup& q, std::size_t a, std::size_t b) {
  for (std::size_t j = 0; j < q.size; ++j)
    if (q.positive(a, j) == q.positive(b, j)) return false;
  return true;
}

}  // namespace detail

/// Brings a group to canonical form without changing B * alpha (beyond
/// dropping coordinates <= kZeroCoord).
inline QuantGroup canonicalize(QuantGroup q) {
  // Merge equal or negated columns into the earlier one.
  for (std::size_t a = 0; a < q.coords.size(); ++a) {
    for (std::size_t b = a + 1; b < q.coords.size();) {
      if (detail::columns_equal(q, a, b)) {
        q.coords[a] += q.coords[b];
        detail::erase_column(q, b);
      } else if (detail::columns_negated(q, a, b)) {
        q.coords[a] -= q.coords[b];
        detail::erase_column(q, b);
      } else {
        ++b;
      }
    }
  }
  for (std::size_t i = 0; i < q.coords.size(); ++i) {
    if (q.coords[i] < 0.0) {
      q.coords[i] = -q.coords[i];
      detail::flip_column(q, i);
    }
  }
  for (std::size_t i = q.coords.size(); i-- > 0;) {
    if (!(q.coords[i] > kZeroCoord)) detail::erase_column(q, i);
  }

  std::vector<std::size_t> order(q.coords.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (q.coords[a] != q.coords[b]) return q.coords[a] > q.coords[b];
    return std::ranges::lexicographical_compare(q.column(a), q.column(b));
  });
  QuantGroup out;
  out.size = q.size;
  out.coords.reserve(order.size());
  out.bits.reserve(q.bits.size());
  for (auto i : order) {
    out.coords.push_back(q.coords[i]);
    auto col = q.column(i);
    out.bits.insert(out.bits.end(), col.begin(), col.end());
  }
  return out;
}

inline bool is_canonical(const QuantGroup& q) {
  for (std::size_t i = 0; i < q.coords.size(); ++i) {
    if (!(q.coords[i] > 0.0) || !std::isfinite(q.coords[i])) return false;
    if (i > 0 && q.coords[i] > q.coords[i - 1]) return false;
    for (std::size_t k = 0; k < i; ++k)
      if (detail::columns_equal(q, i, k) || detail::columns_negated(q, i, k)) return false;
  }
  return true;
}

struct QuantLayer {
  std::vector<QuantGroup> groups;
  std::uint32_t group_size = 16;
  std::size_t param_count = 0;
  std::size_t layer_index = 0;

  std::size_t coord_count() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.bitwidth();
    return n;
  }

  /// Sum over groups of n_k * I_k.
  std::size_t base_bits() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += static_cast<std::size_t>(g.size) * g.bitwidth();
    return n;
  }

  bool operator==(const QuantLayer&) const = default;
};

struct BitwidthStats {
  double group_mean = 0.0;       // (1/m) sum I_k
  double weight_weighted = 0.0;  // sum n_k I_k / sum n_k
};

inline BitwidthStats average_bitwidth(const QuantLayer& layer) {
  if (layer.groups.empty()) return {};
  double sum_i = 0.0, sum_n = 0.0, sum_ni = 0.0;
  for (const auto& g : layer.groups) {
    sum_i += static_cast<double>(g.bitwidth());
    sum_n += g.size;
    sum_ni += static_cast<double>(g.size) * static_cast<double>(g.bitwidth());
  }
  return {sum_i / static_cast<double>(layer.groups.size()), sum_n > 0 ? sum_ni / sum_n : 0.0};
}

/// Weight-weighted average bitwidth over all layers.
inline double network_average_bitwidth(std::span<const QuantLayer> layers) {
  double bits = 0.0, params = 0.0;
  for (const auto& l : layers) {
    bits += static_cast<double>(l.base_bits());
    params += static_cast<double>(l.param_count);
  }
  return params > 0 ? bits / params : 0.0;
}

/// Flattened layer parameters: concatenation of B_k * alpha_k.
inline std::vector<float> dequantize_layer(const QuantLayer& layer) {
  std::vector<float> flat;
  flat.reserve(layer.param_count);
  for (const auto& g : layer.groups) {
    for (double v : g.reconstruct()) flat.push_back(static_cast<float>(v));
  }
  if (flat.size() != layer.param_count) {
    throw ShapeError("quantized layer covers " + std::to_string(flat.size()) + " of " +
                     std::to_string(layer.param_count) + " parameters");
  }
  return flat;
}

/// Overwrites the parameters of each quantized layer in `net`.
inline void dequantize_into(Network& net, std::span<const QuantLayer> layers) {
  for (const auto& l : layers) unflatten_params(net, l.layer_index, dequantize_layer(l));
}

struct QuantMeta {
  std::uint64_t seed = 0;
  std::string config_digest;

  bool operator==(const QuantMeta&) const = default;
};

/// The compressed artifact: one QuantLayer per parameterized layer, in spec order.
struct QuantModel {
  NetworkSpec spec;
  std::vector<QuantLayer> layers;
  std::uint32_t group_size = 16;
  QuantMeta meta;

  bool operator==(const QuantModel&) const = default;
};

/// Checks layer/spec agreement and group invariants. Throws ShapeError.
inline void validate(const QuantModel& model) {
  model.spec.validate();
  const auto idx = model.spec.parameterized_layers();
  if (idx.size() != model.layers.size()) throw ShapeError("layer count does not match spec");
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& l = model.layers[i];
    const auto expected = param_count(model.spec, idx[i]);
    if (l.layer_index != idx[i] || l.param_count != expected) {
      throw ShapeError("layer " + model.spec.layers[idx[i]].name + " does not match spec");
    }
    std::size_t covered = 0;
    for (const auto& g : l.groups) {
      if (g.size == 0 || g.size > l.group_size) throw ShapeError("group size out of range");
      if (g.bits.size() != g.bitwidth() * QuantGroup::column_bytes(g.size)) throw ShapeError("basis storage mismatch");
      if (!is_canonical(g)) throw ShapeError("group not in canonical form");
      covered += g.size;
    }
    if (covered != expected) throw ShapeError("groups of " + model.spec.layers[idx[i]].name + " do not cover the layer");
  }
}

/// Dense network whose parameters are B_k * alpha_k for every group.
inline Network dequantize(const QuantModel& model) {
  Network net = make_network(model.spec);
  const auto idx = model.spec.parameterized_layers();
  if (idx.size() != model.layers.size()) throw ShapeError("layer count does not match spec");
  dequantize_into(net, model.layers);
  return net;
}

}  // namespace alq
