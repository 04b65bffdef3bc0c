#pragma once

// Adaptive loss-aware multi-bit quantization.
//
// Per parameterized layer: flatten, split into groups of n, decompose each
// group greedily into at most i_max scaled sign bases, then prune the least
// significant coordinates globally until a network-level target is met, and
// finally alternate exact base search (coordinates fixed) with least-squares
// coordinates (bases fixed).

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "alq/digest.hpp"
#include "alq/ecgnet.hpp"
#include "alq/error.hpp"
#include "alq/parallel.hpp"
#include "alq/quant_model.hpp"
#include "alq/signal_data.hpp"

namespace alq {

/// Base enumeration in optimize_bases visits 2^I levels.
inline constexpr std::size_t kMaxEnumeratedBits = 16;
inline constexpr int kMaxConfigBitwidth = 8;

struct WeightGroup {
  std::vector<double> values;
  std::size_t layer_index = 0;
  std::size_t offset = 0;
};

/// ceil(len / n) contiguous groups; only the last may be shorter than n.
template <class T>
std::vector<WeightGroup> partition_groups(std::span<const T> flat, std::size_t n, std::size_t layer_index = 0) {
  if (n < 1) throw ConfigError("group size must be >= 1");
  std::vector<WeightGroup> out;
  out.reserve((flat.size() + n - 1) / n);
  for (std::size_t off = 0; off < flat.size(); off += n) {
    const std::size_t len = std::min(n, flat.size() - off);
    WeightGroup g{{}, layer_index, off};
    g.values.assign(flat.begin() + static_cast<std::ptrdiff_t>(off),
                    flat.begin() + static_cast<std::ptrdiff_t>(off + len));
    out.push_back(std::move(g));
  }
  return out;
}

template <class T>
std::vector<WeightGroup> partition_groups(const std::vector<T>& flat, std::size_t n, std::size_t layer_index = 0) {
  return partition_groups(std::span<const T>(flat), n, layer_index);
}

/// ||w - B alpha||^2.
inline double reconstruction_error(std::span<const double> w, const QuantGroup& q) {
  if (w.size() != q.size) throw ShapeError("group length mismatch");
  const auto r = q.reconstruct();
  double e = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) e += (w[j] - r[j]) * (w[j] - r[j]);
  return e;
}

/// Greedy residual binarization: beta = sign(r) with sign(0) = +1,
/// alpha = mean |r|, r -= alpha * beta; stops once alpha <= 1e-12.
inline QuantGroup init_decompose(std::span<const double> w, std::size_t i_max) {
  if (i_max < 1) throw ConfigError("i_max must be >= 1");
  QuantGroup q;
  q.size = static_cast<std::uint32_t>(w.size());
  std::vector<double> r(w.begin(), w.end());
  std::vector<int> signs(w.size());
  for (std::size_t i = 0; i < i_max; ++i) {
    double alpha = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      signs[j] = r[j] >= 0.0 ? 1 : -1;
      alpha += std::abs(r[j]);
    }
    alpha /= static_cast<double>(r.size());
    if (alpha <= kZeroCoord) break;
    q.push_column(alpha, signs);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= alpha * signs[j];
  }
  return canonicalize(std::move(q));
}

inline QuantGroup init_decompose(const WeightGroup& g, std::size_t i_max) { return init_decompose(g.values, i_max); }

/// Achievable levels sum_i s_i alpha_i; bit i of the index set means s_i = +1.
inline std::vector<double> enumerate_levels(std::span<const double> coords) {
  const std::size_t count = std::size_t{1} << coords.size();
  std::vector<double> levels(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    double v = 0.0;
    for (std::size_t i = 0; i < coords.size(); ++i) v += ((mask >> i) & 1u) ? coords[i] : -coords[i];
    levels[mask] = v;
  }
  return levels;
}

/// Index of the level nearest to w. Ties prefer the smaller magnitude, then
/// the positive level, then the lower index.
inline std::size_t nearest_level(std::span<const double> levels, double w) {
  std::size_t best = 0;
  double best_err = (w - levels[0]) * (w - levels[0]);
  for (std::size_t m = 1; m < levels.size(); ++m) {
    const double err = (w - levels[m]) * (w - levels[m]);
    bool better = err < best_err;
    if (!better && err == best_err) {
      const double a = std::abs(levels[m]), b = std::abs(levels[best]);
      better = a < b || (a == b && levels[m] > levels[best]);
    }
    if (better) {
      best = m;
      best_err = err;
    }
  }
  return best;
}

/// With coordinates fixed, assigns every position the sign row whose level
/// is nearest its weight. Exactly optimal per position.
inline QuantGroup optimize_bases(std::span<const double> w, const QuantGroup& q) {
  if (w.size() != q.size) throw ShapeError("group length mismatch");
  if (q.bitwidth() == 0) return q;
  if (q.bitwidth() > kMaxEnumeratedBits) {
    throw ConfigError("optimize_bases: bitwidth " + std::to_string(q.bitwidth()) + " exceeds enumeration bound " +
                      std::to_string(kMaxEnumeratedBits));
  }
  const auto levels = enumerate_levels(q.coords);
  QuantGroup out;
  out.size = q.size;
  out.coords = q.coords;
  out.bits.assign(q.bits.size(), 0);
  for (std::size_t j = 0; j < w.size(); ++j) {
    const std::size_t mask = nearest_level(levels, w[j]);
    for (std::size_t i = 0; i < q.bitwidth(); ++i) out.set_sign(i, j, (mask >> i) & 1u);
  }
  return canonicalize(std::move(out));
}

inline QuantGroup optimize_bases(const WeightGroup& g, const QuantGroup& q) { return optimize_bases(g.values, q); }

/// Least-squares coordinates for fixed bases via the normal equations; falls
/// back to a pseudo-inverse (minimum-norm solution) when the Gram matrix is
/// singular or its condition number exceeds 1e12.
inline std::vector<double> least_squares_coords(std::span<const double> w, const QuantGroup& q) {
  const auto n = static_cast<Eigen::Index>(q.size);
  const auto I = static_cast<Eigen::Index>(q.bitwidth());
  Eigen::MatrixXd B(n, I);
  for (Eigen::Index i = 0; i < I; ++i)
    for (Eigen::Index j = 0; j < n; ++j) B(j, i) = q.sign(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), n);
  const Eigen::MatrixXd gram = B.transpose() * B;
  const Eigen::VectorXd rhs = B.transpose() * wv;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& ev = eig.eigenvalues();  // ascending
  const double lmax = ev(I - 1), lmin = ev(0);
  Eigen::VectorXd alpha;
  if (lmin > 0.0 && lmax / lmin <= 1e12) {
    alpha = gram.llt().solve(rhs);
  } else {
    const double cutoff = lmax * 1e-12;
    Eigen::VectorXd inv = ev;
    for (Eigen::Index i = 0; i < I; ++i) inv(i) = ev(i) > cutoff ? 1.0 / ev(i) : 0.0;
    alpha = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * rhs;
  }
  return {alpha.data(), alpha.data() + I};
}

/// With bases fixed, sets coordinates to the least-squares solution, then
/// re-canonicalizes (negative coordinates flip their column, zeros drop).
inline QuantGroup optimize_coords(std::span<const double> w, const QuantGroup& q) {
  if (w.size() != q.size) throw ShapeError("group length mismatch");
  if (q.bitwidth() == 0) return q;
  QuantGroup out = q;
  out.coords = least_squares_coords(w, q);
  out = canonicalize(std::move(out));
  // Guard against round-off making the solution worse than the input.
  if (reconstruction_error(w, out) > reconstruction_error(w, q)) return q;
  return out;
}

inline QuantGroup optimize_coords(const WeightGroup& g, const QuantGroup& q) { return optimize_coords(g.values, q); }

// ---------------------------------------------------------------------------
// Configuration.

enum class Scorer { magnitude, loss_aware };

struct PruneTarget {
  enum class Kind { none, avg_bitwidth, rate };
  Kind kind = Kind::avg_bitwidth;
  double value = 2.0;

  static PruneTarget none() { return {Kind::none, 0.0}; }
  static PruneTarget bitwidth(double v) { return {Kind::avg_bitwidth, v}; }
  static PruneTarget rate(double v) { return {Kind::rate, v}; }
};

struct AlqConfig {
  std::uint32_t group_size = 16;
  int i_max_default = 2;
  std::map<std::string, int> i_max;  // per layer name
  PruneTarget prune = PruneTarget::bitwidth(2.0);
  Scorer scorer = Scorer::loss_aware;
  int refine_iters = 3;
  int calib_batch = 64;
  std::uint64_t seed = 0;
  double curvature = 1.0;  // lambda in the loss-aware score

  int i_max_for(const std::string& layer) const {
    auto it = i_max.find(layer);
    return it == i_max.end() ? i_max_default : it->second;
  }

  void validate() const {
    if (group_size < 1 || group_size > 0xFFFF) throw ConfigError("group_size must be in [1,65535]");
    auto check_bits = [](const std::string& what, int v) {
      if (v < 1 || v > kMaxConfigBitwidth) {
        throw ConfigError("i_max for " + what + " must be in [1," + std::to_string(kMaxConfigBitwidth) + "]");
      }
    };
    check_bits("default", i_max_default);
    for (const auto& [name, v] : i_max) check_bits(name, v);
    if (prune.kind == PruneTarget::Kind::rate && !(prune.value >= 0.0 && prune.value < 1.0)) {
      throw ConfigError("prune.rate must be in [0,1)");
    }
    if (prune.kind == PruneTarget::Kind::avg_bitwidth && !(prune.value >= 0.0 && std::isfinite(prune.value))) {
      throw ConfigError("prune.target_avg_bitwidth must be >= 0");
    }
    if (refine_iters < 0) throw ConfigError("refine_iters must be >= 0");
    if (calib_batch < 1) throw ConfigError("calib_batch must be >= 1");
    if (!(curvature >= 0.0) || !std::isfinite(curvature)) throw ConfigError("curvature must be >= 0");
  }
};

inline nlohmann::json to_json(const AlqConfig& c) {
  nlohmann::json j;
  j["group_size"] = c.group_size;
  nlohmann::json imax = nlohmann::json::object();
  imax["default"] = c.i_max_default;
  for (const auto& [k, v] : c.i_max) imax[k] = v;
  j["i_max"] = imax;
  nlohmann::json prune = nlohmann::json::object();
  if (c.prune.kind == PruneTarget::Kind::avg_bitwidth) prune["target_avg_bitwidth"] = c.prune.value;
  if (c.prune.kind == PruneTarget::Kind::rate) prune["rate"] = c.prune.value;
  j["prune"] = prune;
  j["scorer"] = c.scorer == Scorer::magnitude ? "magnitude" : "loss_aware";
  j["refine_iters"] = c.refine_iters;
  j["calib_batch"] = c.calib_batch;
  j["seed"] = c.seed;
  j["curvature"] = c.curvature;
  return j;
}

/// Reads the JSON config. Missing keys keep their defaults; unknown keys are
/// rejected. The result is validated.
inline AlqConfig alq_config_from_json(const nlohmann::json& j, AlqConfig c = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "group_size") {
        const auto v = value.get<long long>();
        if (v < 1 || v > 0xFFFF) throw ConfigError("group_size must be in [1,65535]");
        c.group_size = static_cast<std::uint32_t>(v);
      } else if (key == "i_max") {
        if (value.is_number_integer()) {
          c.i_max_default = value.get<int>();
        } else {
          for (const auto& [name, bits] : value.items()) {
            if (name == "default") c.i_max_default = bits.get<int>();
            else c.i_max[name] = bits.get<int>();
          }
        }
      } else if (key == "prune") {
        const bool has_rate = value.contains("rate"), has_target = value.contains("target_avg_bitwidth");
        if (has_rate && has_target) throw ConfigError("prune: give either rate or target_avg_bitwidth, not both");
        if (has_rate) c.prune = PruneTarget::rate(value.at("rate").get<double>());
        else if (has_target) c.prune = PruneTarget::bitwidth(value.at("target_avg_bitwidth").get<double>());
        else c.prune = PruneTarget::none();
      } else if (key == "scorer") {
        const auto s = value.get<std::string>();
        if (s == "magnitude") c.scorer = Scorer::magnitude;
        else if (s == "loss_aware") c.scorer = Scorer::loss_aware;
        else throw ConfigError("scorer must be magnitude or loss_aware");
      } else if (key == "refine_iters") {
        c.refine_iters = value.get<int>();
      } else if (key == "calib_batch") {
        c.calib_batch = value.get<int>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "curvature") {
        c.curvature = value.get<double>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

inline std::string config_digest(const AlqConfig& c) { return sha256_hex(to_json(c).dump()); }

// ---------------------------------------------------------------------------
// Scoring and pruning in the coordinate domain.

struct CoordRef {
  std::size_t layer = 0;  // position in the QuantLayer list
  std::size_t group = 0;
  std::size_t coord = 0;

  auto operator<=>(const CoordRef&) const = default;
};

struct CoordScore {
  CoordRef ref;
  double score = 0.0;      // lower = less significant
  double magnitude = 0.0;  // ||alpha_i beta_i|| = alpha_i sqrt(n_k)
};

/// Ascending significance: score, then magnitude, then (layer, group, coord).
inline bool less_significant(const CoordScore& a, const CoordScore& b) {
  if (a.score != b.score) return a.score < b.score;
  if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
  return a.ref < b.ref;
}

/// Scores every live coordinate.
///
/// magnitude:  alpha_i sqrt(n_k)
/// loss_aware: |g_k . (alpha_i beta_i)| + lambda/2 ||alpha_i beta_i||^2, with
///             g_k the mean cross-entropy gradient over `calib` with respect
///             to the group's dequantized weights.
inline std::vector<CoordScore> score_coordinates(std::span<const QuantLayer> layers, const Network& network,
                                                 std::span<const EcgRecord> calib, Scorer mode,
                                                 double curvature = 1.0) {
  std::vector<std::vector<double>> grads;
  if (mode == Scorer::loss_aware) {
    if (calib.empty()) throw ConfigError("loss_aware scoring requires a non-empty calibration set");
    Network deq = network;
    dequantize_into(deq, layers);
    const auto lg = mean_loss_and_gradient(deq, calib);
    for (const auto& l : layers) grads.push_back(lg.grad.flat(l.layer_index));
  }
  std::vector<CoordScore> out;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    std::size_t offset = 0;
    for (std::size_t gi = 0; gi < layers[li].groups.size(); ++gi) {
      const auto& q = layers[li].groups[gi];
      for (std::size_t i = 0; i < q.bitwidth(); ++i) {
        CoordScore s;
        s.ref = {li, gi, i};
        s.magnitude = q.coords[i] * std::sqrt(static_cast<double>(q.size));
        if (mode == Scorer::magnitude) {
          s.score = s.magnitude;
        } else {
          double gb = 0.0;
          for (std::size_t j = 0; j < q.size; ++j) gb += grads[li][offset + j] * q.sign(i, j);
          s.score = std::abs(q.coords[i] * gb) + 0.5 * curvature * s.magnitude * s.magnitude;
        }
        out.push_back(s);
      }
      offset += q.size;
    }
  }
  return out;
}

struct PruneOutcome {
  std::vector<QuantLayer> layers;
  std::size_t removed = 0;
  bool already_met = false;
  std::string notice;
};

/// Removes coordinates in ascending significance until the target holds:
/// network weight-weighted bitwidth <= target, or round(rate * live) removed.
inline PruneOutcome prune_coordinates(std::vector<QuantLayer> layers, std::vector<CoordScore> scores,
                                      const PruneTarget& target) {
  std::size_t live = 0;
  double bits = 0.0, params = 0.0;
  for (const auto& l : layers) {
    live += l.coord_count();
    bits += static_cast<double>(l.base_bits());
    params += static_cast<double>(l.param_count);
  }
  if (scores.size() != live) throw Error("scores do not cover every live coordinate");
  for (const auto& s : scores) {
    if (s.ref.layer >= layers.size() || s.ref.group >= layers[s.ref.layer].groups.size() ||
        s.ref.coord >= layers[s.ref.layer].groups[s.ref.group].bitwidth()) {
      throw Error("score refers to a missing coordinate");
    }
  }
  std::sort(scores.begin(), scores.end(), less_significant);

  std::size_t to_remove = 0;
  PruneOutcome out;
  switch (target.kind) {
    case PruneTarget::Kind::none:
      break;
    case PruneTarget::Kind::rate: {
      if (!(target.value >= 0.0 && target.value <= 1.0)) throw ConfigError("prune.rate must be in [0,1)");
      to_remove = static_cast<std::size_t>(std::llround(target.value * static_cast<double>(live)));
      break;
    }
    case PruneTarget::Kind::avg_bitwidth: {
      if (params <= 0.0 || bits / params <= target.value) {
        out.already_met = true;
        out.notice = "average bitwidth already at or below target; nothing pruned";
        break;
      }
      for (const auto& s : scores) {
        if (bits / params <= target.value) break;
        bits -= layers[s.ref.layer].groups[s.ref.group].size;
        ++to_remove;
      }
      break;
    }
  }

  std::vector<std::vector<std::vector<char>>> drop(layers.size());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    drop[li].resize(layers[li].groups.size());
    for (std::size_t gi = 0; gi < layers[li].groups.size(); ++gi)
      drop[li][gi].assign(layers[li].groups[gi].bitwidth(), 0);
  }
  for (std::size_t k = 0; k < to_remove; ++k) drop[scores[k].ref.layer][scores[k].ref.group][scores[k].ref.coord] = 1;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    for (std::size_t gi = 0; gi < layers[li].groups.size(); ++gi) {
      auto& q = layers[li].groups[gi];
      for (std::size_t i = q.bitwidth(); i-- > 0;)
        if (drop[li][gi][i]) detail::erase_column(q, i);
    }
  }
  out.layers = std::move(layers);
  out.removed = to_remove;
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline stages.

/// Flatten, partition and greedily decompose every parameterized layer.
/// `i_max_override` replaces the per-layer caps (used by the uniform baseline).
inline std::vector<QuantLayer> initialize_layers(const Network& net, std::uint32_t group_size,
                                                 const std::function<int(const std::string&)>& i_max_for) {
  std::vector<QuantLayer> layers;
  for (auto li : net.spec.parameterized_layers()) {
    const auto flat = flatten_params(net, li);
    const auto groups = partition_groups(flat, group_size, li);
    QuantLayer ql;
    ql.group_size = group_size;
    ql.param_count = flat.size();
    ql.layer_index = li;
    ql.groups.resize(groups.size());
    const auto bits = static_cast<std::size_t>(i_max_for(net.spec.layers[li].name));
    parallel_for(groups.size(), [&](std::size_t g) { ql.groups[g] = init_decompose(groups[g], bits); });
    layers.push_back(std::move(ql));
  }
  return layers;
}

/// Alternating refinement: optimize_bases then optimize_coords per group.
inline void refine_layers(const Network& net, std::vector<QuantLayer>& layers, int iters) {
  for (auto& ql : layers) {
    const auto groups = partition_groups(flatten_params(net, ql.layer_index), ql.group_size, ql.layer_index);
    parallel_for(groups.size(), [&](std::size_t g) {
      auto& q = ql.groups[g];
      for (int it = 0; it < iters && q.bitwidth() > 0; ++it) {
        q = optimize_bases(groups[g], q);
        q = optimize_coords(groups[g], q);
      }
    });
  }
}

/// Rounds coordinates to the f32 values the container stores.
inline void round_coords_to_f32(std::vector<QuantLayer>& layers) {
  for (auto& l : layers) {
    for (auto& q : l.groups) {
      for (auto& a : q.coords) a = static_cast<double>(static_cast<float>(a));
      q = canonicalize(std::move(q));
    }
  }
}

/// Total ||w - Bα||^2 over every group of every layer.
inline double total_reconstruction_error(const Network& net, std::span<const QuantLayer> layers) {
  double e = 0.0;
  for (const auto& ql : layers) {
    const auto groups = partition_groups(flatten_params(net, ql.layer_index), ql.group_size, ql.layer_index);
    for (std::size_t g = 0; g < groups.size(); ++g) e += reconstruction_error(groups[g].values, ql.groups[g]);
  }
  return e;
}

/// Seeded sample of up to `batch` calibration records.
inline std::vector<EcgRecord> select_calibration(const Dataset& calib, int batch, std::uint64_t seed) {
  std::vector<std::size_t> idx(calib.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(idx.size(), static_cast<std::size_t>(batch)));
  std::sort(idx.begin(), idx.end());
  std::vector<EcgRecord> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(calib.records[i]);
  return out;
}

inline double quantized_loss(const Network& net, std::span<const QuantLayer> layers, std::span<const EcgRecord> calib) {
  if (calib.empty()) return std::numeric_limits<double>::quiet_NaN();
  Network deq = net;
  dequantize_into(deq, layers);
  return mean_loss(deq, calib);
}

struct PipelineReport {
  double recon_error_init = 0.0;
  double recon_error_pruned = 0.0;
  double recon_error_final = 0.0;
  double calib_loss_full_precision = 0.0;
  double calib_loss_init = 0.0;
  double calib_loss_pruned = 0.0;  // after pruning, before refinement
  double calib_loss_final = 0.0;
  std::size_t coords_initial = 0;
  std::size_t coords_removed = 0;
  double avg_bitwidth_initial = 0.0;
  double avg_bitwidth_final = 0.0;
  std::string notice;
};

struct PipelineResult {
  QuantModel model;
  PipelineReport report;
};

inline void check_layer_names(const NetworkSpec& spec, const AlqConfig& config) {
  for (const auto& [name, bits] : config.i_max) {
    const auto li = spec.layer_by_name(name);
    if (!spec.layers[li].parameterized()) throw ConfigError("layer '" + name + "' has no parameters");
  }
}

inline QuantModel assemble_model(const Network& network, std::vector<QuantLayer> layers, std::uint32_t group_size,
                                 QuantMeta meta) {
  return QuantModel{network.spec, std::move(layers), group_size, std::move(meta)};
}

/// Init and prune, refine, assemble.
inline PipelineResult alq_pipeline(const Network& network, const Dataset& calib, const AlqConfig& config) {
  config.validate();
  check_layer_names(network.spec, config);
  const auto calib_set = select_calibration(calib, config.calib_batch, config.seed);
  if (config.scorer == Scorer::loss_aware && calib_set.empty()) {
    throw ConfigError("loss_aware scoring requires a non-empty calibration set");
  }

  PipelineReport rep;
  rep.calib_loss_full_precision = calib_set.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_loss(network, calib_set);
  auto layers = initialize_layers(network, config.group_size,
                                  [&](const std::string& name) { return config.i_max_for(name); });
  for (const auto& l : layers) rep.coords_initial += l.coord_count();
  rep.avg_bitwidth_initial = network_average_bitwidth(layers);
  rep.recon_error_init = total_reconstruction_error(network, layers);
  rep.calib_loss_init = quantized_loss(network, layers, calib_set);

  auto scores = score_coordinates(layers, network, calib_set, config.scorer, config.curvature);
  auto pruned = prune_coordinates(std::move(layers), std::move(scores), config.prune);
  layers = std::move(pruned.layers);
  rep.coords_removed = pruned.removed;
  rep.notice = pruned.notice;
  rep.recon_error_pruned = total_reconstruction_error(network, layers);
  rep.calib_loss_pruned = quantized_loss(network, layers, calib_set);

  refine_layers(network, layers, config.refine_iters);
  round_coords_to_f32(layers);
  rep.recon_error_final = total_reconstruction_error(network, layers);
  rep.calib_loss_final = quantized_loss(network, layers, calib_set);
  rep.avg_bitwidth_final = network_average_bitwidth(layers);

  return {assemble_model(network, std::move(layers), config.group_size, {config.seed, config_digest(config)}), rep};
}

/// Fixed-bitwidth comparator: greedy init at exactly `bits` bases per group,
/// no pruning, no refinement.
inline QuantModel uniform_baseline(const Network& network, int bits, std::uint32_t group_size) {
  if (bits < 1) throw ConfigError("uniform baseline bitwidth must be >= 1");
  if (group_size < 1 || group_size > 0xFFFF) throw ConfigError("group_size must be in [1,65535]");
  auto layers = initialize_layers(network, group_size, [bits](const std::string&) { return bits; });
  round_coords_to_f32(layers);
  const auto digest = sha256_hex("uniform:" + std::to_string(bits) + ":" + std::to_string(group_size));
  return assemble_model(network, std::move(layers), group_size, {0, digest});
}

}  // namespace alq
