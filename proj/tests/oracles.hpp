#pragma once

// Independent reference computations used by the unit and acceptance suites.
// These deliberately avoid the library's own solvers.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "alq/alq.hpp"

namespace alq::oracle {

inline double sq_error(std::span<const double> w, std::span<const double> recon) {
  double e = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) e += (w[j] - recon[j]) * (w[j] - recon[j]);
  return e;
}

inline std::vector<double> reconstruct(std::size_t n, std::span<const double> alpha, std::uint64_t sign_bits) {
  // bit (i * n + j) set means beta_i[j] = +1
  std::vector<double> r(n, 0.0);
  for (std::size_t i = 0; i < alpha.size(); ++i)
    for (std::size_t j = 0; j < n; ++j) r[j] += ((sign_bits >> (i * n + j)) & 1u) ? alpha[i] : -alpha[i];
  return r;
}

/// min over all 2^(n*I) sign matrices of ||w - B alpha||^2, alpha fixed.
inline double best_error_fixed_alpha(std::span<const double> w, std::span<const double> alpha) {
  const std::size_t n = w.size(), total = n * alpha.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << total); ++m) best = std::min(best, sq_error(w, reconstruct(n, alpha, m)));
  return best;
}

/// Minimum-norm least-squares alpha via an SVD pseudo-inverse of B.
inline std::vector<double> pinv_coords(std::span<const double> w, const QuantGroup& q) {
  const auto n = static_cast<Eigen::Index>(q.size), I = static_cast<Eigen::Index>(q.bitwidth());
  Eigen::MatrixXd B(n, I);
  for (Eigen::Index i = 0; i < I; ++i)
    for (Eigen::Index j = 0; j < n; ++j) B(j, i) = q.positive(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) ? 1.0 : -1.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-10);
  const Eigen::Map<const Eigen::VectorXd> wv(w.data(), n);
  const Eigen::VectorXd a = svd.solve(wv);
  return {a.data(), a.data() + I};
}

inline std::vector<double> dense_reconstruct(const QuantGroup& q, std::span<const double> alpha) {
  std::vector<double> r(q.size, 0.0);
  for (std::size_t i = 0; i < alpha.size(); ++i)
    for (std::size_t j = 0; j < q.size; ++j) r[j] += q.positive(i, j) ? alpha[i] : -alpha[i];
  return r;
}

/// Removes every live coordinate in turn and measures the calibration loss.
/// Returns the coordinate whose removal increases the loss least (signed:
/// a removal that lowers the loss counts as the smallest increase), with
/// ties resolved like the library (magnitude, then index).
struct RemovalResult {
  CoordRef ref;
  double delta = 0.0;
  std::vector<std::pair<CoordRef, double>> all;
};

inline RemovalResult exhaustive_removal(const Network& net, const std::vector<QuantLayer>& layers,
                                        std::span<const EcgRecord> calib) {
  Network base = net;
  dequantize_into(base, layers);
  const double l0 = mean_loss(base, calib);
  RemovalResult out;
  double best = std::numeric_limits<double>::infinity();
  double best_mag = 0.0;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    for (std::size_t gi = 0; gi < layers[li].groups.size(); ++gi) {
      const auto& q = layers[li].groups[gi];
      for (std::size_t i = 0; i < q.bitwidth(); ++i) {
        auto trial = layers;
        auto& g = trial[li].groups[gi];
        // zero the coordinate's contribution directly rather than via the
        // library's column erase
        std::vector<double> alpha = g.coords;
        alpha[i] = 0.0;
        const auto r = dense_reconstruct(g, alpha);
        Network pruned = base;
        auto flat = flatten_params(pruned, layers[li].layer_index);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < gi; ++k) offset += layers[li].groups[k].size;
        for (std::size_t j = 0; j < g.size; ++j) flat[offset + j] = static_cast<float>(r[j]);
        unflatten_params(pruned, layers[li].layer_index, flat);
        const double d = mean_loss(pruned, calib) - l0;
        const double mag = q.coords[i] * std::sqrt(static_cast<double>(q.size));
        out.all.push_back({{li, gi, i}, d});
        if (d < best || (d == best && mag < best_mag)) {
          best = d;
          best_mag = mag;
          out.ref = {li, gi, i};
          out.delta = d;
        }
      }
    }
  }
  return out;
}

/// Copy of `net` whose every group of `group_size` parameters is exactly
/// alpha * sign(w) with alpha = mean|w| (in f32), so greedy init at any
/// i_max >= 1 reconstructs it exactly.
inline Network snap_to_one_bit(const Network& net, std::size_t group_size) {
  Network out = net;
  for (auto li : net.spec.parameterized_layers()) {
    auto flat = flatten_params(net, li);
    for (std::size_t off = 0; off < flat.size(); off += group_size) {
      const std::size_t end = std::min(flat.size(), off + group_size);
      double s = 0.0;
      for (std::size_t j = off; j < end; ++j) s += std::abs(static_cast<double>(flat[j]));
      const float a = static_cast<float>(s / static_cast<double>(end - off));
      for (std::size_t j = off; j < end; ++j) flat[j] = flat[j] >= 0.0f ? a : -a;
    }
    unflatten_params(out, li, flat);
  }
  return out;
}

}  // namespace alq::oracle
