#pragma once

// Confusion matrices, overall accuracy / macro specificity / macro
// sensitivity, pruning sweeps, and report files.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alq/binary_io.hpp"
#include "alq/bitpack.hpp"
#include "alq/ecgnet.hpp"
#include "alq/error.hpp"
#include "alq/qinfer.hpp"
#include "alq/quantizer.hpp"
#include "alq/signal_data.hpp"

namespace alq {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
  explicit ConfusionMatrix(int classes = kClassCount)
      : k_(classes), counts_(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0) {
    if (classes < 1) throw ConfigError("class count must be >= 1");
  }

  int classes() const noexcept { return k_; }

  std::uint64_t& at(int truth, int pred) { return counts_.at(index(truth, pred)); }
  std::uint64_t at(int truth, int pred) const { return counts_.at(index(truth, pred)); }

  std::uint64_t row_sum(int t) const {
    std::uint64_t s = 0;
    for (int p = 0; p < k_; ++p) s += at(t, p);
    return s;
  }
  std::uint64_t col_sum(int p) const {
    std::uint64_t s = 0;
    for (int t = 0; t < k_; ++t) s += at(t, p);
    return s;
  }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }
  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (int i = 0; i < k_; ++i) s += at(i, i);
    return s;
  }

  /// Each row divided by its sum; all-zero rows stay zero.
  std::vector<std::vector<double>> normalized() const {
    std::vector<std::vector<double>> out(k_, std::vector<double>(k_, 0.0));
    for (int t = 0; t < k_; ++t) {
      const auto s = row_sum(t);
      if (s == 0) continue;
      for (int p = 0; p < k_; ++p) out[t][p] = static_cast<double>(at(t, p)) / static_cast<double>(s);
    }
    return out;
  }

  bool operator==(const ConfusionMatrix&) const = default;

private:
  std::size_t index(int t, int p) const {
    if (t < 0 || t >= k_ || p < 0 || p >= k_) throw ConfigError("class index out of range");
    return static_cast<std::size_t>(t) * static_cast<std::size_t>(k_) + static_cast<std::size_t>(p);
  }

  int k_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truth, int classes = kClassCount) {
  if (preds.size() != truth.size()) throw ConfigError("prediction and truth lengths differ");
  if (preds.empty()) throw ConfigError("no records to tally");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || preds[i] < 0 || preds[i] >= classes) {
      throw ConfigError("record " + std::to_string(i) + ": label out of range");
    }
    ++cm.at(truth[i], preds[i]);
  }
  return cm;
}

struct ClassMetrics {
  std::uint64_t tp = 0, fn = 0, fp = 0, tn = 0;
  std::optional<double> sensitivity;  // percent; empty when the class has no support
  std::optional<double> specificity;  // percent; empty when TN + FP = 0
};

struct MetricsReport {
  double oa = 0.0;   // trace / N, percent
  double spe = 0.0;  // macro one-vs-rest specificity, percent
  double sen = 0.0;  // macro one-vs-rest sensitivity, percent
  double oa_literal_eq4 = 0.0;  // sum_i (TP_i + TN_i) / N, percent; exceeds 100 for k > 1
  std::uint64_t n = 0;
  std::vector<ClassMetrics> per_class;
  std::vector<int> excluded_classes;  // zero support, left out of the sensitivity mean
};

inline MetricsReport metrics(const ConfusionMatrix& cm) {
  MetricsReport rep;
  rep.n = cm.total();
  if (rep.n == 0) throw ConfigError("confusion matrix is empty");
  const double n = static_cast<double>(rep.n);
  double sen_sum = 0.0, spe_sum = 0.0, literal = 0.0;
  int sen_k = 0, spe_k = 0;
  for (int i = 0; i < cm.classes(); ++i) {
    ClassMetrics c;
    c.tp = cm.at(i, i);
    c.fn = cm.row_sum(i) - c.tp;
    c.fp = cm.col_sum(i) - c.tp;
    c.tn = rep.n - c.tp - c.fn - c.fp;
    literal += static_cast<double>(c.tp + c.tn);
    if (c.tp + c.fn > 0) {
      c.sensitivity = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
      sen_sum += *c.sensitivity;
      ++sen_k;
    } else {
      rep.excluded_classes.push_back(i);
    }
    if (c.tn + c.fp > 0) {
      c.specificity = 100.0 * static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
      spe_sum += *c.specificity;
      ++spe_k;
    }
    rep.per_class.push_back(c);
  }
  rep.oa = 100.0 * static_cast<double>(cm.trace()) / n;
  rep.sen = sen_k ? sen_sum / sen_k : 0.0;
  rep.spe = spe_k ? spe_sum / spe_k : 0.0;
  rep.oa_literal_eq4 = 100.0 * literal / n;
  return rep;
}

struct Evaluation {
  ConfusionMatrix confusion;
  MetricsReport metrics;
};

/// Runs the matching forward path (Network or QuantModel) over `test`.
template <class Model>
Evaluation evaluate(const Model& model, const Dataset& test) {
  if (test.empty()) throw ConfigError("cannot evaluate on an empty dataset");
  const auto preds = predict_batch(model, test);
  std::vector<int> p, t;
  p.reserve(preds.size());
  t.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    p.push_back(preds[i].label);
    t.push_back(test.records[i].label);
  }
  auto cm = confusion(p, t, test.class_count);
  auto m = metrics(cm);
  return {std::move(cm), std::move(m)};
}

// ---------------------------------------------------------------------------
// Sweeps over prune rate.

struct SweepPoint {
  double prune_rate = 0.0;
  double avg_bitwidth = 0.0;    // weight-weighted, final model
  double calib_loss = 0.0;      // after pruning, before refinement
  double calib_loss_refined = 0.0;
  double test_oa = 0.0;         // percent
  std::size_t base_bits = 0;
};

/// One pipeline run per rate, sharing the greedy initialization and its
/// scores; each rate re-prunes the shared init.
inline std::vector<SweepPoint> sweep(const Network& network, const Dataset& calib, const Dataset& test,
                                     std::span<const double> rates, const AlqConfig& config) {
  config.validate();
  check_layer_names(network.spec, config);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!(rates[i] >= 0.0 && rates[i] < 1.0)) throw ConfigError("prune.rate must be in [0,1)");
    if (i > 0 && !(rates[i] > rates[i - 1])) throw ConfigError("sweep rates must be strictly ascending");
  }
  const auto calib_set = select_calibration(calib, config.calib_batch, config.seed);
  if (config.scorer == Scorer::loss_aware && calib_set.empty()) {
    throw ConfigError("loss_aware scoring requires a non-empty calibration set");
  }
  const auto init = initialize_layers(network, config.group_size,
                                      [&](const std::string& name) { return config.i_max_for(name); });
  const auto scores = score_coordinates(init, network, calib_set, config.scorer, config.curvature);

  std::vector<SweepPoint> out;
  for (double rate : rates) {
    auto pruned = prune_coordinates(init, scores, PruneTarget::rate(rate));
    auto layers = std::move(pruned.layers);
    SweepPoint pt;
    pt.prune_rate = rate;
    pt.calib_loss = quantized_loss(network, layers, calib_set);
    refine_layers(network, layers, config.refine_iters);
    round_coords_to_f32(layers);
    pt.calib_loss_refined = quantized_loss(network, layers, calib_set);
    pt.avg_bitwidth = network_average_bitwidth(layers);
    for (const auto& l : layers) pt.base_bits += l.base_bits();
    if (!test.empty()) {
      const auto model = assemble_model(network, std::move(layers), config.group_size, {config.seed, {}});
      pt.test_oa = evaluate(model, test).metrics.oa;
    }
    out.push_back(pt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report files.

inline nlohmann::json to_json(const MetricsReport& m) {
  nlohmann::json j;
  j["oa"] = m.oa;
  j["spe"] = m.spe;
  j["sen"] = m.sen;
  j["oa_literal_eq4"] = m.oa_literal_eq4;
  j["n"] = m.n;
  j["excluded_classes"] = m.excluded_classes;
  j["per_class"] = nlohmann::json::array();
  for (std::size_t i = 0; i < m.per_class.size(); ++i) {
    const auto& c = m.per_class[i];
    nlohmann::json row{{"class", i}, {"tp", c.tp}, {"fn", c.fn}, {"fp", c.fp}, {"tn", c.tn}};
    row["sensitivity"] = c.sensitivity ? nlohmann::json(*c.sensitivity) : nlohmann::json(nullptr);
    row["specificity"] = c.specificity ? nlohmann::json(*c.specificity) : nlohmann::json(nullptr);
    j["per_class"].push_back(row);
  }
  return j;
}

inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "true\\pred";
  for (int p = 0; p < cm.classes(); ++p) out += "," + std::to_string(p);
  out += "\n";
  for (int t = 0; t < cm.classes(); ++t) {
    out += std::to_string(t);
    for (int p = 0; p < cm.classes(); ++p) out += "," + std::to_string(cm.at(t, p));
    out += "\n";
  }
  return out;
}

inline std::string normalized_confusion_csv(const ConfusionMatrix& cm) {
  const auto norm = cm.normalized();
  std::string out = "true\\pred";
  for (int p = 0; p < cm.classes(); ++p) out += "," + std::to_string(p);
  out += "\n";
  for (int t = 0; t < cm.classes(); ++t) {
    out += std::to_string(t);
    for (int p = 0; p < cm.classes(); ++p) out += detail::format(",%.4f", norm[t][p]);
    out += "\n";
  }
  return out;
}

/// Row-normalized matrix as a plain-text heat table (percent, blank for 0).
inline std::string confusion_heat_table(const ConfusionMatrix& cm) {
  const auto norm = cm.normalized();
  std::string out = "t\\p";
  for (int p = 0; p < cm.classes(); ++p) out += detail::format("%5d", p);
  out += "\n";
  for (int t = 0; t < cm.classes(); ++t) {
    out += detail::format("%3d", t);
    for (int p = 0; p < cm.classes(); ++p) {
      const double v = 100.0 * norm[t][p];
      out += v > 0.0 ? detail::format("%5.0f", v) : std::string("    .");
    }
    out += "\n";
  }
  return out;
}

inline std::string sweep_csv(std::span<const SweepPoint> points) {
  std::string out = "prune_rate,avg_bitwidth,base_bits,calib_loss,calib_loss_refined,test_oa\n";
  for (const auto& p : points) {
    out += detail::format("%.6f,%.6f,%zu,%.9g,%.9g,%.4f\n", p.prune_rate, p.avg_bitwidth, p.base_bits, p.calib_loss,
                          p.calib_loss_refined, p.test_oa);
  }
  return out;
}

inline nlohmann::json to_json(std::span<const SweepPoint> points) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : points) {
    j.push_back({{"prune_rate", p.prune_rate},
                 {"avg_bitwidth", p.avg_bitwidth},
                 {"base_bits", p.base_bits},
                 {"calib_loss", p.calib_loss},
                 {"calib_loss_refined", p.calib_loss_refined},
                 {"test_oa", p.test_oa}});
  }
  return j;
}

/// Whatever results are present get written; absent parts are skipped.
struct ReportBundle {
  std::optional<Evaluation> evaluation;
  std::optional<MemoryReport> memory;
  std::vector<SweepPoint> sweep;
};

/// Writes metrics.json, confusion.csv, confusion_normalized.csv,
/// confusion.txt, memory.txt, memory.json, sweep.csv and sweep.json as
/// applicable. Returns the written paths in write order.
inline std::vector<std::string> emit_reports(const ReportBundle& results, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& text) {
    const auto path = (std::filesystem::path(out_dir) / name).string();
    io::write_text(path, text);
    written.push_back(path);
  };
  if (results.evaluation) {
    put("metrics.json", to_json(results.evaluation->metrics).dump(2) + "\n");
    put("confusion.csv", confusion_csv(results.evaluation->confusion));
    put("confusion_normalized.csv", normalized_confusion_csv(results.evaluation->confusion));
    put("confusion.txt", confusion_heat_table(results.evaluation->confusion));
  }
  if (results.memory) {
    put("memory.txt", memory_table(*results.memory));
    put("memory.json", to_json(*results.memory).dump(2) + "\n");
  }
  if (!results.sweep.empty()) {
    put("sweep.csv", sweep_csv(results.sweep));
    put("sweep.json", to_json(std::span<const SweepPoint>(results.sweep)).dump(2) + "\n");
  }
  return written;
}

}  // namespace alq
