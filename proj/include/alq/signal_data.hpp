#pragma once

// Labeled 10 s ECG fragments: ingestion, per-record normalization,
// train/test splitting and a synthetic desk-scale generator.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "alq/binary_io.hpp"
#include "alq/error.hpp"

namespace alq {

inline constexpr int kFragmentLength = 3600;  // 10 s at 360 Hz
inline constexpr int kClassCount = 17;
inline constexpr double kSampleRateHz = 360.0;

struct EcgRecord {
  std::vector<float> samples;
  int label = 0;
};

struct Dataset {
  std::vector<EcgRecord> records;
  int class_count = kClassCount;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool stratified = true;
};

enum class DataFormat { csv, raw_f32 };

inline DataFormat parse_data_format(std::string_view s) {
  if (s == "csv") return DataFormat::csv;
  if (s == "raw-f32") return DataFormat::raw_f32;
  throw ConfigError("unknown dataset format '" + std::string(s) + "' (expected csv or raw-f32)");
}

namespace detail {

inline std::string record_prefix(std::size_t index) { return "record " + std::to_string(index) + ": "; }

inline void check_label(long label, int class_count, std::size_t index) {
  if (label < 0 || label >= class_count) throw IngestError(record_prefix(index) + "label out of range");
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline EcgRecord parse_csv_row(std::string_view line, std::size_t index, int class_count) {
  std::vector<std::string_view> fields;
  fields.reserve(kFragmentLength + 1);
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (fields.size() != kFragmentLength + 1) {
    throw IngestError(record_prefix(index) + "expected " + std::to_string(kFragmentLength) + " samples, got " +
                      std::to_string(fields.size() - 1));
  }
  EcgRecord rec;
  rec.samples.resize(kFragmentLength);
  for (int j = 0; j < kFragmentLength; ++j) {
    auto f = fields[j];
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
      throw IngestError(record_prefix(index) + "non-numeric value in column " + std::to_string(j));
    }
    if (!std::isfinite(v)) throw IngestError(record_prefix(index) + "non-finite value in column " + std::to_string(j));
    rec.samples[j] = static_cast<float>(v);
  }
  auto lf = fields.back();
  long label = 0;
  auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
  if (ec != std::errc() || ptr != lf.data() + lf.size() || lf.empty()) {
    throw IngestError(record_prefix(index) + "non-numeric label");
  }
  check_label(label, class_count, index);
  rec.label = static_cast<int>(label);
  return rec;
}

}  // namespace detail

/// Reads a dataset. CSV: 3600 samples then an integer label per line.
/// raw-f32: "ALQD", u32 count, then per record 3600 LE f32 and a u8 label.
inline Dataset load_dataset(const std::string& path, DataFormat format, int class_count = kClassCount) {
  Dataset ds;
  ds.class_count = class_count;
  if (format == DataFormat::csv) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    std::string line;
    std::size_t index = 0;
    while (std::getline(in, line)) {
      if (detail::trim(line).empty()) continue;
      ds.records.push_back(detail::parse_csv_row(line, index, class_count));
      ++index;
    }
  } else {
    auto bytes = io::read_file(path);
    io::ByteReader r(bytes);
    try {
      r.expect_magic("ALQD");
      std::uint32_t count = r.u32("record count");
      ds.records.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        r.require(kFragmentLength * sizeof(float) + 1, detail::record_prefix(i) + "record body");
        EcgRecord rec;
        rec.samples.resize(kFragmentLength);
        for (int j = 0; j < kFragmentLength; ++j) {
          float v = r.f32();
          if (!std::isfinite(v)) throw IngestError(detail::record_prefix(i) + "non-finite value in column " + std::to_string(j));
          rec.samples[j] = v;
        }
        std::uint8_t label = r.u8();
        detail::check_label(label, class_count, i);
        rec.label = label;
        ds.records.push_back(std::move(rec));
      }
    } catch (const FormatError& e) {
      throw IngestError(e.what());
    }
  }
  if (ds.records.empty()) throw IngestError("empty dataset: " + path);
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path, DataFormat format) {
  if (format == DataFormat::csv) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    char buf[32];
    for (const auto& rec : ds.records) {
      for (float v : rec.samples) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out.write(buf, ptr - buf);
        out.put(',');
      }
      out << rec.label << '\n';
    }
    if (!out) throw Error("write failed: " + path);
    return;
  }
  io::ByteWriter w;
  w.magic("ALQD");
  w.u32(static_cast<std::uint32_t>(ds.records.size()));
  for (const auto& rec : ds.records) {
    for (float v : rec.samples) w.f32(v);
    w.u8(static_cast<std::uint8_t>(rec.label));
  }
  io::write_file(path, w.bytes());
}

/// Per-record z-score. A constant record maps to all zeros and sets
/// `*flatline` when provided.
inline EcgRecord normalize(const EcgRecord& record, bool* flatline = nullptr) {
  const auto n = static_cast<double>(record.samples.size());
  double mean = 0.0;
  for (float v : record.samples) mean += v;
  mean /= n;
  double var = 0.0;
  for (float v : record.samples) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);

  EcgRecord out{std::vector<float>(record.samples.size(), 0.0f), record.label};
  if (flatline) *flatline = !(sd > 0.0);
  if (!(sd > 0.0)) return out;
  for (std::size_t i = 0; i < record.samples.size(); ++i) {
    out.samples[i] = static_cast<float>((record.samples[i] - mean) / sd);
  }
  return out;
}

struct NormalizeStats {
  std::size_t flatline_count = 0;
};

inline Dataset normalize(const Dataset& ds, NormalizeStats* stats = nullptr) {
  Dataset out;
  out.class_count = ds.class_count;
  out.records.reserve(ds.size());
  std::size_t flat = 0;
  for (const auto& r : ds.records) {
    bool f = false;
    out.records.push_back(normalize(r, &f));
    flat += f ? 1 : 0;
  }
  if (stats) stats->flatline_count = flat;
  return out;
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<int> undersized_classes;  // classes with < 2 records, sent wholly to train
};

/// Index-level split. Both sides are sorted ascending.
inline SplitIndices split_indices(const Dataset& ds, const SplitSpec& spec) {
  if (ds.empty()) throw IngestError("cannot split an empty dataset");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must be in (0,1)");
  }
  const std::size_t n = ds.size();
  const auto target = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  std::mt19937_64 rng(spec.seed);
  SplitIndices out;
  std::vector<char> in_train(n, 0);

  if (!spec.stratified) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < target; ++i) in_train[order[i]] = 1;
  } else {
    std::vector<std::vector<std::size_t>> by_class(ds.class_count);
    for (std::size_t i = 0; i < n; ++i) by_class.at(ds.records[i].label).push_back(i);

    // Largest-remainder apportionment so the total matches `target` and each
    // class is within one record of its exact share.
    std::size_t assigned = 0;
    std::vector<std::size_t> take(ds.class_count, 0);
    std::vector<std::pair<double, int>> remainders;
    for (int c = 0; c < ds.class_count; ++c) {
      const auto cnt = by_class[c].size();
      if (cnt == 0) continue;
      if (cnt < 2) {
        take[c] = cnt;
        out.undersized_classes.push_back(c);
      } else {
        const double quota = spec.train_fraction * static_cast<double>(cnt);
        take[c] = static_cast<std::size_t>(std::floor(quota));
        remainders.emplace_back(quota - std::floor(quota), c);
      }
      assigned += take[c];
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [frac, c] : remainders) {
      if (assigned >= target) break;
      if (take[c] < by_class[c].size()) {
        ++take[c];
        ++assigned;
      }
    }
    for (int c = 0; c < ds.class_count; ++c) {
      auto idx = by_class[c];
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t i = 0; i < take[c]; ++i) in_train[idx[i]] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? out.train : out.test).push_back(i);
  return out;
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.class_count = ds.class_count;
  out.records.reserve(indices.size());
  for (auto i : indices) out.records.push_back(ds.records.at(i));
  return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
  auto idx = split_indices(ds, spec);
  return {subset(ds, idx.train), subset(ds, idx.test)};
}

/// Noise-free template for one class: a sinusoid with class-specific
/// frequency and phase plus a periodic Gaussian pulse train.
inline std::vector<float> synth_template(int cls, int length = kFragmentLength) {
  const double freq_hz = 0.6 + 0.37 * cls;
  const double phase = 0.9 * cls;
  const int period = 150 + 23 * cls;           // samples between pulses
  const int pulse_offset = (37 * cls) % period;
  const double pulse_amp = 1.5 + 0.1 * (cls % 5);
  const double pulse_width = 4.0 + (cls % 3);  // samples

  std::vector<float> out(length);
  for (int t = 0; t < length; ++t) {
    double v = 0.5 * std::sin(2.0 * std::numbers::pi * freq_hz * t / kSampleRateHz + phase);
    int d = (t - pulse_offset) % period;
    if (d < 0) d += period;
    const double dist = std::min(d, period - d);
    v += pulse_amp * std::exp(-0.5 * (dist / pulse_width) * (dist / pulse_width));
    out[t] = static_cast<float>(v);
  }
  return out;
}

/// 17 * n_per_class records, grouped by class, each a class template plus
/// N(0, noise_sigma) noise drawn from a stream seeded by `seed`.
inline Dataset synth_generate(int n_per_class, std::uint64_t seed, double noise_sigma) {
  if (n_per_class < 1) throw ConfigError("n_per_class must be >= 1");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be finite and >= 0");
  Dataset ds;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int c = 0; c < kClassCount; ++c) {
    const auto tmpl = synth_template(c);
    for (int k = 0; k < n_per_class; ++k) {
      EcgRecord rec{tmpl, c};
      if (noise_sigma > 0.0) {
        for (auto& v : rec.samples) v = static_cast<float>(v + noise_sigma * noise(rng));
      }
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

}  // namespace alq
