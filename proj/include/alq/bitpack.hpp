#pragma once

// "ALQQ" container for quantized models and base-bit memory accounting.
//
// Layout (little-endian):
//   "ALQQ" | u16 version | spec descriptor | u16 group_size
//   per parameterized layer:
//     u32 group count
//     per group: u16 n_k | u8 I_k | I_k x f32 alpha | I_k packed base columns
//   trailer: u64 seed | u8 digest length | digest bytes
//
// Each base column takes ceil(n_k / 8) bytes, LSB-first; a set bit is +1.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "alq/binary_io.hpp"
#include "alq/ecgnet.hpp"
#include "alq/error.hpp"
#include "alq/quant_model.hpp"

namespace alq {

inline constexpr std::uint16_t kQuantFormatVersion = 1;

inline std::vector<std::uint8_t> encode_quant_model(const QuantModel& model) {
  validate(model);
  io::ByteWriter w;
  w.magic("ALQQ");
  w.u16(kQuantFormatVersion);
  write_spec(w, model.spec);
  w.u16(static_cast<std::uint16_t>(model.group_size));
  for (const auto& layer : model.layers) {
    w.u32(static_cast<std::uint32_t>(layer.groups.size()));
    for (const auto& g : layer.groups) {
      if (g.bitwidth() > 0xFF) throw ShapeError("group bitwidth exceeds 255");
      w.u16(static_cast<std::uint16_t>(g.size));
      w.u8(static_cast<std::uint8_t>(g.bitwidth()));
      for (double a : g.coords) w.f32(static_cast<float>(a));
      w.raw(g.bits);
    }
  }
  w.u64(model.meta.seed);
  if (model.meta.config_digest.size() > 0xFF) throw ShapeError("config digest too long");
  w.u8(static_cast<std::uint8_t>(model.meta.config_digest.size()));
  w.raw({reinterpret_cast<const std::uint8_t*>(model.meta.config_digest.data()), model.meta.config_digest.size()});
  return w.bytes();
}

inline QuantModel decode_quant_model(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("ALQQ");
  const std::size_t vat = r.offset();
  if (r.u16("version") != kQuantFormatVersion) throw FormatError("unsupported container version", vat);

  QuantModel model;
  const std::size_t spec_at = r.offset();
  model.spec = read_spec(r);
  try {
    model.spec.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("invalid spec descriptor: ") + e.what(), spec_at);
  }
  const std::size_t gs_at = r.offset();
  model.group_size = r.u16("group size");
  if (model.group_size == 0) throw FormatError("group size must be >= 1", gs_at);

  for (auto li : model.spec.parameterized_layers()) {
    const auto& name = model.spec.layers[li].name;
    QuantLayer layer;
    layer.group_size = model.group_size;
    layer.layer_index = li;
    layer.param_count = param_count(model.spec, li);
    const std::size_t count_at = r.offset();
    const std::uint32_t count = r.u32(("group count of layer " + name).c_str());
    if (count > layer.param_count) throw FormatError("group count exceeds parameter count in layer " + name, count_at);
    layer.groups.resize(count);
    std::size_t covered = 0;
    for (std::uint32_t gi = 0; gi < count; ++gi) {
      const std::string where = "layer " + name + " group " + std::to_string(gi);
      auto& g = layer.groups[gi];
      const std::size_t head_at = r.offset();
      g.size = r.u16(("group header of " + where).c_str());
      const std::uint8_t bits = r.u8(("group header of " + where).c_str());
      if (g.size == 0 || g.size > model.group_size) throw FormatError("group size out of range in " + where, head_at);
      r.require(std::size_t{bits} * sizeof(float), "alpha block of " + where);
      g.coords.resize(bits);
      for (auto& a : g.coords) a = r.f32();
      const std::size_t cb = QuantGroup::column_bytes(g.size);
      const std::size_t bits_at = r.offset();
      auto raw = r.raw(cb * bits, "base block of " + where);
      g.bits.assign(raw.begin(), raw.end());
      if (g.size % 8 != 0) {
        const auto pad_mask = static_cast<std::uint8_t>(0xFFu << (g.size % 8));
        for (std::size_t i = 0; i < bits; ++i)
          if (g.bits[i * cb + cb - 1] & pad_mask) throw FormatError("nonzero padding bits in " + where, bits_at);
      }
      if (!is_canonical(g)) throw FormatError("non-canonical coordinates in " + where, head_at);
      covered += g.size;
    }
    if (covered != layer.param_count) {
      throw FormatError("groups of layer " + name + " cover " + std::to_string(covered) + " of " +
                            std::to_string(layer.param_count) + " parameters",
                        count_at);
    }
    model.layers.push_back(std::move(layer));
  }
  model.meta.seed = r.u64("trailer");
  const auto len = r.u8("trailer");
  auto digest = r.raw(len, "trailer");
  model.meta.config_digest.assign(digest.begin(), digest.end());
  if (!r.done()) throw FormatError("trailing bytes", r.offset());
  return model;
}

inline void serialize(const QuantModel& model, const std::string& path) {
  io::write_file(path, encode_quant_model(model));
}

inline QuantModel deserialize(const std::string& path) { return decode_quant_model(io::read_file(path)); }

// ---------------------------------------------------------------------------
// Memory accounting. The headline figure counts binary-base bits only
// (params x average bitwidth); coordinate storage and container bytes are
// reported separately.

struct MemoryRow {
  std::string name;
  double avg_bitwidth = 0.0;  // weight-weighted
  double group_mean_bitwidth = 0.0;
  std::size_t params = 0;
  std::size_t base_bits = 0;
  std::size_t coord_bits = 0;  // 32 per retained coordinate
};

struct MemoryReport {
  std::vector<MemoryRow> rows;
  std::size_t total_params = 0;
  std::size_t total_base_bits = 0;
  std::size_t total_coord_bits = 0;
  std::size_t file_bits = 0;  // whole container, 0 when not computed
  double avg_bitwidth = 0.0;
  double kilobytes = 0.0;  // total_base_bits / 8 / 1024
  double compression_rate = 0.0;  // 32 * total_params / total_base_bits
};

namespace detail {

inline void finish_totals(MemoryReport& rep) {
  rep.total_params = rep.total_base_bits = rep.total_coord_bits = 0;
  for (const auto& r : rep.rows) {
    rep.total_params += r.params;
    rep.total_base_bits += r.base_bits;
    rep.total_coord_bits += r.coord_bits;
  }
  rep.avg_bitwidth = rep.total_params ? static_cast<double>(rep.total_base_bits) / static_cast<double>(rep.total_params) : 0.0;
  rep.kilobytes = static_cast<double>(rep.total_base_bits) / 8.0 / 1024.0;
  rep.compression_rate = rep.total_base_bits
                             ? 32.0 * static_cast<double>(rep.total_params) / static_cast<double>(rep.total_base_bits)
                             : std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline MemoryReport memory_report(const QuantModel& model) {
  MemoryReport rep;
  for (const auto& l : model.layers) {
    const auto stats = average_bitwidth(l);
    MemoryRow row;
    row.name = model.spec.layers.at(l.layer_index).name;
    row.avg_bitwidth = stats.weight_weighted;
    row.group_mean_bitwidth = stats.group_mean;
    row.params = l.param_count;
    row.base_bits = l.base_bits();
    row.coord_bits = 32 * l.coord_count();
    rep.rows.push_back(std::move(row));
  }
  detail::finish_totals(rep);
  rep.file_bits = 8 * encode_quant_model(model).size();
  return rep;
}

/// Accounting for externally supplied per-layer bitwidths (one per
/// parameterized layer of `spec`): base_bits = round(params * bitwidth).
inline MemoryReport memory_report_from_bitwidths(const NetworkSpec& spec, std::span<const double> bitwidths) {
  const auto counts = param_count(spec);
  if (bitwidths.size() != counts.layers.size()) {
    throw ConfigError("expected " + std::to_string(counts.layers.size()) + " bitwidths, got " +
                      std::to_string(bitwidths.size()));
  }
  MemoryReport rep;
  for (std::size_t i = 0; i < counts.layers.size(); ++i) {
    if (!(bitwidths[i] >= 0.0) || !std::isfinite(bitwidths[i])) throw ConfigError("bitwidths must be finite and >= 0");
    MemoryRow row;
    row.name = counts.layers[i].name;
    row.avg_bitwidth = row.group_mean_bitwidth = bitwidths[i];
    row.params = counts.layers[i].count;
    row.base_bits = static_cast<std::size_t>(std::llround(static_cast<double>(row.params) * bitwidths[i]));
    rep.rows.push_back(std::move(row));
  }
  detail::finish_totals(rep);
  return rep;
}

namespace detail {

inline std::string format(const char* fmt, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

inline std::string thousands(std::size_t v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

}  // namespace detail

/// Aligned text table: Layer | Average Bitwidth | Params | Memory.
inline std::string memory_table(const MemoryReport& rep) {
  std::string out = detail::format("%-12s %16s %10s %14s\n", "Layer", "Average Bitwidth", "Params", "Memory");
  for (const auto& r : rep.rows) {
    out += detail::format("%-12s %16.4f %10s %14s\n", r.name.c_str(), r.avg_bitwidth, detail::thousands(r.params).c_str(),
                          (detail::thousands(r.base_bits) + " Bit").c_str());
  }
  out += detail::format("%-12s %16.4f %10s %14s = %.3f KB\n", "Total", rep.avg_bitwidth,
                        detail::thousands(rep.total_params).c_str(),
                        (detail::thousands(rep.total_base_bits) + " Bit").c_str(), rep.kilobytes);
  out += detail::format("compression %.2fx vs 32-bit; coordinate overhead %s Bit", rep.compression_rate,
                        detail::thousands(rep.total_coord_bits).c_str());
  if (rep.file_bits) out += detail::format("; container %s Bit", detail::thousands(rep.file_bits).c_str());
  out += "\n";
  return out;
}

inline nlohmann::json to_json(const MemoryReport& rep) {
  nlohmann::json j;
  j["layers"] = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    j["layers"].push_back({{"name", r.name},
                           {"avg_bitwidth", r.avg_bitwidth},
                           {"group_mean_bitwidth", r.group_mean_bitwidth},
                           {"params", r.params},
                           {"base_bits", r.base_bits},
                           {"coord_bits", r.coord_bits}});
  }
  j["total_params"] = rep.total_params;
  j["total_base_bits"] = rep.total_base_bits;
  j["total_coord_bits"] = rep.total_coord_bits;
  j["file_bits"] = rep.file_bits;
  j["avg_bitwidth"] = rep.avg_bitwidth;
  j["kilobytes"] = std::round(rep.kilobytes * 1000.0) / 1000.0;
  j["compression_rate"] = rep.compression_rate;
  return j;
}

}  // namespace alq
