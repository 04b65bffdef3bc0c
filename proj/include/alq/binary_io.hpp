#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alq/error.hpp"

namespace alq::io {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

/// Append-only little-endian byte sink.
class ByteWriter {
public:
  void magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f32(float v) { put(v); }
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  std::size_t size() const noexcept { return bytes_.size(); }

private:
  template <class T>
  void put(T v) {
    std::array<std::uint8_t, sizeof(T)> buf;
    std::memcpy(buf.data(), &v, sizeof(T));
    bytes_.insert(bytes_.end(), buf.begin(), buf.end());
  }

  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader. Every failure reports the byte offset.
class ByteReader {
public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }

  void expect_magic(std::string_view tag) {
    if (remaining() < tag.size() ||
        std::memcmp(data_.data() + pos_, tag.data(), tag.size()) != 0) {
      throw FormatError("bad magic", pos_);
    }
    pos_ += tag.size();
  }

  std::uint8_t u8(std::string_view what = "u8") { return get<std::uint8_t>(what); }
  std::uint16_t u16(std::string_view what = "u16") { return get<std::uint16_t>(what); }
  std::uint32_t u32(std::string_view what = "u32") { return get<std::uint32_t>(what); }
  std::uint64_t u64(std::string_view what = "u64") { return get<std::uint64_t>(what); }
  float f32(std::string_view what = "f32") { return get<float>(what); }

  std::span<const std::uint8_t> raw(std::size_t n, std::string_view what = "bytes") {
    require(n, what);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  void require(std::size_t n, std::string_view what) const {
    if (remaining() < n) throw FormatError("truncated " + std::string(what), pos_);
  }

private:
  template <class T>
  T get(std::string_view what) {
    require(sizeof(T), what);
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

inline void write_text(const std::string& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace alq::io
