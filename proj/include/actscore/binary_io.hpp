#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actscore/error.hpp"
#include "actscore/tensor.hpp"

namespace actscore::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

using Bytes = std::vector<std::uint8_t>;

/// Appends little-endian fields to a byte buffer.
class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }

  void u32(std::uint64_t v, std::string_view what = "value") {
    if (v > 0xffffffffULL) throw FormatError(std::string(what) + " " + std::to_string(v) + " exceeds u32 range");
    const auto x = static_cast<std::uint32_t>(v);
    append(&x, sizeof x);
  }

  void f64(double v) { append(&v, sizeof v); }

  void u8(std::uint8_t v) { bytes_.push_back(v); }

  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }

  void string(std::string_view s) {
    u32(s.size(), "string length");
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  /// u32 ndim, ndim x u32 dims, f64 values.
  void tensor(const Tensor& t) {
    u32(t.ndim(), "ndim");
    for (auto d : t.shape()) u32(d, "dimension");
    for (double v : t.values()) f64(v);
  }

  const Bytes& bytes() const& noexcept { return bytes_; }
  Bytes bytes() && noexcept { return std::move(bytes_); }

 private:
  void append(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }

  Bytes bytes_;
};

/// Reads little-endian fields, reporting the byte offset of any failure.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string format) : data_(data), format_(std::move(format)) {}

  void expect_magic(std::string_view m) {
    need(m.size(), "magic");
    if (std::memcmp(data_.data() + pos_, m.data(), m.size()) != 0)
      fail("bad magic: expected '" + std::string(m) + "'");
    pos_ += m.size();
  }

  std::uint32_t u32(std::string_view what = "u32") {
    std::uint32_t v;
    read(&v, sizeof v, what);
    return v;
  }

  double f64(std::string_view what = "f64") {
    double v;
    read(&v, sizeof v, what);
    return v;
  }

  std::span<const std::uint8_t> raw(std::size_t n, std::string_view what) {
    need(n, what);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::string string(std::string_view what = "string") {
    const std::uint32_t n = u32(what);
    auto s = raw(n, what);
    return {s.begin(), s.end()};
  }

  /// Tensor record; `value_check` is called as (value, offset) per element.
  template <typename Check>
  Tensor tensor(Check&& value_check) {
    const std::size_t at = pos_;
    const std::uint32_t ndim = u32("ndim");
    if (ndim == 0) fail_at(at, "tensor with zero dimensions");
    Shape shape(ndim);
    std::size_t count = 1;
    for (auto& d : shape) {
      const std::size_t dim_at = pos_;
      d = u32("dimension");
      if (d == 0) fail_at(dim_at, "tensor dimension of size 0");
      count *= d;
      if (count > remaining() / sizeof(double)) fail_at(dim_at, "tensor larger than remaining file");
    }
    std::vector<double> values(count);
    for (auto& v : values) {
      const std::size_t value_at = pos_;
      v = f64("tensor value");
      value_check(v, value_at);
    }
    return Tensor(std::move(shape), std::move(values));
  }

  Tensor tensor() {
    return tensor([](double, std::size_t) {});
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

  void expect_end() {
    if (pos_ != data_.size()) fail(std::to_string(data_.size() - pos_) + " trailing bytes");
  }

  [[noreturn]] void fail(const std::string& msg) const { fail_at(pos_, msg); }

  [[noreturn]] void fail_at(std::size_t offset, const std::string& msg) const {
    throw FormatError(format_ + ": " + msg + " at offset " + std::to_string(offset));
  }

 private:
  void need(std::size_t n, std::string_view what) const {
    if (remaining() < n)
      fail("truncated file: need " + std::to_string(n) + " bytes for " + std::string(what) + ", have " +
           std::to_string(remaining()));
  }

  void read(void* dst, std::size_t n, std::string_view what) {
    need(n, what);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  std::span<const std::uint8_t> data_;
  std::string format_;
  std::size_t pos_ = 0;
};

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string read_text(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return {b.begin(), b.end()};
}

}  // namespace actscore::io
