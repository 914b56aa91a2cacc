#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wuw/error.hpp"

// Little-endian byte serialization used by every on-disk and wire format.
namespace wuw::bytes {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put(&v, sizeof v); }
  void u32(std::uint32_t v) { put(&v, sizeof v); }
  void u64(std::uint64_t v) { put(&v, sizeof v); }
  void f32(float v) { put(&v, sizeof v); }
  void tag(std::string_view magic) { put(magic.data(), magic.size()); }
  void raw(std::span<const std::uint8_t> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
  void f32s(std::span<const float> data) { put(data.data(), data.size_bytes()); }

  std::size_t size() const { return buf_.size(); }
  std::vector<std::uint8_t>& buffer() { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  void put(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked cursor. Every read past the end throws Error{truncated};
// nothing is ever read outside the span it was built on.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  float f32() { return get<float>(); }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  bool tag(std::string_view magic) {
    auto got = take(magic.size());
    return std::memcmp(got.data(), magic.data(), magic.size()) == 0;
  }

  std::vector<float> f32s(std::size_t count) {
    if (count > remaining() / sizeof(float)) throw Error(Errc::truncated, "float payload exceeds input");
    std::vector<float> out(count);
    auto src = take(count * sizeof(float));
    std::memcpy(out.data(), src.data(), src.size());
    return out;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw Error(Errc::truncated, "need " + std::to_string(n) + " bytes, have " + std::to_string(remaining()));
  }
  template <class T>
  T get() {
    auto src = take(sizeof(T));
    T v;
    std::memcpy(&v, src.data(), sizeof(T));
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> data);

}  // namespace wuw::bytes
