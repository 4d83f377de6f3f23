#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pufchain {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Canonical encoding: fixed-width little-endian integers, length-prefixed
// byte strings, fields written in declaration order.
class ByteWriter {
 public:
  ByteWriter& u8(std::uint8_t v);
  ByteWriter& u32(std::uint32_t v);
  ByteWriter& u64(std::uint64_t v);
  ByteWriter& bytes(std::span<const std::uint8_t> v);
  ByteWriter& str(std::string_view v);
  template <std::size_t N>
  ByteWriter& fixed(const std::array<std::uint8_t, N>& v) {
    out_.insert(out_.end(), v.begin(), v.end());
    return *this;
  }

  const Bytes& view() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  Bytes bytes();
  std::string str();
  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    need(N);
    std::array<std::uint8_t, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = in_[pos_ + i];
    pos_ += N;
    return out;
  }

  bool done() const { return pos_ == in_.size(); }
  // Throws unless every input byte was consumed.
  void expect_done() const;

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::string to_hex(std::span<const std::uint8_t> data);
Bytes to_bytes(std::string_view s);

}  // namespace pufchain
