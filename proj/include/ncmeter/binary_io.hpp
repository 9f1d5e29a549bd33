#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

#include "ncmeter/error.hpp"

namespace ncm::binary {

// All on-disk integers and floats are little-endian regardless of host order.

template <typename T>
concept Scalar = std::is_integral_v<T> || std::is_floating_point_v<T>;

template <Scalar T>
void put(std::ostream& out, T value) {
  using Bits = std::conditional_t<sizeof(T) == 1, std::uint8_t,
               std::conditional_t<sizeof(T) == 2, std::uint16_t,
               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
  auto bits = std::bit_cast<Bits>(value);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  }
  out.write(bytes.data(), bytes.size());
}

inline void put_magic(std::ostream& out, std::string_view magic) {
  // 6 ASCII characters followed by 2 zero bytes.
  std::array<char, 8> bytes{};
  std::memcpy(bytes.data(), magic.data(), magic.size());
  out.write(bytes.data(), bytes.size());
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Reads exactly n bytes. Returns false on clean EOF before any byte; throws
  // truncation when the stream ends mid-object.
  bool read_or_eof(char* dst, std::size_t n, std::string_view what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    auto got = static_cast<std::size_t>(in_.gcount());
    consumed_ += got;
    if (got == n) return true;
    if (got == 0) return false;
    fail(ErrorKind::truncation, "truncated " + std::string(what) + ": expected " +
                                    std::to_string(n) + " bytes, got " + std::to_string(got));
  }

  void read(char* dst, std::size_t n, std::string_view what) {
    if (!read_or_eof(dst, n, what)) {
      fail(ErrorKind::truncation, "truncated " + std::string(what) + ": unexpected end of stream");
    }
  }

  template <Scalar T>
  T get(std::string_view what) {
    std::array<char, sizeof(T)> bytes{};
    read(bytes.data(), bytes.size(), what);
    return decode<T>(bytes.data());
  }

  template <Scalar T>
  static T decode(const char* src) {
    using Bits = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                 std::conditional_t<sizeof(T) == 2, std::uint16_t,
                 std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
    Bits bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bits |= static_cast<Bits>(static_cast<std::uint8_t>(src[i])) << (8 * i);
    }
    return std::bit_cast<T>(bits);
  }

  void expect_magic(std::string_view magic) {
    std::array<char, 8> bytes{};
    in_.read(bytes.data(), bytes.size());
    consumed_ += static_cast<std::size_t>(in_.gcount());
    std::array<char, 8> want{};
    std::memcpy(want.data(), magic.data(), magic.size());
    if (in_.gcount() != 8 || bytes != want) {
      fail(ErrorKind::format, "bad magic: expected \"" + std::string(magic) + "\"");
    }
  }

  // Bytes left in the stream when it is seekable; nullopt for pipes.
  std::optional<std::uint64_t> remaining() {
    auto here = in_.tellg();
    if (here < 0) {
      in_.clear();
      return std::nullopt;
    }
    in_.seekg(0, std::ios::end);
    auto end = in_.tellg();
    in_.seekg(here);
    if (end < 0 || !in_) {
      in_.clear();
      return std::nullopt;
    }
    return static_cast<std::uint64_t>(end - here);
  }

  bool at_eof() {
    return in_.peek() == std::char_traits<char>::eof();
  }

  std::size_t consumed() const { return consumed_; }

 private:
  std::istream& in_;
  std::size_t consumed_ = 0;
};

}  // namespace ncm::binary
