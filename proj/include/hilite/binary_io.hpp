#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <limits>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

#include "hilite/error.hpp"

// Little-endian primitive encoding shared by the binary file formats.
namespace hilite::binio {

static_assert(std::numeric_limits<float>::is_iec559, "IEEE-754 float required");

template <typename T>
  requires std::is_integral_v<T>
void put(std::ostream& os, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>(u & 0xFFu);
    if constexpr (sizeof(T) > 1) u = static_cast<U>(u >> 8);
  }
  os.write(buf.data(), buf.size());
}

inline void put_f32(std::ostream& os, float value) {
  put<std::uint32_t>(os, std::bit_cast<std::uint32_t>(value));
}

inline void put_bytes(std::ostream& os, std::string_view bytes) {
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline void put_string(std::ostream& os, std::string_view s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  put_bytes(os, s);
}

inline void read_exact(std::istream& is, char* dst, std::size_t n, const char* what) {
  is.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw DataError(std::string("unexpected end of file while reading ") + what);
}

template <typename T>
  requires std::is_integral_v<T>
T get(std::istream& is, const char* what) {
  std::array<unsigned char, sizeof(T)> buf{};
  read_exact(is, reinterpret_cast<char*>(buf.data()), buf.size(), what);
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    if constexpr (sizeof(T) > 1) u = static_cast<decltype(u)>(u << 8);
    u = static_cast<decltype(u)>(u | buf[i]);
  }
  return static_cast<T>(u);
}

inline float get_f32(std::istream& is, const char* what) {
  return std::bit_cast<float>(get<std::uint32_t>(is, what));
}

inline std::string get_bytes(std::istream& is, std::size_t n, const char* what) {
  std::string s(n, '\0');
  if (n > 0) read_exact(is, s.data(), n, what);
  return s;
}

inline std::string get_string(std::istream& is, const char* what,
                              std::size_t max_len = std::size_t{1} << 30) {
  const auto n = get<std::uint32_t>(is, what);
  if (n > max_len) throw DataError(std::string("string too long in ") + what);
  return get_bytes(is, n, what);
}

inline bool at_eof(std::istream& is) {
  return is.peek() == std::char_traits<char>::eof();
}

}  // namespace hilite::binio
