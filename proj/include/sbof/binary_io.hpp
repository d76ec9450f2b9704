#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace sbof::io {

// All persisted formats are little-endian; this build assumes a
// little-endian host.
static_assert(std::endian::native == std::endian::little);

using Magic = std::array<char, 8>;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("unexpected end of binary file");
  return value;
}

void write_string(std::ostream& out, const std::string& s);
std::string read_string(std::istream& in);

void write_header(std::ostream& out, const Magic& magic, std::uint32_t version);
/// Throws unless the stream starts with `magic`; returns the version.
std::uint32_t read_header(std::istream& in, const Magic& magic);

constexpr Magic make_magic(const char (&text)[9]) {
  Magic m{};
  for (std::size_t i = 0; i < 8; ++i) m[i] = text[i];
  return m;
}

}  // namespace sbof::io
