#include "sbof/binary_io.hpp"

namespace sbof::io {

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  if (len > (1u << 20)) throw std::runtime_error("implausible string length");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("unexpected end of binary file");
  return s;
}

void write_header(std::ostream& out, const Magic& magic,
                  std::uint32_t version) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  write_pod(out, version);
}

std::uint32_t read_header(std::istream& in, const Magic& magic) {
  Magic found{};
  in.read(found.data(), static_cast<std::streamsize>(found.size()));
  if (!in || found != magic) {
    throw std::runtime_error("bad magic: expected " +
                             std::string(magic.data(), magic.size()));
  }
  return read_pod<std::uint32_t>(in);
}

}  // namespace sbof::io
