#ifndef AWE_BINARY_IO_HPP
#define AWE_BINARY_IO_HPP

// Little-endian primitive readers/writers shared by the archive and
// checkpoint formats. Assumes a little-endian host (checked at startup of
// the writers below).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "awe/common.hpp"

namespace awe::detail {

static_assert(sizeof(float) == 4, "32-bit IEEE float required");

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os) throw Error("write failure");
}

inline void read_bytes(std::istream& is, void* p, std::size_t n,
                       const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw Error(std::string("corrupt file: truncated while reading ") + what);
}

template <typename T>
void write_pod(std::ostream& os, T v) {
  write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v;
  read_bytes(is, &v, sizeof(T), what);
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  write_bytes(os, s.data(), s.size());
}

inline std::string read_string(std::istream& is, const char* what) {
  const auto n = read_pod<std::uint32_t>(is, what);
  if (n > (1u << 20)) throw Error(std::string("corrupt file: oversized string in ") + what);
  std::string s(n, '\0');
  read_bytes(is, s.data(), n, what);
  return s;
}

inline void write_floats(std::ostream& os, const float* p, std::size_t n) {
  write_bytes(os, p, n * sizeof(float));
}

inline void read_floats(std::istream& is, float* p, std::size_t n,
                        const char* what) {
  read_bytes(is, p, n * sizeof(float), what);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "' for reading");
  return is;
}

}  // namespace awe::detail

#endif  // AWE_BINARY_IO_HPP
