#ifndef PATHREC_BINARY_IO_H_
#define PATHREC_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "pathrec/errors.h"

namespace pathrec::binary {

inline void write_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

inline void write_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void write_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline std::uint8_t read_u8(std::istream& in) {
  const int c = in.get();
  if (c == std::char_traits<char>::eof()) throw InputError("unexpected end of binary file");
  return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(read_u8(in)) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(read_u8(in)) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!in || got != magic) {
    throw InputError("bad magic: expected '" + std::string(magic) + "'");
  }
}

}  // namespace pathrec::binary

#endif  // PATHREC_BINARY_IO_H_
