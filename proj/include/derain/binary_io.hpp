#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace derain::binary {

static_assert(std::endian::native == std::endian::little,
              "binary containers are written as little-endian; port the helpers before use");

template <typename T>
void write(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  os.write(bytes, sizeof(T));
}

template <typename T>
T read(std::istream& is) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  if (!is.read(bytes, sizeof(T))) throw std::runtime_error("truncated binary stream");
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace derain::binary
