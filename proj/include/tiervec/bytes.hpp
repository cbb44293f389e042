#pragma once

// Little-endian field helpers for the on-storage formats.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "tiervec/errors.hpp"

namespace tiervec::bytes {

static_assert(std::endian::native == std::endian::little,
              "on-storage formats assume a little-endian host");

template <class T>
void put(std::vector<std::byte>& out, T value) {
  const auto* p = reinterpret_cast<const std::byte*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
void put_at(std::span<std::byte> out, std::size_t offset, T value) {
  std::memcpy(out.data() + offset, &value, sizeof(T));
}

template <class T>
T get(std::span<const std::byte> in, std::size_t offset) {
  if (offset + sizeof(T) > in.size()) {
    throw FormatError("field extends past end of buffer", offset);
  }
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

template <class T>
void write(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void write_bytes(std::ostream& out, std::span<const std::byte> data) {
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
}

/// Reads exactly sizeof(T) bytes; FormatError carries the stream offset.
template <class T>
T read(std::istream& in) {
  const auto at = static_cast<std::uint64_t>(in.tellg());
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw FormatError("truncated file", at);
  }
  return value;
}

inline void read_bytes(std::istream& in, std::span<std::byte> out) {
  const auto at = static_cast<std::uint64_t>(in.tellg());
  if (!in.read(reinterpret_cast<char*>(out.data()),
               static_cast<std::streamsize>(out.size()))) {
    throw FormatError("truncated file", at);
  }
}

}  // namespace tiervec::bytes
