#pragma once

#include "treebark/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <type_traits>
#include <vector>

namespace treebark {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
    requires std::is_integral_v<T>
void write_le(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
    requires std::is_integral_v<T>
T read_le(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw IoError("unexpected end of file");
    return value;
}

inline void write_floats_le(std::ostream& out, const float* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
}

inline void read_floats_le(std::istream& in, float* data, std::size_t count) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw IoError("unexpected end of file");
}

}  // namespace treebark
