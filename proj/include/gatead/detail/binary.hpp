#pragma once

// Little-endian scalar encoding shared by the token and checkpoint containers.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <type_traits>

#include "gatead/errors.hpp"

namespace gatead::detail {

template <class T>
inline std::array<char, sizeof(T)> to_le_bytes(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    return bytes;
}

template <class T>
inline T from_le_bytes(const char* bytes) {
    std::array<char, sizeof(T)> buf{};
    std::memcpy(buf.data(), bytes, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
    T value;
    std::memcpy(&value, buf.data(), sizeof(T));
    return value;
}

template <class T>
inline void write_le(std::ostream& out, T value) {
    const auto bytes = to_le_bytes(value);
    out.write(bytes.data(), bytes.size());
    if (!out) throw IoError("write failed");
}

/// Reads one value; a short read raises `Truncated`.
template <class T, class Truncated = TruncationError>
inline T read_le(std::istream& in) {
    std::array<char, sizeof(T)> bytes{};
    in.read(bytes.data(), bytes.size());
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw Truncated("unexpected end of stream");
    return from_le_bytes<T>(bytes.data());
}

}  // namespace gatead::detail
