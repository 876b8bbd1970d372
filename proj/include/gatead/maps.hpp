#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace gatead {

/// Row-major 2-D float map (coarse or full-resolution anomaly map).
struct FloatMap {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<float> values;

    FloatMap() = default;
    FloatMap(std::uint32_t r, std::uint32_t c, float fill = 0.0f)
        : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

    float& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    bool operator==(const FloatMap&) const = default;
};

/// Row-major binary mask; nonzero marks a defect.
struct BinaryMask {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> values;

    BinaryMask() = default;
    BinaryMask(std::uint32_t r, std::uint32_t c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0) {}

    std::uint8_t& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    std::uint8_t at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    std::size_t popcount() const;
    bool operator==(const BinaryMask&) const = default;
};

/// Nearest-neighbor resize of a mask (used to lift patch masks to map resolution).
BinaryMask resize_nearest(const BinaryMask& mask, std::uint32_t rows, std::uint32_t cols);

// Raw float maps reuse the token container with dim = 1.
void save_raw_map(const FloatMap& map, const std::filesystem::path& path);
FloatMap load_raw_map(const std::filesystem::path& path);

/// 16-bit binary PGM (P5, maxval 65535, big-endian samples), min-max normalized.
void write_heatmap_pgm(const FloatMap& map, std::ostream& out);
void save_heatmap_pgm(const FloatMap& map, const std::filesystem::path& path);

/// 8-bit binary PGM (P5, maxval 255); nonzero pixels become 1.
BinaryMask read_mask_pgm(std::istream& in);
BinaryMask load_mask_pgm(const std::filesystem::path& path);
void write_mask_pgm(const BinaryMask& mask, std::ostream& out);
void save_mask_pgm(const BinaryMask& mask, const std::filesystem::path& path);

}  // namespace gatead
