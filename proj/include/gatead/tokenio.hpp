#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace gatead {

/// Dense grid of patch feature tokens. Node i sits at (i / cols, i % cols)
/// and owns `dim` consecutive floats of `data`.
struct PatchGrid {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint32_t dim = 0;
    std::vector<float> data;

    PatchGrid() = default;
    PatchGrid(std::uint32_t r, std::uint32_t c, std::uint32_t d)
        : rows(r), cols(c), dim(d), data(static_cast<std::size_t>(r) * c * d, 0.0f) {}

    std::size_t num_nodes() const noexcept { return static_cast<std::size_t>(rows) * cols; }

    std::span<float> node(std::size_t i) { return {data.data() + i * dim, dim}; }
    std::span<const float> node(std::size_t i) const { return {data.data() + i * dim, dim}; }

    /// Throws DimensionError / DataError when an invariant is broken.
    void validate() const;

    bool operator==(const PatchGrid&) const = default;
};

inline constexpr char kTokenMagic[4] = {'G', 'A', 'D', 'T'};
inline constexpr std::uint32_t kTokenVersion = 1;
inline constexpr std::size_t kTokenHeaderBytes = 20;

/// Returns the number of bytes emitted (20 + 4 * rows * cols * dim).
std::size_t write_tokens(const PatchGrid& grid, std::ostream& sink);
PatchGrid read_tokens(std::istream& source);

void save_tokens(const PatchGrid& grid, const std::filesystem::path& path);
PatchGrid load_tokens(const std::filesystem::path& path);

}  // namespace gatead
