#include "gatead/maps.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "gatead/errors.hpp"
#include "gatead/tokenio.hpp"

namespace gatead {

std::size_t BinaryMask::popcount() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; }));
}

BinaryMask resize_nearest(const BinaryMask& mask, std::uint32_t rows, std::uint32_t cols) {
    BinaryMask out(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
        const std::size_t sr = static_cast<std::size_t>(r) * mask.rows / rows;
        for (std::uint32_t c = 0; c < cols; ++c) {
            const std::size_t sc = static_cast<std::size_t>(c) * mask.cols / cols;
            out.at(r, c) = mask.at(sr, sc) != 0 ? 1 : 0;
        }
    }
    return out;
}

void save_raw_map(const FloatMap& map, const std::filesystem::path& path) {
    PatchGrid grid;
    grid.rows = map.rows;
    grid.cols = map.cols;
    grid.dim = 1;
    grid.data = map.values;
    save_tokens(grid, path);
}

FloatMap load_raw_map(const std::filesystem::path& path) {
    PatchGrid grid = load_tokens(path);
    if (grid.dim != 1) throw FormatError(path.string() + " is not a raw map (dim != 1)");
    FloatMap map;
    map.rows = grid.rows;
    map.cols = grid.cols;
    map.values = std::move(grid.data);
    return map;
}

void write_heatmap_pgm(const FloatMap& map, std::ostream& out) {
    out << "P5\n" << map.cols << ' ' << map.rows << "\n65535\n";
    const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
    const double lo = map.values.empty() ? 0.0 : *lo_it;
    const double span = map.values.empty() ? 0.0 : static_cast<double>(*hi_it) - lo;
    for (float v : map.values) {
        const double unit = span > 0.0 ? (static_cast<double>(v) - lo) / span : 0.0;
        const auto sample = static_cast<std::uint16_t>(std::lround(std::clamp(unit, 0.0, 1.0) * 65535.0));
        const char bytes[2] = {static_cast<char>(sample >> 8), static_cast<char>(sample & 0xFF)};
        out.write(bytes, 2);
    }
    if (!out) throw IoError("failed to write heatmap");
}

void save_heatmap_pgm(const FloatMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_heatmap_pgm(map, out);
}

namespace {

// Header tokens are separated by whitespace; '#' starts a comment.
std::uint32_t read_header_number(std::istream& in) {
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = in.get();
    }
    if (ch == EOF || !std::isdigit(ch)) throw FormatError("malformed PGM header");
    std::uint64_t value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + static_cast<std::uint64_t>(ch - '0');
        if (value > 0xFFFFFFFFull) throw FormatError("PGM header value too large");
        ch = in.get();
    }
    // Exactly one whitespace character terminates the header.
    if (ch == EOF || !std::isspace(ch)) throw FormatError("malformed PGM header");
    return static_cast<std::uint32_t>(value);
}

}  // namespace

BinaryMask read_mask_pgm(std::istream& in) {
    char magic[2] = {};
    in.read(magic, 2);
    if (in.gcount() != 2 || magic[0] != 'P' || magic[1] != '5') throw FormatError("mask is not a binary PGM (P5)");
    const std::uint32_t cols = read_header_number(in);
    const std::uint32_t rows = read_header_number(in);
    const std::uint32_t maxval = read_header_number(in);
    if (maxval != 255) throw FormatError("mask PGM must be 8-bit (maxval 255)");
    BinaryMask mask(rows, cols);
    std::vector<char> raw(mask.values.size());
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw TruncationError("mask PGM truncated");
    for (std::size_t k = 0; k < raw.size(); ++k) mask.values[k] = raw[k] != 0 ? 1 : 0;
    return mask;
}

BinaryMask load_mask_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_mask_pgm(in);
}

void write_mask_pgm(const BinaryMask& mask, std::ostream& out) {
    out << "P5\n" << mask.cols << ' ' << mask.rows << "\n255\n";
    for (auto v : mask.values) out.put(v != 0 ? static_cast<char>(255) : '\0');
    if (!out) throw IoError("failed to write mask");
}

void save_mask_pgm(const BinaryMask& mask, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_mask_pgm(mask, out);
}

}  // namespace gatead
