#include "gatead/tokenio.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "gatead/detail/binary.hpp"
#include "gatead/errors.hpp"

namespace gatead {

void PatchGrid::validate() const {
    if (rows < 2 || cols < 2 || dim < 1) {
        throw DimensionError("patch grid must be at least 2x2x1, got " + std::to_string(rows) + "x" +
                             std::to_string(cols) + "x" + std::to_string(dim));
    }
    if (data.size() != num_nodes() * dim) throw DimensionError("patch grid payload length mismatch");
    for (std::size_t k = 0; k < data.size(); ++k) {
        if (!std::isfinite(data[k])) throw DataError("non-finite token value at element " + std::to_string(k));
    }
}

std::size_t write_tokens(const PatchGrid& grid, std::ostream& sink) {
    grid.validate();
    sink.write(kTokenMagic, 4);
    detail::write_le<std::uint32_t>(sink, kTokenVersion);
    detail::write_le<std::uint32_t>(sink, grid.rows);
    detail::write_le<std::uint32_t>(sink, grid.cols);
    detail::write_le<std::uint32_t>(sink, grid.dim);
    if constexpr (std::endian::native == std::endian::little) {
        sink.write(reinterpret_cast<const char*>(grid.data.data()),
                   static_cast<std::streamsize>(grid.data.size() * sizeof(float)));
    } else {
        for (float v : grid.data) detail::write_le(sink, v);
    }
    if (!sink) throw IoError("failed to write token payload");
    return kTokenHeaderBytes + grid.data.size() * sizeof(float);
}

PatchGrid read_tokens(std::istream& source) {
    char magic[4] = {};
    source.read(magic, 4);
    if (source.gcount() != 4) throw TruncationError("token stream shorter than its header");
    if (std::char_traits<char>::compare(magic, kTokenMagic, 4) != 0) throw FormatError("bad token magic");
    const auto version = detail::read_le<std::uint32_t>(source);
    if (version != kTokenVersion) throw UnsupportedVersion("unsupported token version " + std::to_string(version));

    PatchGrid grid;
    grid.rows = detail::read_le<std::uint32_t>(source);
    grid.cols = detail::read_le<std::uint32_t>(source);
    grid.dim = detail::read_le<std::uint32_t>(source);
    if (grid.rows < 2 || grid.cols < 2 || grid.dim < 1) throw FormatError("token header declares a degenerate grid");

    const std::size_t count = grid.num_nodes() * grid.dim;
    grid.data.resize(count);
    const auto bytes = static_cast<std::streamsize>(count * sizeof(float));
    source.read(reinterpret_cast<char*>(grid.data.data()), bytes);
    if (source.gcount() != bytes) {
        throw TruncationError("token payload truncated: expected " + std::to_string(bytes) + " bytes, got " +
                              std::to_string(source.gcount()));
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (float& v : grid.data) v = detail::from_le_bytes<float>(reinterpret_cast<const char*>(&v));
    }
    grid.validate();
    return grid;
}

void save_tokens(const PatchGrid& grid, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_tokens(grid, out);
}

PatchGrid load_tokens(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_tokens(in);
}

}  // namespace gatead
