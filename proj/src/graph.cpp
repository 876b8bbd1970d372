#include "gatead/graph.hpp"

#include <string>

#include "gatead/errors.hpp"

namespace gatead {

GridTopology build_grid_topology(std::uint32_t rows, std::uint32_t cols) {
    if (rows < 2 || cols < 2) {
        throw DimensionError("grid topology needs rows, cols >= 2, got " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
    GridTopology topo;
    topo.rows_ = rows;
    topo.cols_ = cols;
    topo.offsets_.reserve(topo.num_nodes() + 1);
    topo.neighbors_.reserve(topo.num_nodes() * 9);
    topo.offsets_.push_back(0);
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            // Row-major scan of the 3x3 window yields ascending node indices.
            for (int dr = -1; dr <= 1; ++dr) {
                const auto rr = static_cast<std::int64_t>(r) + dr;
                if (rr < 0 || rr >= rows) continue;
                for (int dc = -1; dc <= 1; ++dc) {
                    const auto cc = static_cast<std::int64_t>(c) + dc;
                    if (cc < 0 || cc >= cols) continue;
                    topo.neighbors_.push_back(static_cast<std::uint32_t>(rr * cols + cc));
                }
            }
            topo.offsets_.push_back(static_cast<std::uint32_t>(topo.neighbors_.size()));
        }
    }
    return topo;
}

std::span<const std::uint32_t> GridTopology::neighbors(std::size_t i) const {
    if (i >= num_nodes()) {
        throw IndexError("node " + std::to_string(i) + " out of range for " + std::to_string(num_nodes()) + " nodes");
    }
    return std::span<const std::uint32_t>(neighbors_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

}  // namespace gatead
