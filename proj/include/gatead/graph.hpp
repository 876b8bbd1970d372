#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gatead {

/// Fixed 8-connected grid graph with self-loops, stored as CSR.
/// Each node's neighbor slice is sorted ascending and contains the node itself.
class GridTopology {
public:
    GridTopology() = default;

    std::uint32_t rows() const noexcept { return rows_; }
    std::uint32_t cols() const noexcept { return cols_; }
    std::size_t num_nodes() const noexcept { return static_cast<std::size_t>(rows_) * cols_; }
    std::size_t num_edges() const noexcept { return neighbors_.size(); }

    /// Start of node i's slice in the flat edge arrays; offsets().size() == num_nodes() + 1.
    std::span<const std::uint32_t> offsets() const noexcept { return offsets_; }
    std::span<const std::uint32_t> flat_neighbors() const noexcept { return neighbors_; }

    std::span<const std::uint32_t> neighbors(std::size_t i) const;
    std::size_t degree(std::size_t i) const { return neighbors(i).size(); }

    friend GridTopology build_grid_topology(std::uint32_t rows, std::uint32_t cols);

private:
    std::uint32_t rows_ = 0;
    std::uint32_t cols_ = 0;
    std::vector<std::uint32_t> offsets_;
    std::vector<std::uint32_t> neighbors_;
};

GridTopology build_grid_topology(std::uint32_t rows, std::uint32_t cols);

/// Free-function form of GridTopology::neighbors.
inline std::span<const std::uint32_t> neighbors(const GridTopology& topo, std::size_t i) { return topo.neighbors(i); }

}  // namespace gatead
