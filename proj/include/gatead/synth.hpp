#pragma once

// Synthetic token grids with known ground truth, for end-to-end checks that
// need neither images nor a backbone.

#include <cstdint>
#include <utility>
#include <vector>

#include "gatead/maps.hpp"
#include "gatead/tokenio.hpp"

namespace gatead {

struct Block {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
};

struct SynthSpec {
    std::uint32_t rows = 32;
    std::uint32_t cols = 32;
    std::uint32_t dim = 64;
    std::uint32_t texture_rank = 4;
    double texture_amplitude = 1.0;  // std of per-channel mode amplitudes
    double noise_sigma = 1.0;
    Block anomaly_block{14, 14, 4, 4};
    double anomaly_magnitude = 3.0;  // shift length in units of noise_sigma
    std::uint64_t texture_seed = 0;  // shared by every grid of one "category"
    std::uint64_t seed = 0;          // per-grid noise and anomaly direction

    void validate() const;
};

/// One separable cosine mode: cos(2 pi fr r / rows + pr) * cos(2 pi fc c / cols + pc) * amplitude[ch].
struct TextureMode {
    std::uint32_t freq_row = 1;
    std::uint32_t freq_col = 1;
    double phase_row = 0.0;
    double phase_col = 0.0;
    std::vector<double> amplitude;
};

inline constexpr std::uint32_t kMaxModeFrequency = 4;

/// Modes derived from texture_seed; frequency pairs are distinct.
std::vector<TextureMode> texture_modes(const SynthSpec& spec);

PatchGrid generate_normal(const SynthSpec& spec);

/// Normal grid with the block's tokens shifted along a random unit direction.
std::pair<PatchGrid, BinaryMask> generate_anomalous(const SynthSpec& spec);

}  // namespace gatead
