#include "gatead/synth.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gatead/errors.hpp"
#include "gatead/nn.hpp"

namespace gatead {

namespace {
constexpr std::uint64_t kDirectionStream = 0x9E3779B97F4A7C15ull;
}

void SynthSpec::validate() const {
    if (rows < 2 || cols < 2 || dim < 1) throw DimensionError("synthetic grid must be at least 2x2x1");
    if (texture_rank > kMaxModeFrequency * kMaxModeFrequency) {
        throw ConfigError("texture_rank must be <= " + std::to_string(kMaxModeFrequency * kMaxModeFrequency));
    }
    if (!(noise_sigma >= 0.0) || !(texture_amplitude >= 0.0)) throw ConfigError("noise and amplitude must be >= 0");
    if (!(anomaly_magnitude >= 0.0)) throw ConfigError("anomaly magnitude must be >= 0");
}

std::vector<TextureMode> texture_modes(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.texture_seed);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (std::uint32_t a = 1; a <= kMaxModeFrequency; ++a) {
        for (std::uint32_t b = 1; b <= kMaxModeFrequency; ++b) pairs.emplace_back(a, b);
    }
    std::vector<TextureMode> modes(spec.texture_rank);
    for (std::size_t m = 0; m < modes.size(); ++m) {
        const auto pick = m + static_cast<std::size_t>(rng.below(pairs.size() - m));
        std::swap(pairs[m], pairs[pick]);
        auto& mode = modes[m];
        mode.freq_row = pairs[m].first;
        mode.freq_col = pairs[m].second;
        mode.phase_row = rng.uniform(0.0, 2.0 * std::numbers::pi);
        mode.phase_col = rng.uniform(0.0, 2.0 * std::numbers::pi);
        mode.amplitude.resize(spec.dim);
        for (auto& a : mode.amplitude) a = spec.texture_amplitude * rng.normal();
    }
    return modes;
}

PatchGrid generate_normal(const SynthSpec& spec) {
    const auto modes = texture_modes(spec);
    PatchGrid grid(spec.rows, spec.cols, spec.dim);
    Rng noise(spec.seed);
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::uint32_t r = 0; r < spec.rows; ++r) {
        for (std::uint32_t c = 0; c < spec.cols; ++c) {
            auto token = grid.node(static_cast<std::size_t>(r) * spec.cols + c);
            for (std::uint32_t ch = 0; ch < spec.dim; ++ch) {
                double v = 0.0;
                for (const auto& mode : modes) {
                    v += mode.amplitude[ch] * std::cos(two_pi * mode.freq_row * r / spec.rows + mode.phase_row) *
                         std::cos(two_pi * mode.freq_col * c / spec.cols + mode.phase_col);
                }
                token[ch] = static_cast<float>(v + spec.noise_sigma * noise.normal());
            }
        }
    }
    return grid;
}

std::pair<PatchGrid, BinaryMask> generate_anomalous(const SynthSpec& spec) {
    const Block& b = spec.anomaly_block;
    if (b.height < 1 || b.width < 1 || static_cast<std::uint64_t>(b.row) + b.height > spec.rows ||
        static_cast<std::uint64_t>(b.col) + b.width > spec.cols) {
        throw DimensionError("anomaly block lies outside the grid");
    }
    PatchGrid grid = generate_normal(spec);

    Rng rng(spec.seed ^ kDirectionStream);
    std::vector<double> direction(spec.dim);
    double norm = 0.0;
    while (norm == 0.0) {
        for (auto& d : direction) d = rng.normal();
        for (double d : direction) norm += d * d;
        norm = std::sqrt(norm);
    }
    const double shift = spec.anomaly_magnitude * spec.noise_sigma / norm;

    BinaryMask mask(spec.rows, spec.cols);
    for (std::uint32_t r = b.row; r < b.row + b.height; ++r) {
        for (std::uint32_t c = b.col; c < b.col + b.width; ++c) {
            mask.at(r, c) = 1;
            if (shift == 0.0) continue;
            auto token = grid.node(static_cast<std::size_t>(r) * spec.cols + c);
            for (std::uint32_t ch = 0; ch < spec.dim; ++ch) {
                token[ch] = static_cast<float>(token[ch] + shift * direction[ch]);
            }
        }
    }
    return {std::move(grid), std::move(mask)};
}

}  // namespace gatead
