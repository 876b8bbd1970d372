#pragma once

// Inference: per-patch residuals, image-level pooling and the pixel map.

#include <cstdint>
#include <span>
#include <vector>

#include "gatead/graph.hpp"
#include "gatead/maps.hpp"
#include "gatead/tokenio.hpp"
#include "gatead/train.hpp"

namespace gatead {

enum class Pooling : std::uint32_t { TopKMean = 0, Max = 1 };

struct ScoreConfig {
    double top_ratio = 0.025;  // 0.01 for VisA-style data
    Pooling pooling = Pooling::TopKMean;
    double blur_sigma = 1.0;   // in patch units, applied before upsampling
    std::uint32_t output_rows = 0;  // 0 keeps the grid resolution
    std::uint32_t output_cols = 0;

    void validate() const;
};

struct AnomalyResult {
    std::vector<float> patch_scores;
    float image_score = 0.0f;
    FloatMap pixel_map;
};

/// Inference-mode residual for every node (no masking, no dropout).
std::vector<float> patch_scores(const PatchGrid& query, const TrainedModel& model, const GridTopology& topo);

/// Number of patches averaged by TopKMean: max(1, round(ratio * n)).
std::size_t top_k_count(std::size_t n, double ratio);

double image_score(std::span<const float> scores, const ScoreConfig& cfg);

/// Separable Gaussian, radius ceil(3 sigma), normalized kernel, mirror padding
/// that does not repeat the border cell. sigma = 0 is the identity.
FloatMap gaussian_blur_grid(const FloatMap& map, double sigma);

/// Half-pixel-center bilinear resize; source coordinate (dst + 0.5) * in / out - 0.5, clamped.
FloatMap bilinear_upsample(const FloatMap& map, std::uint32_t out_rows, std::uint32_t out_cols);

/// Reshape -> blur -> upsample.
FloatMap pixel_map(std::span<const float> scores, std::uint32_t rows, std::uint32_t cols, const ScoreConfig& cfg);

AnomalyResult score_image(const PatchGrid& query, const TrainedModel& model, const GridTopology& topo,
                          const ScoreConfig& cfg);

}  // namespace gatead
