#pragma once

// Detection and localization metrics.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gatead/maps.hpp"

namespace gatead {

struct LabeledScores {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;  // 1 = anomalous
};

/// Mann-Whitney AUROC with mid-ranks for ties.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);
inline double auroc(const LabeledScores& data) { return auroc(data.scores, data.labels); }

/// Sum over distinct descending thresholds of (R_n - R_{n-1}) * P_n.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);
inline double average_precision(const LabeledScores& data) { return average_precision(data.scores, data.labels); }

struct Components {
    std::vector<std::int32_t> labels;  // -1 for background, else 0..count-1 in raster order of first pixel
    std::uint32_t count = 0;
};

/// 8-connected labeling of the nonzero pixels.
Components connected_components(const BinaryMask& mask);

struct MaskedMap {
    FloatMap pixel_map;
    BinaryMask gt_mask;
    Components components;

    MaskedMap(FloatMap map, BinaryMask mask);
};

inline constexpr double kDefaultProFprLimit = 0.3;
inline constexpr std::size_t kDefaultProThresholds = 200;

/// Per-region overlap averaged over every defect component, integrated
/// against the pooled false-positive rate up to `fpr_limit` and normalized.
double pro(std::span<const MaskedMap> maps, double fpr_limit = kDefaultProFprLimit,
           std::size_t thresholds = kDefaultProThresholds);

struct MetricsReport {
    std::optional<double> image_auroc;
    std::optional<double> image_ap;
    std::optional<double> pixel_auroc;
    std::optional<double> pixel_pro;
};

/// Pixel AUROC over all pixels of all maps pooled together.
double pixel_auroc(std::span<const MaskedMap> maps);

}  // namespace gatead
