#include "gatead/score.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gatead/errors.hpp"

namespace gatead {

void ScoreConfig::validate() const {
    if (!(top_ratio > 0.0 && top_ratio <= 1.0)) {
        throw ConfigError("top_ratio must be in (0, 1], got " + std::to_string(top_ratio));
    }
    if (!(blur_sigma >= 0.0) || !std::isfinite(blur_sigma)) throw ConfigError("blur sigma must be >= 0");
    if (pooling != Pooling::TopKMean && pooling != Pooling::Max) throw ConfigError("unknown pooling");
}

std::vector<float> patch_scores(const PatchGrid& query, const TrainedModel& model, const GridTopology& topo) {
    const auto& cfg = model.config;
    if (query.rows != model.rows || query.cols != model.cols || query.dim != cfg.encoder.input_dim) {
        throw DimensionError("query grid " + std::to_string(query.rows) + "x" + std::to_string(query.cols) + "x" +
                             std::to_string(query.dim) + " does not match model grid " + std::to_string(model.rows) +
                             "x" + std::to_string(model.cols) + "x" + std::to_string(cfg.encoder.input_dim));
    }
    if (topo.rows() != query.rows || topo.cols() != query.cols) throw DimensionError("topology does not match query");

    const Matrix<float> x = grid_features<float>(query);
    const Matrix<float> z = project_inputs(x, model.params.heads);
    Rng unused(0);
    const auto encoded = encoder_forward(x, topo, model.params.encoder, cfg.encoder, unused, false);
    const auto projection = project_encoded_rows(encoded.hidden, model.params.heads);

    std::vector<float> scores(query.num_nodes());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        scores[i] = node_residual<float>(cfg.align, row_span(z, row), row_span(projection.latent, row));
    }
    return scores;
}

std::size_t top_k_count(std::size_t n, double ratio) {
    const auto k = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(n)));
    return std::min(n, std::max<std::size_t>(1, k));
}

double image_score(std::span<const float> scores, const ScoreConfig& cfg) {
    if (scores.empty()) throw DimensionError("image_score: no patch scores");
    cfg.validate();
    if (cfg.pooling == Pooling::Max) return *std::max_element(scores.begin(), scores.end());

    const std::size_t k = top_k_count(scores.size(), cfg.top_ratio);
    std::vector<std::uint32_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                          return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                      });
    double total = 0.0;
    for (std::size_t t = 0; t < k; ++t) total += scores[order[t]];
    return total / static_cast<double>(k);
}

namespace {

std::size_t mirror_index(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
    i %= period;
    if (i < 0) i += period;
    if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
    return static_cast<std::size_t>(i);
}

std::vector<double> gaussian_kernel(double sigma) {
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const double w = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        total += w;
    }
    for (auto& w : kernel) w /= total;
    return kernel;
}

}  // namespace

FloatMap gaussian_blur_grid(const FloatMap& map, double sigma) {
    if (!(sigma >= 0.0)) throw ConfigError("blur sigma must be >= 0");
    if (sigma == 0.0 || map.values.empty()) return map;
    const auto kernel = gaussian_kernel(sigma);
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    const std::size_t rows = map.rows;
    const std::size_t cols = map.cols;

    std::vector<double> horizontal(rows * cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                const auto src = mirror_index(static_cast<std::ptrdiff_t>(c) + k, cols);
                acc += kernel[static_cast<std::size_t>(k + radius)] * map.values[r * cols + src];
            }
            horizontal[r * cols + c] = acc;
        }
    }
    FloatMap out(map.rows, map.cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                const auto src = mirror_index(static_cast<std::ptrdiff_t>(r) + k, rows);
                acc += kernel[static_cast<std::size_t>(k + radius)] * horizontal[src * cols + c];
            }
            out.values[r * cols + c] = static_cast<float>(acc);
        }
    }
    return out;
}

FloatMap bilinear_upsample(const FloatMap& map, std::uint32_t out_rows, std::uint32_t out_cols) {
    if (out_rows < map.rows || out_cols < map.cols) throw DimensionError("bilinear_upsample cannot shrink a map");
    if (map.values.empty()) throw DimensionError("bilinear_upsample: empty map");
    auto source = [](std::uint32_t dst, std::uint32_t in, std::uint32_t out) {
        const double s = (dst + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
        return std::clamp(s, 0.0, static_cast<double>(in - 1));
    };
    FloatMap out(out_rows, out_cols);
    for (std::uint32_t r = 0; r < out_rows; ++r) {
        const double sr = source(r, map.rows, out_rows);
        const auto r0 = static_cast<std::uint32_t>(std::floor(sr));
        const std::uint32_t r1 = std::min(r0 + 1, map.rows - 1);
        const double tr = sr - r0;
        for (std::uint32_t c = 0; c < out_cols; ++c) {
            const double sc = source(c, map.cols, out_cols);
            const auto c0 = static_cast<std::uint32_t>(std::floor(sc));
            const std::uint32_t c1 = std::min(c0 + 1, map.cols - 1);
            const double tc = sc - c0;
            const double top = (1.0 - tc) * map.at(r0, c0) + tc * map.at(r0, c1);
            const double bottom = (1.0 - tc) * map.at(r1, c0) + tc * map.at(r1, c1);
            out.at(r, c) = static_cast<float>((1.0 - tr) * top + tr * bottom);
        }
    }
    return out;
}

FloatMap pixel_map(std::span<const float> scores, std::uint32_t rows, std::uint32_t cols, const ScoreConfig& cfg) {
    if (scores.size() != static_cast<std::size_t>(rows) * cols) throw DimensionError("pixel_map: score count mismatch");
    cfg.validate();
    FloatMap coarse(rows, cols);
    std::copy(scores.begin(), scores.end(), coarse.values.begin());
    FloatMap smooth = gaussian_blur_grid(coarse, cfg.blur_sigma);
    const std::uint32_t out_rows = cfg.output_rows == 0 ? rows : cfg.output_rows;
    const std::uint32_t out_cols = cfg.output_cols == 0 ? cols : cfg.output_cols;
    if (out_rows == rows && out_cols == cols) return smooth;
    return bilinear_upsample(smooth, out_rows, out_cols);
}

AnomalyResult score_image(const PatchGrid& query, const TrainedModel& model, const GridTopology& topo,
                          const ScoreConfig& cfg) {
    AnomalyResult result;
    result.patch_scores = patch_scores(query, model, topo);
    result.image_score = static_cast<float>(image_score(result.patch_scores, cfg));
    result.pixel_map = pixel_map(result.patch_scores, query.rows, query.cols, cfg);
    return result;
}

}  // namespace gatead
