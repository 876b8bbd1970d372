#include "gatead/benchmark.hpp"

#include <algorithm>
#include <cstdio>

#include "gatead/errors.hpp"
#include "gatead/nn.hpp"

namespace gatead {

namespace {

std::string indexed_name(const char* prefix, std::size_t k) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03zu", prefix, k);
    return buf;
}

}  // namespace

Benchmark make_synthetic_benchmark(const BenchmarkSpec& spec) {
    spec.grid.validate();
    const Block& block = spec.grid.anomaly_block;
    if (block.height < 1 || block.width < 1 || block.height > spec.grid.rows || block.width > spec.grid.cols) {
        throw DimensionError("anomaly block does not fit the grid");
    }
    Benchmark bench;
    SynthSpec s = spec.grid;
    for (std::size_t k = 0; k < spec.support_count; ++k) {
        s.seed = spec.seed + k;
        bench.support.push_back(generate_normal(s));
    }
    for (std::size_t k = 0; k < spec.normal_count; ++k) {
        s.seed = spec.seed + 100000 + k;
        bench.queries.push_back({indexed_name("normal", k), generate_normal(s), 0, BinaryMask(s.rows, s.cols)});
    }
    Rng placement(spec.seed ^ 0xB10C5EEDull);
    for (std::size_t k = 0; k < spec.anomalous_count; ++k) {
        s.seed = spec.seed + 200000 + k;
        s.anomaly_block.row = static_cast<std::uint32_t>(placement.below(s.rows - block.height + 1));
        s.anomaly_block.col = static_cast<std::uint32_t>(placement.below(s.cols - block.width + 1));
        auto [grid, mask] = generate_anomalous(s);
        bench.queries.push_back({indexed_name("anomalous", k), std::move(grid), 1, std::move(mask)});
    }
    return bench;
}

EvaluationResult evaluate_queries(const TrainedModel& model, const std::vector<LabeledQuery>& queries,
                                  const ScoreConfig& cfg) {
    EvaluationResult out;
    const GridTopology topo = build_grid_topology(model.rows, model.cols);
    std::vector<double> image_scores;
    std::vector<std::uint8_t> labels;
    std::vector<MaskedMap> maps;
    std::size_t defect_pixels = 0;
    for (const auto& q : queries) {
        AnomalyResult r = score_image(q.grid, model, topo, cfg);
        image_scores.push_back(r.image_score);
        labels.push_back(q.label != 0 ? 1 : 0);
        if (!q.mask.values.empty()) {
            BinaryMask mask = q.mask;
            if (mask.rows != r.pixel_map.rows || mask.cols != r.pixel_map.cols) {
                mask = resize_nearest(mask, r.pixel_map.rows, r.pixel_map.cols);
            }
            defect_pixels += mask.popcount();
            maps.emplace_back(r.pixel_map, std::move(mask));
        }
        out.results.push_back(std::move(r));
    }
    const bool both_labels = std::count(labels.begin(), labels.end(), 1) > 0 &&
                             std::count(labels.begin(), labels.end(), 0) > 0;
    if (both_labels) {
        out.metrics.image_auroc = auroc(image_scores, labels);
        out.metrics.image_ap = average_precision(image_scores, labels);
    }
    if (defect_pixels > 0 && maps.size() == queries.size()) {
        out.metrics.pixel_auroc = pixel_auroc(maps);
        out.metrics.pixel_pro = pro(maps);
    }
    return out;
}

}  // namespace gatead
