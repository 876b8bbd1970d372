#include "gatead/eval.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>

#include "gatead/errors.hpp"

namespace gatead {

namespace {

void check_labels(std::span<const double> scores, std::span<const std::uint8_t> labels, bool need_negative) {
    if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
    const auto positives = std::count_if(labels.begin(), labels.end(), [](std::uint8_t l) { return l != 0; });
    if (positives == 0) throw DegenerateLabelsError("no positive labels");
    if (need_negative && static_cast<std::size_t>(positives) == labels.size()) {
        throw DegenerateLabelsError("no negative labels");
    }
}

std::vector<std::size_t> descending_order(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_labels(scores, labels, true);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Ranks are 1-based; tied blocks share the mean rank.
    double positive_rank_sum = 0.0;
    double positives = 0.0;
    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t end = start + 1;
        while (end < order.size() && scores[order[end]] == scores[order[start]]) ++end;
        const double mid_rank = 0.5 * static_cast<double>(start + 1 + end);
        for (std::size_t t = start; t < end; ++t) {
            if (labels[order[t]] != 0) {
                positive_rank_sum += mid_rank;
                positives += 1.0;
            }
        }
        start = end;
    }
    const double negatives = static_cast<double>(scores.size()) - positives;
    const double u = positive_rank_sum - positives * (positives + 1.0) / 2.0;
    return u / (positives * negatives);
}

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    check_labels(scores, labels, false);
    const auto order = descending_order(scores);
    const double total_pos = static_cast<double>(std::count_if(labels.begin(), labels.end(), [](auto l) { return l; }));
    double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t end = start;
        while (end < order.size() && scores[order[end]] == scores[order[start]]) {
            (labels[order[end]] != 0 ? tp : fp) += 1.0;
            ++end;
        }
        const double recall = tp / total_pos;
        const double precision = tp / (tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        start = end;
    }
    return ap;
}

Components connected_components(const BinaryMask& mask) {
    Components out;
    out.labels.assign(mask.values.size(), -1);
    std::vector<std::size_t> stack;
    const auto rows = static_cast<std::ptrdiff_t>(mask.rows);
    const auto cols = static_cast<std::ptrdiff_t>(mask.cols);
    for (std::size_t seed = 0; seed < mask.values.size(); ++seed) {
        if (mask.values[seed] == 0 || out.labels[seed] >= 0) continue;
        const auto label = static_cast<std::int32_t>(out.count++);
        out.labels[seed] = label;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const auto r = static_cast<std::ptrdiff_t>(p) / cols;
            const auto c = static_cast<std::ptrdiff_t>(p) % cols;
            for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
                for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
                    const auto rr = r + dr, cc = c + dc;
                    if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                    const auto q = static_cast<std::size_t>(rr * cols + cc);
                    if (mask.values[q] != 0 && out.labels[q] < 0) {
                        out.labels[q] = label;
                        stack.push_back(q);
                    }
                }
            }
        }
    }
    return out;
}

MaskedMap::MaskedMap(FloatMap map, BinaryMask mask)
    : pixel_map(std::move(map)), gt_mask(std::move(mask)), components(connected_components(gt_mask)) {
    if (pixel_map.rows != gt_mask.rows || pixel_map.cols != gt_mask.cols) {
        throw DimensionError("pixel map and ground-truth mask differ in shape");
    }
}

double pro(std::span<const MaskedMap> maps, double fpr_limit, std::size_t thresholds) {
    if (!(fpr_limit > 0.0 && fpr_limit <= 1.0)) throw ConfigError("PRO fpr limit must be in (0, 1]");
    if (thresholds < 2) throw ConfigError("PRO needs at least 2 thresholds");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::size_t total_components = 0;
    std::size_t negatives = 0;
    for (const auto& m : maps) {
        for (float v : m.pixel_map.values) {
            lo = std::min(lo, static_cast<double>(v));
            hi = std::max(hi, static_cast<double>(v));
        }
        total_components += m.components.count;
        negatives += m.gt_mask.values.size() - m.gt_mask.popcount();
    }
    if (total_components == 0) throw DegenerateLabelsError("PRO needs at least one defect region");

    // Curve points (fpr, mean overlap), anchored at the origin.
    std::vector<std::array<double, 2>> curve;
    curve.push_back({0.0, 0.0});
    std::vector<std::size_t> hits;
    std::vector<std::size_t> sizes;
    for (std::size_t t = 0; t < thresholds; ++t) {
        const double threshold = lo + (hi - lo) * static_cast<double>(t) / static_cast<double>(thresholds - 1);
        std::size_t false_pos = 0;
        double overlap_sum = 0.0;
        for (const auto& m : maps) {
            hits.assign(m.components.count, 0);
            sizes.assign(m.components.count, 0);
            for (std::size_t p = 0; p < m.pixel_map.values.size(); ++p) {
                const bool on = static_cast<double>(m.pixel_map.values[p]) >= threshold;
                const auto label = m.components.labels[p];
                if (label < 0) {
                    false_pos += on ? 1 : 0;
                } else {
                    ++sizes[static_cast<std::size_t>(label)];
                    hits[static_cast<std::size_t>(label)] += on ? 1 : 0;
                }
            }
            for (std::size_t k = 0; k < hits.size(); ++k) {
                overlap_sum += static_cast<double>(hits[k]) / static_cast<double>(sizes[k]);
            }
        }
        const double fpr = negatives == 0 ? 0.0 : static_cast<double>(false_pos) / static_cast<double>(negatives);
        curve.push_back({fpr, overlap_sum / static_cast<double>(total_components)});
    }
    std::sort(curve.begin(), curve.end());

    // Trapezoid up to fpr_limit, interpolating the closing segment.
    double area = 0.0;
    for (std::size_t k = 1; k < curve.size(); ++k) {
        const auto [x0, y0] = curve[k - 1];
        auto [x1, y1] = curve[k];
        if (x0 >= fpr_limit) break;
        if (x1 > fpr_limit) {
            y1 = y0 + (y1 - y0) * (fpr_limit - x0) / (x1 - x0);
            x1 = fpr_limit;
        }
        area += 0.5 * (x1 - x0) * (y0 + y1);
    }
    // A curve that never reaches the limit holds its last value.
    const auto [last_x, last_y] = curve.back();
    if (last_x < fpr_limit) area += (fpr_limit - last_x) * last_y;
    return area / fpr_limit;
}

double pixel_auroc(std::span<const MaskedMap> maps) {
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (const auto& m : maps) {
        scores.insert(scores.end(), m.pixel_map.values.begin(), m.pixel_map.values.end());
        labels.insert(labels.end(), m.gt_mask.values.begin(), m.gt_mask.values.end());
    }
    for (auto& l : labels) l = l != 0 ? 1 : 0;
    return auroc(scores, labels);
}

}  // namespace gatead
