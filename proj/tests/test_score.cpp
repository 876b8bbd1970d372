#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "gatead/errors.hpp"
#include "gatead/score.hpp"
#include "support.hpp"

using namespace gatead;

namespace {

FloatMap from_mat(const oracle::Mat& m) {
    FloatMap out(static_cast<std::uint32_t>(m.size()), static_cast<std::uint32_t>(m[0].size()));
    for (std::size_t r = 0; r < m.size(); ++r)
        for (std::size_t c = 0; c < m[0].size(); ++c) out.at(r, c) = static_cast<float>(m[r][c]);
    return out;
}

oracle::Mat to_mat(const FloatMap& m) {
    oracle::Mat out = oracle::zeros(m.rows, m.cols);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) out[r][c] = m.at(r, c);
    return out;
}

double max_diff(const FloatMap& a, const oracle::Mat& b) {
    double worst = 0.0;
    for (std::size_t r = 0; r < a.rows; ++r)
        for (std::size_t c = 0; c < a.cols; ++c) worst = std::max(worst, std::abs(a.at(r, c) - b[r][c]));
    return worst;
}

TrainedModel small_model(const PatchGrid& support, std::size_t epochs, double mask_ratio) {
    TrainConfig cfg;
    cfg.encoder.hidden_dim = 16;
    cfg.encoder.num_layers = 2;
    cfg.encoder.mask_ratio = mask_ratio;
    cfg.align.latent_dim = 16;
    cfg.align.g_hidden_dim = 16;
    cfg.max_epochs = epochs;
    cfg.lr = 3e-3;
    return train_model(std::span(&support, 1), cfg).model;
}

}  // namespace

TEST_CASE("top-k count and pooling closed forms") {
    CHECK(top_k_count(1024, 0.025) == 26);
    CHECK(top_k_count(4, 0.25) == 1);
    CHECK(top_k_count(10, 0.01) == 1);
    ScoreConfig cfg;
    const std::vector<float> constant(1024, 0.37f);
    CHECK(std::abs(image_score(constant, cfg) - 0.37) <= 1e-6);
    cfg.top_ratio = 0.25;
    CHECK(image_score(std::vector<float>{0, 0, 0, 10}, cfg) == 10.0);
    CHECK_THROWS_AS(image_score(std::vector<float>{}, cfg), DimensionError);
    cfg.top_ratio = 0.0;
    CHECK_THROWS_AS(image_score(constant, cfg), ConfigError);
}

TEST_CASE("top-k mean matches a full-sort oracle; max dominates; permutation and monotonicity") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<float> dist(0.0f, 4.0f);
    for (int t = 0; t < 50; ++t) {
        std::vector<float> s(100);
        for (auto& v : s) v = dist(gen);
        s[10] = s[20] = s[30];  // ties
        ScoreConfig cfg;
        cfg.top_ratio = 0.05;
        std::vector<float> sorted = s;
        std::sort(sorted.begin(), sorted.end(), std::greater<>());
        double expected = 0.0;
        for (int k = 0; k < 5; ++k) expected += sorted[k];
        const double got = image_score(s, cfg);
        CHECK(got == expected / 5.0);

        ScoreConfig mx = cfg;
        mx.pooling = Pooling::Max;
        CHECK(image_score(s, mx) >= got);
        CHECK(image_score(s, mx) == sorted[0]);

        std::vector<float> shuffled = s;
        std::shuffle(shuffled.begin(), shuffled.end(), gen);
        CHECK(image_score(shuffled, cfg) == got);
        CHECK(image_score(shuffled, mx) == image_score(s, mx));

        std::vector<float> raised = s;
        raised[t] += 0.5f;
        CHECK(image_score(raised, cfg) >= got);
    }
}

TEST_CASE("gaussian blur: identity, constants, impulse against direct convolution") {
    FloatMap constant(6, 9, 2.5f);
    const FloatMap c = gaussian_blur_grid(constant, 1.3);
    for (float v : c.values) CHECK(std::abs(v - 2.5f) <= 1e-6);

    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    oracle::Mat m = oracle::zeros(5, 7);
    for (auto& row : m)
        for (auto& v : row) v = dist(gen);
    CHECK(gaussian_blur_grid(from_mat(m), 0.0) == from_mat(m));

    oracle::Mat impulse = oracle::zeros(9, 9);
    impulse[4][4] = 1.0;
    const FloatMap out = gaussian_blur_grid(from_mat(impulse), 1.0);
    CHECK(std::abs(std::accumulate(out.values.begin(), out.values.end(), 0.0) - 1.0) <= 1e-6);
    CHECK(max_diff(out, oracle::direct_blur(impulse, 1.0)) <= 1e-6);

    // Reflection matters where the kernel overhangs the border.
    for (double sigma : {0.5, 1.0, 2.0}) {
        CHECK(max_diff(gaussian_blur_grid(from_mat(m), sigma), oracle::direct_blur(m, sigma)) <= 1e-6);
    }
}

TEST_CASE("bilinear upsampling against the per-pixel formula") {
    const oracle::Mat m{{0.0, 1.0}, {2.0, 3.0}};
    const FloatMap up = bilinear_upsample(from_mat(m), 4, 4);
    CHECK(max_diff(up, oracle::bilinear(m, 4, 4)) <= 1e-6);
    // Corners clamp to the source corners; the first interior sample sits a quarter cell in.
    CHECK(up.at(0, 0) == 0.0f);
    CHECK(up.at(3, 3) == 3.0f);
    CHECK(std::abs(up.at(0, 1) - 0.25f) <= 1e-6);

    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    oracle::Mat r = oracle::zeros(5, 3);
    for (auto& row : r)
        for (auto& v : row) v = dist(gen);
    CHECK(max_diff(bilinear_upsample(from_mat(r), 17, 11), oracle::bilinear(r, 17, 11)) <= 1e-6);
    CHECK(max_diff(bilinear_upsample(from_mat(r), 5, 3), r) <= 1e-6);
    const FloatMap flat = bilinear_upsample(FloatMap(3, 3, 0.75f), 10, 7);
    for (float v : flat.values) CHECK(std::abs(v - 0.75f) <= 1e-6);
    CHECK_THROWS_AS(bilinear_upsample(from_mat(r), 4, 3), DimensionError);
}

TEST_CASE("pixel_map pipeline properties") {
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<float> dist(0.0f, 4.0f);
    std::vector<float> scores(6 * 8);
    for (auto& v : scores) v = dist(gen);

    ScoreConfig identity;
    identity.blur_sigma = 0.0;
    const FloatMap same = pixel_map(scores, 6, 8, identity);
    CHECK(same.values == scores);

    ScoreConfig cfg;
    cfg.output_rows = 96;
    cfg.output_cols = 128;
    const FloatMap big = pixel_map(scores, 6, 8, cfg);
    CHECK(big.rows == 96);
    CHECK(big.cols == 128);
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    for (float v : big.values) {
        CHECK(v <= *hi + 1e-6f);
        CHECK(v >= *lo - 1e-6f);
    }

    // A single hot patch peaks inside its upsampled footprint (16x16 pixels here).
    std::vector<float> hot(6 * 8, 0.0f);
    hot[2 * 8 + 5] = 1.0f;
    const FloatMap h = pixel_map(hot, 6, 8, cfg);
    const auto argmax = std::max_element(h.values.begin(), h.values.end()) - h.values.begin();
    const auto r = argmax / 128, c = argmax % 128;
    CHECK(r >= 2 * 16);
    CHECK(r < 3 * 16);
    CHECK(c >= 5 * 16);
    CHECK(c < 6 * 16);
}

TEST_CASE("patch scores: range, determinism, dimension checks, contrast against a perturbed copy") {
    const auto support = testing::random_grid(6, 6, 8, 31);
    const TrainedModel model = small_model(support, 150, 0.0);
    const auto topo = build_grid_topology(6, 6);
    const auto s1 = patch_scores(support, model, topo);
    const auto s2 = patch_scores(support, model, topo);
    CHECK(s1 == s2);
    for (float v : s1) {
        CHECK(v >= 0.0f);
        CHECK(v <= 4.0f);
    }

    // +3 sigma noise on a 2x2 block.
    PatchGrid perturbed = support;
    std::mt19937_64 gen(8);
    std::normal_distribution<float> noise(0.0f, 3.0f);
    for (std::size_t i : {14u, 15u, 20u, 21u})
        for (auto& v : perturbed.node(i)) v += noise(gen);
    const auto sp = patch_scores(perturbed, model, topo);
    const double mean_clean = std::accumulate(s1.begin(), s1.end(), 0.0) / s1.size();
    const double mean_pert = std::accumulate(sp.begin(), sp.end(), 0.0) / sp.size();
    CHECK(mean_clean < mean_pert);

    CHECK_THROWS_AS(patch_scores(testing::random_grid(6, 7, 8, 1), model, topo), DimensionError);
    CHECK_THROWS_AS(patch_scores(testing::random_grid(6, 6, 9, 1), model, topo), DimensionError);

    ScoreConfig cfg;
    const AnomalyResult r = score_image(support, model, topo, cfg);
    CHECK(r.patch_scores == s1);
    CHECK(r.image_score == static_cast<float>(image_score(s1, cfg)));
    CHECK(r.pixel_map == pixel_map(s1, 6, 6, cfg));
}
