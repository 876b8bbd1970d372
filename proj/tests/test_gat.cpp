#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gatead/errors.hpp"
#include "gatead/gat.hpp"
#include "support.hpp"

using namespace gatead;
using testing::random_matrix;
using testing::random_vector;

namespace {

GatLayerParams<double> random_layer(std::size_t in, std::size_t out, std::mt19937_64& gen, double scale = 0.5) {
    return {random_matrix<double>(out, in, gen, scale), random_vector<double>(2 * out, gen, scale)};
}

double max_abs_diff(const Matrix<double>& a, const oracle::Mat& b) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - b[i][j]));
    return worst;
}

double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1.0, std::max(std::abs(analytic), std::abs(numeric)));
}

}  // namespace

TEST_CASE("mask_count rounding rule") {
    CHECK(mask_count(1024, 0.2) == 205);
    CHECK(mask_count(1024, 0.0) == 0);
    CHECK(mask_count(4, 0.01) == 1);
    CHECK(mask_count(10, 0.25) == 3);  // 2.5 rounds away from zero
}

TEST_CASE("apply_feature_mask replaces exactly the chosen rows") {
    std::mt19937_64 gen(1);
    const Matrix<double> x = random_matrix<double>(1024, 3, gen);
    const Vector<double> token = random_vector<double>(3, gen);
    Rng rng(2);
    std::vector<std::uint32_t> masked;
    const Matrix<double> y = apply_feature_mask<double>(x, token, 0.2, rng, masked);
    REQUIRE(masked.size() == 205);
    CHECK(std::is_sorted(masked.begin(), masked.end()));
    CHECK(std::adjacent_find(masked.begin(), masked.end()) == masked.end());
    std::vector<bool> hit(1024, false);
    for (auto i : masked) hit[i] = true;
    bool ok = true;
    for (int i = 0; i < 1024; ++i) ok &= hit[i] ? y.row(i) == token.transpose() : y.row(i) == x.row(i);
    CHECK(ok);

    Rng r0(3);
    const Matrix<double> same = apply_feature_mask<double>(x, token, 0.0, r0, masked);
    CHECK(masked.empty());
    CHECK(same == x);
    CHECK_THROWS_AS(apply_feature_mask<double>(x, token, 1.0, r0, masked), ConfigError);
}

TEST_CASE("mask selection is uniform over nodes") {
    const Matrix<double> x = Matrix<double>::Zero(100, 1);
    const Vector<double> token = Vector<double>::Ones(1);
    std::vector<int> counts(100, 0);
    Rng rng(11);
    std::vector<std::uint32_t> masked;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        apply_feature_mask<double>(x, token, 0.2, rng, masked);
        for (auto i : masked) ++counts[i];
    }
    for (int c : counts) CHECK(std::abs(c / double(trials) - 0.2) <= 0.02);
}

TEST_CASE("zero attention vector gives neighborhood means") {
    std::mt19937_64 gen(2);
    const auto topo = build_grid_topology(3, 4);
    const Matrix<double> x = random_matrix<double>(12, 5, gen);
    GatLayerParams<double> p = random_layer(5, 3, gen);
    p.attn.setZero();
    Rng rng(0);
    LayerCache<double> cache;
    const Matrix<double> y = gat_layer_forward<double>(x, topo, p, 0.0, rng, false, 0.2, &cache);
    const Matrix<double> proj = linear_rows<double>(x, p.weight);
    for (std::uint32_t i = 0; i < 12; ++i) {
        Vector<double> mean = Vector<double>::Zero(3);
        for (auto j : topo.neighbors(i)) mean += proj.row(j).transpose();
        mean /= static_cast<double>(topo.degree(i));
        for (int k = 0; k < 3; ++k) CHECK(std::abs(y(i, k) - oracle::elu(mean(k))) <= 1e-12);
        const auto begin = topo.offsets()[i];
        for (std::size_t e = begin; e < topo.offsets()[i + 1]; ++e) {
            CHECK(std::abs(cache.attention[e] - 1.0 / topo.degree(i)) <= 1e-15);
        }
    }
}

TEST_CASE("2x2 grid with scalar features against the dense oracle") {
    const auto topo = build_grid_topology(2, 2);
    Matrix<double> x(4, 1);
    x << 1.0, -2.0, 0.5, 3.0;
    GatLayerParams<double> p;
    p.weight = Matrix<double>::Ones(1, 1);
    p.attn = Vector<double>(2);
    p.attn << 0.3, -0.8;
    Rng rng(0);
    const Matrix<double> y = gat_layer_forward<double>(x, topo, p, 0.0, rng, false);
    const auto expected = oracle::dense_gat_layer(testing::to_mat(x), {{1.0}}, {0.3, -0.8},
                                                  oracle::grid_adjacency(2, 2), 0.2);
    CHECK(max_abs_diff(y, expected) <= 1e-6);

    // Node 0 by hand: logits LeakyReLU(0.3 * 1 - 0.8 * x_j).
    double z = 0.0, acc = 0.0;
    for (double xj : {1.0, -2.0, 0.5, 3.0}) {
        const double e = 0.3 - 0.8 * xj;
        const double w = std::exp(e >= 0 ? e : 0.2 * e);
        z += w;
        acc += w * xj;
    }
    CHECK(std::abs(y(0, 0) - oracle::elu(acc / z)) <= 1e-12);
}

TEST_CASE("sparse forward equals dense masked attention on random grids") {
    std::mt19937_64 gen(12);
    std::uniform_int_distribution<std::uint32_t> side(2, 8);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::uint32_t r = side(gen), c = side(gen);
        const auto topo = build_grid_topology(r, c);
        const Matrix<double> x = random_matrix<double>(r * c, 6, gen);
        const auto p = random_layer(6, 4, gen, 1.0);
        Rng rng(0);
        const Matrix<double> y = gat_layer_forward<double>(x, topo, p, 0.3, rng, false);
        std::vector<double> a(p.attn.data(), p.attn.data() + p.attn.size());
        const auto expected =
            oracle::dense_gat_layer(testing::to_mat(x), testing::to_mat(p.weight), a, oracle::grid_adjacency(r, c), 0.2);
        worst = std::max(worst, max_abs_diff(y, expected));
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("180-degree rotation of a square grid permutes outputs identically") {
    std::mt19937_64 gen(13);
    const std::uint32_t n = 5;
    const auto topo = build_grid_topology(n, n);
    const Matrix<double> x = random_matrix<double>(n * n, 4, gen);
    Matrix<double> rotated(n * n, 4);
    for (std::uint32_t i = 0; i < n * n; ++i) rotated.row(n * n - 1 - i) = x.row(i);
    const auto p = random_layer(4, 3, gen, 1.0);
    Rng rng(0);
    const Matrix<double> y = gat_layer_forward<double>(x, topo, p, 0.0, rng, false);
    const Matrix<double> yr = gat_layer_forward<double>(rotated, topo, p, 0.0, rng, false);
    double worst = 0.0;
    for (std::uint32_t i = 0; i < n * n; ++i) worst = std::max(worst, (yr.row(n * n - 1 - i) - y.row(i)).cwiseAbs().maxCoeff());
    CHECK(worst <= 1e-12);
}

TEST_CASE("pre-dropout attention rows are normalized") {
    std::mt19937_64 gen(14);
    const auto topo = build_grid_topology(6, 5);
    const Matrix<double> x = random_matrix<double>(30, 8, gen, 3.0);
    const auto p = random_layer(8, 8, gen, 2.0);
    Rng rng(1);
    LayerCache<double> cache;
    gat_layer_forward<double>(x, topo, p, 0.5, rng, true, 0.2, &cache);
    for (std::size_t i = 0; i < 30; ++i) {
        double s = 0.0;
        for (auto e = topo.offsets()[i]; e < topo.offsets()[i + 1]; ++e) s += cache.attention[e];
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("GCN: regular interior, hand-computed one-hot, zero input, dense oracle") {
    const auto topo = build_grid_topology(3, 3);
    GatLayerParams<double> p{Matrix<double>::Identity(1, 1), Vector<double>::Zero(2)};
    Matrix<double> onehot = Matrix<double>::Zero(9, 1);
    onehot(4, 0) = 1.0;
    const Matrix<double> y = gcn_layer_forward<double>(onehot, topo, p);
    for (std::uint32_t j = 0; j < 9; ++j) {
        // Every node neighbors the center here; coefficient 1/sqrt(|N(j)| * 9).
        CHECK(std::abs(y(j, 0) - oracle::elu(1.0 / std::sqrt(9.0 * topo.degree(j)))) <= 1e-12);
    }
    CHECK(gcn_layer_forward<double>(Matrix<double>::Zero(9, 1), topo, p).isZero(0.0));

    const auto big = build_grid_topology(7, 7);
    Matrix<double> ones = Matrix<double>::Constant(49, 1, 0.25);
    const Matrix<double> yo = gcn_layer_forward<double>(ones, big, p);
    CHECK(std::abs(yo(3 * 7 + 3, 0) - 0.25) <= 1e-12);  // 9 terms of 0.25 / 9

    std::mt19937_64 gen(15);
    const Matrix<double> x = random_matrix<double>(49, 4, gen);
    const auto q = random_layer(4, 3, gen, 1.0);
    const auto expected = oracle::dense_gcn_layer(testing::to_mat(x), testing::to_mat(q.weight), oracle::grid_adjacency(7, 7));
    CHECK(max_abs_diff(gcn_layer_forward<double>(x, big, q), expected) <= 1e-12);
}

TEST_CASE("encoder composition and determinism") {
    std::mt19937_64 gen(16);
    const auto topo = build_grid_topology(4, 4);
    EncoderConfig cfg;
    cfg.input_dim = 5;
    cfg.hidden_dim = 6;
    cfg.num_layers = 1;
    Rng init(3);
    auto one = init_encoder<double>(cfg, init);
    CHECK(one.mask_token.isZero(0.0));
    const Matrix<double> x = random_matrix<double>(16, 5, gen);
    Rng r1(0), r2(0);
    const auto out1 = encoder_forward<double>(x, topo, one, cfg, r1, false);
    CHECK(out1.masked.empty());
    CHECK(out1.hidden == gat_layer_forward<double>(x, topo, one.layers[0], 0.0, r2, false));

    cfg.num_layers = 3;
    Rng init3(4);
    const auto three = init_encoder<double>(cfg, init3);
    Rng ra(0), rb(0);
    const auto h = encoder_forward<double>(x, topo, three, cfg, ra, false).hidden;
    Matrix<double> step = x;
    for (const auto& layer : three.layers) step = gat_layer_forward<double>(step, topo, layer, 0.0, rb, false);
    CHECK(h == step);  // 0 ulp
    Rng rc(99);
    CHECK(encoder_forward<double>(x, topo, three, cfg, rc, false).hidden == h);

    // Training with masking and dropout: the same seed replays the same draws.
    Rng t1(5), t2(5);
    const auto a = encoder_forward<double>(x, topo, three, cfg, t1, true);
    const auto b = encoder_forward<double>(x, topo, three, cfg, t2, true);
    CHECK(a.hidden == b.hidden);
    CHECK(a.masked == b.masked);
    CHECK(a.masked.size() == mask_count(16, 0.2));

    cfg.input_dim = 4;
    CHECK_THROWS_AS(encoder_forward<double>(x, topo, three, cfg, t1, false), DimensionError);
}

TEST_CASE("layer and encoder backward match finite differences") {
    std::mt19937_64 gen(17);
    const auto topo = build_grid_topology(3, 4);
    for (Aggregation agg : {Aggregation::GAT, Aggregation::GCN}) {
        EncoderConfig cfg;
        cfg.input_dim = 4;
        cfg.hidden_dim = 5;
        cfg.num_layers = 2;
        cfg.mask_ratio = 0.25;
        cfg.dropout_rate = 0.2;
        cfg.aggregation = agg;
        Rng init(8);
        auto params = init_encoder<double>(cfg, init);
        params.mask_token = random_vector<double>(4, gen);
        const Matrix<double> x = random_matrix<double>(12, 4, gen);
        const Matrix<double> up = random_matrix<double>(12, 5, gen);
        const std::uint64_t seed = 21;

        auto objective = [&](const EncoderParams<double>& p) {
            Rng rng(seed);
            return (encoder_forward<double>(x, topo, p, cfg, rng, true).hidden.array() * up.array()).sum();
        };
        Rng rng(seed);
        EncoderCache<double> cache;
        const auto out = encoder_forward<double>(x, topo, params, cfg, rng, true, &cache);
        auto grads = zeros_like(params);
        encoder_backward<double>(cache, out.masked, topo, params, cfg, up, grads);

        double worst = 0.0;
        auto probe = [&](auto& value, auto& grad) {
            for (Eigen::Index k = 0; k < value.size(); ++k) {
                const double keep = value.data()[k];
                value.data()[k] = keep + 1e-5;
                const double fp = objective(params);
                value.data()[k] = keep - 1e-5;
                const double fm = objective(params);
                value.data()[k] = keep;
                worst = std::max(worst, rel_err(grad.data()[k], (fp - fm) / 2e-5));
            }
        };
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            probe(params.layers[l].weight, grads.layers[l].weight);
            if (agg == Aggregation::GAT) probe(params.layers[l].attn, grads.layers[l].attn);
        }
        probe(params.mask_token, grads.mask_token);
        CHECK_MESSAGE(worst <= 1e-4, "aggregation " << static_cast<int>(agg));
        if (agg == Aggregation::GCN) {
            for (const auto& l : grads.layers) CHECK(l.attn.isZero(0.0));
        }
    }
}
