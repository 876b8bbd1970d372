#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "gatead/errors.hpp"
#include "gatead/nn.hpp"
#include "support.hpp"

using namespace gatead;
using testing::random_matrix;
using testing::random_vector;

namespace {

double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1.0, std::max(std::abs(analytic), std::abs(numeric)));
}

}  // namespace

TEST_CASE("linear: identity, zero and naive triple loop") {
    std::mt19937_64 gen(3);
    const Vector<double> x = random_vector<double>(4, gen);
    CHECK(linear<double>(x, Matrix<double>::Identity(4, 4)) == x);
    CHECK(linear<double>(x, Matrix<double>::Zero(3, 4)).isZero(0.0));

    const Matrix<double> w = random_matrix<double>(3, 4, gen);
    const Vector<double> y = linear<double>(x, w);
    for (int k = 0; k < 3; ++k) {
        double acc = 0.0;
        for (int l = 0; l < 4; ++l) acc += w(k, l) * x(l);
        CHECK(std::abs(y(k) - acc) <= 1e-12);
    }
    CHECK_THROWS_AS(linear<double>(x, Matrix<double>::Zero(3, 5)), DimensionError);
}

TEST_CASE("linear_rows matches the naive matmul oracle") {
    std::mt19937_64 gen(4);
    const Matrix<double> x = random_matrix<double>(7, 5, gen);
    const Matrix<double> w = random_matrix<double>(3, 5, gen);
    const auto expected = oracle::matmul(testing::to_mat(x), oracle::transpose(testing::to_mat(w)));
    const Matrix<double> y = linear_rows<double>(x, w);
    double worst = 0.0;
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(y(i, j) - expected[i][j]));
    CHECK(worst <= 1e-12);
}

TEST_CASE("linear_rows_backward matches finite differences on 100 instances") {
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<int> size(1, 6);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = size(gen), in = size(gen), out = size(gen);
        const Matrix<double> x = random_matrix<double>(n, in, gen);
        const Matrix<double> w = random_matrix<double>(out, in, gen);
        const Matrix<double> upstream = random_matrix<double>(n, out, gen);
        auto objective = [&](const Matrix<double>& xx, const Matrix<double>& ww) {
            return (linear_rows<double>(xx, ww).array() * upstream.array()).sum();
        };
        Matrix<double> dw = Matrix<double>::Zero(out, in);
        const Matrix<double> dx = linear_rows_backward<double>(x, w, upstream, dw);
        const double h = 1e-5;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            Matrix<double> xp = x, xm = x;
            xp.data()[k] += h;
            xm.data()[k] -= h;
            worst = std::max(worst, rel_err(dx.data()[k], (objective(xp, w) - objective(xm, w)) / (2 * h)));
        }
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            Matrix<double> wp = w, wm = w;
            wp.data()[k] += h;
            wm.data()[k] -= h;
            worst = std::max(worst, rel_err(dw.data()[k], (objective(x, wp) - objective(x, wm)) / (2 * h)));
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("leaky_relu values") {
    CHECK(leaky_relu(2.0, 0.2) == 2.0);
    CHECK(leaky_relu(-1.0, 0.2) == doctest::Approx(-0.2).epsilon(1e-15));
    CHECK(leaky_relu(0.0, 0.2) == 0.0);
}

TEST_CASE("elu values and lower bound") {
    CHECK(elu(1.5) == 1.5);
    CHECK(elu(0.0) == 0.0);
    CHECK(std::abs(elu(-30.0) - (std::exp(-30.0) - 1.0)) <= 1e-12);
    CHECK(elu(-30.0) >= -1.0);
    CHECK(elu(-1e9) >= -1.0);
    CHECK(elu(-800.0f) >= -1.0f);
}

TEST_CASE("activation derivatives match finite differences") {
    std::mt19937_64 gen(6);
    std::normal_distribution<double> dist(0.0, 2.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        double x = dist(gen);
        if (std::abs(x) < 1e-3) x = 0.5;  // keep away from the kink
        const double h = 1e-5;
        worst = std::max(worst, rel_err(elu_grad(x), (elu(x + h) - elu(x - h)) / (2 * h)));
        worst = std::max(worst, rel_err(leaky_relu_grad(x, 0.2),
                                        (leaky_relu(x + h, 0.2) - leaky_relu(x - h, 0.2)) / (2 * h)));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("neighborhood_softmax closed forms") {
    const std::vector<double> equal(9, 0.7);
    for (double w : neighborhood_softmax<double>(equal)) CHECK(std::abs(w - 1.0 / 9.0) <= 1e-15);
    const std::vector<double> two{0.0, std::log(2.0)};
    const auto w = neighborhood_softmax<double>(two);
    CHECK(std::abs(w[0] - 1.0 / 3.0) <= 1e-15);
    CHECK(std::abs(w[1] - 2.0 / 3.0) <= 1e-15);
    CHECK_THROWS_AS(neighborhood_softmax<double>(std::vector<double>{}), DimensionError);
}

TEST_CASE("neighborhood_softmax matches a dense oracle and stays normalized at extreme logits") {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> dist(0.0, 3.0);
    std::vector<double> logits(7);
    for (auto& v : logits) v = dist(gen);
    const auto w = neighborhood_softmax<double>(logits);
    double z = 0.0;
    for (double v : logits) z += std::exp(v);
    for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(w[j] - std::exp(logits[j]) / z) <= 1e-12);

    for (double big : {700.0, -700.0}) {
        std::vector<double> d{big, big - 1.0, big + 0.5, 0.0};
        const auto wd = neighborhood_softmax<double>(d);
        CHECK(std::abs(std::accumulate(wd.begin(), wd.end(), 0.0) - 1.0) <= 1e-12);
        std::vector<float> f{static_cast<float>(big), static_cast<float>(big - 1), 3.0f};
        const auto wf = neighborhood_softmax<float>(f);
        CHECK(std::abs(std::accumulate(wf.begin(), wf.end(), 0.0) - 1.0) <= 1e-6);
    }
}

TEST_CASE("softmax backward matches finite differences on 100 instances") {
    std::mt19937_64 gen(8);
    std::normal_distribution<double> dist(0.0, 1.5);
    std::uniform_int_distribution<int> size(1, 9);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int n = size(gen);
        std::vector<double> logits(n), up(n), grad(n);
        for (auto& v : logits) v = dist(gen);
        for (auto& v : up) v = dist(gen);
        auto f = [&](const std::vector<double>& l) {
            const auto w = neighborhood_softmax<double>(l);
            return std::inner_product(w.begin(), w.end(), up.begin(), 0.0);
        };
        const auto w = neighborhood_softmax<double>(logits);
        neighborhood_softmax_backward<double>(w, up, grad);
        for (int j = 0; j < n; ++j) {
            auto lp = logits, lm = logits;
            lp[j] += 1e-5;
            lm[j] -= 1e-5;
            worst = std::max(worst, rel_err(grad[j], (f(lp) - f(lm)) / 2e-5));
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("inverted_dropout: identity cases, validation, expectation") {
    Rng rng(1);
    std::vector<double> w{0.1, 0.2, 0.7};
    const auto original = w;
    inverted_dropout<double>(w, 0.0, rng, true);
    CHECK(w == original);
    inverted_dropout<double>(w, 0.3, rng, false);
    CHECK(w == original);
    CHECK_THROWS_AS(inverted_dropout<double>(w, 1.0, rng, true), ConfigError);
    CHECK_THROWS_AS(inverted_dropout<double>(w, -0.1, rng, true), ConfigError);

    // No draws are consumed when nothing is dropped.
    Rng a(9), b(9);
    inverted_dropout<double>(w, 0.3, a, false);
    CHECK(a.next() == b.next());

    std::vector<double> ones(1'000'000, 1.0), scales(ones.size());
    Rng big(42);
    inverted_dropout<double>(ones, 0.3, big, true, scales);
    const double mean = std::accumulate(ones.begin(), ones.end(), 0.0) / ones.size();
    CHECK(mean >= 0.995);
    CHECK(mean <= 1.005);
    // Survivors carry exactly 1 / (1 - rate); the recorded scale equals the output.
    bool consistent = true;
    for (std::size_t k = 0; k < ones.size(); ++k) {
        consistent &= ones[k] == scales[k] && (ones[k] == 0.0 || std::abs(ones[k] - 1.0 / 0.7) < 1e-15);
    }
    CHECK(consistent);
    // Within three standard errors of the input (std of one sample is sqrt(rate / (1 - rate))).
    const double se = std::sqrt(0.3 / 0.7 / ones.size());
    CHECK(std::abs(mean - 1.0) <= 3 * se);
}

TEST_CASE("xavier_uniform_init bounds, determinism, mean") {
    Rng rng(5);
    const auto m = xavier_uniform_init<double>(100, 100, rng);
    CHECK(m.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 200.0));
    Rng r1(77), r2(77);
    CHECK(xavier_uniform_init<float>(13, 9, r1) == xavier_uniform_init<float>(13, 9, r2));
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng r(seed);
        total += xavier_uniform_init<double>(50, 50, r).mean();
    }
    CHECK(std::abs(total / 10.0) <= 0.01);
}

TEST_CASE("adam: closed-form first step, zero gradient, scalar reference trajectory") {
    {
        std::vector<double> p(4, 0.5), g(4, 1.0);
        AdamState<double> st(4, 1e-3);
        adam_step<double>(p, g, st);
        for (double v : p) CHECK(std::abs((v - 0.5) + 1e-3) <= 1e-3 * 1e-6);
        CHECK(st.step == 1);
    }
    {
        std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
        AdamState<double> st(2, 0.1);
        adam_step<double>(p, g, st);
        CHECK(p == std::vector<double>{1.0, -2.0});
    }
    {
        // f(w) = w^2 against a scalar re-implementation of the update.
        std::vector<double> w{1.0};
        AdamState<double> st(1, 0.1);
        double rw = 1.0, m = 0.0, v = 0.0;
        double prev = w[0];
        for (int t = 1; t <= 5; ++t) {
            std::vector<double> g{2.0 * w[0]};
            adam_step<double>(w, g, st);
            const double rg = 2.0 * rw;
            m = 0.9 * m + 0.1 * rg;
            v = 0.999 * v + 0.001 * rg * rg;
            rw -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
            CHECK(std::abs(w[0] - rw) <= 1e-12);
            CHECK(w[0] < prev);
            CHECK(w[0] > 0.0);
            prev = w[0];
        }
    }
    std::vector<double> p(3), g(2);
    AdamState<double> st(3, 0.1);
    CHECK_THROWS_AS(adam_step<double>(p, g, st), DimensionError);
}

TEST_CASE("Rng is reproducible and its helpers stay in range") {
    Rng a(123), b(123);
    for (int k = 0; k < 100; ++k) CHECK(a.next() == b.next());
    Rng r(5);
    bool ok = true;
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double u = r.uniform();
        ok &= u >= 0.0 && u < 1.0;
        ok &= r.below(7) < 7;
        const double z = r.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(ok);
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
    CHECK_THROWS_AS(r.below(0), ConfigError);
}
