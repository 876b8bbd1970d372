#pragma once

// Numerical kernels shared by the encoder and the projection heads. Every
// kernel with a learnable input has a matching backward.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace gatead {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Alias used where a matrix plays the role of a weight tensor.
template <class T>
using DenseMatrix = Matrix<T>;

template <class T>
std::span<T> row_span(Matrix<T>& m, Eigen::Index r) {
    return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}
template <class T>
std::span<const T> row_span(const Matrix<T>& m, Eigen::Index r) {
    return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

/// Seeded generator. The engine is mt19937_64 (fully specified by the
/// standard); the distributions are implemented here so that streams are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller (one draw per call).
    double normal();
    /// Uniform integer on [0, n), unbiased.
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

/// out = weight * input, no bias.
template <class T>
Vector<T> linear(const Vector<T>& input, const Matrix<T>& weight);

/// Batched linear map over rows: Y = X * W^T.
template <class T>
Matrix<T> linear_rows(const Matrix<T>& input, const Matrix<T>& weight);

/// Given dY for Y = X * W^T, accumulates dW += dY^T X and returns dX = dY W.
template <class T>
Matrix<T> linear_rows_backward(const Matrix<T>& input, const Matrix<T>& weight, const Matrix<T>& grad_out,
                               Matrix<T>& grad_weight);

inline constexpr double kLeakySlope = 0.2;

template <class T>
constexpr T leaky_relu(T x, T slope) {
    return x >= T(0) ? x : slope * x;
}
template <class T>
constexpr T leaky_relu_grad(T x, T slope) {
    return x >= T(0) ? T(1) : slope;
}

/// ELU with unit alpha.
template <class T>
T elu(T x) {
    return x >= T(0) ? x : std::expm1(x);
}
/// Derivative of elu at x.
template <class T>
T elu_grad(T x) {
    return x >= T(0) ? T(1) : std::exp(x);
}

/// Max-subtracted softmax of `logits` written to `weights`.
template <class T>
void neighborhood_softmax(std::span<const T> logits, std::span<T> weights);

/// Convenience overload returning a fresh vector.
template <class T>
std::vector<T> neighborhood_softmax(std::span<const T> logits);

/// Backward of the softmax: dlogit_j = w_j * (dw_j - sum_m w_m dw_m).
template <class T>
void neighborhood_softmax_backward(std::span<const T> weights, std::span<const T> grad_weights,
                                   std::span<T> grad_logits);

/// Inverted dropout in place. When `scales` is non-empty it receives the
/// per-element multiplier (0 or 1/(1-rate)) for the backward pass. A zero rate
/// or inference mode leaves the weights untouched and draws nothing.
template <class T>
void inverted_dropout(std::span<T> weights, double rate, Rng& rng, bool training, std::span<T> scales = {});

template <class T>
Matrix<T> xavier_uniform_init(std::size_t rows, std::size_t cols, Rng& rng);

/// Per-tensor Adam state.
template <class T>
struct AdamState {
    std::uint64_t step = 0;
    std::vector<T> m;
    std::vector<T> v;
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(std::size_t size, double learning_rate) : m(size, T(0)), v(size, T(0)), lr(learning_rate) {}
};

/// One bias-corrected Adam update; increments state.step.
template <class T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamState<T>& state);

}  // namespace gatead
