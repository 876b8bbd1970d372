#include "gatead/nn.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <string>

#include "gatead/errors.hpp"

namespace gatead {

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ConfigError("Rng::below requires n > 0");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

template <class T>
Vector<T> linear(const Vector<T>& input, const Matrix<T>& weight) {
    if (weight.cols() != input.size()) {
        throw DimensionError("linear: weight has " + std::to_string(weight.cols()) + " columns, input has " +
                             std::to_string(input.size()) + " entries");
    }
    return weight * input;
}

template <class T>
Matrix<T> linear_rows(const Matrix<T>& input, const Matrix<T>& weight) {
    if (weight.cols() != input.cols()) {
        throw DimensionError("linear_rows: weight expects width " + std::to_string(weight.cols()) + ", got " +
                             std::to_string(input.cols()));
    }
    Matrix<T> out(input.rows(), weight.rows());
    out.noalias() = input * weight.transpose();
    return out;
}

template <class T>
Matrix<T> linear_rows_backward(const Matrix<T>& input, const Matrix<T>& weight, const Matrix<T>& grad_out,
                               Matrix<T>& grad_weight) {
    if (grad_out.rows() != input.rows() || grad_out.cols() != weight.rows() || grad_weight.rows() != weight.rows() ||
        grad_weight.cols() != weight.cols()) {
        throw DimensionError("linear_rows_backward: shape mismatch");
    }
    grad_weight.noalias() += grad_out.transpose() * input;
    Matrix<T> grad_in(input.rows(), input.cols());
    grad_in.noalias() = grad_out * weight;
    return grad_in;
}

template <class T>
void neighborhood_softmax(std::span<const T> logits, std::span<T> weights) {
    if (logits.empty()) throw DimensionError("neighborhood_softmax: empty slice");
    if (weights.size() != logits.size()) throw DimensionError("neighborhood_softmax: output size mismatch");
    const T peak = *std::max_element(logits.begin(), logits.end());
    T total = T(0);
    for (std::size_t j = 0; j < logits.size(); ++j) {
        weights[j] = std::exp(logits[j] - peak);
        total += weights[j];
    }
    for (auto& w : weights) w /= total;
}

template <class T>
std::vector<T> neighborhood_softmax(std::span<const T> logits) {
    std::vector<T> out(logits.size());
    neighborhood_softmax<T>(logits, out);
    return out;
}

template <class T>
void neighborhood_softmax_backward(std::span<const T> weights, std::span<const T> grad_weights,
                                   std::span<T> grad_logits) {
    T dot = T(0);
    for (std::size_t j = 0; j < weights.size(); ++j) dot += weights[j] * grad_weights[j];
    for (std::size_t j = 0; j < weights.size(); ++j) grad_logits[j] = weights[j] * (grad_weights[j] - dot);
}

template <class T>
void inverted_dropout(std::span<T> weights, double rate, Rng& rng, bool training, std::span<T> scales) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    if (!training || rate == 0.0) {
        if (!scales.empty()) std::fill(scales.begin(), scales.end(), T(1));
        return;
    }
    const T keep_scale = T(1.0 / (1.0 - rate));
    for (std::size_t j = 0; j < weights.size(); ++j) {
        const T s = rng.uniform() < rate ? T(0) : keep_scale;
        weights[j] *= s;
        if (!scales.empty()) scales[j] = s;
    }
}

template <class T>
Matrix<T> xavier_uniform_init(std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix<T> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<T>(rng.uniform(-bound, bound));
    return m;
}

template <class T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamState<T>& state) {
    if (param.size() != grad.size() || state.m.size() != param.size() || state.v.size() != param.size()) {
        throw DimensionError("adam_step: parameter, gradient and state sizes differ");
    }
    ++state.step;
    const auto t = static_cast<double>(state.step);
    const T b1 = static_cast<T>(state.beta1);
    const T b2 = static_cast<T>(state.beta2);
    const T correction1 = static_cast<T>(1.0 - std::pow(state.beta1, t));
    const T correction2 = static_cast<T>(1.0 - std::pow(state.beta2, t));
    const T lr = static_cast<T>(state.lr);
    const T eps = static_cast<T>(state.eps);
    for (std::size_t k = 0; k < param.size(); ++k) {
        const T g = grad[k];
        state.m[k] = b1 * state.m[k] + (T(1) - b1) * g;
        state.v[k] = b2 * state.v[k] + (T(1) - b2) * g * g;
        const T m_hat = state.m[k] / correction1;
        const T v_hat = state.v[k] / correction2;
        param[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

#define GATEAD_INSTANTIATE_NN(T)                                                                              \
    template Vector<T> linear<T>(const Vector<T>&, const Matrix<T>&);                                         \
    template Matrix<T> linear_rows<T>(const Matrix<T>&, const Matrix<T>&);                                    \
    template Matrix<T> linear_rows_backward<T>(const Matrix<T>&, const Matrix<T>&, const Matrix<T>&,          \
                                               Matrix<T>&);                                                   \
    template void neighborhood_softmax<T>(std::span<const T>, std::span<T>);                                  \
    template std::vector<T> neighborhood_softmax<T>(std::span<const T>);                                      \
    template void neighborhood_softmax_backward<T>(std::span<const T>, std::span<const T>, std::span<T>);     \
    template void inverted_dropout<T>(std::span<T>, double, Rng&, bool, std::span<T>);                        \
    template Matrix<T> xavier_uniform_init<T>(std::size_t, std::size_t, Rng&);                                \
    template void adam_step<T>(std::span<T>, std::span<const T>, AdamState<T>&);

GATEAD_INSTANTIATE_NN(float)
GATEAD_INSTANTIATE_NN(double)

}  // namespace gatead
