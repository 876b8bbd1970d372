#pragma once

// Representation-alignment heads and the reconstruction residuals measured in
// their shared latent space.

#include <cstdint>
#include <span>

#include "gatead/nn.hpp"

namespace gatead {

/// Training/scoring residual. COSINE is SCE with gamma fixed to 1; MSE is the
/// mean squared difference over latent channels.
enum class Objective : std::uint32_t { SCE = 0, MSE = 1, COSINE = 2 };

struct AlignConfig {
    std::size_t latent_dim = 256;
    double gamma = 2.0;
    std::size_t g_hidden_dim = 256;
    Objective objective = Objective::SCE;

    void validate() const;
    /// Exponent actually applied for the configured objective.
    double effective_gamma() const { return objective == Objective::COSINE ? 1.0 : gamma; }
    bool operator==(const AlignConfig&) const = default;
};

/// q: single linear layer on input tokens. g: Linear -> ReLU -> Linear on encoder output.
template <class T>
struct ProjectionHeads {
    DenseMatrix<T> q_weight;  // latent x input
    Vector<T> q_bias;
    DenseMatrix<T> g_w1;      // g_hidden x encoded
    Vector<T> g_b1;
    DenseMatrix<T> g_w2;      // latent x g_hidden
    Vector<T> g_b2;
};

template <class T>
ProjectionHeads<T> init_heads(std::size_t input_dim, std::size_t encoded_dim, const AlignConfig& cfg, Rng& rng);

template <class T>
ProjectionHeads<T> zeros_like(const ProjectionHeads<T>& heads);

template <class T>
Vector<T> project_input(const Vector<T>& x, const ProjectionHeads<T>& heads);

template <class T>
Vector<T> project_encoded(const Vector<T>& h, const ProjectionHeads<T>& heads);

/// Row-wise q over an N x D matrix.
template <class T>
Matrix<T> project_inputs(const Matrix<T>& inputs, const ProjectionHeads<T>& heads);

template <class T>
struct EncodedProjection {
    Matrix<T> hidden_pre;  // before ReLU
    Matrix<T> latent;
};

/// Row-wise g over an N x F matrix.
template <class T>
EncodedProjection<T> project_encoded_rows(const Matrix<T>& encoded, const ProjectionHeads<T>& heads);

/// Accumulates head gradients; returns d(encoded). Inputs are constants, so
/// the q side only contributes parameter gradients.
template <class T>
Matrix<T> heads_backward(const Matrix<T>& inputs, const Matrix<T>& encoded, const EncodedProjection<T>& projection,
                         const ProjectionHeads<T>& heads, const Matrix<T>& grad_input_latent,
                         const Matrix<T>& grad_encoded_latent, ProjectionHeads<T>& grads);

inline constexpr double kDegenerateNorm = 1e-12;

template <class T>
struct SceValue {
    T value;
    bool degenerate;  // a norm fell below kDegenerateNorm; cosine taken as 0
};

/// (1 - cos(z, z~))^gamma.
template <class T>
SceValue<T> sce_per_node(std::span<const T> z, std::span<const T> z_rec, double gamma);

/// Mean of sce_per_node over all rows.
template <class T>
T sce_loss(const Matrix<T>& z, const Matrix<T>& z_rec, double gamma);

/// Per-node residual under the configured objective.
template <class T>
T node_residual(const AlignConfig& cfg, std::span<const T> z, std::span<const T> z_rec);

/// Mean residual over rows; fills gradients w.r.t. both arguments when given.
template <class T>
T objective_loss(const AlignConfig& cfg, const Matrix<T>& z, const Matrix<T>& z_rec, Matrix<T>* grad_z = nullptr,
                 Matrix<T>* grad_z_rec = nullptr);

}  // namespace gatead
