#include "gatead/align.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gatead/errors.hpp"

namespace gatead {

void AlignConfig::validate() const {
    if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
    if (g_hidden_dim < 1) throw ConfigError("g_hidden_dim must be >= 1");
    if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be >= 1, got " + std::to_string(gamma));
    if (objective != Objective::SCE && objective != Objective::MSE && objective != Objective::COSINE) {
        throw ConfigError("unknown objective");
    }
}

template <class T>
ProjectionHeads<T> init_heads(std::size_t input_dim, std::size_t encoded_dim, const AlignConfig& cfg, Rng& rng) {
    cfg.validate();
    ProjectionHeads<T> heads;
    const auto f = static_cast<Eigen::Index>(cfg.latent_dim);
    const auto hid = static_cast<Eigen::Index>(cfg.g_hidden_dim);
    heads.q_weight = xavier_uniform_init<T>(cfg.latent_dim, input_dim, rng);
    heads.q_bias = Vector<T>::Zero(f);
    heads.g_w1 = xavier_uniform_init<T>(cfg.g_hidden_dim, encoded_dim, rng);
    heads.g_b1 = Vector<T>::Zero(hid);
    heads.g_w2 = xavier_uniform_init<T>(cfg.latent_dim, cfg.g_hidden_dim, rng);
    heads.g_b2 = Vector<T>::Zero(f);
    return heads;
}

template <class T>
ProjectionHeads<T> zeros_like(const ProjectionHeads<T>& h) {
    return {Matrix<T>::Zero(h.q_weight.rows(), h.q_weight.cols()), Vector<T>::Zero(h.q_bias.size()),
            Matrix<T>::Zero(h.g_w1.rows(), h.g_w1.cols()),         Vector<T>::Zero(h.g_b1.size()),
            Matrix<T>::Zero(h.g_w2.rows(), h.g_w2.cols()),         Vector<T>::Zero(h.g_b2.size())};
}

template <class T>
Vector<T> project_input(const Vector<T>& x, const ProjectionHeads<T>& heads) {
    return linear(x, heads.q_weight) + heads.q_bias;
}

template <class T>
Vector<T> project_encoded(const Vector<T>& h, const ProjectionHeads<T>& heads) {
    const Vector<T> hidden = (linear(h, heads.g_w1) + heads.g_b1).cwiseMax(T(0));
    return linear(hidden, heads.g_w2) + heads.g_b2;
}

template <class T>
Matrix<T> project_inputs(const Matrix<T>& inputs, const ProjectionHeads<T>& heads) {
    Matrix<T> z = linear_rows(inputs, heads.q_weight);
    z.rowwise() += heads.q_bias.transpose();
    return z;
}

template <class T>
EncodedProjection<T> project_encoded_rows(const Matrix<T>& encoded, const ProjectionHeads<T>& heads) {
    EncodedProjection<T> out;
    out.hidden_pre = linear_rows(encoded, heads.g_w1);
    out.hidden_pre.rowwise() += heads.g_b1.transpose();
    const Matrix<T> hidden = out.hidden_pre.cwiseMax(T(0));
    out.latent = linear_rows(hidden, heads.g_w2);
    out.latent.rowwise() += heads.g_b2.transpose();
    return out;
}

template <class T>
Matrix<T> heads_backward(const Matrix<T>& inputs, const Matrix<T>& encoded, const EncodedProjection<T>& projection,
                         const ProjectionHeads<T>& heads, const Matrix<T>& grad_input_latent,
                         const Matrix<T>& grad_encoded_latent, ProjectionHeads<T>& grads) {
    grads.q_weight.noalias() += grad_input_latent.transpose() * inputs;
    grads.q_bias += grad_input_latent.colwise().sum().transpose();

    const Matrix<T> hidden = projection.hidden_pre.cwiseMax(T(0));
    Matrix<T> grad_hidden = linear_rows_backward(hidden, heads.g_w2, grad_encoded_latent, grads.g_w2);
    grads.g_b2 += grad_encoded_latent.colwise().sum().transpose();
    for (Eigen::Index k = 0; k < grad_hidden.size(); ++k) {
        if (!(projection.hidden_pre.data()[k] > T(0))) grad_hidden.data()[k] = T(0);
    }
    grads.g_b1 += grad_hidden.colwise().sum().transpose();
    return linear_rows_backward(encoded, heads.g_w1, grad_hidden, grads.g_w1);
}

namespace {

template <class T>
struct CosineParts {
    T cosine;
    T norm_z;
    T norm_r;
    bool degenerate;
};

template <class T>
CosineParts<T> cosine_parts(std::span<const T> z, std::span<const T> r) {
    T dot = T(0), zz = T(0), rr = T(0);
    for (std::size_t k = 0; k < z.size(); ++k) {
        dot += z[k] * r[k];
        zz += z[k] * z[k];
        rr += r[k] * r[k];
    }
    const T nz = std::sqrt(zz);
    const T nr = std::sqrt(rr);
    if (nz < T(kDegenerateNorm) || nr < T(kDegenerateNorm)) return {T(0), nz, nr, true};
    return {std::clamp(dot / (nz * nr), T(-1), T(1)), nz, nr, false};
}

}  // namespace

template <class T>
SceValue<T> sce_per_node(std::span<const T> z, std::span<const T> z_rec, double gamma) {
    if (z.size() != z_rec.size()) throw DimensionError("sce_per_node: vectors differ in length");
    const auto parts = cosine_parts(z, z_rec);
    return {static_cast<T>(std::pow(T(1) - parts.cosine, static_cast<T>(gamma))), parts.degenerate};
}

template <class T>
T sce_loss(const Matrix<T>& z, const Matrix<T>& z_rec, double gamma) {
    AlignConfig cfg;
    cfg.gamma = gamma;
    return objective_loss(cfg, z, z_rec);
}

template <class T>
T node_residual(const AlignConfig& cfg, std::span<const T> z, std::span<const T> z_rec) {
    if (z.size() != z_rec.size()) throw DimensionError("node_residual: vectors differ in length");
    if (cfg.objective == Objective::MSE) {
        T acc = T(0);
        for (std::size_t k = 0; k < z.size(); ++k) acc += (z[k] - z_rec[k]) * (z[k] - z_rec[k]);
        return acc / static_cast<T>(z.size());
    }
    return sce_per_node(z, z_rec, cfg.effective_gamma()).value;
}

template <class T>
T objective_loss(const AlignConfig& cfg, const Matrix<T>& z, const Matrix<T>& z_rec, Matrix<T>* grad_z,
                 Matrix<T>* grad_z_rec) {
    if (z.rows() != z_rec.rows() || z.cols() != z_rec.cols()) throw DimensionError("objective_loss: shape mismatch");
    if (z.rows() < 1) throw DimensionError("objective_loss: no rows");
    const auto n = z.rows();
    const auto f = z.cols();
    const T inv_n = T(1) / static_cast<T>(n);
    if (grad_z != nullptr) grad_z->setZero(n, f);
    if (grad_z_rec != nullptr) grad_z_rec->setZero(n, f);

    T total = T(0);
    if (cfg.objective == Objective::MSE) {
        const T scale = T(2) * inv_n / static_cast<T>(f);
        for (Eigen::Index i = 0; i < n; ++i) {
            total += node_residual<T>(cfg, row_span(z, i), row_span(z_rec, i));
            if (grad_z != nullptr || grad_z_rec != nullptr) {
                for (Eigen::Index k = 0; k < f; ++k) {
                    const T d = scale * (z(i, k) - z_rec(i, k));
                    if (grad_z != nullptr) (*grad_z)(i, k) = d;
                    if (grad_z_rec != nullptr) (*grad_z_rec)(i, k) = -d;
                }
            }
        }
        return total * inv_n;
    }

    const T gamma = static_cast<T>(cfg.effective_gamma());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto zi = row_span(z, i);
        const auto ri = row_span(z_rec, i);
        const auto parts = cosine_parts(zi, ri);
        const T gap = T(1) - parts.cosine;
        total += std::pow(gap, gamma);
        if (parts.degenerate || (grad_z == nullptr && grad_z_rec == nullptr)) continue;
        // d/dc (1 - c)^gamma = -gamma (1 - c)^(gamma - 1)
        const T dc = -gamma * std::pow(gap, gamma - T(1)) * inv_n;
        const T inv_nn = T(1) / (parts.norm_z * parts.norm_r);
        for (Eigen::Index k = 0; k < f; ++k) {
            if (grad_z != nullptr) {
                (*grad_z)(i, k) = dc * (ri[k] * inv_nn - parts.cosine * zi[k] / (parts.norm_z * parts.norm_z));
            }
            if (grad_z_rec != nullptr) {
                (*grad_z_rec)(i, k) = dc * (zi[k] * inv_nn - parts.cosine * ri[k] / (parts.norm_r * parts.norm_r));
            }
        }
    }
    return total * inv_n;
}

#define GATEAD_INSTANTIATE_ALIGN(T)                                                                               \
    template ProjectionHeads<T> init_heads<T>(std::size_t, std::size_t, const AlignConfig&, Rng&);                \
    template ProjectionHeads<T> zeros_like<T>(const ProjectionHeads<T>&);                                         \
    template Vector<T> project_input<T>(const Vector<T>&, const ProjectionHeads<T>&);                             \
    template Vector<T> project_encoded<T>(const Vector<T>&, const ProjectionHeads<T>&);                           \
    template Matrix<T> project_inputs<T>(const Matrix<T>&, const ProjectionHeads<T>&);                            \
    template EncodedProjection<T> project_encoded_rows<T>(const Matrix<T>&, const ProjectionHeads<T>&);           \
    template Matrix<T> heads_backward<T>(const Matrix<T>&, const Matrix<T>&, const EncodedProjection<T>&,         \
                                         const ProjectionHeads<T>&, const Matrix<T>&, const Matrix<T>&,           \
                                         ProjectionHeads<T>&);                                                    \
    template SceValue<T> sce_per_node<T>(std::span<const T>, std::span<const T>, double);                         \
    template T sce_loss<T>(const Matrix<T>&, const Matrix<T>&, double);                                           \
    template T node_residual<T>(const AlignConfig&, std::span<const T>, std::span<const T>);                      \
    template T objective_loss<T>(const AlignConfig&, const Matrix<T>&, const Matrix<T>&, Matrix<T>*, Matrix<T>*);

GATEAD_INSTANTIATE_ALIGN(float)
GATEAD_INSTANTIATE_ALIGN(double)

}  // namespace gatead
