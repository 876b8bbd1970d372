#include "gatead/gat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gatead/errors.hpp"

namespace gatead {

void EncoderConfig::validate() const {
    if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) {
        throw ConfigError("mask_ratio must be in [0, 1), got " + std::to_string(mask_ratio));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ConfigError("dropout_rate must be in [0, 1), got " + std::to_string(dropout_rate));
    }
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must be in (0, 1)");
    if (aggregation != Aggregation::GAT && aggregation != Aggregation::GCN) throw ConfigError("unknown aggregation");
}

template <class T>
EncoderParams<T> init_encoder(const EncoderConfig& cfg, Rng& rng) {
    cfg.validate();
    if (cfg.input_dim < 1) throw ConfigError("input_dim must be >= 1");
    EncoderParams<T> params;
    std::size_t in = cfg.input_dim;
    for (std::size_t r = 0; r < cfg.num_layers; ++r) {
        GatLayerParams<T> layer;
        layer.weight = xavier_uniform_init<T>(cfg.hidden_dim, in, rng);
        const Matrix<T> attn = xavier_uniform_init<T>(1, 2 * cfg.hidden_dim, rng);
        layer.attn = attn.transpose();
        params.layers.push_back(std::move(layer));
        in = cfg.hidden_dim;
    }
    params.mask_token = Vector<T>::Zero(static_cast<Eigen::Index>(cfg.input_dim));
    return params;
}

template <class T>
EncoderParams<T> zeros_like(const EncoderParams<T>& params) {
    EncoderParams<T> out;
    for (const auto& layer : params.layers) {
        out.layers.push_back({Matrix<T>::Zero(layer.weight.rows(), layer.weight.cols()),
                              Vector<T>::Zero(layer.attn.size())});
    }
    out.mask_token = Vector<T>::Zero(params.mask_token.size());
    return out;
}

template <class T>
Matrix<T> grid_features(const PatchGrid& grid) {
    Matrix<T> x(static_cast<Eigen::Index>(grid.num_nodes()), static_cast<Eigen::Index>(grid.dim));
    std::transform(grid.data.begin(), grid.data.end(), x.data(), [](float v) { return static_cast<T>(v); });
    return x;
}

std::size_t mask_count(std::size_t num_nodes, double ratio) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw ConfigError("mask ratio must be in [0, 1), got " + std::to_string(ratio));
    if (ratio == 0.0 || num_nodes == 0) return 0;
    const auto k = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(num_nodes)));
    return std::min(num_nodes, std::max<std::size_t>(1, k));
}

template <class T>
Matrix<T> apply_feature_mask(const Matrix<T>& features, const Vector<T>& mask_token, double ratio, Rng& rng,
                             std::vector<std::uint32_t>& masked) {
    if (mask_token.size() != features.cols()) throw DimensionError("mask token width differs from feature width");
    const auto n = static_cast<std::size_t>(features.rows());
    const std::size_t k = mask_count(n, ratio);
    masked.clear();
    Matrix<T> out = features;
    if (k == 0) return out;

    // Partial Fisher-Yates: the first k slots become a uniform k-subset.
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    for (std::size_t s = 0; s < k; ++s) {
        const auto pick = s + static_cast<std::size_t>(rng.below(n - s));
        std::swap(order[s], order[pick]);
    }
    masked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(masked.begin(), masked.end());
    for (auto i : masked) out.row(i) = mask_token.transpose();
    return out;
}

namespace {

template <class T>
void check_layer_shapes(const Matrix<T>& features, const GridTopology& topo, const GatLayerParams<T>& params) {
    if (static_cast<std::size_t>(features.rows()) != topo.num_nodes()) {
        throw DimensionError("feature rows (" + std::to_string(features.rows()) + ") differ from node count (" +
                             std::to_string(topo.num_nodes()) + ")");
    }
    if (static_cast<std::size_t>(features.cols()) != params.in_dim()) {
        throw DimensionError("feature width " + std::to_string(features.cols()) + " differs from layer input width " +
                             std::to_string(params.in_dim()));
    }
    if (static_cast<std::size_t>(params.attn.size()) != 2 * params.out_dim()) {
        throw DimensionError("attention vector must have 2 * out_dim entries");
    }
}

template <class T>
Matrix<T> apply_elu(const Matrix<T>& pre) {
    Matrix<T> out(pre.rows(), pre.cols());
    // max(x, 0) + exp(min(x, 0)) - 1 is ELU and stays vectorized.
    out.array() = pre.array().max(T(0)) + (pre.array().min(T(0)).exp() - T(1));
    return out;
}

template <class T>
T gcn_coefficient(const GridTopology& topo, std::size_t i, std::size_t j) {
    return T(1) / std::sqrt(static_cast<T>(topo.degree(i) * topo.degree(j)));
}

}  // namespace

template <class T>
Matrix<T> gat_layer_forward(const Matrix<T>& features, const GridTopology& topo, const GatLayerParams<T>& params,
                            double dropout, Rng& rng, bool training, double leaky_slope, LayerCache<T>* cache) {
    check_layer_shapes(features, topo, params);
    const auto n = static_cast<Eigen::Index>(topo.num_nodes());
    const auto width = static_cast<Eigen::Index>(params.out_dim());
    const auto offsets = topo.offsets();
    const auto nbrs = topo.flat_neighbors();
    const T slope = static_cast<T>(leaky_slope);

    Matrix<T> projected = linear_rows(features, params.weight);
    const Vector<T> center_score = projected * params.attn.head(width);
    const Vector<T> neighbor_score = projected * params.attn.tail(width);

    std::vector<T> edge_score(topo.num_edges());
    std::vector<T> attention(topo.num_edges());
    std::vector<T> scales(topo.num_edges(), T(1));
    std::vector<T> logits;
    std::vector<T> weights;
    Matrix<T> pre = Matrix<T>::Zero(n, width);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t begin = offsets[i];
        const std::size_t deg = offsets[i + 1] - begin;
        logits.resize(deg);
        for (std::size_t e = 0; e < deg; ++e) {
            const T s = center_score[i] + neighbor_score[nbrs[begin + e]];
            edge_score[begin + e] = s;
            logits[e] = leaky_relu(s, slope);
        }
        std::span<T> alpha(attention.data() + begin, deg);
        neighborhood_softmax<T>(logits, alpha);
        weights.assign(alpha.begin(), alpha.end());
        inverted_dropout<T>(weights, dropout, rng, training, std::span<T>(scales.data() + begin, deg));
        T* out_row = pre.data() + i * width;
        for (std::size_t e = 0; e < deg; ++e) {
            const T w = weights[e];
            const T* src = projected.data() + static_cast<Eigen::Index>(nbrs[begin + e]) * width;
            for (Eigen::Index k = 0; k < width; ++k) out_row[k] += w * src[k];
        }
    }
    Matrix<T> out = apply_elu(pre);
    if (cache != nullptr) {
        cache->input = features;
        cache->projected = std::move(projected);
        cache->edge_score = std::move(edge_score);
        cache->attention = std::move(attention);
        cache->dropout_scale = std::move(scales);
        cache->preactivation = std::move(pre);
    }
    return out;
}

template <class T>
Matrix<T> gcn_layer_forward(const Matrix<T>& features, const GridTopology& topo, const GatLayerParams<T>& params,
                            LayerCache<T>* cache) {
    check_layer_shapes(features, topo, params);
    const auto n = static_cast<Eigen::Index>(topo.num_nodes());
    const auto width = static_cast<Eigen::Index>(params.out_dim());
    Matrix<T> projected = linear_rows(features, params.weight);
    Matrix<T> pre = Matrix<T>::Zero(n, width);
    for (Eigen::Index i = 0; i < n; ++i) {
        T* out_row = pre.data() + i * width;
        for (auto j : topo.neighbors(static_cast<std::size_t>(i))) {
            const T c = gcn_coefficient<T>(topo, static_cast<std::size_t>(i), j);
            const T* src = projected.data() + static_cast<Eigen::Index>(j) * width;
            for (Eigen::Index k = 0; k < width; ++k) out_row[k] += c * src[k];
        }
    }
    Matrix<T> out = apply_elu(pre);
    if (cache != nullptr) {
        cache->input = features;
        cache->projected = std::move(projected);
        cache->edge_score.clear();
        cache->attention.clear();
        cache->dropout_scale.clear();
        cache->preactivation = std::move(pre);
    }
    return out;
}

template <class T>
Matrix<T> layer_backward(const LayerCache<T>& cache, const GridTopology& topo, const GatLayerParams<T>& params,
                         Aggregation aggregation, double leaky_slope, const Matrix<T>& grad_out,
                         GatLayerParams<T>& grads) {
    const auto n = static_cast<Eigen::Index>(topo.num_nodes());
    const auto width = static_cast<Eigen::Index>(params.out_dim());
    if (grad_out.rows() != n || grad_out.cols() != width) throw DimensionError("layer_backward: grad shape mismatch");
    const auto offsets = topo.offsets();
    const auto nbrs = topo.flat_neighbors();
    const Matrix<T>& projected = cache.projected;

    // ELU'(x) = exp(min(x, 0)).
    Matrix<T> grad_pre(n, width);
    grad_pre.array() = grad_out.array() * cache.preactivation.array().min(T(0)).exp();

    Matrix<T> grad_proj = Matrix<T>::Zero(n, width);
    if (aggregation == Aggregation::GCN) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const T* g = grad_pre.data() + i * width;
            for (auto j : topo.neighbors(static_cast<std::size_t>(i))) {
                const T c = gcn_coefficient<T>(topo, static_cast<std::size_t>(i), j);
                T* dst = grad_proj.data() + static_cast<Eigen::Index>(j) * width;
                for (Eigen::Index k = 0; k < width; ++k) dst[k] += c * g[k];
            }
        }
    } else {
        const T slope = static_cast<T>(leaky_slope);
        Vector<T> grad_center = Vector<T>::Zero(n);
        Vector<T> grad_neighbor = Vector<T>::Zero(n);
        std::vector<T> grad_alpha;
        std::vector<T> grad_logit;
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::size_t begin = offsets[i];
            const std::size_t deg = offsets[i + 1] - begin;
            grad_alpha.resize(deg);
            grad_logit.resize(deg);
            const T* g = grad_pre.data() + i * width;
            for (std::size_t e = 0; e < deg; ++e) {
                const auto j = static_cast<Eigen::Index>(nbrs[begin + e]);
                const T scale = cache.dropout_scale[begin + e];
                const T w = cache.attention[begin + e] * scale;
                const T* p = projected.data() + j * width;
                T* dst = grad_proj.data() + j * width;
                T dot = T(0);
                for (Eigen::Index k = 0; k < width; ++k) {
                    dst[k] += w * g[k];
                    dot += g[k] * p[k];
                }
                grad_alpha[e] = dot * scale;
            }
            neighborhood_softmax_backward<T>(std::span<const T>(cache.attention.data() + begin, deg), grad_alpha,
                                             grad_logit);
            for (std::size_t e = 0; e < deg; ++e) {
                const T dz = grad_logit[e] * leaky_relu_grad(cache.edge_score[begin + e], slope);
                grad_center[i] += dz;
                grad_neighbor[nbrs[begin + e]] += dz;
            }
        }
        grads.attn.head(width).noalias() += projected.transpose() * grad_center;
        grads.attn.tail(width).noalias() += projected.transpose() * grad_neighbor;
        grad_proj.noalias() += grad_center * params.attn.head(width).transpose();
        grad_proj.noalias() += grad_neighbor * params.attn.tail(width).transpose();
    }
    return linear_rows_backward(cache.input, params.weight, grad_proj, grads.weight);
}

template <class T>
EncoderOutput<T> encoder_forward(const Matrix<T>& input, const GridTopology& topo, const EncoderParams<T>& params,
                                 const EncoderConfig& cfg, Rng& rng, bool training, EncoderCache<T>* cache) {
    cfg.validate();
    if (static_cast<std::size_t>(input.cols()) != cfg.input_dim) {
        throw DimensionError("input width " + std::to_string(input.cols()) + " differs from configured input_dim " +
                             std::to_string(cfg.input_dim));
    }
    if (params.layers.size() != cfg.num_layers) throw DimensionError("layer count differs from configuration");

    EncoderOutput<T> result;
    Matrix<T> h = training ? apply_feature_mask(input, params.mask_token, cfg.mask_ratio, rng, result.masked) : input;
    if (cache != nullptr) cache->layers.assign(params.layers.size(), LayerCache<T>{});
    for (std::size_t r = 0; r < params.layers.size(); ++r) {
        LayerCache<T>* layer_cache = cache != nullptr ? &cache->layers[r] : nullptr;
        if (cfg.aggregation == Aggregation::GCN) {
            h = gcn_layer_forward(h, topo, params.layers[r], layer_cache);
        } else {
            h = gat_layer_forward(h, topo, params.layers[r], cfg.dropout_rate, rng, training, cfg.leaky_slope,
                                  layer_cache);
        }
    }
    result.hidden = std::move(h);
    return result;
}

template <class T>
EncoderOutput<T> encoder_forward(const PatchGrid& grid, const GridTopology& topo, const EncoderParams<T>& params,
                                 const EncoderConfig& cfg, Rng& rng, bool training, EncoderCache<T>* cache) {
    if (grid.dim != cfg.input_dim) throw DimensionError("grid dim differs from configured input_dim");
    return encoder_forward(grid_features<T>(grid), topo, params, cfg, rng, training, cache);
}

template <class T>
void encoder_backward(const EncoderCache<T>& cache, const std::vector<std::uint32_t>& masked,
                      const GridTopology& topo, const EncoderParams<T>& params, const EncoderConfig& cfg,
                      const Matrix<T>& grad_hidden, EncoderParams<T>& grads) {
    if (cache.layers.size() != params.layers.size()) throw DimensionError("encoder cache does not match parameters");
    Matrix<T> grad = grad_hidden;
    for (std::size_t r = params.layers.size(); r-- > 0;) {
        grad = layer_backward(cache.layers[r], topo, params.layers[r], cfg.aggregation, cfg.leaky_slope, grad,
                              grads.layers[r]);
    }
    for (auto i : masked) grads.mask_token += grad.row(i).transpose();
}

#define GATEAD_INSTANTIATE_GAT(T)                                                                                  \
    template EncoderParams<T> init_encoder<T>(const EncoderConfig&, Rng&);                                         \
    template EncoderParams<T> zeros_like<T>(const EncoderParams<T>&);                                              \
    template Matrix<T> grid_features<T>(const PatchGrid&);                                                         \
    template Matrix<T> apply_feature_mask<T>(const Matrix<T>&, const Vector<T>&, double, Rng&,                     \
                                             std::vector<std::uint32_t>&);                                         \
    template Matrix<T> gat_layer_forward<T>(const Matrix<T>&, const GridTopology&, const GatLayerParams<T>&,       \
                                            double, Rng&, bool, double, LayerCache<T>*);                           \
    template Matrix<T> gcn_layer_forward<T>(const Matrix<T>&, const GridTopology&, const GatLayerParams<T>&,       \
                                            LayerCache<T>*);                                                       \
    template Matrix<T> layer_backward<T>(const LayerCache<T>&, const GridTopology&, const GatLayerParams<T>&,      \
                                         Aggregation, double, const Matrix<T>&, GatLayerParams<T>&);               \
    template EncoderOutput<T> encoder_forward<T>(const Matrix<T>&, const GridTopology&, const EncoderParams<T>&,   \
                                                 const EncoderConfig&, Rng&, bool, EncoderCache<T>*);              \
    template EncoderOutput<T> encoder_forward<T>(const PatchGrid&, const GridTopology&, const EncoderParams<T>&,   \
                                                 const EncoderConfig&, Rng&, bool, EncoderCache<T>*);              \
    template void encoder_backward<T>(const EncoderCache<T>&, const std::vector<std::uint32_t>&,                   \
                                      const GridTopology&, const EncoderParams<T>&, const EncoderConfig&,          \
                                      const Matrix<T>&, EncoderParams<T>&);

GATEAD_INSTANTIATE_GAT(float)
GATEAD_INSTANTIATE_GAT(double)

}  // namespace gatead
