#pragma once

// Masked graph-attention encoder over a GridTopology.

#include <cstdint>
#include <vector>

#include "gatead/graph.hpp"
#include "gatead/nn.hpp"
#include "gatead/tokenio.hpp"

namespace gatead {

enum class Aggregation : std::uint32_t { GAT = 0, GCN = 1 };

struct EncoderConfig {
    std::size_t num_layers = 3;
    std::size_t hidden_dim = 256;
    std::size_t input_dim = 0;
    double mask_ratio = 0.2;
    double dropout_rate = 0.3;
    Aggregation aggregation = Aggregation::GAT;
    double leaky_slope = kLeakySlope;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
    bool operator==(const EncoderConfig&) const = default;
};

template <class T>
struct GatLayerParams {
    DenseMatrix<T> weight;  // out_dim x in_dim
    Vector<T> attn;         // 2 * out_dim: first half scores the center node, second half the neighbor

    std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

template <class T>
struct EncoderParams {
    std::vector<GatLayerParams<T>> layers;
    Vector<T> mask_token;
};

/// Xavier-uniform W and a, zero mask token. Layer 1 maps input_dim -> hidden_dim,
/// the rest hidden_dim -> hidden_dim.
template <class T>
EncoderParams<T> init_encoder(const EncoderConfig& cfg, Rng& rng);

/// Same shapes, all zeros.
template <class T>
EncoderParams<T> zeros_like(const EncoderParams<T>& params);

/// N x D feature matrix of a grid.
template <class T>
Matrix<T> grid_features(const PatchGrid& grid);

/// Number of nodes masked for a given ratio: 0 when ratio is 0, else max(1, round(ratio * n)).
std::size_t mask_count(std::size_t num_nodes, double ratio);

/// Replaces a uniformly sampled subset of rows by `mask_token`. `masked`
/// receives the chosen node indices in ascending order.
template <class T>
Matrix<T> apply_feature_mask(const Matrix<T>& features, const Vector<T>& mask_token, double ratio, Rng& rng,
                             std::vector<std::uint32_t>& masked);

/// Intermediates kept for the backward pass. Edge arrays follow the
/// topology's flat neighbor order.
template <class T>
struct LayerCache {
    Matrix<T> input;
    Matrix<T> projected;
    std::vector<T> edge_score;     // a^T [Wh_i || Wh_j] before LeakyReLU
    std::vector<T> attention;      // post-softmax, pre-dropout
    std::vector<T> dropout_scale;  // 0 or 1/(1-rate)
    Matrix<T> preactivation;       // aggregated messages before ELU
};

template <class T>
Matrix<T> gat_layer_forward(const Matrix<T>& features, const GridTopology& topo, const GatLayerParams<T>& params,
                            double dropout, Rng& rng, bool training, double leaky_slope = kLeakySlope,
                            LayerCache<T>* cache = nullptr);

/// Symmetric-normalized aggregation; the attention vector is ignored.
template <class T>
Matrix<T> gcn_layer_forward(const Matrix<T>& features, const GridTopology& topo, const GatLayerParams<T>& params,
                            LayerCache<T>* cache = nullptr);

/// Accumulates weight/attention gradients into `grads` and returns d(input).
template <class T>
Matrix<T> layer_backward(const LayerCache<T>& cache, const GridTopology& topo, const GatLayerParams<T>& params,
                         Aggregation aggregation, double leaky_slope, const Matrix<T>& grad_out,
                         GatLayerParams<T>& grads);

template <class T>
struct EncoderCache {
    std::vector<LayerCache<T>> layers;
};

template <class T>
struct EncoderOutput {
    Matrix<T> hidden;                     // H^R, N x hidden_dim
    std::vector<std::uint32_t> masked;    // empty at inference
};

/// Training mode masks the input and applies attention dropout; inference does neither.
/// RNG draws: mask selection first, then dropout for layers 1..R in order.
template <class T>
EncoderOutput<T> encoder_forward(const Matrix<T>& input, const GridTopology& topo, const EncoderParams<T>& params,
                                 const EncoderConfig& cfg, Rng& rng, bool training, EncoderCache<T>* cache = nullptr);

template <class T>
EncoderOutput<T> encoder_forward(const PatchGrid& grid, const GridTopology& topo, const EncoderParams<T>& params,
                                 const EncoderConfig& cfg, Rng& rng, bool training, EncoderCache<T>* cache = nullptr);

/// Accumulates encoder gradients (including the mask token) into `grads`.
template <class T>
void encoder_backward(const EncoderCache<T>& cache, const std::vector<std::uint32_t>& masked,
                      const GridTopology& topo, const EncoderParams<T>& params, const EncoderConfig& cfg,
                      const Matrix<T>& grad_hidden, EncoderParams<T>& grads);

}  // namespace gatead
