#pragma once

// Per-category training of the encoder and projection heads, plus the
// checkpoint container.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "gatead/align.hpp"
#include "gatead/gat.hpp"
#include "gatead/graph.hpp"
#include "gatead/tokenio.hpp"

namespace gatead {

struct TrainConfig {
    double lr = 3e-4;
    std::size_t max_epochs = 2000;
    std::size_t patience = 100;
    double min_delta = 1e-5;
    std::uint64_t seed = 0;
    EncoderConfig encoder;
    AlignConfig align;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

template <class T>
struct ModelParams {
    EncoderParams<T> encoder;
    ProjectionHeads<T> heads;
};

/// Encoder first, then heads; consumes `rng` in that order.
template <class T>
ModelParams<T> init_model(const TrainConfig& cfg, Rng& rng);

template <class T>
ModelParams<T> zeros_like(const ModelParams<T>& params);

/// Every learnable tensor in a fixed order: per layer (W, a), mask token,
/// q weight, q bias, g w1, g b1, g w2, g b2. The checkpoint payload uses the
/// same order.
template <class T>
std::vector<std::span<T>> tensor_spans(ModelParams<T>& params);
template <class T>
std::vector<std::span<const T>> tensor_spans(const ModelParams<T>& params);

/// Forward pass plus objective on one grid. When `grads` is non-null the
/// gradient of `grad_scale * loss` is accumulated into it.
template <class T>
T model_loss(const Matrix<T>& inputs, const GridTopology& topo, const ModelParams<T>& params, const TrainConfig& cfg,
             Rng& rng, bool training, ModelParams<T>* grads = nullptr, T grad_scale = T(1));

/// A trained model bundled with the configuration and the grid shape it was fitted on.
struct TrainedModel {
    TrainConfig config;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    ModelParams<float> params;
};

struct TrainResult {
    TrainedModel model;               // parameters from the best-loss epoch
    std::vector<double> loss_history; // one entry per epoch run
    std::size_t best_epoch = 0;
    double best_loss = 0.0;
    std::size_t optimizer_steps = 0;
};

/// Full-batch training over the support grids. The RNG stream is consumed as
/// init, then per epoch and per support grid: mask draw, dropout draws.
TrainResult train_model(std::span<const PatchGrid> support, TrainConfig cfg);

struct Checkpoint {
    TrainedModel model;
    std::uint32_t epochs = 0;
    double loss = 0.0;
};

inline constexpr char kCheckpointMagic[4] = {'G', 'A', 'D', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint, std::ostream& sink);
Checkpoint load_checkpoint(std::istream& source);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gatead
