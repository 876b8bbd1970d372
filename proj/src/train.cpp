#include "gatead/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <utility>

#include "gatead/detail/binary.hpp"
#include "gatead/errors.hpp"

namespace gatead {

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(min_delta >= 0.0)) throw ConfigError("min_delta must be >= 0");
    encoder.validate();
    align.validate();
}

template <class T>
ModelParams<T> init_model(const TrainConfig& cfg, Rng& rng) {
    ModelParams<T> params;
    params.encoder = init_encoder<T>(cfg.encoder, rng);
    params.heads = init_heads<T>(cfg.encoder.input_dim, cfg.encoder.hidden_dim, cfg.align, rng);
    return params;
}

template <class T>
ModelParams<T> zeros_like(const ModelParams<T>& params) {
    return {zeros_like(params.encoder), zeros_like(params.heads)};
}

namespace {

template <class Span, class P>
std::vector<Span> collect_spans(P& params) {
    std::vector<Span> out;
    auto add = [&out](auto& tensor) { out.emplace_back(tensor.data(), static_cast<std::size_t>(tensor.size())); };
    for (auto& layer : params.encoder.layers) {
        add(layer.weight);
        add(layer.attn);
    }
    add(params.encoder.mask_token);
    add(params.heads.q_weight);
    add(params.heads.q_bias);
    add(params.heads.g_w1);
    add(params.heads.g_b1);
    add(params.heads.g_w2);
    add(params.heads.g_b2);
    return out;
}

}  // namespace

template <class T>
std::vector<std::span<T>> tensor_spans(ModelParams<T>& params) {
    return collect_spans<std::span<T>>(params);
}

template <class T>
std::vector<std::span<const T>> tensor_spans(const ModelParams<T>& params) {
    return collect_spans<std::span<const T>>(params);
}

template <class T>
T model_loss(const Matrix<T>& inputs, const GridTopology& topo, const ModelParams<T>& params, const TrainConfig& cfg,
             Rng& rng, bool training, ModelParams<T>* grads, T grad_scale) {
    EncoderCache<T> cache;
    const Matrix<T> z = project_inputs(inputs, params.heads);
    const auto encoded =
        encoder_forward(inputs, topo, params.encoder, cfg.encoder, rng, training, grads != nullptr ? &cache : nullptr);
    const auto projection = project_encoded_rows(encoded.hidden, params.heads);
    if (grads == nullptr) return objective_loss(cfg.align, z, projection.latent);

    Matrix<T> grad_z;
    Matrix<T> grad_rec;
    const T loss = objective_loss(cfg.align, z, projection.latent, &grad_z, &grad_rec);
    grad_z *= grad_scale;
    grad_rec *= grad_scale;
    const Matrix<T> grad_hidden =
        heads_backward(inputs, encoded.hidden, projection, params.heads, grad_z, grad_rec, grads->heads);
    encoder_backward(cache, encoded.masked, topo, params.encoder, cfg.encoder, grad_hidden, grads->encoder);
    return loss;
}

TrainResult train_model(std::span<const PatchGrid> support, TrainConfig cfg) {
    if (support.empty()) throw DimensionError("train_model needs at least one support grid");
    const PatchGrid& first = support.front();
    for (const auto& grid : support) {
        grid.validate();
        if (grid.rows != first.rows || grid.cols != first.cols || grid.dim != first.dim) {
            throw DimensionError("support grids have heterogeneous dimensions");
        }
    }
    if (cfg.encoder.input_dim != 0 && cfg.encoder.input_dim != first.dim) {
        throw DimensionError("configured input_dim differs from support grid dim");
    }
    cfg.encoder.input_dim = first.dim;
    cfg.validate();

    Rng rng(cfg.seed);
    ModelParams<float> params = init_model<float>(cfg, rng);
    const GridTopology topo = build_grid_topology(first.rows, first.cols);
    std::vector<Matrix<float>> inputs;
    inputs.reserve(support.size());
    for (const auto& grid : support) inputs.push_back(grid_features<float>(grid));

    auto param_spans = tensor_spans(params);
    std::vector<AdamState<float>> optimizer;
    for (const auto& s : param_spans) optimizer.emplace_back(s.size(), cfg.lr);

    TrainResult result;
    result.model.config = cfg;
    result.model.rows = first.rows;
    result.model.cols = first.cols;
    result.model.params = params;
    result.best_loss = std::numeric_limits<double>::infinity();
    double reference = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    const float scale = 1.0f / static_cast<float>(inputs.size());

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        ModelParams<float> grads = zeros_like(params);
        double loss = 0.0;
        for (const auto& x : inputs) loss += model_loss(x, topo, params, cfg, rng, true, &grads, scale);
        loss /= static_cast<double>(inputs.size());
        if (!std::isfinite(loss)) throw NumericalError("training loss is not finite", epoch);
        result.loss_history.push_back(loss);

        if (loss < result.best_loss) {
            result.best_loss = loss;
            result.best_epoch = epoch;
            result.model.params = params;
        }
        if (loss < reference - cfg.min_delta) {
            reference = loss;
            stale = 0;
        } else {
            ++stale;
        }

        auto grad_spans = tensor_spans(std::as_const(grads));
        for (std::size_t t = 0; t < param_spans.size(); ++t) adam_step(param_spans[t], grad_spans[t], optimizer[t]);
        ++result.optimizer_steps;
        if (stale >= cfg.patience) break;
    }
    return result;
}

namespace {

using detail::read_le;
using detail::write_le;

template <class T>
T read_field(std::istream& in) {
    return read_le<T, FormatError>(in);
}

void write_config(std::ostream& out, const TrainConfig& c) {
    write_le<double>(out, c.lr);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.max_epochs));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.patience));
    write_le<double>(out, c.min_delta);
    write_le<std::uint64_t>(out, c.seed);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.encoder.num_layers));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.encoder.hidden_dim));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.encoder.input_dim));
    write_le<double>(out, c.encoder.mask_ratio);
    write_le<double>(out, c.encoder.dropout_rate);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.encoder.aggregation));
    write_le<double>(out, c.encoder.leaky_slope);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.align.latent_dim));
    write_le<double>(out, c.align.gamma);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.align.g_hidden_dim));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.align.objective));
}

TrainConfig read_config(std::istream& in) {
    TrainConfig c;
    c.lr = read_field<double>(in);
    c.max_epochs = read_field<std::uint32_t>(in);
    c.patience = read_field<std::uint32_t>(in);
    c.min_delta = read_field<double>(in);
    c.seed = read_field<std::uint64_t>(in);
    c.encoder.num_layers = read_field<std::uint32_t>(in);
    c.encoder.hidden_dim = read_field<std::uint32_t>(in);
    c.encoder.input_dim = read_field<std::uint32_t>(in);
    c.encoder.mask_ratio = read_field<double>(in);
    c.encoder.dropout_rate = read_field<double>(in);
    c.encoder.aggregation = static_cast<Aggregation>(read_field<std::uint32_t>(in));
    c.encoder.leaky_slope = read_field<double>(in);
    c.align.latent_dim = read_field<std::uint32_t>(in);
    c.align.gamma = read_field<double>(in);
    c.align.g_hidden_dim = read_field<std::uint32_t>(in);
    c.align.objective = static_cast<Objective>(read_field<std::uint32_t>(in));
    return c;
}

/// Allocates a parameter set with the shapes implied by `cfg`.
ModelParams<float> shaped_params(const TrainConfig& cfg) {
    ModelParams<float> p;
    const auto hidden = static_cast<Eigen::Index>(cfg.encoder.hidden_dim);
    const auto input = static_cast<Eigen::Index>(cfg.encoder.input_dim);
    const auto latent = static_cast<Eigen::Index>(cfg.align.latent_dim);
    const auto g_hidden = static_cast<Eigen::Index>(cfg.align.g_hidden_dim);
    Eigen::Index in = input;
    for (std::size_t r = 0; r < cfg.encoder.num_layers; ++r) {
        p.encoder.layers.push_back({Matrix<float>(hidden, in), Vector<float>(2 * hidden)});
        in = hidden;
    }
    p.encoder.mask_token = Vector<float>(input);
    p.heads = {Matrix<float>(latent, input),  Vector<float>(latent), Matrix<float>(g_hidden, hidden),
               Vector<float>(g_hidden),       Matrix<float>(latent, g_hidden), Vector<float>(latent)};
    return p;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, std::ostream& sink) {
    sink.write(kCheckpointMagic, 4);
    write_le<std::uint32_t>(sink, kCheckpointVersion);
    write_le<std::uint32_t>(sink, checkpoint.model.rows);
    write_le<std::uint32_t>(sink, checkpoint.model.cols);
    write_config(sink, checkpoint.model.config);
    write_le<std::uint32_t>(sink, checkpoint.epochs);
    write_le<double>(sink, checkpoint.loss);
    for (const auto& tensor : tensor_spans(checkpoint.model.params)) {
        for (float v : tensor) write_le<float>(sink, v);
    }
    if (!sink) throw IoError("failed to write checkpoint");
}

Checkpoint load_checkpoint(std::istream& source) {
    char magic[4] = {};
    source.read(magic, 4);
    if (source.gcount() != 4 || std::char_traits<char>::compare(magic, kCheckpointMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic");
    }
    const auto version = read_field<std::uint32_t>(source);
    if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint cp;
    cp.model.rows = read_field<std::uint32_t>(source);
    cp.model.cols = read_field<std::uint32_t>(source);
    cp.model.config = read_config(source);
    cp.epochs = read_field<std::uint32_t>(source);
    cp.loss = read_field<double>(source);
    try {
        cp.model.config.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint carries an invalid configuration: ") + e.what());
    }
    if (cp.model.rows < 2 || cp.model.cols < 2 || cp.model.config.encoder.input_dim < 1) {
        throw FormatError("checkpoint declares degenerate dimensions");
    }

    ModelParams<float> params = shaped_params(cp.model.config);
    for (auto tensor : tensor_spans(params)) {
        const auto bytes = static_cast<std::streamsize>(tensor.size() * sizeof(float));
        source.read(reinterpret_cast<char*>(tensor.data()), bytes);
        if (source.gcount() != bytes) throw FormatError("checkpoint payload truncated");
        if constexpr (std::endian::native == std::endian::big) {
            for (float& v : tensor) v = detail::from_le_bytes<float>(reinterpret_cast<const char*>(&v));
        }
        for (float v : tensor) {
            if (!std::isfinite(v)) throw FormatError("checkpoint contains a non-finite parameter");
        }
    }
    cp.model.params = std::move(params);
    return cp;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    save_checkpoint(checkpoint, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return load_checkpoint(in);
}

#define GATEAD_INSTANTIATE_TRAIN(T)                                                                           \
    template ModelParams<T> init_model<T>(const TrainConfig&, Rng&);                                          \
    template ModelParams<T> zeros_like<T>(const ModelParams<T>&);                                             \
    template std::vector<std::span<T>> tensor_spans<T>(ModelParams<T>&);                                      \
    template std::vector<std::span<const T>> tensor_spans<T>(const ModelParams<T>&);                          \
    template T model_loss<T>(const Matrix<T>&, const GridTopology&, const ModelParams<T>&, const TrainConfig&, \
                             Rng&, bool, ModelParams<T>*, T);

GATEAD_INSTANTIATE_TRAIN(float)
GATEAD_INSTANTIATE_TRAIN(double)

}  // namespace gatead
