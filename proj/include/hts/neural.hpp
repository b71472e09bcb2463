#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hts/dataset.hpp"
#include "hts/error.hpp"
#include "hts/forecasting.hpp"
#include "hts/hierarchy.hpp"

namespace hts {

enum class Architecture { fully_connected, shrunk };
enum class LossKind { mase, mlae, regularized_mase };

inline const char* architecture_name(Architecture a) { return a == Architecture::shrunk ? "shrunk" : "fc"; }

inline const char* loss_name(LossKind k) {
    switch (k) {
        case LossKind::mase: return "mase";
        case LossKind::mlae: return "mlae";
        case LossKind::regularized_mase: return "regularized-mase";
    }
    return "?";
}

inline LossKind parse_loss(const std::string& text) {
    if (text == "mase") return LossKind::mase;
    if (text == "mlae") return LossKind::mlae;
    if (text == "regularized-mase") return LossKind::regularized_mase;
    throw InputError("unknown loss '" + text + "' (expected mase, mlae or regularized-mase)");
}

inline Architecture parse_architecture(const std::string& text) {
    if (text == "fc" || text == "fully-connected") return Architecture::fully_connected;
    if (text == "shrunk") return Architecture::shrunk;
    throw InputError("unknown architecture '" + text + "'");
}

/// Hidden units reserved per leaf in the shrunk architecture.
inline constexpr std::size_t shrunk_unit_width = 8;

struct EncoderConfig {
    Architecture architecture = Architecture::fully_connected;
    std::size_t hidden_layers = 0;
    double dropout = 0.0;
    double learning_rate = 1e-3;
    double weight_decay = 1e-2;
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    LossKind loss = LossKind::mase;
    std::size_t ensemble_size = 10;
    std::uint64_t seed = 0;

    bool operator==(const EncoderConfig&) const = default;
};

/// Dense layer; `mask` is empty for unrestricted layers, otherwise a 0/1
/// matrix of the weights' shape marking trainable connections.
struct Layer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;
    Eigen::MatrixXd mask;
    bool relu = true;

    bool masked() const noexcept { return mask.size() != 0; }
};

/// Trainable map from N base forecasts to M bottom-level forecasts. Inputs
/// are divided by `scale` and outputs multiplied by the bottom entries of it.
struct Encoder {
    EncoderConfig config;
    Hierarchy hierarchy;
    SummingMatrix summing{Hierarchy::singleton("_")};
    Eigen::VectorXd scale;  // N, entries >= 1
    std::vector<Layer> layers;

    std::size_t input_size() const noexcept { return hierarchy.size(); }
    std::size_t output_size() const noexcept { return hierarchy.bottom_count(); }
};

/// 1 + mean |y_i| over `ranges`, per series.
inline Eigen::VectorXd scale_factors(const Eigen::MatrixXd& values, const TimeRanges& ranges) {
    return (mean_abs(values, ranges).array() + 1.0).matrix();
}

inline Eigen::VectorXd scale_factors(const SeriesPanel& panel) {
    return scale_factors(panel.values, {panel.train_range()});
}

inline std::size_t hidden_width(const EncoderConfig& config, const Hierarchy& h) {
    return config.architecture == Architecture::shrunk ? shrunk_unit_width * h.bottom_count() : h.bottom_count();
}

namespace detail {

/// Hidden unit of leaf j that carries the bottom-up pass-through.
inline std::size_t pass_unit(const EncoderConfig& config, std::size_t leaf) {
    return config.architecture == Architecture::shrunk ? shrunk_unit_width * leaf : leaf;
}

/// Leaf owning hidden unit `unit` in the shrunk architecture.
inline std::size_t unit_leaf(std::size_t unit) { return unit / shrunk_unit_width; }

inline Eigen::MatrixXd shrunk_mask(const Hierarchy& h, std::size_t rows, std::size_t cols, bool from_input,
                                   bool to_output) {
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        const auto leaf = to_output ? r : unit_leaf(r);
        if (from_input) {
            const auto node = h.bottom_indices()[leaf];
            mask(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(node)) = 1.0;
            for (auto a : ancestors(h, node)) mask(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(a)) = 1.0;
        } else {
            for (std::size_t u = 0; u < shrunk_unit_width; ++u)
                mask(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(leaf * shrunk_unit_width + u)) = 1.0;
        }
    }
    return mask;
}

} // namespace detail

/// Builds an encoder initialized to bottom-up: each bottom input feeds its
/// own output through a chain of unit weights, everything else is zero.
inline Encoder build_encoder(const EncoderConfig& config, const Hierarchy& h, const Eigen::VectorXd& scale) {
    if (static_cast<std::size_t>(scale.size()) != h.size())
        throw ContractError("build_encoder: scale vector must have N entries");
    if (!scale.allFinite() || (scale.array() < 1.0).any())
        throw ContractError("build_encoder: scale entries must be finite and >= 1");
    if (config.hidden_layers > 3) throw ContractError("build_encoder: at most 3 hidden layers");
    if (config.dropout < 0.0 || config.dropout >= 1.0) throw ContractError("build_encoder: dropout must lie in [0, 1)");
    if (config.batch_size == 0) throw ContractError("build_encoder: batch size must be positive");

    const auto n = h.size();
    const auto m = h.bottom_count();
    const auto width = hidden_width(config, h);
    if (width < m) throw ContractError("build_encoder: hidden width is smaller than the output size");

    Encoder enc;
    enc.config = config;
    enc.hierarchy = h;
    enc.summing = SummingMatrix(h);
    enc.scale = scale;

    std::vector<std::size_t> sizes{n};
    for (std::size_t l = 0; l < config.hidden_layers; ++l) sizes.push_back(width);
    sizes.push_back(m);

    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const bool first = l == 0;
        const bool last = l + 2 == sizes.size();
        Layer layer;
        layer.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sizes[l + 1]), static_cast<Eigen::Index>(sizes[l]));
        layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[l + 1]));
        layer.relu = !last;
        if (config.architecture == Architecture::shrunk)
            layer.mask = detail::shrunk_mask(h, sizes[l + 1], sizes[l], first, last);
        for (std::size_t j = 0; j < m; ++j) {
            const auto row = last ? j : detail::pass_unit(config, j);
            const auto col = first ? h.bottom_indices()[j] : detail::pass_unit(config, j);
            layer.weights(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = 1.0;
        }
        enc.layers.push_back(std::move(layer));
    }
    return enc;
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardPass {
    Eigen::MatrixXd scaled_input;              // N x B
    std::vector<Eigen::MatrixXd> activations;  // input of each layer, after dropout
    std::vector<Eigen::MatrixXd> pre;          // pre-activation of each layer
    std::vector<Eigen::MatrixXd> keep;         // inverted-dropout multipliers of hidden layers
    Eigen::MatrixXd output;                    // M x B, unscaled bottom forecasts
};

/// Forward pass over the columns of `inputs` (N x B). With a generator the
/// pass runs in training mode and applies inverted dropout to hidden
/// activations.
inline ForwardPass forward(const Encoder& enc, const Eigen::MatrixXd& inputs, std::mt19937_64* rng = nullptr) {
    if (static_cast<std::size_t>(inputs.rows()) != enc.input_size())
        throw ContractError("encode: expected " + std::to_string(enc.input_size()) + " inputs, got " +
                            std::to_string(inputs.rows()));
    if (!inputs.allFinite()) throw NumericError("encode: non-finite input");
    ForwardPass pass;
    pass.scaled_input = inputs.array().colwise() / enc.scale.array();
    Eigen::MatrixXd a = pass.scaled_input;
    const double p = enc.config.dropout;
    for (const auto& layer : enc.layers) {
        pass.activations.push_back(a);
        Eigen::MatrixXd z = (layer.weights * a).colwise() + layer.bias;
        pass.pre.push_back(z);
        if (layer.relu) {
            a = z.cwiseMax(0.0);
            if (rng != nullptr && p > 0.0) {
                std::bernoulli_distribution survive(1.0 - p);
                Eigen::MatrixXd keep(a.rows(), a.cols());
                for (Eigen::Index c = 0; c < keep.cols(); ++c)
                    for (Eigen::Index r = 0; r < keep.rows(); ++r) keep(r, c) = survive(*rng) ? 1.0 / (1.0 - p) : 0.0;
                a = a.cwiseProduct(keep);
                pass.keep.push_back(std::move(keep));
            } else {
                pass.keep.emplace_back();
            }
        } else {
            a = std::move(z);
        }
    }
    // Inverse scaling adds back the rounding residual of the input division,
    // so a pass-through network returns its bottom inputs bit-for-bit.
    const auto& h = enc.hierarchy;
    pass.output.resize(a.rows(), a.cols());
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        for (std::size_t j = 0; j < h.bottom_count(); ++j) {
            const auto node = static_cast<Eigen::Index>(h.bottom_indices()[j]);
            const auto jj = static_cast<Eigen::Index>(j);
            const double s = enc.scale(node);
            const double residual = std::fma(-pass.scaled_input(node, c), s, inputs(node, c));
            pass.output(jj, c) = std::fma(a(jj, c), s, residual);
        }
    }
    return pass;
}

/// Bottom-level reconciled forecasts for one N-vector of base forecasts.
inline Eigen::VectorXd encode(const Encoder& enc, const Eigen::VectorXd& forecasts, bool train_mode = false,
                              std::mt19937_64* rng = nullptr) {
    if (train_mode && rng == nullptr) throw ContractError("encode: training mode needs a random generator");
    return forward(enc, Eigen::MatrixXd(forecasts), train_mode ? rng : nullptr).output.col(0);
}

/// Reconciled forecasts at all levels: S * encode(forecasts).
inline Eigen::VectorXd reconcile(const Encoder& enc, const Eigen::VectorXd& forecasts) {
    return enc.summing.apply(encode(enc, forecasts));
}

inline Eigen::MatrixXd reconcile_columns(const Encoder& enc, const Eigen::MatrixXd& forecasts) {
    return enc.summing.apply_columns(forward(enc, forecasts).output);
}

/// Per-series divisor of the absolute error for the MASE-type losses.
inline Eigen::VectorXd loss_scale(LossKind kind, const Eigen::VectorXd& naive_scale) {
    if (kind == LossKind::regularized_mase) return (naive_scale.array() + 1.0).matrix();
    if (kind == LossKind::mase) {
        for (Eigen::Index i = 0; i < naive_scale.size(); ++i)
            if (!(naive_scale(i) > 0.0))
                throw ContractError("loss: series " + std::to_string(i) +
                                    " has zero naive scale (constant training series); use regularized-mase");
    }
    return naive_scale;
}

/// Mean over all series and columns of the per-entry error terms.
inline double loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& actual, LossKind kind,
                   const Eigen::VectorXd& naive_scale) {
    if (pred.rows() != actual.rows() || pred.cols() != actual.cols() || pred.size() == 0)
        throw ContractError("loss: prediction and actual shapes differ or are empty");
    const Eigen::ArrayXXd err = (pred - actual).array().abs();
    if (kind == LossKind::mlae) return err.log1p().mean();
    if (naive_scale.size() != pred.rows()) throw ContractError("loss: naive scale must have one entry per series");
    const Eigen::VectorXd q = loss_scale(kind, naive_scale);
    return (err.colwise() / q.array()).mean();
}

/// Gradient of the batch-mean loss, shaped like the encoder's parameters.
struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;
    double loss = 0.0;
};

/// Reverse-mode gradients of the mean loss over the columns of a batch.
/// Subgradients of |.| and ReLU at 0 are 0; masked weights get exact zeros.
inline Gradients gradients(const Encoder& enc, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                           LossKind kind, const Eigen::VectorXd& naive_scale, std::mt19937_64* rng = nullptr) {
    if (inputs.cols() == 0) throw ContractError("gradients: empty batch");
    if (targets.rows() != inputs.rows() || targets.cols() != inputs.cols())
        throw ContractError("gradients: targets must match the inputs' shape");
    const auto pass = forward(enc, inputs, rng);
    const Eigen::MatrixXd pred = enc.summing.apply_columns(pass.output);
    const Eigen::ArrayXXd err = (pred - targets).array();
    const double count = static_cast<double>(err.size());
    const Eigen::ArrayXXd sign = err.sign();

    Gradients g;
    Eigen::MatrixXd d_pred;
    if (kind == LossKind::mlae) {
        g.loss = err.abs().log1p().mean();
        d_pred = (sign / (1.0 + err.abs()) / count).matrix();
    } else {
        const Eigen::VectorXd q = loss_scale(kind, naive_scale);
        g.loss = (err.abs().colwise() / q.array()).mean();
        d_pred = ((sign.colwise() / q.array()) / count).matrix();
    }
    if (!std::isfinite(g.loss)) throw NumericError("gradients: loss is not finite");

    // Back through the decoder and the inverse scaling.
    Eigen::MatrixXd delta = enc.summing.dense().transpose() * d_pred;
    const auto& h = enc.hierarchy;
    for (std::size_t j = 0; j < h.bottom_count(); ++j)
        delta.row(static_cast<Eigen::Index>(j)) *= enc.scale(static_cast<Eigen::Index>(h.bottom_indices()[j]));

    const auto layers = enc.layers.size();
    g.weights.resize(layers);
    g.bias.resize(layers);
    for (auto l = layers; l-- > 0;) {
        const auto& layer = enc.layers[l];
        if (layer.relu) {
            if (pass.keep[l].size() != 0) delta = delta.cwiseProduct(pass.keep[l]);
            delta = delta.cwiseProduct((pass.pre[l].array() > 0.0).cast<double>().matrix());
        }
        g.weights[l] = delta * pass.activations[l].transpose();
        if (layer.masked()) g.weights[l] = g.weights[l].cwiseProduct(layer.mask);
        g.bias[l] = delta.rowwise().sum();
        if (l > 0) delta = layer.weights.transpose() * delta;
    }
    for (std::size_t l = 0; l < layers; ++l)
        if (!g.weights[l].allFinite() || !g.bias[l].allFinite()) throw NumericError("gradients: non-finite gradient");
    return g;
}

/// First and second moment estimates of the decoupled-weight-decay adaptive
/// optimizer.
struct AdamState {
    std::vector<Eigen::MatrixXd> m_weights, v_weights;
    std::vector<Eigen::VectorXd> m_bias, v_bias;
    std::size_t step = 0;

    static AdamState zeros(const Encoder& enc) {
        AdamState s;
        for (const auto& layer : enc.layers) {
            s.m_weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
            s.v_weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
            s.m_bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
            s.v_bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
        }
        return s;
    }
};

inline constexpr double adam_beta1 = 0.9;
inline constexpr double adam_beta2 = 0.999;
inline constexpr double adam_epsilon = 1e-8;

/// One bias-corrected adaptive-moment update of `param` at optimizer step
/// `step` (1-based), with decoupled decay lr*wd*param applied where
/// `decay_mask` is nonzero (everywhere when it is empty).
template <typename Param>
void adamw_update(Param& param, const Param& grad, Param& m, Param& v, std::size_t step, double learning_rate,
                  double weight_decay, const Param* decay_mask = nullptr) {
    m = adam_beta1 * m + (1.0 - adam_beta1) * grad;
    v = adam_beta2 * v + (1.0 - adam_beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(adam_beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(adam_beta2, static_cast<double>(step));
    Param decay = weight_decay * param;
    if (decay_mask != nullptr && decay_mask->size() != 0) decay = decay.cwiseProduct(*decay_mask);
    const Param adaptive = ((m.array() / c1) / ((v.array() / c2).sqrt() + adam_epsilon)).matrix();
    param -= learning_rate * (adaptive + decay);
}

/// Applies one optimizer step to every layer. Biases are not decayed.
inline void optimizer_step(Encoder& enc, const Gradients& grads, AdamState& state, double learning_rate,
                           double weight_decay) {
    ++state.step;
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
        auto& layer = enc.layers[l];
        if (layer.masked()) {
            adamw_update(layer.weights, grads.weights[l], state.m_weights[l], state.v_weights[l], state.step,
                         learning_rate, weight_decay, &layer.mask);
        } else {
            adamw_update(layer.weights, grads.weights[l], state.m_weights[l], state.v_weights[l], state.step,
                         learning_rate, weight_decay);
        }
        adamw_update(layer.bias, grads.bias[l], state.m_bias[l], state.v_bias[l], state.step, learning_rate, 0.0);
    }
}

/// Reconciler training samples: column k pairs base forecasts with actuals
/// of one time-step.
struct TrainingData {
    Eigen::MatrixXd inputs;   // N x K base forecasts
    Eigen::MatrixXd targets;  // N x K actuals
    Eigen::VectorXd naive_scale;
    Eigen::VectorXd scale;  // encoder scale factors
};

/// Samples for the time-steps `times` of `forecasts`, with naive and
/// encoder scales measured on `train`.
inline TrainingData training_data(const SeriesPanel& panel, const ForecastSet& forecasts,
                                  const std::vector<std::size_t>& times, const TimeRanges& train) {
    TrainingData data;
    data.inputs = forecasts.columns(times);
    data.targets.resize(panel.values.rows(), static_cast<Eigen::Index>(times.size()));
    for (std::size_t k = 0; k < times.size(); ++k)
        data.targets.col(static_cast<Eigen::Index>(k)) = panel.values.col(static_cast<Eigen::Index>(times[k]));
    data.naive_scale = naive_scales(panel.values, train);
    data.scale = scale_factors(panel.values, train);
    return data;
}

/// Samples from every forecast time-step inside the training period.
inline TrainingData training_data(const SeriesPanel& panel, const ForecastSet& forecasts) {
    std::vector<std::size_t> times;
    for (auto t = forecasts.window.begin; t < std::min(forecasts.window.end, panel.train_len); ++t) times.push_back(t);
    return training_data(panel, forecasts, times, {panel.train_range()});
}

struct TrainingLog {
    double initial_loss = 0.0;
    std::vector<double> epoch_losses;  // full-data loss after each epoch, dropout off
};

inline double full_loss(const Encoder& enc, const TrainingData& data) {
    return loss(reconcile_columns(enc, data.inputs), data.targets, enc.config.loss, data.naive_scale);
}

/// Trains a bottom-up-initialized encoder for `config.epochs` epochs of
/// shuffled mini-batches. One generator seeded with `config.seed` drives
/// shuffling and dropout.
inline Encoder train(const EncoderConfig& config, const Hierarchy& h, const TrainingData& data,
                     TrainingLog* log = nullptr) {
    const auto samples = static_cast<std::size_t>(data.inputs.cols());
    if (samples == 0) throw ContractError("train: no training samples");
    if (data.targets.rows() != data.inputs.rows() || static_cast<std::size_t>(data.targets.cols()) != samples)
        throw ContractError("train: targets must match inputs");
    Encoder enc = build_encoder(config, h, data.scale);
    if (log != nullptr) {
        log->initial_loss = full_loss(enc, data);
        log->epoch_losses.clear();
    }
    std::mt19937_64 rng(config.seed);
    AdamState state = AdamState::zeros(enc);
    std::vector<std::size_t> order(samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Eigen::MatrixXd batch_in, batch_out;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0, batch = 0; start < samples; start += config.batch_size, ++batch) {
            const auto count = std::min(config.batch_size, samples - start);
            batch_in.resize(data.inputs.rows(), static_cast<Eigen::Index>(count));
            batch_out.resize(data.targets.rows(), static_cast<Eigen::Index>(count));
            for (std::size_t k = 0; k < count; ++k) {
                batch_in.col(static_cast<Eigen::Index>(k)) = data.inputs.col(static_cast<Eigen::Index>(order[start + k]));
                batch_out.col(static_cast<Eigen::Index>(k)) = data.targets.col(static_cast<Eigen::Index>(order[start + k]));
            }
            Gradients g;
            try {
                g = gradients(enc, batch_in, batch_out, config.loss, data.naive_scale, &rng);
            } catch (const NumericError& e) {
                throw NumericError("train: epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " +
                                   e.what());
            }
            optimizer_step(enc, g, state, config.learning_rate, config.weight_decay);
        }
        if (log != nullptr) {
            const double l = full_loss(enc, data);
            if (!std::isfinite(l)) throw NumericError("train: loss became non-finite after epoch " + std::to_string(epoch));
            log->epoch_losses.push_back(l);
        }
    }
    return enc;
}

inline Encoder train(const EncoderConfig& config, const SeriesPanel& panel, const ForecastSet& forecasts,
                     TrainingLog* log = nullptr) {
    return train(config, panel.hierarchy, training_data(panel, forecasts), log);
}

/// Equal-config encoders trained with seeds seed, seed+1, ...
struct Ensemble {
    std::vector<Encoder> members;
};

/// Trains `config.ensemble_size` members; with workers > 1 they train
/// concurrently, which does not change the result.
inline Ensemble train_ensemble(const EncoderConfig& config, const Hierarchy& h, const TrainingData& data,
                               std::size_t workers = 1) {
    if (config.ensemble_size == 0) throw ContractError("train_ensemble: ensemble size must be positive");
    Ensemble ens;
    ens.members.resize(config.ensemble_size);
    auto member_config = [&](std::size_t k) {
        EncoderConfig c = config;
        c.seed = config.seed + k;
        return c;
    };
    if (workers <= 1) {
        for (std::size_t k = 0; k < config.ensemble_size; ++k) ens.members[k] = train(member_config(k), h, data);
        return ens;
    }
    for (std::size_t first = 0; first < config.ensemble_size; first += workers) {
        std::vector<std::future<Encoder>> jobs;
        for (auto k = first; k < std::min(first + workers, config.ensemble_size); ++k)
            jobs.push_back(std::async(std::launch::async, [&, k] { return train(member_config(k), h, data); }));
        for (std::size_t k = 0; k < jobs.size(); ++k) ens.members[first + k] = jobs[k].get();
    }
    return ens;
}

inline Ensemble train_ensemble(const EncoderConfig& config, const SeriesPanel& panel, const ForecastSet& forecasts,
                               std::size_t workers = 1) {
    return train_ensemble(config, panel.hierarchy, training_data(panel, forecasts), workers);
}

/// Mean of the members' bottom-level outputs, M x B. The running mean keeps
/// identical member outputs exact.
inline Eigen::MatrixXd encode_columns(const Ensemble& ens, const Eigen::MatrixXd& forecasts) {
    if (ens.members.empty()) throw ContractError("ensemble: no members");
    Eigen::MatrixXd mean = forward(ens.members.front(), forecasts).output;
    for (std::size_t k = 1; k < ens.members.size(); ++k)
        mean += (forward(ens.members[k], forecasts).output - mean) / static_cast<double>(k + 1);
    return mean;
}

inline Eigen::MatrixXd reconcile_columns(const Ensemble& ens, const Eigen::MatrixXd& forecasts) {
    if (ens.members.empty()) throw ContractError("ensemble: no members");
    return ens.members.front().summing.apply_columns(encode_columns(ens, forecasts));
}

inline Eigen::VectorXd reconcile(const Ensemble& ens, const Eigen::VectorXd& forecasts) {
    return reconcile_columns(ens, Eigen::MatrixXd(forecasts)).col(0);
}

} // namespace hts
