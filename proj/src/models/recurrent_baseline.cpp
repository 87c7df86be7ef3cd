#include <fmt/format.h>

#include "occuforge/error.hpp"
#include "occuforge/models.hpp"

namespace occuforge::models {

using nn::Matrix;

void RecurrentBaselineConfig::validate() const {
    if (frames < 1 || frame_dim < 1 || k < 1 || hidden < 1 || dense < 1) {
        throw ConfigError("recurrent baseline sizes must be positive");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("decision threshold must lie in (0, 1)");
}

RecurrentBaseline::RecurrentBaseline(RecurrentBaselineConfig config) : config_(config) {
    config_.validate();
    if (config_.kind == RecurrentKind::lstm) {
        lstm = nn::LstmCellParams::zeros(config_.frame_dim, config_.hidden);
    } else {
        gru = nn::GruCellParams::zeros(config_.frame_dim, config_.hidden);
    }
    dense = nn::DenseLayer::zeros(config_.hidden, config_.dense, nn::Activation::relu);
    output = nn::DenseLayer::zeros(config_.dense, config_.k, nn::Activation::sigmoid);
}

RecurrentBaseline build_baseline_recurrent(RecurrentKind kind, RecurrentBaselineConfig config, std::uint64_t seed) {
    config.kind = kind;
    RecurrentBaseline model(config);
    nn::Rng rng(seed);
    if (kind == RecurrentKind::lstm) {
        model.lstm.init(rng);
    } else {
        model.gru.init(rng);
    }
    model.dense.init(rng);
    model.output.init(rng);
    return model;
}

std::vector<nn::ParamView> RecurrentBaseline::parameters() {
    std::vector<nn::ParamView> out;
    if (config_.kind == RecurrentKind::lstm) {
        lstm.append_params(out, "lstm");
    } else {
        gru.append_params(out, "gru");
    }
    dense.append_params(out, "dense");
    output.append_params(out, "output");
    return out;
}

void RecurrentBaseline::check_batch(const nn::Batch& batch) const {
    if (batch.sequence.size() != static_cast<std::size_t>(config_.frames)) {
        throw Error(fmt::format("baseline expects {} frames, got {}", config_.frames, batch.sequence.size()));
    }
    for (const auto& f : batch.sequence) {
        if (f.rows() != config_.frame_dim || f.cols() != batch.size()) {
            throw Error(fmt::format("baseline frames must be {} x batch", config_.frame_dim));
        }
    }
    if (batch.targets.size() > 0 && batch.targets.rows() != config_.k) {
        throw Error("baseline target rows differ from k");
    }
}

Matrix RecurrentBaseline::forward(const nn::Batch& batch, nn::DropoutContext dropout) const {
    check_batch(batch);
    const Matrix h = config_.kind == RecurrentKind::lstm ? nn::lstm_sequence_forward(lstm, batch.sequence, nullptr)
                                                        : nn::gru_sequence_forward(gru, batch.sequence, nullptr);
    const Matrix hidden = nn::dense_forward(dense, h);
    nn::Rng unused(0);
    const auto dropped = nn::dropout_apply(hidden, dropout.rate, dropout.rng ? *dropout.rng : unused,
                                           dropout.rng != nullptr);
    return nn::dense_forward(output, dropped.output);
}

nn::LossAndGradients RecurrentBaseline::loss_and_gradients(const nn::Batch& batch,
                                                           nn::DropoutContext dropout) const {
    check_batch(batch);
    if (batch.targets.rows() != config_.k || batch.targets.cols() != batch.size()) {
        throw Error("loss needs a k x batch target matrix");
    }
    nn::LstmSequenceCache lstm_cache;
    nn::GruSequenceCache gru_cache;
    const Matrix h = config_.kind == RecurrentKind::lstm
                         ? nn::lstm_sequence_forward(lstm, batch.sequence, &lstm_cache)
                         : nn::gru_sequence_forward(gru, batch.sequence, &gru_cache);
    const Matrix hidden = nn::dense_forward(dense, h);
    nn::Rng unused(0);
    const auto dropped = nn::dropout_apply(hidden, dropout.rate, dropout.rng ? *dropout.rng : unused,
                                           dropout.rng != nullptr);
    const Matrix probs = nn::dense_forward(output, dropped.output);

    RecurrentBaseline g(config_);
    const Matrix d_logits = nn::bce_logit_grad(probs, batch.targets);
    const Matrix d_dropped = nn::dense_backward_linear(output, dropped.output, d_logits, g.output);
    const Matrix d_hidden = d_dropped.cwiseProduct(dropped.mask);
    const Matrix d_h = nn::dense_backward(dense, h, hidden, d_hidden, g.dense);
    if (config_.kind == RecurrentKind::lstm) {
        nn::lstm_sequence_backward(lstm, lstm_cache, d_h, g.lstm);
    } else {
        nn::gru_sequence_backward(gru, gru_cache, d_h, g.gru);
    }

    nn::LossAndGradients result;
    result.loss = nn::bce_loss(probs, batch.targets);
    for (auto& p : g.parameters()) {
        result.gradients.names.push_back(p.name);
        result.gradients.blocks.emplace_back(p.value);
    }
    return result;
}

std::vector<double> baseline_frame(const OccupancySeries& series, const DayTypeProfiles& profiles, std::size_t t) {
    if (t < 1) throw Error("baseline frame needs one state of history");
    const auto tf = features::time_features(series, t);
    const auto profile = profiles.for_date(series.day_of(t));
    std::vector<double> frame(tf.begin(), tf.end());
    frame.insert(frame.end(), profile.begin(), profile.end());
    frame.push_back(series[t - 1]);
    return frame;
}

nn::Batch build_frame_batch(const OccupancySeries& series, const DayTypeProfiles& profiles, std::size_t first,
                            std::size_t last, int frames, int k) {
    if (frames < 1 || k < 1) throw Error("frames and k must be positive");
    if (first < static_cast<std::size_t>(frames)) {
        throw Error(fmt::format("step {} has fewer than {} states of history", first, frames));
    }
    if (last < first) throw Error("empty frame batch range");
    const bool with_targets = last + static_cast<std::size_t>(k) <= series.size();
    if (!with_targets && last > series.size()) throw Error("frame batch extends beyond the series");

    const auto cols = static_cast<Eigen::Index>(last - first + 1);
    const auto dim = static_cast<Eigen::Index>(features::context_dim(series.slots_per_day()) + 1);
    nn::Batch b;
    b.sequence.assign(static_cast<std::size_t>(frames), Matrix(dim, cols));
    if (with_targets) b.targets.resize(k, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        const std::size_t t = first + static_cast<std::size_t>(j);
        for (int f = 0; f < frames; ++f) {
            const auto frame = baseline_frame(series, profiles, t - static_cast<std::size_t>(frames - 1 - f));
            b.sequence[static_cast<std::size_t>(f)].col(j) = Eigen::Map<const nn::Vector>(frame.data(), dim);
        }
        if (with_targets) {
            for (int i = 0; i < k; ++i) b.targets(i, j) = series[t + static_cast<std::size_t>(i)];
        }
    }
    return b;
}

}  // namespace occuforge::models
