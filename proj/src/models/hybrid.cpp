#include <fmt/format.h>

#include "occuforge/error.hpp"
#include "occuforge/models.hpp"

namespace occuforge::models {

using nn::Matrix;

std::vector<std::uint8_t> threshold_probabilities(std::span<const double> probs, double threshold) {
    std::vector<std::uint8_t> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= threshold ? 1 : 0;
    return out;
}

void HybridConfig::validate() const {
    if (m < 1 || k < 1) throw ConfigError("hybrid model needs m >= 1 and k >= 1");
    if (context_dim < 1 || lstm_hidden < 1 || post_lstm < 1 || merge < 1) {
        throw ConfigError("hybrid layer sizes must be positive");
    }
    if (branch.empty()) throw ConfigError("hybrid context branch needs at least one layer");
    for (int b : branch) {
        if (b < 1) throw ConfigError("hybrid layer sizes must be positive");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("decision threshold must lie in (0, 1)");
}

HybridModel::HybridModel(HybridConfig config) : config_(std::move(config)) {
    config_.validate();
    lstm = nn::LstmCellParams::zeros(1, config_.lstm_hidden);
    int in = config_.context_dim;
    for (int width : config_.branch) {
        branch.push_back(nn::DenseLayer::zeros(in, width, nn::Activation::relu));
        in = width;
    }
    post_lstm = nn::DenseLayer::zeros(config_.lstm_hidden, config_.post_lstm, nn::Activation::relu);
    merge = nn::DenseLayer::zeros(config_.post_lstm + config_.branch.back(), config_.merge, nn::Activation::relu);
    output = nn::DenseLayer::zeros(config_.merge, config_.k, nn::Activation::sigmoid);
}

HybridModel HybridModel::initialized(HybridConfig config, std::uint64_t seed) {
    HybridModel model(std::move(config));
    nn::Rng rng(seed);
    model.lstm.init(rng);
    model.post_lstm.init(rng);
    for (auto& layer : model.branch) layer.init(rng);
    model.merge.init(rng);
    model.output.init(rng);
    return model;
}

std::vector<nn::ParamView> HybridModel::parameters() {
    std::vector<nn::ParamView> out;
    lstm.append_params(out, "lstm");
    post_lstm.append_params(out, "post_lstm");
    for (std::size_t i = 0; i < branch.size(); ++i) branch[i].append_params(out, fmt::format("branch{}", i + 1));
    merge.append_params(out, "merge");
    output.append_params(out, "output");
    return out;
}

struct HybridModel::Activations {
    nn::LstmSequenceCache lstm_cache;
    Matrix lstm_mask;
    Matrix lstm_dropped;
    Matrix post;
    std::vector<Matrix> branch_out;
    Matrix joined;
    Matrix merged;
    Matrix merge_mask;
    Matrix merge_dropped;
    Matrix probs;
};

void HybridModel::check_batch(const nn::Batch& batch) const {
    if (batch.sequence.size() != static_cast<std::size_t>(config_.m)) {
        throw Error(fmt::format("hybrid model expects {} history steps, got {}", config_.m, batch.sequence.size()));
    }
    const Eigen::Index cols = batch.size();
    for (const auto& step : batch.sequence) {
        if (step.rows() != 1 || step.cols() != cols) throw Error("hybrid history steps must be 1 x batch");
    }
    if (batch.context.rows() != config_.context_dim || batch.context.cols() != cols) {
        throw Error(fmt::format("hybrid model expects a {}-dim context, got {}", config_.context_dim,
                                batch.context.rows()));
    }
    if (batch.targets.size() > 0 && batch.targets.rows() != config_.k) {
        throw Error(fmt::format("hybrid model has {} outputs but targets have {} rows", config_.k,
                                batch.targets.rows()));
    }
}

HybridModel::Activations HybridModel::run(const nn::Batch& batch, nn::DropoutContext dropout) const {
    check_batch(batch);
    nn::Rng unused(0);
    nn::Rng& rng = dropout.rng ? *dropout.rng : unused;
    const bool training = dropout.rng != nullptr;

    Activations a;
    const Matrix h = nn::lstm_sequence_forward(lstm, batch.sequence, &a.lstm_cache);
    auto d1 = nn::dropout_apply(h, dropout.rate, rng, training);
    a.lstm_dropped = std::move(d1.output);
    a.lstm_mask = std::move(d1.mask);
    a.post = nn::dense_forward(post_lstm, a.lstm_dropped);

    const Matrix* in = &batch.context;
    for (const auto& layer : branch) {
        a.branch_out.push_back(nn::dense_forward(layer, *in));
        in = &a.branch_out.back();
    }

    a.joined.resize(a.post.rows() + a.branch_out.back().rows(), a.post.cols());
    a.joined << a.post, a.branch_out.back();
    a.merged = nn::dense_forward(merge, a.joined);
    auto d2 = nn::dropout_apply(a.merged, dropout.rate, rng, training);
    a.merge_dropped = std::move(d2.output);
    a.merge_mask = std::move(d2.mask);
    a.probs = nn::dense_forward(output, a.merge_dropped);
    return a;
}

Matrix HybridModel::forward(const nn::Batch& batch, nn::DropoutContext dropout) const {
    return run(batch, dropout).probs;
}

nn::LossAndGradients HybridModel::loss_and_gradients(const nn::Batch& batch, nn::DropoutContext dropout) const {
    if (batch.targets.rows() != config_.k || batch.targets.cols() != batch.size()) {
        throw Error("loss needs a k x batch target matrix");
    }
    const Activations a = run(batch, dropout);
    HybridModel g(config_);

    const Matrix d_logits = nn::bce_logit_grad(a.probs, batch.targets);
    const Matrix d_merge_dropped = nn::dense_backward_linear(output, a.merge_dropped, d_logits, g.output);
    const Matrix d_merged = d_merge_dropped.cwiseProduct(a.merge_mask);
    const Matrix d_joined = nn::dense_backward(merge, a.joined, a.merged, d_merged, g.merge);

    const Eigen::Index post_rows = a.post.rows();
    const Matrix d_post = d_joined.topRows(post_rows);
    Matrix d_branch = d_joined.bottomRows(d_joined.rows() - post_rows);
    for (std::size_t i = branch.size(); i-- > 0;) {
        const Matrix& layer_in = i == 0 ? batch.context : a.branch_out[i - 1];
        Matrix d_in = nn::dense_backward(branch[i], layer_in, a.branch_out[i], d_branch, g.branch[i]);
        if (i > 0) d_branch = std::move(d_in);
    }

    const Matrix d_lstm_dropped = nn::dense_backward(post_lstm, a.lstm_dropped, a.post, d_post, g.post_lstm);
    const Matrix d_h = d_lstm_dropped.cwiseProduct(a.lstm_mask);
    nn::lstm_sequence_backward(lstm, a.lstm_cache, d_h, g.lstm);

    nn::LossAndGradients result;
    result.loss = nn::bce_loss(a.probs, batch.targets);
    for (auto& p : g.parameters()) {
        result.gradients.names.push_back(p.name);
        result.gradients.blocks.emplace_back(p.value);
    }
    return result;
}

nn::Batch to_batch(std::span<const Sample> samples) {
    nn::Batch b;
    if (samples.empty()) return b;
    const auto cols = static_cast<Eigen::Index>(samples.size());
    const std::size_t m = samples.front().x1.size();
    const std::size_t k = samples.front().y.size();
    const auto ctx = static_cast<Eigen::Index>(samples.front().x2.size());
    b.sequence.assign(m, Matrix(1, cols));
    b.context.resize(ctx, cols);
    if (k > 0) b.targets.resize(static_cast<Eigen::Index>(k), cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        const Sample& s = samples[static_cast<std::size_t>(j)];
        if (s.x1.size() != m || s.y.size() != k || static_cast<Eigen::Index>(s.x2.size()) != ctx) {
            throw Error("samples in one batch must share m, k and context size");
        }
        // x1 is most-recent-first; the LSTM consumes the oldest state first.
        for (std::size_t step = 0; step < m; ++step) b.sequence[step](0, j) = s.x1[m - 1 - step];
        for (Eigen::Index i = 0; i < ctx; ++i) b.context(i, j) = s.x2[static_cast<std::size_t>(i)];
        for (std::size_t i = 0; i < k; ++i) b.targets(static_cast<Eigen::Index>(i), j) = s.y[i];
    }
    return b;
}

std::vector<double> hybrid_forward(const HybridModel& model, const Sample& sample, bool training, double dropout_rate,
                                   nn::Rng* rng) {
    const nn::Batch b = to_batch(std::span(&sample, 1));
    nn::DropoutContext dropout;
    if (training) {
        if (!rng) throw Error("training-mode forward needs an rng");
        dropout = {dropout_rate, rng};
    }
    const Matrix probs = model.forward(b, dropout);
    return {probs.data(), probs.data() + probs.size()};
}

std::vector<std::uint8_t> predict_window(const HybridModel& model, const Sample& sample) {
    return threshold_probabilities(hybrid_forward(model, sample, false), model.config().threshold);
}

}  // namespace occuforge::models
