#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "occuforge/error.hpp"
#include "occuforge/nn.hpp"

namespace occuforge::nn {

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : const_cast<Network*>(this)->parameters()) n += static_cast<std::size_t>(p.value.size());
    return n;
}

namespace {

Matrix gather(const Matrix& m, std::span<const std::size_t> columns) {
    Matrix out(m.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(columns[j]));
    return out;
}

Matrix hcat(std::span<const Batch> batches, const Matrix Batch::*field) {
    Eigen::Index cols = 0;
    for (const auto& b : batches) cols += (b.*field).cols();
    Matrix out((batches.front().*field).rows(), cols);
    Eigen::Index at = 0;
    for (const auto& b : batches) {
        out.middleCols(at, (b.*field).cols()) = b.*field;
        at += (b.*field).cols();
    }
    return out;
}

}  // namespace

Batch select_columns(const Batch& batch, std::span<const std::size_t> columns) {
    Batch out;
    out.sequence.reserve(batch.sequence.size());
    for (const auto& step : batch.sequence) out.sequence.push_back(gather(step, columns));
    if (batch.context.size() > 0) out.context = gather(batch.context, columns);
    if (batch.targets.size() > 0) out.targets = gather(batch.targets, columns);
    return out;
}

Batch concatenate(std::span<const Batch> batches) {
    if (batches.empty()) return {};
    Batch out;
    out.targets = hcat(batches, &Batch::targets);
    if (batches.front().context.size() > 0) out.context = hcat(batches, &Batch::context);
    for (std::size_t s = 0; s < batches.front().sequence.size(); ++s) {
        Eigen::Index cols = 0;
        for (const auto& b : batches) cols += b.sequence.at(s).cols();
        Matrix step(batches.front().sequence[s].rows(), cols);
        Eigen::Index at = 0;
        for (const auto& b : batches) {
            step.middleCols(at, b.sequence[s].cols()) = b.sequence[s];
            at += b.sequence[s].cols();
        }
        out.sequence.push_back(std::move(step));
    }
    return out;
}

LossAndGradients compute_gradients(const Network& net, const Batch& batch, DropoutContext dropout) {
    if (batch.size() == 0) throw Error("cannot compute gradients of an empty batch");
    LossAndGradients result = net.loss_and_gradients(batch, dropout);
    if (!std::isfinite(result.loss)) throw Error("non-finite training loss");
    for (std::size_t b = 0; b < result.gradients.blocks.size(); ++b) {
        if (!result.gradients.blocks[b].allFinite()) {
            throw Error(fmt::format("non-finite gradient in parameter block '{}'", result.gradients.names[b]));
        }
    }
    return result;
}

Gradients finite_diff_grad(const Network& net, const Batch& batch, double eps) {
    if (!(eps > 0.0)) throw Error("finite-difference step must be positive");
    auto copy = net.clone();
    auto params = copy->parameters();
    Gradients g = Gradients::zeros_like(params);
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto& value = params[b].value;
        for (Eigen::Index i = 0; i < value.size(); ++i) {
            const double original = value.data()[i];
            value.data()[i] = original + eps;
            const double up = copy->loss(batch);
            value.data()[i] = original - eps;
            const double down = copy->loss(batch);
            value.data()[i] = original;
            g.blocks[b].data()[i] = (up - down) / (2.0 * eps);
        }
    }
    return g;
}

namespace {

void check_aligned(const Gradients& a, const Gradients& b) {
    if (a.blocks.size() != b.blocks.size()) throw Error("gradient sets differ in block count");
    for (std::size_t k = 0; k < a.blocks.size(); ++k) {
        if (a.blocks[k].rows() != b.blocks[k].rows() || a.blocks[k].cols() != b.blocks[k].cols()) {
            throw Error("gradient block shapes differ");
        }
    }
}

}  // namespace

double max_relative_error(const Gradients& a, const Gradients& b, double floor) {
    check_aligned(a, b);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.blocks.size(); ++k) {
        const double denom = std::max({a.blocks[k].norm(), b.blocks[k].norm(), floor});
        worst = std::max(worst, (a.blocks[k] - b.blocks[k]).norm() / denom);
    }
    return worst;
}

double max_entry_relative_error(const Gradients& a, const Gradients& b, double floor) {
    check_aligned(a, b);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.blocks.size(); ++k) {
        const Matrix& x = a.blocks[k];
        const Matrix& y = b.blocks[k];
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double denom = std::max({std::abs(x.data()[i]), std::abs(y.data()[i]), floor});
            worst = std::max(worst, std::abs(x.data()[i] - y.data()[i]) / denom);
        }
    }
    return worst;
}

void TrainHyperparams::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

TrainResult train(Network& net, const Batch& data, const TrainHyperparams& hp) {
    hp.validate();
    const auto n = static_cast<std::size_t>(data.size());
    if (n == 0) throw Error("cannot train on an empty dataset");

    Rng rng(hp.seed);
    TrainResult result;
    auto params = net.parameters();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch_size = static_cast<std::size_t>(hp.batch_size);

    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t count = std::min(batch_size, n - start);
            const Batch batch = select_columns(data, std::span(order).subspan(start, count));
            LossAndGradients lg = compute_gradients(net, batch, {hp.dropout_rate, &rng});
            adam_step(result.optimizer, params, lg.gradients, hp.learning_rate);
            loss_sum += lg.loss * static_cast<double>(count);
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(n));
    }
    return result;
}

}  // namespace occuforge::nn
