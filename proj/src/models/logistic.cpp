#include <fmt/format.h>

#include "occuforge/error.hpp"
#include "occuforge/models.hpp"

namespace occuforge::models {

Model1Features model1_features(const OccupancySeries& series, std::size_t t) {
    if (t < 3) throw Error(fmt::format("step {} has fewer than 3 states of history", t));
    const auto tf = features::time_features(series, t);
    return {tf[0], tf[1], tf[2], static_cast<double>(series[t - 1]), static_cast<double>(series[t - 2]),
            static_cast<double>(series[t - 3])};
}

double logistic_predict(const LogisticModel& model, const Model1Features& features) {
    double z = model.intercept;
    for (std::size_t i = 0; i < features.size(); ++i) z += model.weights[i] * features[i];
    return nn::sigmoid(z);
}

LogisticModel logistic_fit(std::span<const Model1Features> features, std::span<const std::uint8_t> targets,
                           const LogisticFitOptions& options) {
    if (features.empty() || features.size() != targets.size()) {
        throw Error("logistic regression needs one target per non-empty feature row");
    }
    if (options.steps < 0 || !(options.learning_rate > 0.0)) throw ConfigError("invalid logistic fit options");

    LogisticModel model;
    nn::Rng rng(options.seed);
    std::uniform_real_distribution<double> init(-0.01, 0.01);
    for (auto& w : model.weights) w = init(rng);
    model.intercept = init(rng);

    const double n = static_cast<double>(features.size());
    for (int step = 0; step < options.steps; ++step) {
        Model1Features grad{};
        double grad_intercept = 0.0;
        for (std::size_t r = 0; r < features.size(); ++r) {
            const double err = logistic_predict(model, features[r]) - static_cast<double>(targets[r]);
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += err * features[r][i];
            grad_intercept += err;
        }
        for (std::size_t i = 0; i < grad.size(); ++i) model.weights[i] -= options.learning_rate * grad[i] / n;
        model.intercept -= options.learning_rate * grad_intercept / n;
    }
    return model;
}

std::vector<std::uint8_t> walk_forward_predict(const SingleStepClassifier& classifier, const OccupancySeries& series,
                                               std::size_t t, int k, double threshold) {
    if (k < 1) throw Error("horizon k must be positive");
    if (t < 3 || t > series.size()) {
        throw Error(fmt::format("walk-forward needs 3 observed states before step {}", t));
    }
    const int spd = series.slots_per_day();
    int slot = series.slot_of_day(t);
    Date day = series.day_of(t);
    // newest first
    std::array<double, 3> history{static_cast<double>(series[t - 1]), static_cast<double>(series[t - 2]),
                                  static_cast<double>(series[t - 3])};

    std::vector<std::uint8_t> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int step = 0; step < k; ++step) {
        const Model1Features f{static_cast<double>(slot + 1) / spd, day_of_week(day) / 6.0, is_weekend(day) ? 1.0 : 0.0,
                               history[0], history[1], history[2]};
        const std::uint8_t y = classifier(f) >= threshold ? 1 : 0;
        out.push_back(y);
        history = {static_cast<double>(y), history[0], history[1]};
        if (++slot == spd) {
            slot = 0;
            day += std::chrono::days{1};
        }
    }
    return out;
}

}  // namespace occuforge::models
